#pragma once

// Torque-limited pendulum swing-up. Observation encodes the angle as
// (cos, sin) so the state space has no seam at +-pi.

#include "soac/env.hpp"

namespace soac {

class PendulumEnv : public ContinuousEnv {
 public:
  struct Config {
    double g = 10.0;
    double m = 1.0;
    double l = 1.0;
    double dt = 0.05;
    double max_torque = 2.0;
    double max_speed = 8.0;
    int horizon = 200;
  };

  PendulumEnv() : PendulumEnv(Config{}) {}
  explicit PendulumEnv(Config cfg) : cfg_(cfg) {}

  int state_dim() const override { return 3; }
  int action_dim() const override { return 1; }
  int horizon() const override { return cfg_.horizon; }
  std::string name() const override { return "pendulum"; }
  const Config& config() const { return cfg_; }

  Vecf reset(uint32_t seed) override {
    rng_ = derive_rng(seed, 0);
    std::uniform_real_distribution<double> Uth(-M_PI, M_PI);
    std::uniform_real_distribution<double> Uw(-1.0, 1.0);
    theta_ = Uth(rng_);
    omega_ = Uw(rng_);
    t_ = 0;
    return obs();
  }

  // Fix the start for analytic checks.
  Vecf reset_to(double theta, double omega) {
    theta_ = theta;
    omega_ = omega;
    t_ = 0;
    return obs();
  }

  StepResult step(const Vecf& action) override {
    Vecf a = clip_action(action, 1);
    double torque = cfg_.max_torque * a(0);
    double th_n = wrap(theta_);

    StepResult r;
    r.reward.alive = 0.0;
    r.reward.control = -0.001 * a(0) * a(0);
    r.reward.moving = -(th_n * th_n + 0.1 * omega_ * omega_);

    double acc = 3.0 * cfg_.g / (2.0 * cfg_.l) * std::sin(theta_) +
                 3.0 / (cfg_.m * cfg_.l * cfg_.l) * torque;
    omega_ = std::clamp(omega_ + acc * cfg_.dt, -cfg_.max_speed, cfg_.max_speed);
    theta_ = theta_ + omega_ * cfg_.dt;
    ++t_;

    r.terminal = false;
    r.done = t_ >= cfg_.horizon;
    r.next_state = obs();
    return r;
  }

  std::unique_ptr<ContinuousEnv> clone() const override {
    return std::make_unique<PendulumEnv>(*this);
  }

 private:
  Config cfg_;
  Rng rng_{0};
  double theta_ = 0, omega_ = 0;
  int t_ = 0;

  static double wrap(double th) {
    double x = std::fmod(th + M_PI, 2.0 * M_PI);
    if (x < 0) x += 2.0 * M_PI;
    return x - M_PI;
  }

  Vecf obs() const {
    Vecf s(3);
    s << float(std::cos(theta_)), float(std::sin(theta_)), float(omega_);
    if (!s.allFinite()) throw EnvFault("pendulum: non-finite state");
    return s;
  }
};

}  // namespace soac
