#pragma once

// Damped double integrator on a bounded plane with a single goal region.
// Approaching the goal pays a shaped moving bonus large enough to be worth
// trading entropy for, and a small alive bonus keeps undirected behavior at
// a small positive return.

#include "soac/env.hpp"

namespace soac {

class PointMassEnv : public ContinuousEnv {
 public:
  struct Config {
    double dt = 0.1;
    double damping = 0.85;
    double accel = 1.5;
    double wall = 5.0;
    double goal_dist = 4.0;
    double goal_radius = 0.3;
    double alive_bonus = 0.021;
    double control_coef = 0.0005;
    double start_jitter = 1.5;
    int horizon = 100;
  };

  PointMassEnv() : PointMassEnv(Config{}) {}
  explicit PointMassEnv(Config cfg) : cfg_(cfg) {}

  int state_dim() const override { return 4; }
  int action_dim() const override { return 2; }
  int horizon() const override { return cfg_.horizon; }
  std::string name() const override { return "point_mass"; }
  const Config& config() const { return cfg_; }

  Vecf reset(uint32_t seed) override {
    rng_ = derive_rng(seed, 0);
    std::uniform_real_distribution<double> U(-cfg_.start_jitter, cfg_.start_jitter);
    px_ = U(rng_);
    py_ = U(rng_);
    vx_ = vy_ = 0.0;
    t_ = 0;
    return obs();
  }

  StepResult step(const Vecf& action) override {
    Vecf a = clip_action(action, 2);
    double d_prev = goal_distance();

    vx_ = cfg_.damping * vx_ + cfg_.accel * a(0);
    vy_ = cfg_.damping * vy_ + cfg_.accel * a(1);
    px_ = std::clamp(px_ + cfg_.dt * vx_, -cfg_.wall, cfg_.wall);
    py_ = std::clamp(py_ + cfg_.dt * vy_, -cfg_.wall, cfg_.wall);
    ++t_;

    double d_new = goal_distance();

    StepResult r;
    r.reward.alive = cfg_.alive_bonus;
    r.reward.control = -cfg_.control_coef * (a(0) * a(0) + a(1) * a(1));
    r.reward.moving = d_prev - d_new;
    r.terminal = false;
    r.done = t_ >= cfg_.horizon;
    r.next_state = obs();
    return r;
  }

  std::unique_ptr<ContinuousEnv> clone() const override {
    return std::make_unique<PointMassEnv>(*this);
  }

 private:
  Config cfg_;
  Rng rng_{0};
  double px_ = 0, py_ = 0, vx_ = 0, vy_ = 0;
  int t_ = 0;

  double goal_distance() const {
    double dx = px_ - cfg_.goal_dist, dy = py_;
    return std::sqrt(dx * dx + dy * dy);
  }

  Vecf obs() const {
    Vecf s(4);
    s << float(px_), float(py_), float(vx_), float(vy_);
    if (!s.allFinite()) throw EnvFault("point_mass: non-finite state");
    return s;
  }
};

}  // namespace soac
