#pragma once

#include "soac/mat.hpp"

#include <memory>
#include <string>

namespace soac {

struct RewardComponents {
  double alive = 0.0;
  double control = 0.0;
  double moving = 0.0;

  double sum() const { return alive + control + moving; }
};

enum class RewardMode { Identity, Opposite };

inline RewardMode reward_mode_from_string(const std::string& s) {
  if (s == "identity") return RewardMode::Identity;
  if (s == "opposite") return RewardMode::Opposite;
  throw ConfigError("unknown reward transform: " + s);
}

inline double apply_transform(const RewardComponents& rc, RewardMode mode) {
  switch (mode) {
    case RewardMode::Identity: return rc.alive + rc.control + rc.moving;
    case RewardMode::Opposite: return rc.alive + rc.control - rc.moving;
  }
  throw ContractViolation("apply_transform: unknown mode");
}

struct StepResult {
  Vecf next_state;
  RewardComponents reward;
  bool done = false;      // episode over (terminal region or horizon)
  bool terminal = false;  // true termination; horizon timeouts keep this false
};

class ContinuousEnv {
 public:
  virtual ~ContinuousEnv() = default;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual int horizon() const = 0;
  virtual std::string name() const = 0;
  virtual Vecf reset(uint32_t seed) = 0;
  virtual StepResult step(const Vecf& action) = 0;
  virtual std::unique_ptr<ContinuousEnv> clone() const = 0;

 protected:
  static Vecf clip_action(const Vecf& a, int dim) {
    if (a.size() != dim) throw EnvFault("step: action dim mismatch");
    if (!a.allFinite()) throw EnvFault("step: non-finite action");
    return a.cwiseMax(-1.0f).cwiseMin(1.0f);
  }
};

}  // namespace soac
