#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "soac/pendulum.hpp"
#include "soac/point_mass.hpp"
#include "soac/tabular.hpp"

#include <cstdio>

using namespace soac;

TEST_CASE("reward transform: identity sums, opposite flips moving only") {
  RewardComponents rc{1.0, -0.1, 2.0};
  CHECK(apply_transform(rc, RewardMode::Identity) == doctest::Approx(2.9));
  CHECK(apply_transform(rc, RewardMode::Opposite) == doctest::Approx(-1.1));
  RewardComponents flipped{rc.alive, rc.control, -rc.moving};
  CHECK(apply_transform(flipped, RewardMode::Opposite) ==
        doctest::Approx(apply_transform(rc, RewardMode::Identity)));
}

TEST_CASE("same seed gives identical reset states") {
  PointMassEnv pm;
  Vecf a = pm.reset(42);
  Vecf b = pm.reset(42);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0f);

  PendulumEnv pd;
  Vecf c = pd.reset(7);
  Vecf d = pd.reset(7);
  CHECK((c - d).cwiseAbs().maxCoeff() == 0.0f);
  CHECK(pd.reset(8) != pd.reset(9));
}

TEST_CASE("point mass resets at rest near origin") {
  PointMassEnv pm;
  for (uint32_t s = 0; s < 10; ++s) {
    Vecf st = pm.reset(s);
    CHECK(st(2) == 0.0f);
    CHECK(st(3) == 0.0f);
    CHECK(std::abs(st(0)) <= float(pm.config().start_jitter));
    CHECK(std::abs(st(1)) <= float(pm.config().start_jitter));
  }
}

TEST_CASE("pendulum reset replays the declared seeded draws") {
  PendulumEnv pd;
  Vecf st = pd.reset(123);
  Rng rng = derive_rng(123, 0);
  std::uniform_real_distribution<double> Uth(-M_PI, M_PI);
  std::uniform_real_distribution<double> Uw(-1.0, 1.0);
  double theta = Uth(rng);
  double omega = Uw(rng);
  CHECK(st(0) == doctest::Approx(std::cos(theta)).epsilon(1e-6));
  CHECK(st(1) == doctest::Approx(std::sin(theta)).epsilon(1e-6));
  CHECK(st(2) == doctest::Approx(omega).epsilon(1e-6));
  CHECK(st(0) * st(0) + st(1) * st(1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("point mass: zero action from rest stays put with zero control cost") {
  PointMassEnv::Config cfg;
  cfg.start_jitter = 0.0;
  PointMassEnv pm(cfg);
  pm.reset(0);
  Vecf a = Vecf::Zero(2);
  StepResult r = pm.step(a);
  CHECK(r.next_state(0) == 0.0f);
  CHECK(r.next_state(1) == 0.0f);
  CHECK(r.reward.control == doctest::Approx(0.0));
  CHECK(r.reward.moving == doctest::Approx(0.0));
  CHECK(r.reward.alive == doctest::Approx(cfg.alive_bonus));
}

TEST_CASE("point mass: one step of constant force matches hand arithmetic") {
  PointMassEnv::Config cfg;
  cfg.start_jitter = 0.0;
  PointMassEnv pm(cfg);
  pm.reset(0);
  Vecf a(2);
  a << 1.0f, 0.0f;
  StepResult r = pm.step(a);
  // v' = 0.85*0 + 1.5*1 = 1.5, p' = 0 + 0.1*1.5 = 0.15
  CHECK(r.next_state(2) == doctest::Approx(1.5).epsilon(1e-6));
  CHECK(r.next_state(0) == doctest::Approx(0.15).epsilon(1e-6));
  // goal sits 4 away on the x axis; moving = 4 - 3.85
  CHECK(r.reward.moving == doctest::Approx(0.15).epsilon(1e-4));
  CHECK(r.reward.control == doctest::Approx(-0.0005).epsilon(1e-9));
  CHECK(!r.done);
}

TEST_CASE("point mass: actions are clipped, not rejected") {
  PointMassEnv::Config cfg;
  cfg.start_jitter = 0.0;
  PointMassEnv pm(cfg);
  pm.reset(0);
  Vecf big(2);
  big << 5.0f, -9.0f;
  StepResult r = pm.step(big);
  CHECK(r.next_state(2) == doctest::Approx(1.5).epsilon(1e-6));
  CHECK(r.next_state(3) == doctest::Approx(-1.5).epsilon(1e-6));
  CHECK(r.reward.control == doctest::Approx(-0.001).epsilon(1e-9));
}

TEST_CASE("point mass: non-finite action faults") {
  PointMassEnv pm;
  pm.reset(0);
  Vecf bad(2);
  bad << std::numeric_limits<float>::quiet_NaN(), 0.0f;
  CHECK_THROWS_AS(pm.step(bad), EnvFault);
}

TEST_CASE("point mass: horizon terminates without terminal flag") {
  PointMassEnv::Config cfg;
  cfg.horizon = 5;
  PointMassEnv pm(cfg);
  pm.reset(3);
  Vecf a = Vecf::Zero(2);
  StepResult r;
  for (int t = 0; t < 5; ++t) r = pm.step(a);
  CHECK(r.done);
  CHECK(!r.terminal);
}

TEST_CASE("point mass: driving toward a goal telescopes the moving bonus") {
  PointMassEnv::Config cfg;
  cfg.start_jitter = 0.0;
  PointMassEnv pm(cfg);
  pm.reset(0);
  Vecf a(2);
  a << 1.0f, 0.0f;
  StepResult r;
  double total_moving = 0.0;
  double best_d = 1e18;
  int steps = 0;
  do {
    r = pm.step(a);
    total_moving += r.reward.moving;
    best_d = std::min(best_d, double(std::abs(r.next_state(0) - cfg.goal_dist)) +
                                  std::abs(r.next_state(1)));
    CHECK(!r.terminal);
    ++steps;
  } while (!r.done && steps < 300);
  CHECK(steps == cfg.horizon);
  CHECK(best_d < cfg.goal_radius);
  // start distance 4 minus final wall-pinned distance 1, telescoped
  CHECK(total_moving == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("pendulum: at the top with no torque the reward is zero") {
  PendulumEnv pd;
  pd.reset_to(0.0, 0.0);
  Vecf a = Vecf::Zero(1);
  StepResult r = pd.step(a);
  CHECK(r.reward.sum() == doctest::Approx(0.0));
  CHECK(r.next_state(0) == doctest::Approx(1.0));
}

TEST_CASE("pendulum: one step matches the declared dynamics") {
  PendulumEnv pd;
  pd.reset_to(0.1, 0.0);
  Vecf a(1);
  a << 0.5f;
  StepResult r = pd.step(a);
  double acc = 15.0 * std::sin(0.1) + 3.0 * (2.0 * 0.5);
  double omega = acc * 0.05;
  double theta = 0.1 + omega * 0.05;
  CHECK(r.next_state(2) == doctest::Approx(omega).epsilon(1e-5));
  CHECK(r.next_state(0) == doctest::Approx(std::cos(theta)).epsilon(1e-5));
  CHECK(r.next_state(1) == doctest::Approx(std::sin(theta)).epsilon(1e-5));
  CHECK(r.reward.moving == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(r.reward.control == doctest::Approx(-0.001 * 0.25).epsilon(1e-9));
  CHECK(r.reward.alive == 0.0);
}

TEST_CASE("pendulum: angular velocity saturates at the declared cap") {
  PendulumEnv pd;
  pd.reset_to(M_PI / 2, 7.9);
  Vecf a(1);
  a << 1.0f;
  for (int t = 0; t < 10; ++t) pd.step(a);
  Vecf st = pd.step(a).next_state;
  CHECK(std::abs(st(2)) <= 8.0f + 1e-5f);
}

TEST_CASE("identity plus opposite trajectory returns equal twice alive+control") {
  PointMassEnv pm;
  pm.reset(11);
  Rng rng = derive_rng(11, 1);
  std::uniform_real_distribution<float> U(-1.0f, 1.0f);
  double id_sum = 0, op_sum = 0, ac_sum = 0;
  for (int t = 0; t < 50; ++t) {
    Vecf a(2);
    a << U(rng), U(rng);
    StepResult r = pm.step(a);
    id_sum += apply_transform(r.reward, RewardMode::Identity);
    op_sum += apply_transform(r.reward, RewardMode::Opposite);
    ac_sum += r.reward.alive + r.reward.control;
    if (r.done) break;
  }
  CHECK(id_sum + op_sum == doctest::Approx(2.0 * ac_sum).epsilon(1e-9));
}

static TabularMDP two_state_chain() {
  // action 0 stays, action 1 swaps; reward 1 only in state 1
  TabularMDP m(2, 2, 0.9);
  m.P[0] << 1, 0, 0, 1;
  m.P[1] << 0, 1, 1, 0;
  m.R << 0, 0, 1, 1;
  return m;
}

TEST_CASE("tabular: non-stochastic rows are rejected at construction") {
  TabularMDP m = two_state_chain();
  m.P[0](0, 0) = 0.5;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = two_state_chain();
  m.P[1](1, 0) = -0.2;
  m.P[1](1, 1) = 1.2;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = two_state_chain();
  m.gamma = 1.0;
  CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("tabular: text round trip preserves tensors") {
  TabularMDP m(3, 2, 0.95);
  Rng rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int a = 0; a < 2; ++a)
    for (int s = 0; s < 3; ++s) {
      Vecd row(3);
      for (int s2 = 0; s2 < 3; ++s2) row(s2) = U(rng) + 0.1;
      m.P[a].row(s) = (row / row.sum()).transpose();
    }
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 2; ++a) m.R(s, a) = U(rng) * 4 - 2;

  std::string path = "/tmp/soac_tab_roundtrip.txt";
  m.save(path);
  TabularMDP m2 = TabularMDP::load(path);
  std::remove(path.c_str());
  CHECK(m2.n_states == 3);
  CHECK(m2.n_actions == 2);
  CHECK(m2.gamma == doctest::Approx(0.95));
  for (int a = 0; a < 2; ++a)
    CHECK((m.P[a] - m2.P[a]).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((m.R - m2.R).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("tabular: truncated file is rejected") {
  std::string path = "/tmp/soac_tab_trunc.txt";
  {
    std::ofstream f(path);
    f << "2 2 0.9\n1 0\n";
  }
  CHECK_THROWS_AS(TabularMDP::load(path), ConfigError);
  std::remove(path.c_str());
}

TEST_CASE("tabular env: one-hot observations and deterministic chain") {
  TabularEnv env(two_state_chain(), 10);
  Vecf s = env.reset(0);
  CHECK(s.sum() == doctest::Approx(1.0));
  int s0 = env.state_index();
  CHECK(s(s0) == 1.0f);

  // swap action from either state lands in the other
  Vecf a(1);
  a << float(TabularEnv::bin_center(1, 2));
  StepResult r = env.step(a);
  CHECK(env.state_index() == 1 - s0);
  CHECK(r.reward.sum() == doctest::Approx(s0 == 1 ? 1.0 : 0.0));
  CHECK(r.next_state(1 - s0) == 1.0f);
}

TEST_CASE("tabular env: action binning splits [-1,1] evenly") {
  TabularEnv env(two_state_chain(), 10);
  CHECK(env.action_bin(-1.0) == 0);
  CHECK(env.action_bin(-0.01) == 0);
  CHECK(env.action_bin(0.01) == 1);
  CHECK(env.action_bin(1.0) == 1);
  CHECK(TabularEnv::bin_center(0, 2) == doctest::Approx(-0.5));
  CHECK(TabularEnv::bin_center(1, 2) == doctest::Approx(0.5));
}

TEST_CASE("tabular env: horizon truncates without terminal") {
  TabularEnv env(two_state_chain(), 3);
  env.reset(1);
  Vecf a = Vecf::Zero(1);
  StepResult r;
  for (int t = 0; t < 3; ++t) r = env.step(a);
  CHECK(r.done);
  CHECK(!r.terminal);
}
