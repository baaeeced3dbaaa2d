#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "soac/env_registry.hpp"
#include "soac/trainer.hpp"
#include "test_util.hpp"

#include <cstdio>

using namespace soac;
using testutil::random_mat;

namespace {

TabularMDP const_reward_mdp(double r) {
  TabularMDP m;
  m.n_states = 1;
  m.n_actions = 2;
  m.gamma = 0.9;
  m.P = {Matd::Ones(1, 1), Matd::Ones(1, 1)};
  m.R = Matd::Constant(1, 2, r);
  return m;
}

RunConfig tiny_config() {
  RunConfig c;
  c.learning_rate = 1e-3;
  c.replay_buffer_size = 4096;
  c.batch_size = 16;
  c.hidden_units = {16, 16};
  c.option_number = 2;
  c.reward_scale = 5.0;
  c.random_action_steps = 50;
  c.start_training_steps = 100;
  c.total_steps = 300;
  c.eval_interval = 100;
  c.eval_episodes = 2;
  c.noise_draws = 1;
  c.env = "tabular";
  return c;
}

// pin both option-value critics to a constant per-option output
void pin_u(CriticEnsemble<double>& ens, const Vecd& per_option) {
  for (Mlp<double>* n : {&ens.u1, &ens.u2, &ens.u1_t, &ens.u2_t}) {
    for (auto* p : n->params()) p->value.setZero();
    n->b.back().value = per_option.transpose();
  }
}

}  // namespace

TEST_CASE("replay ring buffer keeps only the newest transitions") {
  ReplayBuffer<float> buf(10);
  for (int i = 0; i < 25; ++i) {
    Transition<float> t;
    t.s = Vecf::Constant(2, float(i));
    t.a = Vecf::Zero(1);
    t.s_next = t.s;
    t.r = float(i);
    buf.add(std::move(t));
  }
  CHECK(buf.size() == 10);
  std::vector<bool> seen(25, false);
  for (size_t i = 0; i < 10; ++i) seen[size_t(buf.at(i).r)] = true;
  for (int i = 0; i < 15; ++i) CHECK(!seen[size_t(i)]);
  for (int i = 15; i < 25; ++i) CHECK(seen[size_t(i)]);
}

TEST_CASE("replay sampling is uniform within three standard errors") {
  ReplayBuffer<float> buf(100);
  for (int i = 0; i < 100; ++i) {
    Transition<float> t;
    t.s = Vecf::Zero(1);
    t.a = Vecf::Zero(1);
    t.s_next = t.s;
    t.r = float(i);
    buf.add(std::move(t));
  }
  Rng rng(99);
  std::vector<long> counts(100, 0);
  const long draws = 100000;
  for (long d = 0; d < draws; d += 1000) {
    TransitionBatch<float> b = buf.sample(1000, rng);
    for (int i = 0; i < 1000; ++i) ++counts[size_t(b.r(i))];
  }
  double expect = double(draws) / 100.0;
  double se = std::sqrt(double(draws) * 0.01 * 0.99);
  for (long c : counts) CHECK(std::abs(double(c) - expect) <= 3.0 * se);
}

TEST_CASE("empty and oversized sampling are rejected") {
  ReplayBuffer<float> buf(8);
  Rng rng(1);
  CHECK_THROWS_AS((void)buf.sample(4, rng), ContractViolation);
  CHECK_THROWS_AS(ReplayBuffer<float>(0), ConfigError);
}

TEST_CASE("config defaults carry the published hyperparameters") {
  RunConfig c;
  CHECK(c.learning_rate == 3e-4);
  CHECK(c.discount == 0.99);
  CHECK(c.replay_buffer_size == 1000000);
  CHECK(c.batch_size == 256);
  CHECK(c.hidden_units == std::vector<int>{256, 256});
  CHECK(c.target_update_interval == 1);
  CHECK(c.gradient_steps == 1);
  CHECK(c.tau == 0.005);
  CHECK(c.option_number == 4);
  CHECK(c.reward_scale == 5.0);
  CHECK(c.use_popart);
  CHECK(c.mutual_information_weight == 1.0);
  CHECK(c.noise_influence_weight == 5.0);
  CHECK(c.action_noise == 0.2);
  CHECK(c.state_noise == 1.0);
  CHECK(c.random_action_steps == 10000);
  CHECK(c.start_training_steps == 10000);
  CHECK(c.alpha == 1.0);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config json round-trips and rejects junk") {
  RunConfig c = tiny_config();
  c.env = "pendulum";
  RunConfig back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());

  nlohmann::json j = c.to_json();
  j["banana"] = 1;
  CHECK_THROWS_AS((void)RunConfig::from_json(j), ConfigError);

  nlohmann::json bad = c.to_json();
  bad["discount"] = 1.5;
  CHECK_THROWS_AS((void)RunConfig::from_json(bad), ConfigError);
  bad = c.to_json();
  bad["batch_size"] = 100000000;
  CHECK_THROWS_AS((void)RunConfig::from_json(bad), ConfigError);
}

TEST_CASE("hand-set option values with unit temperature recover their softmax") {
  Rng rng(7);
  auto ens = CriticEnsemble<double>::make(3, 1, 2, {8, 8}, rng, false);
  pin_u(ens, (Vecd(2) << 1.0, 2.0).finished());
  auto high = HighLevelPolicy<double>::make(3, 2, {16}, rng);

  Mat<double> states = random_mat(rng, 16, 3);
  std::vector<int> none(16, kNoOption);
  auto st = AdamState<double>::make(high.params(), 3e-3);
  for (int k = 0; k < 6000; ++k) {
    zero_grads(high.params());
    high_policy_loss(high, ens, states, none, 1.0);
    st.step(high.params());
  }
  Mat<double> p = high.probs(states, none);
  double e1 = std::exp(1.0), e2 = std::exp(2.0);
  double want0 = e1 / (e1 + e2), want1 = e2 / (e1 + e2);
  CHECK((p.col(0).array() - want0).abs().maxCoeff() < 1e-3);
  CHECK((p.col(1).array() - want1).abs().maxCoeff() < 1e-3);
}

TEST_CASE("identical option values drive the selector toward uniform") {
  Rng rng(8);
  auto ens = CriticEnsemble<double>::make(2, 1, 3, {8, 8}, rng, false);
  pin_u(ens, (Vecd(3) << 0.4, 0.4, 0.4).finished());
  auto high = HighLevelPolicy<double>::make(2, 3, {16}, rng);

  Mat<double> states = random_mat(rng, 12, 2);
  std::vector<int> none(12, kNoOption);
  auto st = AdamState<double>::make(high.params(), 3e-3);
  for (int k = 0; k < 4000; ++k) {
    zero_grads(high.params());
    high_policy_loss(high, ens, states, none, 1.0);
    st.step(high.params());
  }
  Mat<double> p = high.probs(states, none);
  CHECK((p.array() - 1.0 / 3.0).abs().maxCoeff() < 5e-3);

  // at the uniform optimum the loss is alpha*log(1/Z) - U
  double loss = high_policy_loss(high, ens, states, none, 1.0, false);
  CHECK(loss == doctest::Approx(std::log(1.0 / 3.0) - 0.4).epsilon(1e-4));
}

TEST_CASE("zero temperature pushes option mass toward the argmax") {
  Rng rng(9);
  auto ens = CriticEnsemble<double>::make(2, 1, 2, {8, 8}, rng, false);
  pin_u(ens, (Vecd(2) << 1.0, 2.0).finished());
  auto high = HighLevelPolicy<double>::make(2, 2, {16}, rng);

  Mat<double> states = random_mat(rng, 8, 2);
  std::vector<int> none(8, kNoOption);
  double before = high.probs(states, none).col(1).mean();
  auto st = AdamState<double>::make(high.params(), 1e-2);
  for (int k = 0; k < 300; ++k) {
    zero_grads(high.params());
    high_policy_loss(high, ens, states, none, 0.0);
    st.step(high.params());
  }
  double after = high.probs(states, none).col(1).mean();
  CHECK(after > before + 0.2);
}

TEST_CASE("action-independent critics leave only the entropy pull") {
  // with Q constant in a the loss is alpha*E[log pi], so the policy should
  // approach the entropy-maximizing squashed Gaussian: mean near 0 and an
  // interior std (large std piles mass onto the saturation boundary)
  Rng rng(10);
  auto ens = CriticEnsemble<double>::make(2, 1, 1, {8, 8}, rng, false);
  for (auto* p : ens.q_params()) p->value.setZero();

  Mat<double> states = random_mat(rng, 16, 2);
  std::vector<int> zs(16, 0);
  auto settle = [&](double logstd_start) {
    auto low = LowLevelPolicy<double>::make(2, 1, 1, {16, 16}, rng);
    low.logstd_head.W[0].value.setZero();
    low.logstd_head.b[0].value.setConstant(logstd_start);
    auto st = AdamState<double>::make(low.params(), 1e-2);
    for (int k = 0; k < 2500; ++k) {
      zero_grads(low.params());
      low_policy_loss(low, ens, states, zs, 1.0, rng);
      st.step(low.params());
    }
    double ls = low.heads(states, zs).logstd.mean();
    double ma = low.mean_action(states, zs).cwiseAbs().maxCoeff();
    return std::pair<double, double>(ls, ma);
  };

  auto [from_low, mean_low] = settle(-2.0);
  auto [from_high, mean_high] = settle(1.5);
  CHECK(from_low > -0.6);
  CHECK(from_low < 0.2);
  CHECK(from_high > -0.6);
  CHECK(from_high < 0.2);
  CHECK(std::abs(from_low - from_high) < 0.4);
  CHECK(mean_low < 0.2);
  CHECK(mean_high < 0.2);
}

TEST_CASE("quadratic critic peak steers the squashed mean onto it") {
  Rng rng(11);
  auto ens = CriticEnsemble<double>::make(2, 1, 1, {32, 32}, rng, false);
  const double a_star = 0.5;

  // fit both twins to Q(s,a) = -4 (a - a*)^2 by plain regression
  auto fit = AdamState<double>::make(ens.q_params(), 1e-2);
  for (int k = 0; k < 3000; ++k) {
    Mat<double> s = random_mat(rng, 64, 2);
    Mat<double> a = random_mat(rng, 64, 1, 1.0);
    std::vector<int> zs(64, 0);
    Mat<double> in = ens.q_input(s, zs, a);
    Vecd y = (-4.0 * (a.col(0).array() - a_star).square()).matrix();
    Tape<double> t;
    auto tin = t.input(in);
    auto target = t.input(Mat<double>(y));
    auto l = t.add(t.mean_all(t.square(t.sub(ens.q1.forward(t, tin), target))),
                   t.mean_all(t.square(t.sub(ens.q2.forward(t, tin), target))));
    zero_grads(ens.q_params());
    t.backward(l);
    fit.step(ens.q_params());
  }

  auto low = LowLevelPolicy<double>::make(2, 1, 1, {16, 16}, rng);
  Mat<double> states = random_mat(rng, 32, 2);
  std::vector<int> zs(32, 0);
  auto st = AdamState<double>::make(low.params(), 3e-3);
  for (int k = 0; k < 1500; ++k) {
    zero_grads(low.params());
    low_policy_loss(low, ens, states, zs, 0.0, rng);
    st.step(low.params());
  }
  Mat<double> mean_a = low.mean_action(states, zs);
  CHECK((mean_a.array() - a_star).abs().maxCoeff() < 0.12);
}

TEST_CASE("single-option action loss equals the flat actor-critic form") {
  Rng rng(12);
  auto ens = CriticEnsemble<double>::make(3, 2, 1, {8, 8}, rng, false);
  auto low = LowLevelPolicy<double>::make(3, 2, 1, {8, 8}, rng);
  Mat<double> states = random_mat(rng, 6, 3);
  std::vector<int> zs(6, 0);
  Mat<double> eps = random_mat(rng, 6, 2);

  double got = low_policy_loss(low, ens, states, zs, 0.7, eps, false);

  Mat<double> a, logp;
  low.sample_with_eps(states, zs, eps, a, logp);
  Mat<double> qmin = ens.q_min_online(states, zs, a);
  double manual = (0.7 * logp.col(0).array() - qmin.col(0).array()).mean();
  CHECK(got == doctest::Approx(manual).epsilon(1e-10));
}

TEST_CASE("short runs before the training threshold perform zero updates") {
  RunConfig c = tiny_config();
  c.total_steps = 80;  // below start_training_steps = 100
  auto mdp = const_reward_mdp(0.3);
  Trainer<float> t(c, std::make_unique<TabularEnv>(mdp, 20));
  RunSummary s = t.run();
  CHECK(s.updates == 0);
  CHECK(s.env_steps == 80);
  CHECK(t.buffer().size() == 80);
}

TEST_CASE("after warm-up each environment step triggers exactly one update") {
  RunConfig c = tiny_config();
  auto mdp = const_reward_mdp(0.3);
  Trainer<float> t(c, std::make_unique<TabularEnv>(mdp, 20));
  RunSummary s = t.run();
  CHECK(s.env_steps == 300);
  CHECK(s.updates == 300 - 100 + 1);
}

TEST_CASE("stored rewards carry the published scale factor") {
  RunConfig c = tiny_config();
  c.total_steps = 40;
  auto mdp = const_reward_mdp(0.3);
  Trainer<float> t(c, std::make_unique<TabularEnv>(mdp, 20));
  for (int i = 0; i < 40; ++i) t.collect_step();
  for (size_t i = 0; i < t.buffer().size(); ++i)
    CHECK(t.buffer().at(i).r == doctest::Approx(1.5).epsilon(1e-6));
}

TEST_CASE("opposite reward mode flips the moving component in storage") {
  RunConfig c = tiny_config();
  c.reward_mode = "opposite";
  auto mdp = const_reward_mdp(0.3);  // moving = 0.3, alive = control = 0
  Trainer<float> t(c, std::make_unique<TabularEnv>(mdp, 20));
  for (int i = 0; i < 10; ++i) t.collect_step();
  for (size_t i = 0; i < t.buffer().size(); ++i)
    CHECK(t.buffer().at(i).r == doctest::Approx(-1.5).epsilon(1e-6));
}

TEST_CASE("single-option runs zero out every intrinsic metric") {
  RunConfig c = tiny_config();
  c.option_number = 1;
  c.mutual_information_weight = 0.0;
  c.noise_influence_weight = 0.0;
  auto mdp = const_reward_mdp(0.3);
  Trainer<float> t(c, std::make_unique<TabularEnv>(mdp, 20));
  for (int i = 0; i < 200; ++i) t.collect_step();
  auto l = t.update_once();
  CHECK(l.batch_mi == 0.0);
  CHECK(l.mean_tv == 0.0);

  // and the value target is exactly r + gamma * U'
  Rng srng(3);
  TransitionBatch<float> b = t.buffer().sample(8, srng);
  NoiseSpec noise{c.state_noise, c.action_noise, 1};
  Rng nrng(4);
  auto intr = compute_q_target_inputs(t.agent().low, t.agent().high, b, noise, nrng);
  CHECK(intr.mi.cwiseAbs().maxCoeff() == 0.0f);
  CHECK(intr.ell.cwiseAbs().maxCoeff() == 0.0f);
  CHECK(intr.log_post.cwiseAbs().maxCoeff() == 0.0f);
  Vecf y = compute_q_target(t.agent().ens, t.agent().high, b, intr, c.alpha,
                            c.discount, 0.0, 0.0);
  Matf ut = t.agent().ens.u_min_target(b.s_next);
  for (int i = 0; i < 8; ++i) {
    float expect = b.r(i) + float((1.0 - b.done(i)) * c.discount) * ut(i, 0);
    CHECK(y(i) == doctest::Approx(expect).epsilon(1e-5));
  }
}

TEST_CASE("fixed seeds reproduce the metrics stream exactly") {
  RunConfig c = tiny_config();
  c.seed = 1234;
  auto mdp = const_reward_mdp(0.3);
  Trainer<float> t1(c, std::make_unique<TabularEnv>(mdp, 20));
  Trainer<float> t2(c, std::make_unique<TabularEnv>(mdp, 20));
  RunSummary s1 = t1.run();
  RunSummary s2 = t2.run();
  CHECK(s1.updates == s2.updates);
  REQUIRE(t1.metrics().size() == t2.metrics().size());
  REQUIRE(t1.metrics().size() >= 3);
  for (size_t i = 0; i < t1.metrics().size(); ++i) {
    const MetricsRow &a = t1.metrics()[i], &b = t2.metrics()[i];
    CHECK(a.step == b.step);
    CHECK(a.eval_return_mean == b.eval_return_mean);
    CHECK(a.eval_return_min == b.eval_return_min);
    CHECK(a.eval_return_max == b.eval_return_max);
    CHECK(a.batch_mi == b.batch_mi);
    CHECK(a.mean_tv == b.mean_tv);
    CHECK(a.option_occupancy == b.option_occupancy);
    CHECK(a.q_loss == b.q_loss);
    CHECK(a.u_loss == b.u_loss);
    CHECK(a.pi_h_loss == b.pi_h_loss);
    CHECK(a.pi_l_loss == b.pi_l_loss);
  }
}

TEST_CASE("poisoned critics abort the update with a training fault") {
  RunConfig c = tiny_config();
  auto mdp = const_reward_mdp(0.3);
  Trainer<float> t(c, std::make_unique<TabularEnv>(mdp, 20));
  for (int i = 0; i < 150; ++i) t.collect_step();
  t.agent().ens.q1.b.back().value.setConstant(
      std::numeric_limits<float>::infinity());
  CHECK_THROWS_AS((void)t.update_once(), TrainingFault);
}

TEST_CASE("checkpoints round-trip the whole agent") {
  Rng rng(21);
  auto a = Agent<float>::make(3, 2, 2, {8, 8}, rng, true);
  a.ens.pop_q.mu = 0.7;
  a.ens.pop_q.sigma = 2.0;
  Checkpoint ck = a.to_checkpoint();

  std::string path = "ckpt_roundtrip_test.json";
  ck.save(path);
  Checkpoint re = Checkpoint::load(path);
  std::remove(path.c_str());

  auto b = Agent<float>::make(3, 2, 2, {8, 8}, rng, true);
  b.load_full(re);
  for (auto& [name, p] : a.named_params()) {
    bool found = false;
    for (auto& [bn, bp] : b.named_params())
      if (bn == name) {
        found = true;
        CHECK((bp->value - p->value).cwiseAbs().maxCoeff() == 0.0f);
      }
    CHECK(found);
  }
  CHECK(b.ens.pop_q.mu == 0.7);
  CHECK(b.ens.pop_q.sigma == 2.0);
}

TEST_CASE("option transfer loads only the selector heads") {
  Rng rng(22);
  auto src = Agent<float>::make(3, 2, 2, {8, 8}, rng, false);
  Checkpoint ck = src.to_checkpoint();

  auto dst = Agent<float>::make(3, 2, 2, {8, 8}, rng, false);
  Matf low_before = dst.low.trunk.W[0].value;
  Matf q_before = dst.ens.q1.W[0].value;
  dst.load_high_only(ck);
  CHECK((dst.high.option_net.W[0].value - src.high.option_net.W[0].value)
            .cwiseAbs()
            .maxCoeff() == 0.0f);
  CHECK((dst.high.term_net.W[0].value - src.high.term_net.W[0].value)
            .cwiseAbs()
            .maxCoeff() == 0.0f);
  CHECK((dst.low.trunk.W[0].value - low_before).cwiseAbs().maxCoeff() == 0.0f);
  CHECK((dst.ens.q1.W[0].value - q_before).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("dimension mismatches reject the checkpoint") {
  Rng rng(23);
  auto src = Agent<float>::make(3, 1, 2, {8, 8}, rng, false);
  Checkpoint ck = src.to_checkpoint();
  auto dst = Agent<float>::make(4, 1, 2, {8, 8}, rng, false);
  CHECK_THROWS_AS(dst.load_high_only(ck), ConfigError);
  CHECK_THROWS_AS(dst.load_full(ck), ConfigError);

  auto dst2 = Agent<float>::make(3, 1, 3, {8, 8}, rng, false);
  CHECK_THROWS_AS(dst2.load_high_only(ck), ConfigError);
}

TEST_CASE("transfer runs produce paired learning curves on one seed") {
  RunConfig c = tiny_config();
  c.total_steps = 260;
  c.seed = 77;
  auto mdp = const_reward_mdp(0.3);

  Rng rng(24);
  auto src = Agent<float>::make(1, 1, 2, {16, 16}, rng, false);
  Checkpoint ck = src.to_checkpoint();

  TransferOutcome out =
      run_transfer<float>(c, std::make_unique<TabularEnv>(mdp, 20), ck);
  REQUIRE(!out.transfer_rows.empty());
  REQUIRE(out.transfer_rows.size() == out.control_rows.size());
  for (size_t i = 0; i < out.transfer_rows.size(); ++i)
    CHECK(out.transfer_rows[i].step == out.control_rows[i].step);
  CHECK(std::isfinite(out.transfer.eval_auc));
  CHECK(std::isfinite(out.control.eval_auc));
}

TEST_CASE("environment registry resolves names and rejects strangers") {
  auto pm = make_env("point_mass");
  CHECK(pm->state_dim() == 4);
  auto pd = make_env("pendulum");
  CHECK(pd->state_dim() == 3);
  CHECK_THROWS_AS((void)make_env("walker"), ConfigError);
  CHECK_THROWS_AS((void)make_env("tabular:"), ConfigError);

  auto mdp = const_reward_mdp(0.2);
  std::string path = "registry_mdp_test.txt";
  mdp.save(path);
  auto te = make_env("tabular:" + path);
  std::remove(path.c_str());
  CHECK(te->state_dim() == 1);
  CHECK(te->action_dim() == 1);
}
