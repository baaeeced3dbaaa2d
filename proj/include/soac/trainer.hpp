#pragma once

// The full training loop: interaction, replay, the four interleaved updates
// (option value, action value, option policy, action policy), target drift,
// periodic deterministic evaluation, and option-selection transfer runs.

#include "soac/agent.hpp"
#include "soac/config.hpp"
#include "soac/metrics.hpp"
#include "soac/policy_losses.hpp"
#include "soac/replay.hpp"

#include <memory>

namespace soac {

struct RunSummary {
  long env_steps = 0;
  long updates = 0;
  EvalStats final_eval;
  double eval_auc = 0;  // mean of eval_return_mean over emitted rows
};

template <typename S = float>
class Trainer {
 public:
  struct StepLosses {
    double u = 0, q = 0, pi_h = 0, pi_l = 0;
    double batch_mi = 0, mean_tv = 0;
  };

  Trainer(const RunConfig& cfg, std::unique_ptr<ContinuousEnv> env)
      : cfg_(validated(cfg)),
        mode_(reward_mode_from_string(cfg.reward_mode)),
        env_(std::move(env)),
        eval_env_(env_->clone()),
        init_rng_(derive_rng(cfg.seed, 1)),
        act_rng_(derive_rng(cfg.seed, 2)),
        batch_rng_(derive_rng(cfg.seed, 3)),
        noise_rng_(derive_rng(cfg.seed, 4)),
        eps_rng_(derive_rng(cfg.seed, 5)),
        seed_rng_(derive_rng(cfg.seed, 6)),
        agent_(Agent<S>::make(env_->state_dim(), env_->action_dim(),
                              cfg.option_number, cfg.hidden_units, init_rng_,
                              cfg.use_popart)),
        replay_(cfg.replay_buffer_size),
        adam_q_(AdamState<S>::make(agent_.ens.q_params(), S(cfg.learning_rate))),
        adam_u_(AdamState<S>::make(agent_.ens.u_params(), S(cfg.learning_rate))),
        adam_h_(AdamState<S>::make(agent_.high.params(), S(cfg.learning_rate))),
        adam_l_(AdamState<S>::make(agent_.low.params(), S(cfg.learning_rate))),
        writer_(cfg.metrics_path, cfg.option_number) {
    noise_ = NoiseSpec{cfg.state_noise, cfg.action_noise, cfg.noise_draws};
    reset_episode();
  }

  Agent<S>& agent() { return agent_; }
  const Agent<S>& agent() const { return agent_; }
  ReplayBuffer<S>& buffer() { return replay_; }
  const std::vector<MetricsRow>& metrics() const { return writer_.rows(); }
  long steps_done() const { return steps_done_; }
  long updates_done() const { return updates_done_; }
  const StepLosses& last_losses() const { return last_; }

  void load_high_from(const Checkpoint& ck) { agent_.load_high_only(ck); }

  // One environment interaction: act, transform and scale the reward, store.
  void collect_step() {
    bool random_phase = steps_done_ < cfg_.random_action_steps;
    Vec<S> s = state_.cast<S>();
    int z;
    Vecf act(env_->action_dim());
    if (random_phase) {
      std::uniform_int_distribution<int> zo(0, cfg_.option_number - 1);
      std::uniform_real_distribution<double> ua(-1.0, 1.0);
      z = zo(act_rng_);
      for (int i = 0; i < act.size(); ++i) act(i) = float(ua(act_rng_));
    } else {
      z = agent_.high.sample(s, z_prev_, act_rng_);
      Mat<S> srow(1, s.size());
      srow.row(0) = s.transpose();
      Mat<S> a, logp;
      agent_.low.sample(srow, {z}, act_rng_, a, logp);
      act = a.row(0).transpose().template cast<float>();
    }

    StepResult r = env_->step(act);
    Transition<S> tr;
    tr.s = s;
    tr.z_prev = z_prev_;
    tr.z = z;
    tr.a = act.cast<S>();
    tr.r = S(apply_transform(r.reward, mode_) * cfg_.reward_scale);
    tr.s_next = r.next_state.cast<S>();
    tr.done = r.terminal;
    replay_.add(std::move(tr));

    ++steps_done_;
    if (r.done) {
      reset_episode();
    } else {
      state_ = r.next_state;
      z_prev_ = z;
    }
  }

  // One gradient update for each of the four parameter groups, then target
  // drift. Order: option values, action values, option policy, action policy.
  StepLosses update_once() {
    TransitionBatch<S> batch = replay_.sample(cfg_.batch_size, batch_rng_);
    StepLosses out;

    Vec<S> y_u = compute_u_target(agent_.ens, agent_.low, batch.s, batch.z,
                                  cfg_.alpha, eps_rng_);
    agent_.ens.pop_u.observe(y_u, u_nets());
    zero_grads(agent_.ens.u_params());
    out.u = double(u_regression_loss(agent_.ens, batch.s, batch.z, y_u));
    adam_u_.step(agent_.ens.u_params());

    QTargetInputs<S> intr = compute_q_target_inputs(agent_.low, agent_.high, batch,
                                                    noise_, noise_rng_, &intr_stats_);
    Vec<S> y_q = compute_q_target(agent_.ens, agent_.high, batch, intr, cfg_.alpha,
                                  cfg_.discount, cfg_.mutual_information_weight,
                                  cfg_.noise_influence_weight);
    agent_.ens.pop_q.observe(y_q, q_nets());
    zero_grads(agent_.ens.q_params());
    out.q = double(q_regression_loss(agent_.ens, batch, y_q));
    adam_q_.step(agent_.ens.q_params());

    zero_grads(agent_.high.params());
    out.pi_h = double(high_policy_loss(agent_.high, agent_.ens, batch.s,
                                       batch.z_prev, cfg_.alpha));
    adam_h_.step(agent_.high.params());

    zero_grads(agent_.low.params());
    out.pi_l = double(low_policy_loss(agent_.low, agent_.ens, batch.s, batch.z,
                                      cfg_.alpha, eps_rng_));
    adam_l_.step(agent_.low.params());

    ++updates_done_;
    if (updates_done_ % cfg_.target_update_interval == 0)
      agent_.ens.polyak(cfg_.tau);

    out.batch_mi = double(intr.batch_mi);
    out.mean_tv = double(intr.mean_tv);
    check_losses(out);
    last_ = out;
    return out;
  }

  EvalStats evaluate() {
    uint32_t seed_base = uint32_t(seed_rng_());
    return deterministic_rollout(agent_, *eval_env_, cfg_.eval_episodes, seed_base,
                                 mode_);
  }

  RunSummary run() {
    long last_row_step = -1;
    for (long t = 0; t < cfg_.total_steps; ++t) {
      collect_step();
      if (steps_done_ >= cfg_.start_training_steps &&
          replay_.size() >= size_t(cfg_.batch_size)) {
        for (int g = 0; g < cfg_.gradient_steps; ++g) update_once();
      }
      if (steps_done_ % cfg_.eval_interval == 0) {
        emit_row();
        last_row_step = steps_done_;
      }
    }
    if (steps_done_ > 0 && last_row_step != steps_done_) emit_row();

    RunSummary sum;
    sum.env_steps = steps_done_;
    sum.updates = updates_done_;
    sum.final_eval = last_eval_;
    double acc = 0;
    for (const MetricsRow& r : writer_.rows()) acc += r.eval_return_mean;
    sum.eval_auc = writer_.rows().empty() ? 0 : acc / double(writer_.rows().size());
    if (!cfg_.checkpoint_path.empty()) save_checkpoint(cfg_.checkpoint_path);
    return sum;
  }

  void save_checkpoint(const std::string& path) {
    Checkpoint ck = agent_.to_checkpoint();
    ck.meta["config"] = cfg_.to_json();
    ck.meta["env"] = env_->name();
    ck.meta["steps"] = steps_done_;
    ck.save(path);
  }

  const IntrinsicStats& intrinsic_stats() const { return intr_stats_; }

 private:
  static RunConfig validated(RunConfig c) {
    c.validate();
    return c;
  }

  std::vector<Mlp<S>*> u_nets() {
    return {&agent_.ens.u1, &agent_.ens.u2, &agent_.ens.u1_t, &agent_.ens.u2_t};
  }
  std::vector<Mlp<S>*> q_nets() {
    return {&agent_.ens.q1, &agent_.ens.q2, &agent_.ens.q1_t, &agent_.ens.q2_t};
  }

  void reset_episode() {
    state_ = env_->reset(uint32_t(seed_rng_()));
    z_prev_ = kNoOption;
  }

  void check_losses(const StepLosses& l) {
    if (std::isfinite(l.u) && std::isfinite(l.q) && std::isfinite(l.pi_h) &&
        std::isfinite(l.pi_l))
      return;
    std::string dump;
    if (!cfg_.checkpoint_path.empty()) {
      dump = cfg_.checkpoint_path + ".fault";
      try {
        save_checkpoint(dump);
      } catch (const std::exception&) {
        dump += " (write failed)";
      }
    }
    std::ostringstream os;
    os << "non-finite loss at update " << updates_done_ << " (u=" << l.u
       << " q=" << l.q << " pi_h=" << l.pi_h << " pi_l=" << l.pi_l << ")";
    if (!dump.empty()) os << "; state dumped to " << dump;
    throw TrainingFault(os.str());
  }

  void emit_row() {
    last_eval_ = evaluate();
    MetricsRow row;
    row.step = steps_done_;
    row.eval_return_mean = last_eval_.mean();
    row.eval_return_min = last_eval_.min();
    row.eval_return_max = last_eval_.max();
    row.batch_mi = last_.batch_mi;
    row.mean_tv = last_.mean_tv;
    row.option_occupancy = last_eval_.occupancy;
    row.q_loss = last_.q;
    row.u_loss = last_.u;
    row.pi_h_loss = last_.pi_h;
    row.pi_l_loss = last_.pi_l;
    writer_.append(row);
  }

  RunConfig cfg_;
  RewardMode mode_;
  std::unique_ptr<ContinuousEnv> env_;
  std::unique_ptr<ContinuousEnv> eval_env_;
  Rng init_rng_, act_rng_, batch_rng_, noise_rng_, eps_rng_, seed_rng_;
  Agent<S> agent_;
  ReplayBuffer<S> replay_;
  AdamState<S> adam_q_, adam_u_, adam_h_, adam_l_;
  MetricsWriter writer_;
  NoiseSpec noise_;
  IntrinsicStats intr_stats_;

  Vecf state_;
  int z_prev_ = kNoOption;
  long steps_done_ = 0;
  long updates_done_ = 0;
  StepLosses last_;
  EvalStats last_eval_;
};

struct TransferOutcome {
  RunSummary transfer;
  RunSummary control;
  std::vector<MetricsRow> transfer_rows;
  std::vector<MetricsRow> control_rows;
};

// Paired comparison: one run seeded from the checkpoint's option-selection
// heads, one from-scratch control with the same seed and environment.
template <typename S = float>
TransferOutcome run_transfer(const RunConfig& cfg,
                             std::unique_ptr<ContinuousEnv> env,
                             const Checkpoint& source) {
  if (cfg.transfer_from.empty() && source.tensors.empty())
    throw ConfigError("transfer: no source checkpoint");
  TransferOutcome out;
  {
    Trainer<S> t(cfg, env->clone());
    t.load_high_from(source);
    out.transfer = t.run();
    out.transfer_rows = t.metrics();
  }
  {
    RunConfig control_cfg = cfg;
    if (!control_cfg.metrics_path.empty())
      control_cfg.metrics_path += ".control";
    if (!control_cfg.checkpoint_path.empty())
      control_cfg.checkpoint_path += ".control";
    Trainer<S> c(control_cfg, env->clone());
    out.control = c.run();
    out.control_rows = c.metrics();
  }
  return out;
}

}  // namespace soac
