#include <CLI11.hpp>

#include "soac/env_registry.hpp"
#include "soac/trainer.hpp"

#include <fstream>
#include <iostream>

using namespace soac;

namespace {

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad json in " + path + ": " + e.what());
  }
  return RunConfig::from_json(j);
}

Agent<float> agent_from_checkpoint(const Checkpoint& ck, Rng& rng) {
  for (const char* k : {"state_dim", "action_dim", "num_options", "hidden"})
    if (!ck.meta.contains(k))
      throw ConfigError(std::string("checkpoint meta lacks ") + k);
  bool popart = ck.meta.value("popart_q", nlohmann::json::object())
                    .value("enabled", true);
  auto agent = Agent<float>::make(
      ck.meta["state_dim"].get<int>(), ck.meta["action_dim"].get<int>(),
      ck.meta["num_options"].get<int>(), ck.meta["hidden"].get<std::vector<int>>(),
      rng, popart);
  agent.load_full(ck);
  return agent;
}

RunConfig config_from_checkpoint(const Checkpoint& ck) {
  if (!ck.meta.contains("config"))
    throw ConfigError("checkpoint meta lacks the run config");
  return RunConfig::from_json(ck.meta["config"]);
}

void print_eval(const EvalStats& st) {
  std::cout << "episodes: " << st.returns.size() << "\n"
            << "return mean: " << st.mean() << "\n"
            << "return min:  " << st.min() << "\n"
            << "return max:  " << st.max() << "\n"
            << "mean option switches per episode: " << st.mean_switches << "\n"
            << "option occupancy:";
  for (double o : st.occupancy) std::cout << " " << o;
  std::cout << "\n";
}

void print_summary(const char* label, const RunSummary& s) {
  std::cout << label << ": steps=" << s.env_steps << " updates=" << s.updates
            << " eval_auc=" << s.eval_auc
            << " final_return_mean=" << s.final_eval.mean() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical max-entropy option learner"};
  app.require_subcommand(1);

  std::string config_path, from_path, ckpt_path, out_path;
  long seed_override = -1, steps_override = -1;
  std::string env_override;
  int episodes = 10;
  unsigned long rollout_seed = 0;

  auto* train = app.add_subcommand("train", "Train from scratch per the config");
  train->add_option("--config", config_path, "JSON config file")->required();
  train->add_option("--seed", seed_override, "Override the config seed");
  train->add_option("--env", env_override, "Override the config environment");
  train->add_option("--steps", steps_override, "Override total environment steps");

  auto* transfer = app.add_subcommand(
      "transfer", "Train on the opposite-reward environment, seeding the "
                  "option-selection heads from a checkpoint, next to a "
                  "from-scratch control run on the same seed");
  transfer->add_option("--config", config_path, "JSON config file")->required();
  transfer->add_option("--from", from_path, "Source checkpoint")->required();
  transfer->add_option("--seed", seed_override, "Override the config seed");

  auto* evalc = app.add_subcommand("eval", "Deterministic evaluation rollouts");
  evalc->add_option("--checkpoint", ckpt_path, "Agent checkpoint")->required();
  evalc->add_option("--episodes", episodes, "Episode count");
  evalc->add_option("--seed", rollout_seed, "Rollout seed");

  auto* exp = app.add_subcommand("export-embeddings",
                                 "Dump per-step state/action/option records "
                                 "from deterministic rollouts");
  exp->add_option("--checkpoint", ckpt_path, "Agent checkpoint")->required();
  exp->add_option("--out", out_path, "Output CSV path")->required();
  exp->add_option("--episodes", episodes, "Episode count");
  exp->add_option("--seed", rollout_seed, "Rollout seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      RunConfig cfg = load_config(config_path);
      if (seed_override >= 0) cfg.seed = (unsigned long)(seed_override);
      if (!env_override.empty()) cfg.env = env_override;
      if (steps_override >= 0) cfg.total_steps = steps_override;
      cfg.validate();
      Trainer<float> t(cfg, make_env(cfg.env));
      RunSummary s = t.run();
      print_summary("train", s);
      if (!cfg.checkpoint_path.empty())
        std::cout << "checkpoint: " << cfg.checkpoint_path << "\n";
      if (!cfg.metrics_path.empty())
        std::cout << "metrics: " << cfg.metrics_path << "\n";
    } else if (*transfer) {
      RunConfig cfg = load_config(config_path);
      if (seed_override >= 0) cfg.seed = (unsigned long)(seed_override);
      cfg.transfer_from = from_path;
      cfg.reward_mode = "opposite";
      cfg.validate();
      Checkpoint source = Checkpoint::load(from_path);
      TransferOutcome out = run_transfer<float>(cfg, make_env(cfg.env), source);
      print_summary("transfer", out.transfer);
      print_summary("control", out.control);
      std::cout << "auc_delta (transfer - control): "
                << out.transfer.eval_auc - out.control.eval_auc << "\n";
    } else if (*evalc) {
      Checkpoint ck = Checkpoint::load(ckpt_path);
      Rng rng(1);
      Agent<float> agent = agent_from_checkpoint(ck, rng);
      RunConfig cfg = config_from_checkpoint(ck);
      auto env = make_env(cfg.env);
      EvalStats st = deterministic_rollout(agent, *env, episodes,
                                           uint32_t(rollout_seed),
                                           reward_mode_from_string(cfg.reward_mode));
      print_eval(st);
    } else if (*exp) {
      Checkpoint ck = Checkpoint::load(ckpt_path);
      Rng rng(1);
      Agent<float> agent = agent_from_checkpoint(ck, rng);
      RunConfig cfg = config_from_checkpoint(ck);
      auto env = make_env(cfg.env);
      EvalStats st = export_embeddings(agent, *env, episodes,
                                       uint32_t(rollout_seed),
                                       reward_mode_from_string(cfg.reward_mode),
                                       out_path);
      std::cout << "wrote " << st.total_steps << " records to " << out_path << "\n";
      print_eval(st);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
