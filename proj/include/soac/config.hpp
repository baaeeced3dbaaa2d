#pragma once

// Run configuration: algorithm hyperparameters plus run plumbing, loadable
// from a flat JSON document with the same key names.

#include "soac/env.hpp"
#include "soac/mat.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace soac {

struct RunConfig {
  // algorithm hyperparameters
  double learning_rate = 3e-4;
  double discount = 0.99;
  size_t replay_buffer_size = 1000000;
  int batch_size = 256;
  std::vector<int> hidden_units = {256, 256};
  int target_update_interval = 1;
  int gradient_steps = 1;
  double tau = 0.005;
  int option_number = 4;
  double reward_scale = 5.0;
  bool use_popart = true;
  double mutual_information_weight = 1.0;  // lambda1
  double noise_influence_weight = 5.0;     // lambda2
  double action_noise = 0.2;               // eps_a
  double state_noise = 1.0;                // eps_s
  int noise_draws = 1;
  long random_action_steps = 10000;
  long start_training_steps = 10000;
  double alpha = 1.0;

  // run plumbing
  std::string env = "point_mass";
  unsigned long seed = 0;
  long total_steps = 100000;
  long eval_interval = 2000;
  int eval_episodes = 10;
  std::string reward_mode = "identity";
  std::string metrics_path;
  std::string checkpoint_path;
  std::string transfer_from;

  void validate() const {
    auto pos = [](double v, const char* k) {
      if (!(v > 0)) throw ConfigError(std::string("config: ") + k + " must be positive");
    };
    pos(learning_rate, "learning_rate");
    pos(tau, "tau");
    pos(reward_scale, "reward_scale");
    pos(alpha, "alpha");
    if (discount < 0 || discount >= 1)
      throw ConfigError("config: discount must lie in [0,1)");
    if (batch_size <= 0 || size_t(batch_size) > replay_buffer_size)
      throw ConfigError("config: batch_size must be in [1, replay_buffer_size]");
    if (option_number < 1) throw ConfigError("config: option_number must be >= 1");
    if (target_update_interval < 1 || gradient_steps < 1)
      throw ConfigError("config: update cadence fields must be >= 1");
    if (mutual_information_weight < 0 || noise_influence_weight < 0)
      throw ConfigError("config: loss weights must be nonnegative");
    if (action_noise < 0 || state_noise < 0)
      throw ConfigError("config: noise scales must be nonnegative");
    if (noise_draws < 1) throw ConfigError("config: noise_draws must be >= 1");
    if (random_action_steps < 0 || start_training_steps < 0 || total_steps < 0)
      throw ConfigError("config: step counts must be nonnegative");
    if (eval_interval <= 0) throw ConfigError("config: eval_interval must be positive");
    if (eval_episodes < 1) throw ConfigError("config: eval_episodes must be >= 1");
    if (hidden_units.empty()) throw ConfigError("config: hidden_units must be nonempty");
    for (int h : hidden_units)
      if (h < 1) throw ConfigError("config: hidden_units entries must be >= 1");
    reward_mode_from_string(reward_mode);
  }

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    auto get = [&j](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).template get<std::decay_t<decltype(field)>>();
    };
    get("learning_rate", c.learning_rate);
    get("discount", c.discount);
    get("replay_buffer_size", c.replay_buffer_size);
    get("batch_size", c.batch_size);
    get("hidden_units", c.hidden_units);
    get("target_update_interval", c.target_update_interval);
    get("gradient_steps", c.gradient_steps);
    get("tau", c.tau);
    get("option_number", c.option_number);
    get("reward_scale", c.reward_scale);
    get("use_popart", c.use_popart);
    get("mutual_information_weight", c.mutual_information_weight);
    get("noise_influence_weight", c.noise_influence_weight);
    get("action_noise", c.action_noise);
    get("state_noise", c.state_noise);
    get("noise_draws", c.noise_draws);
    get("random_action_steps", c.random_action_steps);
    get("start_training_steps", c.start_training_steps);
    get("alpha", c.alpha);
    get("env", c.env);
    get("seed", c.seed);
    get("total_steps", c.total_steps);
    get("eval_interval", c.eval_interval);
    get("eval_episodes", c.eval_episodes);
    get("reward_mode", c.reward_mode);
    get("metrics_path", c.metrics_path);
    get("checkpoint_path", c.checkpoint_path);
    get("transfer_from", c.transfer_from);
    for (auto& [key, val] : j.items()) {
      (void)val;
      static const char* known[] = {
          "learning_rate", "discount", "replay_buffer_size", "batch_size",
          "hidden_units", "target_update_interval", "gradient_steps", "tau",
          "option_number", "reward_scale", "use_popart",
          "mutual_information_weight", "noise_influence_weight", "action_noise",
          "state_noise", "noise_draws", "random_action_steps",
          "start_training_steps", "alpha", "env", "seed", "total_steps",
          "eval_interval", "eval_episodes", "reward_mode", "metrics_path",
          "checkpoint_path", "transfer_from"};
      bool ok = false;
      for (const char* k : known) ok = ok || key == k;
      if (!ok) throw ConfigError("config: unknown key '" + key + "'");
    }
    c.validate();
    return c;
  }

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"learning_rate", learning_rate},
        {"discount", discount},
        {"replay_buffer_size", replay_buffer_size},
        {"batch_size", batch_size},
        {"hidden_units", hidden_units},
        {"target_update_interval", target_update_interval},
        {"gradient_steps", gradient_steps},
        {"tau", tau},
        {"option_number", option_number},
        {"reward_scale", reward_scale},
        {"use_popart", use_popart},
        {"mutual_information_weight", mutual_information_weight},
        {"noise_influence_weight", noise_influence_weight},
        {"action_noise", action_noise},
        {"state_noise", state_noise},
        {"noise_draws", noise_draws},
        {"random_action_steps", random_action_steps},
        {"start_training_steps", start_training_steps},
        {"alpha", alpha},
        {"env", env},
        {"seed", seed},
        {"total_steps", total_steps},
        {"eval_interval", eval_interval},
        {"eval_episodes", eval_episodes},
        {"reward_mode", reward_mode},
        {"metrics_path", metrics_path},
        {"checkpoint_path", checkpoint_path},
        {"transfer_from", transfer_from}};
  }
};

}  // namespace soac
