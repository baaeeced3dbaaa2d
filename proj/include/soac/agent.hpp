#pragma once

// The full parameter bundle: both policy levels plus the critic ensemble,
// with named-tensor serialization.

#include "soac/checkpoint.hpp"
#include "soac/critics.hpp"
#include "soac/option_policy.hpp"

#include <utility>

namespace soac {

template <typename S>
struct Agent {
  int state_dim = 0;
  int action_dim = 0;
  int num_options = 0;
  std::vector<int> hidden;
  HighLevelPolicy<S> high;
  LowLevelPolicy<S> low;
  CriticEnsemble<S> ens;

  static Agent make(int state_dim, int action_dim, int num_options,
                    const std::vector<int>& hidden, Rng& rng, bool popart) {
    Agent a;
    a.state_dim = state_dim;
    a.action_dim = action_dim;
    a.num_options = num_options;
    a.hidden = hidden;
    a.high = HighLevelPolicy<S>::make(state_dim, num_options, hidden, rng);
    a.low = LowLevelPolicy<S>::make(state_dim, action_dim, num_options, hidden, rng);
    a.ens = CriticEnsemble<S>::make(state_dim, action_dim, num_options, hidden, rng,
                                    popart);
    return a;
  }

  std::vector<std::pair<std::string, Param<S>*>> named_params() {
    std::vector<std::pair<std::string, Param<S>*>> out;
    auto net = [&out](const std::string& prefix, Mlp<S>& m) {
      for (size_t l = 0; l < m.W.size(); ++l) {
        out.emplace_back(prefix + ".W" + std::to_string(l), &m.W[l]);
        out.emplace_back(prefix + ".b" + std::to_string(l), &m.b[l]);
      }
    };
    net("high.term", high.term_net);
    net("high.opt", high.option_net);
    net("low.trunk", low.trunk);
    net("low.mean", low.mean_head);
    net("low.logstd", low.logstd_head);
    net("q1", ens.q1);
    net("q2", ens.q2);
    net("q1_t", ens.q1_t);
    net("q2_t", ens.q2_t);
    net("u1", ens.u1);
    net("u2", ens.u2);
    net("u1_t", ens.u1_t);
    net("u2_t", ens.u2_t);
    return out;
  }

  Checkpoint to_checkpoint() {
    Checkpoint ck;
    ck.meta["state_dim"] = state_dim;
    ck.meta["action_dim"] = action_dim;
    ck.meta["num_options"] = num_options;
    ck.meta["hidden"] = hidden;
    auto pop = [](const Popart<S>& p) {
      return nlohmann::json{{"enabled", p.enabled},
                            {"mu", p.mu},
                            {"nu", p.nu},
                            {"sigma", p.sigma}};
    };
    ck.meta["popart_q"] = pop(ens.pop_q);
    ck.meta["popart_u"] = pop(ens.pop_u);
    for (auto& [name, p] : named_params())
      ck.tensors[name] = p->value.template cast<float>();
    return ck;
  }

  void check_dims(const Checkpoint& ck) const {
    auto want = [&ck](const char* key, int v) {
      if (!ck.meta.contains(key) || ck.meta[key].get<int>() != v)
        throw ConfigError(std::string("checkpoint: ") + key +
                          " does not match this agent");
    };
    want("state_dim", state_dim);
    want("action_dim", action_dim);
    want("num_options", num_options);
  }

  void load_full(const Checkpoint& ck) {
    check_dims(ck);
    for (auto& [name, p] : named_params()) {
      auto it = ck.tensors.find(name);
      if (it == ck.tensors.end())
        throw ConfigError("checkpoint: missing tensor " + name);
      assign(name, *p, it->second);
    }
    auto pop = [](Popart<S>& p, const nlohmann::json& j) {
      p.enabled = j.value("enabled", p.enabled);
      p.mu = j.value("mu", 0.0);
      p.nu = j.value("nu", 1.0);
      p.sigma = j.value("sigma", 1.0);
    };
    if (ck.meta.contains("popart_q")) pop(ens.pop_q, ck.meta["popart_q"]);
    if (ck.meta.contains("popart_u")) pop(ens.pop_u, ck.meta["popart_u"]);
  }

  // Option-selection transfer: only termination and selector heads come from
  // the checkpoint; everything else keeps its fresh initialization.
  void load_high_only(const Checkpoint& ck) {
    check_dims(ck);
    int loaded = 0;
    for (auto& [name, p] : named_params()) {
      if (name.rfind("high.", 0) != 0) continue;
      auto it = ck.tensors.find(name);
      if (it == ck.tensors.end())
        throw ConfigError("checkpoint: missing tensor " + name);
      assign(name, *p, it->second);
      ++loaded;
    }
    if (loaded == 0) throw ConfigError("checkpoint: no high-level tensors found");
  }

 private:
  static void assign(const std::string& name, Param<S>& p, const Matf& src) {
    if (p.value.rows() != src.rows() || p.value.cols() != src.cols())
      throw ConfigError("checkpoint: shape mismatch for " + name);
    p.value = src.template cast<S>();
  }
};

}  // namespace soac
