#pragma once

// Run telemetry: append-only CSV metrics, deterministic evaluation rollouts,
// and the embedding export that records which option drove each step.

#include "soac/agent.hpp"
#include "soac/env.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace soac {

struct MetricsRow {
  long step = 0;
  double eval_return_mean = 0, eval_return_min = 0, eval_return_max = 0;
  double batch_mi = 0, mean_tv = 0;
  std::vector<double> option_occupancy;
  double q_loss = 0, u_loss = 0, pi_h_loss = 0, pi_l_loss = 0;
};

inline std::string format_sig9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::string metrics_header(int num_options) {
  std::string h = "step,eval_return_mean,eval_return_min,eval_return_max,batch_MI,mean_TV";
  for (int z = 0; z < num_options; ++z)
    h += ",option_occupancy_" + std::to_string(z);
  h += ",q_loss,u_loss,pi_h_loss,pi_l_loss";
  return h;
}

inline std::string format_metrics_row(const MetricsRow& r) {
  std::string line = std::to_string(r.step);
  auto put = [&line](double v) { line += "," + format_sig9(v); };
  put(r.eval_return_mean);
  put(r.eval_return_min);
  put(r.eval_return_max);
  put(r.batch_mi);
  put(r.mean_tv);
  for (double o : r.option_occupancy) put(o);
  put(r.q_loss);
  put(r.u_loss);
  put(r.pi_h_loss);
  put(r.pi_l_loss);
  return line;
}

// Appends one full line per call and flushes immediately. A failed write
// degrades to the in-memory buffer instead of stopping the run.
class MetricsWriter {
 public:
  MetricsWriter(std::string path, int num_options)
      : path_(std::move(path)), num_options_(num_options) {
    if (path_.empty()) return;
    {
      // resuming an existing file keeps its step ordering intact
      std::ifstream in(path_);
      std::string line, last;
      if (in) {
        std::getline(in, line);  // header
        while (std::getline(in, line))
          if (!line.empty()) last = line;
      }
      if (!last.empty()) last_step_ = std::stol(last);
    }
    std::ofstream f(path_, std::ios::app);
    if (!f) {
      degrade("cannot open " + path_);
      return;
    }
    f.seekp(0, std::ios::end);
    if (f.tellp() == 0) f << metrics_header(num_options_) << "\n";
    if (!f.good()) degrade("header write failed for " + path_);
  }

  void append(const MetricsRow& row) {
    if (int(row.option_occupancy.size()) != num_options_)
      throw ContractViolation("metrics: occupancy width mismatch");
    if (row.step <= last_step_)
      throw ContractViolation("metrics: steps must strictly increase");
    last_step_ = row.step;
    rows_.push_back(row);
    if (path_.empty() || degraded_) return;
    std::ofstream f(path_, std::ios::app);
    if (!f) {
      degrade("cannot reopen " + path_);
      return;
    }
    f << format_metrics_row(row) << "\n";
    f.flush();
    if (!f.good()) degrade("append failed for " + path_);
  }

  const std::vector<MetricsRow>& rows() const { return rows_; }
  bool degraded() const { return degraded_; }
  const std::string& path() const { return path_; }

 private:
  void degrade(const std::string& why) {
    degraded_ = true;
    std::cerr << "metrics: " << why << "; continuing in memory only\n";
  }

  std::string path_;
  int num_options_;
  bool degraded_ = false;
  long last_step_ = std::numeric_limits<long>::min();
  std::vector<MetricsRow> rows_;
};

inline std::vector<MetricsRow> read_metrics(const std::string& path,
                                            int* num_options_out = nullptr) {
  std::ifstream f(path);
  if (!f) throw ConfigError("metrics: cannot open " + path);
  std::string header;
  if (!std::getline(f, header)) throw ConfigError("metrics: empty file " + path);
  int nz = 0;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ','))
      if (col.rfind("option_occupancy_", 0) == 0) ++nz;
  }
  if (header != metrics_header(nz))
    throw ConfigError("metrics: unrecognized header in " + path);
  if (num_options_out) *num_options_out = nz;

  std::vector<MetricsRow> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (int(vals.size()) != 10 + nz)
      throw ConfigError("metrics: short row in " + path);
    MetricsRow r;
    size_t k = 0;
    r.step = long(vals[k++]);
    r.eval_return_mean = vals[k++];
    r.eval_return_min = vals[k++];
    r.eval_return_max = vals[k++];
    r.batch_mi = vals[k++];
    r.mean_tv = vals[k++];
    for (int z = 0; z < nz; ++z) r.option_occupancy.push_back(vals[k++]);
    r.q_loss = vals[k++];
    r.u_loss = vals[k++];
    r.pi_h_loss = vals[k++];
    r.pi_l_loss = vals[k++];
    out.push_back(std::move(r));
  }
  return out;
}

struct EmbeddingRecord {
  int episode = 0;
  int step = 0;
  int option = 0;
  Vecd state;
  Vecd action;
};

struct EvalStats {
  std::vector<double> returns;
  std::vector<double> occupancy;
  double mean_switches = 0;
  long total_steps = 0;

  double mean() const {
    double s = 0;
    for (double r : returns) s += r;
    return returns.empty() ? 0 : s / double(returns.size());
  }
  double min() const {
    return returns.empty() ? 0 : *std::min_element(returns.begin(), returns.end());
  }
  double max() const {
    return returns.empty() ? 0 : *std::max_element(returns.begin(), returns.end());
  }
};

// Mode of both policy levels: argmax option, tanh(mean) action. Episode e
// uses env seed seed_base + e.
template <typename S>
EvalStats deterministic_rollout(const Agent<S>& agent, ContinuousEnv& env,
                                int episodes, uint32_t seed_base, RewardMode mode,
                                std::vector<EmbeddingRecord>* records = nullptr) {
  if (episodes < 1) throw ConfigError("rollout: need at least one episode");
  EvalStats stats;
  stats.occupancy.assign(size_t(agent.num_options), 0.0);
  long total_switches = 0;
  for (int e = 0; e < episodes; ++e) {
    Vecf obs = env.reset(seed_base + uint32_t(e));
    int z_prev = kNoOption;
    double ret = 0;
    for (int t = 0;; ++t) {
      Vec<S> s = obs.cast<S>();
      int z = agent.high.argmax(s, z_prev);
      Mat<S> srow(1, s.size());
      srow.row(0) = s.transpose();
      Mat<S> a = agent.low.mean_action(srow, {z});
      Vecf act = a.row(0).transpose().template cast<float>();

      if (records) {
        EmbeddingRecord rec;
        rec.episode = e;
        rec.step = t;
        rec.option = z;
        rec.state = obs.cast<double>();
        rec.action = act.cast<double>();
        records->push_back(std::move(rec));
      }
      stats.occupancy[size_t(z)] += 1.0;
      ++stats.total_steps;
      if (z_prev != kNoOption && z != z_prev) ++total_switches;
      z_prev = z;

      StepResult r = env.step(act);
      ret += apply_transform(r.reward, mode);
      obs = r.next_state;
      if (r.done) break;
    }
    stats.returns.push_back(ret);
  }
  double check = 0;
  for (double& o : stats.occupancy) {
    o /= double(stats.total_steps);
    check += o;
  }
  if (std::abs(check - 1.0) > 1e-9)
    throw ContractViolation("rollout: occupancy fractions must sum to 1");
  stats.mean_switches = double(total_switches) / double(episodes);
  return stats;
}

// Sampled-option variant: options follow the mixture distribution, actions
// stay at the squashed mean. Used for occupancy statistics where argmax
// winner-take-all would hide near-uniform selectors.
template <typename S>
EvalStats stochastic_rollout(const Agent<S>& agent, ContinuousEnv& env,
                             int episodes, uint32_t seed_base, RewardMode mode) {
  if (episodes < 1) throw ConfigError("rollout: need at least one episode");
  Rng rng(seed_base);
  EvalStats stats;
  stats.occupancy.assign(size_t(agent.num_options), 0.0);
  long total_switches = 0;
  for (int e = 0; e < episodes; ++e) {
    Vecf obs = env.reset(seed_base + uint32_t(e));
    int z_prev = kNoOption;
    double ret = 0;
    while (true) {
      Vec<S> s = obs.cast<S>();
      int z = agent.high.sample(s, z_prev, rng);
      Mat<S> srow(1, s.size());
      srow.row(0) = s.transpose();
      Mat<S> a = agent.low.mean_action(srow, {z});
      stats.occupancy[size_t(z)] += 1.0;
      ++stats.total_steps;
      if (z_prev != kNoOption && z != z_prev) ++total_switches;
      z_prev = z;
      StepResult r = env.step(a.row(0).transpose().template cast<float>());
      ret += apply_transform(r.reward, mode);
      obs = r.next_state;
      if (r.done) break;
    }
    stats.returns.push_back(ret);
  }
  for (double& o : stats.occupancy) o /= double(stats.total_steps);
  stats.mean_switches = double(total_switches) / double(episodes);
  return stats;
}

// One CSV record per rollout step of the deterministic policy.
template <typename S>
EvalStats export_embeddings(const Agent<S>& agent, ContinuousEnv& env, int episodes,
                            uint32_t seed, RewardMode mode, const std::string& csv_path) {
  std::vector<EmbeddingRecord> records;
  EvalStats stats = deterministic_rollout(agent, env, episodes, seed, mode, &records);

  std::ofstream f(csv_path);
  if (!f) throw ConfigError("export: cannot open " + csv_path);
  std::string header = "episode,step,option";
  for (int i = 0; i < env.state_dim(); ++i) header += ",s" + std::to_string(i);
  for (int i = 0; i < env.action_dim(); ++i) header += ",a" + std::to_string(i);
  f << header << "\n";
  for (const EmbeddingRecord& r : records) {
    if (!r.state.allFinite() || !r.action.allFinite())
      throw ContractViolation("export: non-finite embedding record");
    f << r.episode << "," << r.step << "," << r.option;
    for (Eigen::Index i = 0; i < r.state.size(); ++i) f << "," << format_sig9(r.state(i));
    for (Eigen::Index i = 0; i < r.action.size(); ++i) f << "," << format_sig9(r.action(i));
    f << "\n";
  }
  if (!f.good()) throw ConfigError("export: write failed for " + csv_path);
  return stats;
}

}  // namespace soac
