#pragma once

// Enumerable MDP with explicit tensors, plus a wrapper exposing it through
// the continuous-env interface (one-hot states, binned actions).

#include "soac/env.hpp"

#include <fstream>
#include <sstream>
#include <vector>

namespace soac {

struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.99;
  std::vector<Matd> P;  // per action: [S,S] row-stochastic
  Matd R;               // [S,A]

  TabularMDP() = default;
  TabularMDP(int S, int A, double g) : n_states(S), n_actions(A), gamma(g) {
    P.assign(size_t(A), Matd::Zero(S, S));
    R = Matd::Zero(S, A);
  }

  void validate() const {
    if (n_states <= 0 || n_actions <= 0)
      throw ConfigError("tabular: non-positive dims");
    if (!(gamma >= 0.0 && gamma < 1.0))
      throw ConfigError("tabular: gamma outside [0,1)");
    if (int(P.size()) != n_actions || R.rows() != n_states || R.cols() != n_actions)
      throw ConfigError("tabular: tensor shapes disagree with dims");
    if (!R.allFinite()) throw ConfigError("tabular: non-finite reward");
    for (int a = 0; a < n_actions; ++a) {
      if (P[a].rows() != n_states || P[a].cols() != n_states)
        throw ConfigError("tabular: transition shape");
      if ((P[a].array() < 0.0).any())
        throw ConfigError("tabular: negative transition probability");
      for (int s = 0; s < n_states; ++s) {
        double rowsum = P[a].row(s).sum();
        if (std::abs(rowsum - 1.0) > 1e-12) {
          std::ostringstream os;
          os << "tabular: P[s=" << s << ",a=" << a << ",:] sums to " << rowsum;
          throw ConfigError(os.str());
        }
      }
    }
  }

  // Text layout: dims line (n_states n_actions gamma), P row-major over
  // [s][a][s'], then R row-major over [s][a].
  static TabularMDP load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("tabular: cannot open " + path);
    return read(f, path);
  }

  static TabularMDP read(std::istream& f, const std::string& what = "<stream>") {
    TabularMDP m;
    if (!(f >> m.n_states >> m.n_actions >> m.gamma))
      throw ConfigError("tabular: bad header in " + what);
    if (m.n_states <= 0 || m.n_actions <= 0)
      throw ConfigError("tabular: bad dims in " + what);
    m.P.assign(size_t(m.n_actions), Matd::Zero(m.n_states, m.n_states));
    for (int s = 0; s < m.n_states; ++s)
      for (int a = 0; a < m.n_actions; ++a)
        for (int s2 = 0; s2 < m.n_states; ++s2)
          if (!(f >> m.P[a](s, s2)))
            throw ConfigError("tabular: truncated transition table in " + what);
    m.R = Matd::Zero(m.n_states, m.n_actions);
    for (int s = 0; s < m.n_states; ++s)
      for (int a = 0; a < m.n_actions; ++a)
        if (!(f >> m.R(s, a)))
          throw ConfigError("tabular: truncated reward table in " + what);
    m.validate();
    return m;
  }

  void save(const std::string& path) const {
    validate();
    std::ofstream f(path);
    if (!f) throw ConfigError("tabular: cannot write " + path);
    f.precision(17);
    f << n_states << " " << n_actions << " " << gamma << "\n";
    for (int s = 0; s < n_states; ++s) {
      for (int a = 0; a < n_actions; ++a) {
        for (int s2 = 0; s2 < n_states; ++s2)
          f << P[a](s, s2) << (s2 + 1 == n_states ? "" : " ");
        f << "\n";
      }
    }
    for (int s = 0; s < n_states; ++s) {
      for (int a = 0; a < n_actions; ++a)
        f << R(s, a) << (a + 1 == n_actions ? "" : " ");
      f << "\n";
    }
  }
};

class TabularEnv : public ContinuousEnv {
 public:
  TabularEnv(TabularMDP mdp, int horizon = 50)
      : mdp_(std::move(mdp)), horizon_(horizon) {
    mdp_.validate();
    if (horizon_ <= 0) throw ConfigError("tabular env: non-positive horizon");
  }

  int state_dim() const override { return mdp_.n_states; }
  int action_dim() const override { return 1; }
  int horizon() const override { return horizon_; }
  std::string name() const override { return "tabular"; }
  const TabularMDP& mdp() const { return mdp_; }

  // Continuous action in [-1,1] split into n_actions equal bins.
  int action_bin(double a) const {
    a = std::clamp(a, -1.0, 1.0);
    int k = int((a + 1.0) / 2.0 * mdp_.n_actions);
    return std::min(k, mdp_.n_actions - 1);
  }

  static double bin_center(int k, int n_actions) {
    return -1.0 + 2.0 * (k + 0.5) / n_actions;
  }

  int state_index() const { return s_; }

  Vecf reset(uint32_t seed) override {
    rng_ = derive_rng(seed, 0);
    std::uniform_int_distribution<int> U(0, mdp_.n_states - 1);
    s_ = U(rng_);
    t_ = 0;
    return one_hot(s_);
  }

  StepResult step(const Vecf& action) override {
    Vecf a = clip_action(action, 1);
    int k = action_bin(a(0));
    StepResult r;
    r.reward.moving = mdp_.R(s_, k);
    std::vector<double> row(size_t(mdp_.n_states));
    for (int s2 = 0; s2 < mdp_.n_states; ++s2) row[size_t(s2)] = mdp_.P[size_t(k)](s_, s2);
    std::discrete_distribution<int> next(row.begin(), row.end());
    s_ = next(rng_);
    ++t_;
    r.terminal = false;
    r.done = t_ >= horizon_;
    r.next_state = one_hot(s_);
    return r;
  }

  std::unique_ptr<ContinuousEnv> clone() const override {
    return std::make_unique<TabularEnv>(*this);
  }

 private:
  TabularMDP mdp_;
  int horizon_;
  Rng rng_{0};
  int s_ = 0;
  int t_ = 0;

  Vecf one_hot(int s) const {
    Vecf v = Vecf::Zero(mdp_.n_states);
    v(s) = 1.0f;
    return v;
  }
};

}  // namespace soac
