#pragma once

// Two-level policy. High level: termination head beta(s, z_prev) plus option
// head pi_o(z|s), composed as pi_h(z|s,z_prev) = (1-beta)*[z=z_prev] +
// beta*pi_o(z|s). Low level: per-option squashed Gaussians over a shared
// trunk. Plain paths serve rollouts and oracles; taped paths serve losses.

#include "soac/mlp.hpp"

#include <optional>
#include <vector>

namespace soac {

inline constexpr int kNoOption = -1;  // episode start, forces beta = 1
inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kActionEdge = 1e-6;

template <typename S>
struct HighLevelPolicy {
  Mlp<S> term_net;    // (state + z_prev one-hot) -> 1 logit
  Mlp<S> option_net;  // state -> |Z| logits
  int state_dim = 0;
  int num_options = 0;

  static HighLevelPolicy make(int state_dim, int num_options,
                              const std::vector<int>& hidden, Rng& rng) {
    if (num_options < 1) throw ConfigError("high policy: need at least one option");
    HighLevelPolicy p;
    p.state_dim = state_dim;
    p.num_options = num_options;
    p.term_net = Mlp<S>::make(state_dim + num_options, hidden, 1, Act::Relu,
                              Act::Identity, rng, 1e-3);
    p.option_net = Mlp<S>::make(state_dim, hidden, num_options, Act::Relu,
                                Act::Identity, rng, 1e-3);
    return p;
  }

  Mat<S> term_input(const Mat<S>& states, const std::vector<int>& z_prev) const {
    Eigen::Index B = states.rows();
    Mat<S> in = Mat<S>::Zero(B, state_dim + num_options);
    in.leftCols(state_dim) = states;
    for (Eigen::Index i = 0; i < B; ++i) {
      int z = z_prev[size_t(i)];
      if (z == kNoOption) continue;
      if (z < 0 || z >= num_options) throw ContractViolation("z_prev out of range");
      in(i, state_dim + z) = S(1);
    }
    return in;
  }

  // [B, |Z|], rows sum to 1.
  Mat<S> probs(const Mat<S>& states, const std::vector<int>& z_prev) const {
    Eigen::Index B = states.rows();
    if (Eigen::Index(z_prev.size()) != B)
      throw ContractViolation("high probs: batch size mismatch");
    if (num_options == 1) return Mat<S>::Ones(B, 1);

    Mat<S> logits = option_net.forward(states);
    Mat<S> beta_logit = term_net.forward(term_input(states, z_prev));
    if (!all_finite(logits) || !all_finite(beta_logit))
      throw PolicyFault("high policy: non-finite network output");

    Mat<S> out(B, num_options);
    for (Eigen::Index i = 0; i < B; ++i) {
      RowVec<S> row = logits.row(i);
      S m = row.maxCoeff();
      RowVec<S> e = (row.array() - m).exp();
      RowVec<S> pi_o = e / e.sum();
      int zp = z_prev[size_t(i)];
      if (zp == kNoOption) {
        out.row(i) = pi_o;
      } else {
        S beta = S(1) / (S(1) + std::exp(-beta_logit(i, 0)));
        RowVec<S> mix = beta * pi_o;
        mix(zp) += S(1) - beta;
        out.row(i) = mix / mix.sum();
      }
    }
    return out;
  }

  // Same distribution on the tape. No explicit renormalization: the mixture
  // sums to 1 analytically and |Z|=1 short-circuits to an exact constant.
  typename Tape<S>::Var probs_taped(Tape<S>& t, const Mat<S>& states,
                                    const std::vector<int>& z_prev) {
    Eigen::Index B = states.rows();
    if (Eigen::Index(z_prev.size()) != B)
      throw ContractViolation("high probs: batch size mismatch");
    if (num_options == 1) return t.input(Mat<S>::Ones(B, 1));

    auto pi_o = t.softmax_rows(option_net.forward(t, t.input(states)));
    auto beta_logit = term_net.forward(t, t.input(term_input(states, z_prev)));
    auto beta = t.sigmoid(beta_logit);

    Mat<S> none(B, 1);
    Mat<S> keep = Mat<S>::Zero(B, num_options);
    for (Eigen::Index i = 0; i < B; ++i) {
      int zp = z_prev[size_t(i)];
      none(i, 0) = (zp == kNoOption) ? S(1) : S(0);
      if (zp != kNoOption) keep(i, zp) = S(1);
    }
    // beta_eff = beta*(1-none) + none
    auto beta_eff = t.add(t.mul(beta, t.input(Mat<S>(S(1) - none.array()))), t.input(none));
    auto stay = t.sub(t.input(Mat<S>::Ones(B, 1)), beta_eff);
    return t.add(t.mul_colvec(pi_o, beta_eff), t.mul_colvec(t.input(keep), stay));
  }

  int sample(const Vec<S>& state, int z_prev, Rng& rng) const {
    Mat<S> s(1, state.size());
    s.row(0) = state.transpose();
    Mat<S> p = probs(s, {z_prev});
    std::vector<double> w(static_cast<size_t>(num_options));
    for (int z = 0; z < num_options; ++z) w[size_t(z)] = double(p(0, z));
    std::discrete_distribution<int> d(w.begin(), w.end());
    return d(rng);
  }

  int argmax(const Vec<S>& state, int z_prev) const {
    Mat<S> s(1, state.size());
    s.row(0) = state.transpose();
    Mat<S> p = probs(s, {z_prev});
    Eigen::Index best;
    p.row(0).maxCoeff(&best);
    return int(best);
  }

  std::vector<Param<S>*> params() {
    auto out = term_net.params();
    auto o2 = option_net.params();
    out.insert(out.end(), o2.begin(), o2.end());
    return out;
  }
};

template <typename S>
struct LowLevelPolicy {
  Mlp<S> trunk;        // state -> features
  Mlp<S> mean_head;    // features -> |Z|*action_dim
  Mlp<S> logstd_head;  // features -> |Z|*action_dim
  int state_dim = 0;
  int action_dim = 0;
  int num_options = 0;

  static LowLevelPolicy make(int state_dim, int action_dim, int num_options,
                             const std::vector<int>& hidden, Rng& rng) {
    if (hidden.empty()) throw ConfigError("low policy: trunk needs hidden layers");
    LowLevelPolicy p;
    p.state_dim = state_dim;
    p.action_dim = action_dim;
    p.num_options = num_options;
    std::vector<int> inner(hidden.begin(), hidden.end() - 1);
    p.trunk = Mlp<S>::make(state_dim, inner, hidden.back(), Act::Relu, Act::Relu, rng);
    p.mean_head = Mlp<S>::make(hidden.back(), {}, num_options * action_dim,
                               Act::Relu, Act::Identity, rng, 1e-3);
    p.logstd_head = Mlp<S>::make(hidden.back(), {}, num_options * action_dim,
                                 Act::Relu, Act::Identity, rng, 1e-3);
    return p;
  }

  struct Heads {
    Mat<S> mean;    // [B, A] for each row's option
    Mat<S> logstd;  // clamped
  };

  // All-option heads: [B, |Z|*A].
  void all_heads(const Mat<S>& states, Mat<S>& mean, Mat<S>& logstd) const {
    Mat<S> feat = trunk.forward(states);
    mean = mean_head.forward(feat);
    logstd = logstd_head.forward(feat)
                 .cwiseMax(S(kLogStdMin))
                 .cwiseMin(S(kLogStdMax));
    if (!all_finite(mean) || !all_finite(logstd))
      throw PolicyFault("low policy: non-finite network output");
  }

  Heads heads(const Mat<S>& states, const std::vector<int>& z) const {
    Mat<S> mean, logstd;
    all_heads(states, mean, logstd);
    Heads h;
    h.mean.resize(states.rows(), action_dim);
    h.logstd.resize(states.rows(), action_dim);
    for (Eigen::Index i = 0; i < states.rows(); ++i) {
      int zi = z[size_t(i)];
      if (zi < 0 || zi >= num_options) throw ContractViolation("option out of range");
      h.mean.row(i) = mean.row(i).segment(zi * action_dim, action_dim);
      h.logstd.row(i) = logstd.row(i).segment(zi * action_dim, action_dim);
    }
    return h;
  }

  // tanh(mean + std*eps) with the change-of-variables log-density.
  void sample(const Mat<S>& states, const std::vector<int>& z, Rng& rng,
              Mat<S>& action, Mat<S>& logp) const {
    Mat<S> eps(states.rows(), action_dim);
    std::normal_distribution<double> N(0.0, 1.0);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = S(N(rng));
    sample_with_eps(states, z, eps, action, logp);
  }

  void sample_with_eps(const Mat<S>& states, const std::vector<int>& z,
                       const Mat<S>& eps, Mat<S>& action, Mat<S>& logp) const {
    Heads h = heads(states, z);
    Mat<S> std_ = h.logstd.array().exp();
    Mat<S> u = h.mean + std_.cwiseProduct(eps);
    action = u.array().tanh();
    logp = gauss_logp(eps, h.logstd) + tanh_corr(u);
    if (!all_finite(action) || !all_finite(logp))
      throw PolicyFault("low policy: non-finite sample");
  }

  Mat<S> mean_action(const Mat<S>& states, const std::vector<int>& z) const {
    Heads h = heads(states, z);
    return h.mean.array().tanh();
  }

  // [B,1]; boundary actions clamped inward, count reported if asked.
  Mat<S> log_prob(const Mat<S>& states, const std::vector<int>& z,
                  const Mat<S>& actions, long* clamped = nullptr) const {
    Heads h = heads(states, z);
    return logp_given_heads(h.mean, h.logstd, actions, clamped);
  }

  // [B, |Z|]: density of the same action under every option head.
  Mat<S> log_prob_all(const Mat<S>& states, const Mat<S>& actions,
                      long* clamped = nullptr) const {
    Mat<S> mean, logstd;
    all_heads(states, mean, logstd);
    Mat<S> out(states.rows(), num_options);
    for (int zi = 0; zi < num_options; ++zi) {
      Mat<S> m = mean.middleCols(zi * action_dim, action_dim);
      Mat<S> ls = logstd.middleCols(zi * action_dim, action_dim);
      out.col(zi) = logp_given_heads(m, ls, actions, zi == 0 ? clamped : nullptr);
    }
    return out;
  }

  struct TapedSample {
    typename Tape<S>::Var action;  // [B, A]
    typename Tape<S>::Var logp;    // [B, 1]
  };

  // Reparameterized sample with explicit noise so finite differences can
  // replay the exact same draw.
  TapedSample sample_taped(Tape<S>& t, const Mat<S>& states,
                           const std::vector<int>& z, const Mat<S>& eps) {
    Eigen::Index B = states.rows();
    if (eps.rows() != B || eps.cols() != action_dim)
      throw ContractViolation("sample: eps shape");
    auto feat = trunk.forward(t, t.input(states));
    auto mean_all = mean_head.forward(t, feat);
    auto logstd_all = logstd_head.forward(t, feat);
    auto mean = gather_option(t, mean_all, z);
    auto logstd = t.clamp(gather_option(t, logstd_all, z), S(kLogStdMin), S(kLogStdMax));
    auto std_ = t.exp_(logstd);
    auto u = t.add(mean, t.mul(std_, t.input(eps)));
    TapedSample out;
    out.action = t.tanh_(u);

    // log N(eps) - sum log sigma - sum log(1 - tanh^2 u), the latter via
    // 2*(log 2 - u - softplus(-2u))
    Mat<S> gauss = Mat<S>::Zero(B, 1);
    for (Eigen::Index i = 0; i < B; ++i)
      for (int a = 0; a < action_dim; ++a)
        gauss(i, 0) += S(-0.5) * eps(i, a) * eps(i, a) - S(0.5 * std::log(2.0 * M_PI));
    auto log_one_minus_t2 = t.scale(
        t.add_scalar(t.sub(t.scale(u, S(-1)), t.softplus(t.scale(u, S(-2)))),
                     S(std::log(2.0))),
        S(2));
    auto per_dim = t.sub(t.scale(logstd, S(-1)), log_one_minus_t2);
    out.logp = t.add(t.rowwise_sum(per_dim), t.input(gauss));
    return out;
  }

  std::vector<Param<S>*> params() {
    auto out = trunk.params();
    for (auto* p : mean_head.params()) out.push_back(p);
    for (auto* p : logstd_head.params()) out.push_back(p);
    return out;
  }

 private:
  Mat<S> gauss_logp(const Mat<S>& eps, const Mat<S>& logstd) const {
    Vec<S> lp = (S(-0.5) * eps.array().square() - logstd.array() -
                 S(0.5 * std::log(2.0 * M_PI)))
                    .rowwise()
                    .sum();
    return lp;
  }

  static Mat<S> tanh_corr(const Mat<S>& u) {
    // sum over dims of -log(1 - tanh^2 u)
    auto sp = u.array().unaryExpr([](S v) {
      S x = S(-2) * v;
      return x > S(30) ? x : S(std::log1p(std::exp(double(x))));
    });
    Vec<S> corr =
        (S(-2) * (S(std::log(2.0)) - u.array() - sp)).rowwise().sum();
    return corr;
  }

  Mat<S> logp_given_heads(const Mat<S>& mean, const Mat<S>& logstd,
                          const Mat<S>& actions, long* clamped) const {
    if (actions.cols() != action_dim) throw ContractViolation("log_prob: action dim");
    Mat<S> a = actions.cwiseMax(S(-1 + kActionEdge)).cwiseMin(S(1 - kActionEdge));
    if (clamped) {
      for (Eigen::Index i = 0; i < actions.size(); ++i)
        if (std::abs(double(actions.data()[i])) >= 1.0 - kActionEdge) ++*clamped;
    }
    Mat<S> u = (S(0.5) * ((S(1) + a.array()) / (S(1) - a.array())).log()).matrix();
    Mat<S> std_ = logstd.array().exp();
    Mat<S> eps = (u - mean).cwiseQuotient(std_);
    Mat<S> lp = gauss_logp(eps, logstd) + tanh_corr(u);
    if (!all_finite(lp)) throw PolicyFault("log_prob: non-finite");
    return lp;
  }

  // Select each row's option block with constant 0/1 masks.
  typename Tape<S>::Var gather_option(Tape<S>& t, typename Tape<S>::Var all,
                                      const std::vector<int>& z) {
    Eigen::Index B = t.value(all).rows();
    if (Eigen::Index(z.size()) != B) throw ContractViolation("gather: batch size");
    typename Tape<S>::Var acc = -1;
    for (int zi = 0; zi < num_options; ++zi) {
      Mat<S> sel = Mat<S>::Zero(num_options * action_dim, action_dim);
      for (int a = 0; a < action_dim; ++a) sel(zi * action_dim + a, a) = S(1);
      Mat<S> ind = Mat<S>::Zero(B, 1);
      bool any = false;
      for (Eigen::Index i = 0; i < B; ++i)
        if (z[size_t(i)] == zi) {
          ind(i, 0) = S(1);
          any = true;
        }
      if (!any) continue;
      auto picked = t.mul_colvec(t.matmul(all, t.input(sel)), t.input(ind));
      acc = (acc < 0) ? picked : t.add(acc, picked);
    }
    if (acc < 0) throw ContractViolation("gather: empty batch");
    return acc;
  }
};

}  // namespace soac
