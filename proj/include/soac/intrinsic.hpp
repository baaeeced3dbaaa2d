#pragma once

// Information-theoretic reward pieces: option posterior by Bayes rule over
// the actor densities, batch marginal, pointwise mutual information, and the
// total-variation noise penalty. All log-space, all side-effect free.

#include "soac/option_policy.hpp"

namespace soac {

inline constexpr double kProbFloor = 1e-8;

struct NoiseSpec {
  double eps_s = 1.0;
  double eps_a = 0.2;
  int draws = 1;
};

struct IntrinsicStats {
  long posterior_fallbacks = 0;
  long boundary_clamps = 0;
};

// p(z|s,a) = pi_l(a|s,z) * pi_o(z|s) / sum_z' ..., rows of [B,|Z|].
// Rows whose joint log-mass is non-finite fall back to the prior.
template <typename S>
Mat<S> option_posterior(const LowLevelPolicy<S>& low, const HighLevelPolicy<S>& high,
                        const Mat<S>& states, const Mat<S>& actions,
                        IntrinsicStats* stats = nullptr) {
  Eigen::Index B = states.rows();
  int Z = low.num_options;
  if (Z == 1) return Mat<S>::Ones(B, 1);

  long clamps = 0;
  Mat<S> log_lik = low.log_prob_all(states, actions, &clamps);
  if (stats) stats->boundary_clamps += clamps;

  Mat<S> logits = high.option_net.forward(states);
  Mat<S> post(B, Z);
  for (Eigen::Index i = 0; i < B; ++i) {
    RowVec<S> lp = logits.row(i);
    S m = lp.maxCoeff();
    RowVec<S> log_prior =
        (lp.array() - m) - std::log((lp.array() - m).exp().sum());
    RowVec<S> joint = log_lik.row(i) + log_prior;
    S jm = joint.maxCoeff();
    if (!std::isfinite(double(jm))) {
      post.row(i) = log_prior.array().exp();
      if (stats) ++stats->posterior_fallbacks;
      continue;
    }
    RowVec<S> e = (joint.array() - jm).exp();
    S denom = e.sum();
    if (!(denom > S(0)) || !std::isfinite(double(denom))) {
      post.row(i) = log_prior.array().exp();
      if (stats) ++stats->posterior_fallbacks;
      continue;
    }
    post.row(i) = e / denom;
  }
  return post;
}

// Elementwise mean of posterior rows.
template <typename S>
RowVec<S> batch_marginal(const Mat<S>& posteriors) {
  if (posteriors.rows() == 0) throw ContractViolation("batch_marginal: empty batch");
  return posteriors.colwise().mean();
}

// i = log p(z|s,a) - log p_hat(z) at each row's stored z.
template <typename S>
Vec<S> pointwise_mi(const Mat<S>& posteriors, const RowVec<S>& marginal,
                    const std::vector<int>& z) {
  Eigen::Index B = posteriors.rows();
  if (Eigen::Index(z.size()) != B) throw ContractViolation("pointwise_mi: batch size");
  Vec<S> out(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    int zi = z[size_t(i)];
    if (zi < 0 || zi >= posteriors.cols())
      throw ContractViolation("pointwise_mi: option out of range");
    S p = std::max(posteriors(i, zi), S(kProbFloor));
    S q = std::max(marginal(zi), S(kProbFloor));
    out(i) = std::log(p) - std::log(q);
  }
  return out;
}

// Rao-Blackwellized batch estimate: mean over rows of
// sum_z p(z|row) * (log p(z|row) - log p_hat(z)). Equals exact MI when the
// batch enumerates the joint uniformly.
template <typename S>
S batch_mi_estimate(const Mat<S>& posteriors, const RowVec<S>& marginal) {
  if (posteriors.rows() == 0) throw ContractViolation("batch_mi: empty batch");
  S acc = S(0);
  for (Eigen::Index i = 0; i < posteriors.rows(); ++i) {
    for (Eigen::Index zi = 0; zi < posteriors.cols(); ++zi) {
      S p = posteriors(i, zi);
      if (p <= S(0)) continue;
      S pf = std::max(p, S(kProbFloor));
      S q = std::max(marginal(zi), S(kProbFloor));
      acc += p * (std::log(pf) - std::log(q));
    }
  }
  return acc / S(posteriors.rows());
}

template <typename S>
Vec<S> tv_distance_rows(const Mat<S>& a, const Mat<S>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractViolation("tv: shape mismatch");
  return S(0.5) * (a - b).cwiseAbs().rowwise().sum();
}

// l = TV(p(.|s+n_s, a+n_a) || p(.|s,a)), averaged over noise.draws draws.
template <typename S>
Vec<S> tv_penalty(const LowLevelPolicy<S>& low, const HighLevelPolicy<S>& high,
                  const Mat<S>& states, const Mat<S>& actions,
                  const NoiseSpec& noise, Rng& rng,
                  IntrinsicStats* stats = nullptr) {
  if (noise.draws < 1) throw ConfigError("tv_penalty: draws must be positive");
  Mat<S> clean = option_posterior(low, high, states, actions, stats);
  if (noise.eps_s == 0.0 && noise.eps_a == 0.0)
    return Vec<S>::Zero(states.rows());

  std::normal_distribution<double> N(0.0, 1.0);
  Vec<S> acc = Vec<S>::Zero(states.rows());
  for (int k = 0; k < noise.draws; ++k) {
    Mat<S> s_noisy = states;
    Mat<S> a_noisy = actions;
    for (Eigen::Index i = 0; i < s_noisy.size(); ++i)
      s_noisy.data()[i] += S(noise.eps_s * N(rng));
    for (Eigen::Index i = 0; i < a_noisy.size(); ++i)
      a_noisy.data()[i] += S(noise.eps_a * N(rng));
    Mat<S> noisy = option_posterior(low, high, s_noisy, a_noisy, stats);
    acc += tv_distance_rows(noisy, clean);
  }
  return acc / S(noise.draws);
}

}  // namespace soac
