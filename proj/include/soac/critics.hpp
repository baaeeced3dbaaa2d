#pragma once

// Twin action-value and option-value networks with Polyak targets, adaptive
// target normalization, and the two Bellman residual losses. Value reads are
// always denormalized; regression happens in normalized space.

#include "soac/batch.hpp"
#include "soac/intrinsic.hpp"
#include "soac/mlp.hpp"
#include "soac/optim.hpp"

#include <sstream>

namespace soac {

template <typename S>
struct Popart {
  bool enabled = true;
  double step = 3e-4;
  double sigma_floor = 1e-4;
  double mu = 0.0;
  double nu = 1.0;  // second moment
  double sigma = 1.0;

  // Fold a batch of targets into the running stats and rescale the given
  // output layers so denormalized predictions are unchanged.
  void observe(const Vec<S>& targets, const std::vector<Mlp<S>*>& nets) {
    if (!enabled) return;
    if (targets.size() == 0) throw ContractViolation("popart: empty target batch");
    double mean = 0.0, sq = 0.0;
    for (Eigen::Index i = 0; i < targets.size(); ++i) {
      mean += double(targets(i));
      sq += double(targets(i)) * double(targets(i));
    }
    mean /= double(targets.size());
    sq /= double(targets.size());

    double mu_old = mu, sigma_old = sigma;
    mu = mu + step * (mean - mu);
    nu = nu + step * (sq - nu);
    double var = std::max(nu - mu * mu, 0.0);
    sigma = std::max(std::sqrt(var), sigma_floor);

    for (Mlp<S>* net : nets) {
      Param<S>& W = net->W.back();
      Param<S>& b = net->b.back();
      W.value *= S(sigma_old / sigma);
      b.value = ((sigma_old * b.value.template cast<double>().array() + mu_old - mu) /
                 sigma)
                    .template cast<S>()
                    .matrix();
    }
  }

  S normalize(S y) const { return S((double(y) - mu) / sigma); }
  S denormalize(S out) const { return S(sigma * double(out) + mu); }

  Vec<S> normalize(const Vec<S>& y) const {
    return ((y.template cast<double>().array() - mu) / sigma).template cast<S>();
  }
  Mat<S> denormalize(const Mat<S>& out) const {
    return (sigma * out.template cast<double>().array() + mu).template cast<S>();
  }
};

template <typename S>
struct CriticEnsemble {
  Mlp<S> q1, q2, q1_t, q2_t;  // (state + option one-hot + action) -> scalar
  Mlp<S> u1, u2, u1_t, u2_t;  // state -> per-option value
  Popart<S> pop_q, pop_u;
  int state_dim = 0;
  int action_dim = 0;
  int num_options = 0;

  static CriticEnsemble make(int state_dim, int action_dim, int num_options,
                             const std::vector<int>& hidden, Rng& rng,
                             bool popart_enabled = true) {
    CriticEnsemble e;
    e.state_dim = state_dim;
    e.action_dim = action_dim;
    e.num_options = num_options;
    int q_in = state_dim + num_options + action_dim;
    e.q1 = Mlp<S>::make(q_in, hidden, 1, Act::Relu, Act::Identity, rng);
    e.q2 = Mlp<S>::make(q_in, hidden, 1, Act::Relu, Act::Identity, rng);
    e.u1 = Mlp<S>::make(state_dim, hidden, num_options, Act::Relu, Act::Identity, rng);
    e.u2 = Mlp<S>::make(state_dim, hidden, num_options, Act::Relu, Act::Identity, rng);
    e.q1_t = e.q1;
    e.q2_t = e.q2;
    e.u1_t = e.u1;
    e.u2_t = e.u2;
    e.pop_q.enabled = popart_enabled;
    e.pop_u.enabled = popart_enabled;
    return e;
  }

  Mat<S> q_input(const Mat<S>& states, const std::vector<int>& z,
                 const Mat<S>& actions) const {
    Eigen::Index B = states.rows();
    Mat<S> in = Mat<S>::Zero(B, state_dim + num_options + action_dim);
    in.leftCols(state_dim) = states;
    for (Eigen::Index i = 0; i < B; ++i) {
      int zi = z[size_t(i)];
      if (zi < 0 || zi >= num_options) throw ContractViolation("q_input: bad option");
      in(i, state_dim + zi) = S(1);
    }
    in.rightCols(action_dim) = actions;
    return in;
  }

  // Denormalized values.
  Mat<S> q_value(const Mlp<S>& net, const Mat<S>& states, const std::vector<int>& z,
                 const Mat<S>& actions) const {
    return pop_q.denormalize(net.forward(q_input(states, z, actions)));
  }
  Mat<S> q_min_online(const Mat<S>& states, const std::vector<int>& z,
                      const Mat<S>& actions) const {
    Mat<S> in = q_input(states, z, actions);
    return pop_q.denormalize(q1.forward(in).cwiseMin(q2.forward(in)));
  }
  Mat<S> u_all(const Mlp<S>& net, const Mat<S>& states) const {
    return pop_u.denormalize(net.forward(states));
  }
  Mat<S> u_min_target(const Mat<S>& states) const {
    return pop_u.denormalize(u1_t.forward(states).cwiseMin(u2_t.forward(states)));
  }
  Mat<S> u_min_online(const Mat<S>& states) const {
    return pop_u.denormalize(u1.forward(states).cwiseMin(u2.forward(states)));
  }

  std::vector<Param<S>*> q_params() {
    auto out = q1.params();
    for (auto* p : q2.params()) out.push_back(p);
    return out;
  }
  std::vector<Param<S>*> u_params() {
    auto out = u1.params();
    for (auto* p : u2.params()) out.push_back(p);
    return out;
  }

  void polyak(double tau) {
    auto upd = [tau](Mlp<S>& target, Mlp<S>& online) {
      std::vector<Param<S>*> t = target.params();
      std::vector<const Param<S>*> o;
      for (auto* p : online.params()) o.push_back(p);
      polyak_update<S>(t, o, tau);
    };
    upd(q1_t, q1);
    upd(q2_t, q2);
    upd(u1_t, u1);
    upd(u2_t, u2);
  }
};

// Per-row pieces of the Eq. 17 target that depend on current policies but
// carry no gradient.
template <typename S>
struct QTargetInputs {
  Vec<S> mi;        // pointwise MI at the stored option
  Vec<S> ell;       // TV penalty
  Vec<S> log_post;  // log p(z|s,a)
  S batch_mi = S(0);  // batch estimate of I(z; s,a)
  S mean_tv = S(0);
};

template <typename S>
QTargetInputs<S> compute_q_target_inputs(const LowLevelPolicy<S>& low,
                                         const HighLevelPolicy<S>& high,
                                         const TransitionBatch<S>& batch,
                                         const NoiseSpec& noise, Rng& rng,
                                         IntrinsicStats* stats = nullptr) {
  Mat<S> post = option_posterior(low, high, batch.s, batch.a, stats);
  RowVec<S> marg = batch_marginal(post);
  QTargetInputs<S> out;
  out.mi = pointwise_mi(post, marg, batch.z);
  out.ell = tv_penalty(low, high, batch.s, batch.a, noise, rng, stats);
  out.log_post.resize(batch.size());
  for (Eigen::Index i = 0; i < batch.size(); ++i)
    out.log_post(i) =
        std::log(std::max(post(i, batch.z[size_t(i)]), S(kProbFloor)));
  out.batch_mi = batch_mi_estimate(post, marg);
  out.mean_tv = out.ell.mean();
  return out;
}

// y = r + alpha*(l1*mi - l2*ell - log p(z|s,a))
//       + (1-done)*gamma*sum_z' pi_h(z'|s',z)*(minU_t(s',z') - alpha*log pi_h)
template <typename S>
Vec<S> compute_q_target(const CriticEnsemble<S>& ens, const HighLevelPolicy<S>& high,
                        const TransitionBatch<S>& batch, const QTargetInputs<S>& intr,
                        double alpha, double gamma, double lambda1, double lambda2) {
  Eigen::Index B = batch.size();
  Mat<S> pi_h = high.probs(batch.s_next, batch.z);
  Mat<S> u_t = ens.u_min_target(batch.s_next);

  Vec<S> y(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    double rowsum = double(pi_h.row(i).sum());
    if (std::abs(rowsum - 1.0) > 1e-6)
      throw ContractViolation("q_target: option distribution not normalized");
    double future = 0.0;
    for (int zp = 0; zp < ens.num_options; ++zp) {
      double p = double(pi_h(i, zp));
      if (p <= 0.0) continue;
      future += p * (double(u_t(i, zp)) - alpha * std::log(p));
    }
    double yi = double(batch.r(i)) +
                alpha * (lambda1 * double(intr.mi(i)) -
                         lambda2 * double(intr.ell(i)) - double(intr.log_post(i))) +
                (1.0 - double(batch.done(i))) * gamma * future;
    if (!std::isfinite(yi)) {
      std::ostringstream os;
      os << "q_target: non-finite target at row " << i << " (r=" << batch.r(i)
         << " mi=" << intr.mi(i) << " ell=" << intr.ell(i)
         << " log_post=" << intr.log_post(i) << " future=" << future << ")";
      throw TrainingFault(os.str());
    }
    y(i) = S(yi);
  }
  return y;
}

// 1/2 * mean((Q_i - y_norm)^2) summed over both twins; accumulates grads.
template <typename S>
S q_regression_loss(CriticEnsemble<S>& ens, const TransitionBatch<S>& batch,
                    const Vec<S>& y, bool do_backward = true) {
  Mat<S> in = ens.q_input(batch.s, batch.z, batch.a);
  Vec<S> yn = ens.pop_q.normalize(y);
  Tape<S> t;
  auto target = t.input(Mat<S>(yn));
  auto l1 = t.scale(t.mean_all(t.square(t.sub(ens.q1.forward(t, t.input(in)), target))), S(0.5));
  auto l2 = t.scale(t.mean_all(t.square(t.sub(ens.q2.forward(t, t.input(in)), target))), S(0.5));
  auto loss = t.add(l1, l2);
  if (do_backward) t.backward(loss);
  return t.value(loss)(0, 0);
}

// target = min_j Q_online_j(s, z, a~) - alpha*log pi_l(a~|s,z), one fresh
// reparameterized sample per row.
template <typename S>
Vec<S> compute_u_target(const CriticEnsemble<S>& ens, const LowLevelPolicy<S>& low,
                        const Mat<S>& states, const std::vector<int>& z,
                        double alpha, const Mat<S>& eps) {
  Mat<S> a, logp;
  low.sample_with_eps(states, z, eps, a, logp);
  Mat<S> qmin = ens.q_min_online(states, z, a);
  Vec<S> y(states.rows());
  for (Eigen::Index i = 0; i < states.rows(); ++i) {
    double yi = double(qmin(i, 0)) - alpha * double(logp(i, 0));
    if (!std::isfinite(yi)) {
      std::ostringstream os;
      os << "u_target: non-finite target at row " << i << " (qmin=" << qmin(i, 0)
         << " logp=" << logp(i, 0) << ")";
      throw TrainingFault(os.str());
    }
    y(i) = S(yi);
  }
  return y;
}

template <typename S>
Vec<S> compute_u_target(const CriticEnsemble<S>& ens, const LowLevelPolicy<S>& low,
                        const Mat<S>& states, const std::vector<int>& z,
                        double alpha, Rng& rng) {
  Mat<S> eps(states.rows(), low.action_dim);
  std::normal_distribution<double> N(0.0, 1.0);
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = S(N(rng));
  return compute_u_target(ens, low, states, z, alpha, eps);
}

template <typename S>
S u_regression_loss(CriticEnsemble<S>& ens, const Mat<S>& states,
                    const std::vector<int>& z, const Vec<S>& y,
                    bool do_backward = true) {
  Eigen::Index B = states.rows();
  Mat<S> zmask = Mat<S>::Zero(B, ens.num_options);
  for (Eigen::Index i = 0; i < B; ++i) {
    int zi = z[size_t(i)];
    if (zi < 0 || zi >= ens.num_options) throw ContractViolation("u_loss: bad option");
    zmask(i, zi) = S(1);
  }
  Vec<S> yn = ens.pop_u.normalize(y);
  Tape<S> t;
  auto target = t.input(Mat<S>(yn));
  auto mask = t.input(zmask);
  auto sin = t.input(states);
  auto sel1 = t.rowwise_sum(t.mul(ens.u1.forward(t, sin), mask));
  auto sel2 = t.rowwise_sum(t.mul(ens.u2.forward(t, sin), mask));
  auto l1 = t.scale(t.mean_all(t.square(t.sub(sel1, target))), S(0.5));
  auto l2 = t.scale(t.mean_all(t.square(t.sub(sel2, target))), S(0.5));
  auto loss = t.add(l1, l2);
  if (do_backward) t.backward(loss);
  return t.value(loss)(0, 0);
}

}  // namespace soac
