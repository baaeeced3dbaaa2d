#pragma once

// Actor objectives for both levels. The option-selection loss takes the exact
// expectation over options; the action loss uses one reparameterized sample.
// Critic values enter as constants (option level) or through frozen
// parameters (action level), so only policy weights receive gradients.

#include "soac/critics.hpp"
#include "soac/option_policy.hpp"

namespace soac {

// mean over batch of pi_h(.|s,z_prev)^T (alpha*log pi_h - min_i U_i(s,.))
template <typename S>
S high_policy_loss(HighLevelPolicy<S>& high, const CriticEnsemble<S>& ens,
                   const Mat<S>& states, const std::vector<int>& z_prev,
                   double alpha, bool do_backward = true) {
  Mat<S> u_const = ens.u_min_online(states);
  Tape<S> t;
  auto p = high.probs_taped(t, states, z_prev);
  auto logp = t.log_(t.cwise_max_scalar(p, S(kProbFloor)));
  auto inner = t.sub(t.scale(logp, S(alpha)), t.input(u_const));
  auto loss = t.mean_all(t.rowwise_sum(t.mul(p, inner)));
  if (do_backward) t.backward(loss);
  return t.value(loss)(0, 0);
}

// mean over batch of alpha*log pi_l(a~|s,z) - min_i Q_i(s,z,a~) with a~ the
// reparameterized sample driven by eps.
template <typename S>
S low_policy_loss(LowLevelPolicy<S>& low, const CriticEnsemble<S>& ens,
                  const Mat<S>& states, const std::vector<int>& z, double alpha,
                  const Mat<S>& eps, bool do_backward = true) {
  Eigen::Index B = states.rows();
  Mat<S> left = Mat<S>::Zero(B, ens.state_dim + ens.num_options);
  left.leftCols(ens.state_dim) = states;
  for (Eigen::Index i = 0; i < B; ++i) {
    int zi = z[size_t(i)];
    if (zi < 0 || zi >= ens.num_options)
      throw ContractViolation("low loss: bad option");
    left(i, ens.state_dim + zi) = S(1);
  }

  Tape<S> t;
  auto smp = low.sample_taped(t, states, z, eps);
  auto qin = t.concat_cols({t.input(left), smp.action});
  auto qmin_n = t.cwise_min(ens.q1.forward_frozen(t, qin),
                            ens.q2.forward_frozen(t, qin));
  // sigma > 0, so the min commutes with denormalization
  auto qmin = t.add_scalar(t.scale(qmin_n, S(ens.pop_q.sigma)), S(ens.pop_q.mu));
  auto loss = t.mean_all(t.sub(t.scale(smp.logp, S(alpha)), qmin));
  if (do_backward) t.backward(loss);
  return t.value(loss)(0, 0);
}

template <typename S>
S low_policy_loss(LowLevelPolicy<S>& low, const CriticEnsemble<S>& ens,
                  const Mat<S>& states, const std::vector<int>& z, double alpha,
                  Rng& rng, bool do_backward = true) {
  Mat<S> eps(states.rows(), low.action_dim);
  std::normal_distribution<double> N(0.0, 1.0);
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = S(N(rng));
  return low_policy_loss(low, ens, states, z, alpha, eps, do_backward);
}

}  // namespace soac
