#pragma once

// Brute-force soft value tables over a TabularMDP: the backup
//   Q <- R + b + gamma*P*V
//   U <- alpha * log sum_a exp(Q/alpha)
//   V <- alpha * log sum_z exp(U/alpha)
// iterated to a fixed point, the softmax policies it induces, and
// message-space residual checks. Priors are the constant-1 convention, so
// the aggregations are plain sums.

#include "soac/tabular.hpp"

#include <json.hpp>

#include <vector>

namespace soac {

struct IntrinsicTable {
  std::vector<Matd> b;  // per option: [S,A]

  static IntrinsicTable zeros(int n_states, int n_actions, int n_options) {
    IntrinsicTable t;
    t.b.assign(size_t(n_options), Matd::Zero(n_states, n_actions));
    return t;
  }

  void validate(int S, int A) const {
    for (const auto& m : b) {
      if (m.rows() != S || m.cols() != A)
        throw ConfigError("intrinsic table: shape mismatch");
      if (!m.allFinite()) throw ConfigError("intrinsic table: non-finite bonus");
    }
  }
};

struct SoftValueTables {
  std::vector<Matd> Q;  // per option: [S,A]
  Matd U;               // [S,Z]
  Vecd V;               // [S]
  double alpha = 1.0;
  int iterations = 0;
  double final_residual = 0.0;
};

inline double lse_row_sum(const RowVec<double>& x, double alpha) {
  double m = x.maxCoeff();
  return alpha * (std::log((x.array() / alpha - m / alpha).exp().sum()) + m / alpha);
}

inline SoftValueTables soft_value_iteration(const TabularMDP& mdp,
                                            const IntrinsicTable& intr,
                                            int n_options, double alpha,
                                            double tol, long max_iter = 1000000,
                                            std::vector<double>* residual_history = nullptr) {
  mdp.validate();
  if (n_options < 1) throw ConfigError("oracle: need at least one option");
  if (!(alpha > 0.0)) throw ConfigError("oracle: alpha must be positive");
  if (!(tol > 0.0)) throw ConfigError("oracle: tol must be positive");
  intr.validate(mdp.n_states, mdp.n_actions);

  int S = mdp.n_states, A = mdp.n_actions, Z = n_options;
  SoftValueTables t;
  t.alpha = alpha;
  t.Q.assign(size_t(Z), Matd::Zero(S, A));
  t.U = Matd::Zero(S, Z);
  t.V = Vecd::Zero(S);

  double resid_at_burnin = std::numeric_limits<double>::infinity();
  for (long it = 1; it <= max_iter; ++it) {
    // Q backup under the current V
    std::vector<Matd> Qn(static_cast<size_t>(Z));
    Matd PV(S, A);  // sum_s' P[a](s,s') V(s')
    for (int a = 0; a < A; ++a) PV.col(a) = mdp.P[size_t(a)] * t.V;
    for (int z = 0; z < Z; ++z) Qn[size_t(z)] = mdp.R + intr.b[size_t(z)] + mdp.gamma * PV;

    Matd Un(S, Z);
    for (int s = 0; s < S; ++s)
      for (int z = 0; z < Z; ++z)
        Un(s, z) = lse_row_sum(Qn[size_t(z)].row(s), alpha);

    Vecd Vn(S);
    for (int s = 0; s < S; ++s) Vn(s) = lse_row_sum(Un.row(s), alpha);

    double resid = (Vn - t.V).cwiseAbs().maxCoeff();
    resid = std::max(resid, (Un - t.U).cwiseAbs().maxCoeff());
    for (int z = 0; z < Z; ++z)
      resid = std::max(resid, (Qn[size_t(z)] - t.Q[size_t(z)]).cwiseAbs().maxCoeff());

    t.Q = std::move(Qn);
    t.U = std::move(Un);
    t.V = std::move(Vn);
    t.iterations = int(it);
    t.final_residual = resid;
    if (residual_history) residual_history->push_back(resid);

    if (!std::isfinite(resid))
      throw TrainingFault("oracle: non-finite residual during value iteration");
    if (it == 10) resid_at_burnin = resid;
    if (it > 10000 && resid > resid_at_burnin)
      throw TrainingFault("oracle: residual growing, value iteration diverges");
    if (resid < tol) return t;
  }
  throw TrainingFault("oracle: value iteration did not reach tolerance");
}

struct OptimalPolicies {
  Matd pi_h;                // [S,Z]
  std::vector<Matd> pi_l;   // per option: [S,A]
};

inline OptimalPolicies optimal_policies_from_tables(const SoftValueTables& t) {
  int S = int(t.V.size());
  int Z = int(t.U.cols());
  OptimalPolicies p;
  p.pi_h.resize(S, Z);
  for (int s = 0; s < S; ++s)
    for (int z = 0; z < Z; ++z)
      p.pi_h(s, z) = std::exp((t.U(s, z) - t.V(s)) / t.alpha);
  p.pi_l.assign(size_t(Z), Matd());
  for (int z = 0; z < Z; ++z) {
    const Matd& Q = t.Q[size_t(z)];
    Matd pl(S, Q.cols());
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < Q.cols(); ++a)
        pl(s, a) = std::exp((Q(s, a) - t.U(s, z)) / t.alpha);
    p.pi_l[size_t(z)] = std::move(pl);
  }
  for (int s = 0; s < S; ++s) {
    if (std::abs(p.pi_h.row(s).sum() - 1.0) > 1e-9)
      throw ContractViolation("oracle: high policy row not normalized");
    for (int z = 0; z < Z; ++z)
      if (std::abs(p.pi_l[size_t(z)].row(s).sum() - 1.0) > 1e-9)
        throw ContractViolation("oracle: low policy row not normalized");
  }
  return p;
}

struct ResidualReport {
  double eq12 = 0.0;  // state message vs option sum
  double eq13 = 0.0;  // option message vs action sum
  double eq14 = 0.0;  // action message vs optimality times discounted future
  double max_residual = 0.0;

  nlohmann::json to_json() const {
    return {{"eq12_state_vs_option_sum", eq12},
            {"eq13_option_vs_action_sum", eq13},
            {"eq14_action_vs_backup", eq14},
            {"max_residual", max_residual}};
  }
};

inline ResidualReport verify_message_relations(const TabularMDP& mdp,
                                               const IntrinsicTable& intr,
                                               const SoftValueTables& t) {
  mdp.validate();
  int S = mdp.n_states, A = mdp.n_actions, Z = int(t.U.cols());
  double alpha = t.alpha;
  ResidualReport rep;

  // messages
  Vecd beta_s(S);
  for (int s = 0; s < S; ++s) beta_s(s) = std::exp(t.V(s) / alpha);
  Matd beta_sz(S, Z);
  for (int s = 0; s < S; ++s)
    for (int z = 0; z < Z; ++z) beta_sz(s, z) = std::exp(t.U(s, z) / alpha);

  for (int s = 0; s < S; ++s) {
    double lhs = beta_s(s);
    double rhs = beta_sz.row(s).sum();
    rep.eq12 = std::max(rep.eq12, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
  }

  Matd PV(S, A);
  for (int a = 0; a < A; ++a) PV.col(a) = mdp.P[size_t(a)] * t.V;
  for (int z = 0; z < Z; ++z) {
    for (int s = 0; s < S; ++s) {
      double row_sum = 0.0;
      for (int a = 0; a < A; ++a) {
        double beta_sza = std::exp(t.Q[size_t(z)](s, a) / alpha);
        row_sum += beta_sza;
        double opt_lik =
            std::exp((mdp.R(s, a) + intr.b[size_t(z)](s, a)) / alpha);
        double future = std::exp(mdp.gamma * PV(s, a) / alpha);
        double rhs = opt_lik * future;
        rep.eq14 = std::max(rep.eq14, std::abs(beta_sza - rhs) /
                                          std::max(1.0, std::abs(beta_sza)));
      }
      rep.eq13 = std::max(rep.eq13, std::abs(beta_sz(s, z) - row_sum) /
                                        std::max(1.0, std::abs(beta_sz(s, z))));
    }
  }
  rep.max_residual = std::max({rep.eq12, rep.eq13, rep.eq14});
  return rep;
}

}  // namespace soac
