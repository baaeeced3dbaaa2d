#pragma once

#include "soac/tape.hpp"

#include <vector>

namespace soac {

template <typename S>
struct AdamState {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  std::vector<Mat<S>> m;
  std::vector<Mat<S>> v;

  static AdamState make(const std::vector<Param<S>*>& params, double lr) {
    AdamState st;
    st.lr = lr;
    for (auto* p : params) {
      st.m.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
      st.v.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
    }
    return st;
  }

  void step(const std::vector<Param<S>*>& params) {
    if (params.size() != m.size()) throw ContractViolation("adam: param count changed");
    ++step_count;
    double bc1 = 1.0 - std::pow(beta1, double(step_count));
    double bc2 = 1.0 - std::pow(beta2, double(step_count));
    for (size_t i = 0; i < params.size(); ++i) {
      Param<S>& p = *params[i];
      if (!all_finite(p.grad))
        throw TrainingFault("adam: non-finite gradient");
      m[i] = S(beta1) * m[i] + S(1.0 - beta1) * p.grad;
      v[i] = S(beta2) * v[i].array() + S(1.0 - beta2) * p.grad.array().square();
      auto mhat = m[i].array() / S(bc1);
      auto vhat = v[i].array() / S(bc2);
      p.value.array() -= S(lr) * mhat / (vhat.sqrt() + S(eps));
    }
  }
};

// target <- tau * online + (1 - tau) * target
template <typename S>
void polyak_update(const std::vector<Param<S>*>& target,
                   const std::vector<const Param<S>*>& online, double tau) {
  if (!(tau > 0.0) || tau > 1.0) throw ConfigError("polyak: tau outside (0,1]");
  if (online.size() != target.size()) throw ContractViolation("polyak: param count");
  for (size_t i = 0; i < online.size(); ++i) {
    if (online[i]->value.rows() != target[i]->value.rows() ||
        online[i]->value.cols() != target[i]->value.cols())
      throw ContractViolation("polyak: shape mismatch");
    target[i]->value = S(tau) * online[i]->value + S(1.0 - tau) * target[i]->value;
  }
}

// Returns the pre-clip global norm. max_norm <= 0 disables clipping.
template <typename S>
double clip_grad_norm(const std::vector<Param<S>*>& params, double max_norm) {
  double sq = 0.0;
  for (auto* p : params) sq += double(p->grad.squaredNorm());
  double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    S scale = S(max_norm / (norm + 1e-12));
    for (auto* p : params) p->grad *= scale;
  }
  return norm;
}

template <typename S>
void zero_grads(const std::vector<Param<S>*>& params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace soac
