#pragma once

#include "soac/mat.hpp"

#include <vector>

namespace soac {

template <typename S>
struct TransitionBatch {
  Mat<S> s;
  std::vector<int> z_prev;  // kNoOption at episode starts
  std::vector<int> z;
  Mat<S> a;
  Vec<S> r;  // already reward-scaled
  Mat<S> s_next;
  Vec<S> done;  // 1 only at true terminals; horizon cuts stay 0

  Eigen::Index size() const { return s.rows(); }

  void check(int state_dim, int action_dim) const {
    Eigen::Index B = s.rows();
    if (B == 0) throw ContractViolation("batch: empty");
    if (s.cols() != state_dim || s_next.cols() != state_dim ||
        a.cols() != action_dim || s_next.rows() != B || a.rows() != B ||
        r.size() != B || done.size() != B ||
        Eigen::Index(z.size()) != B || Eigen::Index(z_prev.size()) != B)
      throw ContractViolation("batch: shape mismatch");
  }
};

}  // namespace soac
