#pragma once

// Reverse-mode autodiff over batched matrices. One Tape records one forward
// pass; backward() walks the recorded graph in reverse and accumulates
// gradients into the Param leaves that were touched.

#include "soac/mat.hpp"

#include <cassert>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

namespace soac {

template <typename S>
struct Param {
  Mat<S> value;
  Mat<S> grad;

  explicit Param(Mat<S> v) : value(std::move(v)) {
    grad = Mat<S>::Zero(value.rows(), value.cols());
  }
  Param() = default;

  void zero_grad() { grad.setZero(); }
};

template <typename S>
class Tape {
 public:
  using Var = int;

  void clear() {
    nodes_.clear();
    leaves_.clear();
  }

  int size() const { return static_cast<int>(nodes_.size()); }

  const Mat<S>& value(Var i) const { return nodes_[i].value; }

  // Constant w.r.t. differentiation.
  Var input(Mat<S> v) { return push(std::move(v), false, nullptr); }

  // Tracked leaf: backward() accumulates into p.grad.
  Var leaf(Param<S>& p) {
    Var i = push(p.value, true, nullptr);
    leaves_.emplace_back(i, &p);
    return i;
  }

  // Parameter used in the graph but held constant (gradients still flow
  // through to other inputs of ops that consume it).
  Var leaf_frozen(const Param<S>& p) { return input(p.value); }

  Var matmul(Var x, Var w) {
    const Mat<S>& X = val(x);
    const Mat<S>& W = val(w);
    if (X.cols() != W.rows()) throw ContractViolation("matmul: inner dims disagree");
    Mat<S> y = X * W;
    return push(std::move(y), needs(x) || needs(w), [x, w](Tape& t, Var self) {
      const Mat<S>& g = t.grad_ref(self);
      if (t.needs(x)) t.grad_acc(x).noalias() += g * t.val(w).transpose();
      if (t.needs(w)) t.grad_acc(w).noalias() += t.val(x).transpose() * g;
    });
  }

  // x: [B,D], b: [1,D] broadcast over rows.
  Var add_rowvec(Var x, Var b) {
    const Mat<S>& X = val(x);
    const Mat<S>& Bm = val(b);
    if (Bm.rows() != 1 || Bm.cols() != X.cols())
      throw ContractViolation("add_rowvec: bias shape");
    Mat<S> y = X.rowwise() + Bm.row(0);
    return push(std::move(y), needs(x) || needs(b), [x, b](Tape& t, Var self) {
      const Mat<S>& g = t.grad_ref(self);
      if (t.needs(x)) t.grad_acc(x) += g;
      if (t.needs(b)) t.grad_acc(b).row(0) += g.colwise().sum();
    });
  }

  // x: [B,D], c: [B,1] broadcast over columns.
  Var mul_colvec(Var x, Var c) {
    const Mat<S>& X = val(x);
    const Mat<S>& C = val(c);
    if (C.cols() != 1 || C.rows() != X.rows())
      throw ContractViolation("mul_colvec: column shape");
    Mat<S> y = X.array().colwise() * C.col(0).array();
    return push(std::move(y), needs(x) || needs(c), [x, c](Tape& t, Var self) {
      const Mat<S>& g = t.grad_ref(self);
      if (t.needs(x))
        t.grad_acc(x).array() += g.array().colwise() * t.val(c).col(0).array();
      if (t.needs(c))
        t.grad_acc(c).col(0) += (g.array() * t.val(x).array()).rowwise().sum().matrix();
    });
  }

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    Mat<S> y = val(a) + val(b);
    return push(std::move(y), needs(a) || needs(b), [a, b](Tape& t, Var self) {
      const Mat<S>& g = t.grad_ref(self);
      if (t.needs(a)) t.grad_acc(a) += g;
      if (t.needs(b)) t.grad_acc(b) += g;
    });
  }

  Var sub(Var a, Var b) {
    check_same(a, b, "sub");
    Mat<S> y = val(a) - val(b);
    return push(std::move(y), needs(a) || needs(b), [a, b](Tape& t, Var self) {
      const Mat<S>& g = t.grad_ref(self);
      if (t.needs(a)) t.grad_acc(a) += g;
      if (t.needs(b)) t.grad_acc(b) -= g;
    });
  }

  Var mul(Var a, Var b) {
    check_same(a, b, "mul");
    Mat<S> y = val(a).array() * val(b).array();
    return push(std::move(y), needs(a) || needs(b), [a, b](Tape& t, Var self) {
      const Mat<S>& g = t.grad_ref(self);
      if (t.needs(a)) t.grad_acc(a).array() += g.array() * t.val(b).array();
      if (t.needs(b)) t.grad_acc(b).array() += g.array() * t.val(a).array();
    });
  }

  Var scale(Var x, S c) {
    Mat<S> y = val(x) * c;
    return push(std::move(y), needs(x), [x, c](Tape& t, Var self) {
      if (t.needs(x)) t.grad_acc(x) += t.grad_ref(self) * c;
    });
  }

  Var add_scalar(Var x, S c) {
    Mat<S> y = val(x).array() + c;
    return push(std::move(y), needs(x), [x](Tape& t, Var self) {
      if (t.needs(x)) t.grad_acc(x) += t.grad_ref(self);
    });
  }

  Var relu(Var x) {
    Mat<S> y = val(x).cwiseMax(S(0));
    return push(std::move(y), needs(x), [x](Tape& t, Var self) {
      if (!t.needs(x)) return;
      t.grad_acc(x).array() +=
          t.grad_ref(self).array() * (t.val(x).array() > S(0)).template cast<S>();
    });
  }

  Var tanh_(Var x) {
    Mat<S> y = val(x).array().tanh();
    return push(std::move(y), needs(x), [x](Tape& t, Var self) {
      if (!t.needs(x)) return;
      const auto& y2 = t.val(self).array();
      t.grad_acc(x).array() += t.grad_ref(self).array() * (S(1) - y2 * y2);
    });
  }

  Var sigmoid(Var x) {
    Mat<S> y = (S(1) / (S(1) + (-val(x).array()).exp())).matrix();
    return push(std::move(y), needs(x), [x](Tape& t, Var self) {
      if (!t.needs(x)) return;
      const auto& s = t.val(self).array();
      t.grad_acc(x).array() += t.grad_ref(self).array() * s * (S(1) - s);
    });
  }

  Var exp_(Var x) {
    Mat<S> y = val(x).array().exp();
    return push(std::move(y), needs(x), [x](Tape& t, Var self) {
      if (t.needs(x))
        t.grad_acc(x).array() += t.grad_ref(self).array() * t.val(self).array();
    });
  }

  Var log_(Var x) {
    Mat<S> y = val(x).array().log();
    return push(std::move(y), needs(x), [x](Tape& t, Var self) {
      if (t.needs(x))
        t.grad_acc(x).array() += t.grad_ref(self).array() / t.val(x).array();
    });
  }

  // log(1 + exp(x)), overflow-safe.
  Var softplus(Var x) {
    Mat<S> y = val(x).array().unaryExpr([](S v) {
      return v > S(30) ? v : std::log1p(std::exp(v));
    });
    return push(std::move(y), needs(x), [x](Tape& t, Var self) {
      if (!t.needs(x)) return;
      const auto& xv = t.val(x).array();
      t.grad_acc(x).array() +=
          t.grad_ref(self).array() * (S(1) / (S(1) + (-xv).exp()));
    });
  }

  Var square(Var x) {
    Mat<S> y = val(x).array().square();
    return push(std::move(y), needs(x), [x](Tape& t, Var self) {
      if (t.needs(x))
        t.grad_acc(x).array() += t.grad_ref(self).array() * S(2) * t.val(x).array();
    });
  }

  // Subgradient convention: gradient passes on the closed interval.
  Var clamp(Var x, S lo, S hi) {
    Mat<S> y = val(x).cwiseMax(lo).cwiseMin(hi);
    return push(std::move(y), needs(x), [x, lo, hi](Tape& t, Var self) {
      if (!t.needs(x)) return;
      const auto& xv = t.val(x).array();
      auto pass = (xv >= lo && xv <= hi).template cast<S>();
      t.grad_acc(x).array() += t.grad_ref(self).array() * pass;
    });
  }

  Var cwise_max_scalar(Var x, S lo) {
    Mat<S> y = val(x).cwiseMax(lo);
    return push(std::move(y), needs(x), [x, lo](Tape& t, Var self) {
      if (!t.needs(x)) return;
      const auto& xv = t.val(x).array();
      t.grad_acc(x).array() +=
          t.grad_ref(self).array() * (xv >= lo).template cast<S>();
    });
  }

  // Elementwise min of two same-shape matrices; ties route gradient to a.
  Var cwise_min(Var a, Var b) {
    check_same(a, b, "cwise_min");
    Mat<S> y = val(a).cwiseMin(val(b));
    return push(std::move(y), needs(a) || needs(b), [a, b](Tape& t, Var self) {
      const Mat<S>& g = t.grad_ref(self);
      auto amask = (t.val(a).array() <= t.val(b).array()).template cast<S>();
      if (t.needs(a)) t.grad_acc(a).array() += g.array() * amask;
      if (t.needs(b)) t.grad_acc(b).array() += g.array() * (S(1) - amask);
    });
  }

  Var softmax_rows(Var x) {
    const Mat<S>& X = val(x);
    Mat<S> y(X.rows(), X.cols());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      RowVec<S> row = X.row(r);
      S m = row.maxCoeff();
      RowVec<S> e = (row.array() - m).exp();
      y.row(r) = e / e.sum();
    }
    return push(std::move(y), needs(x), [x](Tape& t, Var self) {
      if (!t.needs(x)) return;
      const Mat<S>& p = t.val(self);
      const Mat<S>& g = t.grad_ref(self);
      Vec<S> dot = (g.array() * p.array()).rowwise().sum();
      t.grad_acc(x).array() += (g.array().colwise() - dot.array()) * p.array();
    });
  }

  Var concat_cols(const std::vector<Var>& xs) {
    if (xs.empty()) throw ContractViolation("concat_cols: empty");
    Eigen::Index rows = val(xs[0]).rows(), cols = 0;
    bool any = false;
    for (Var v : xs) {
      if (val(v).rows() != rows) throw ContractViolation("concat_cols: row mismatch");
      cols += val(v).cols();
      any = any || needs(v);
    }
    Mat<S> y(rows, cols);
    Eigen::Index off = 0;
    for (Var v : xs) {
      y.middleCols(off, val(v).cols()) = val(v);
      off += val(v).cols();
    }
    return push(std::move(y), any, [xs](Tape& t, Var self) {
      const Mat<S>& g = t.grad_ref(self);
      Eigen::Index off = 0;
      for (Var v : xs) {
        Eigen::Index w = t.val(v).cols();
        if (t.needs(v)) t.grad_acc(v) += g.middleCols(off, w);
        off += w;
      }
    });
  }

  Var rowwise_sum(Var x) {
    Mat<S> y = val(x).rowwise().sum();
    return push(std::move(y), needs(x), [x](Tape& t, Var self) {
      if (!t.needs(x)) return;
      const Mat<S>& g = t.grad_ref(self);
      t.grad_acc(x).colwise() += g.col(0);
    });
  }

  Var mean_all(Var x) {
    Mat<S> y(1, 1);
    y(0, 0) = val(x).mean();
    Eigen::Index n = val(x).size();
    return push(std::move(y), needs(x), [x, n](Tape& t, Var self) {
      if (t.needs(x))
        t.grad_acc(x).array() += t.grad_ref(self)(0, 0) / S(n);
    });
  }

  Var sum_all(Var x) {
    Mat<S> y(1, 1);
    y(0, 0) = val(x).sum();
    return push(std::move(y), needs(x), [x](Tape& t, Var self) {
      if (t.needs(x)) t.grad_acc(x).array() += t.grad_ref(self)(0, 0);
    });
  }

  // Seeds d(loss)/d(loss) = 1 and accumulates into every touched Param's grad.
  void backward(Var loss) {
    if (val(loss).rows() != 1 || val(loss).cols() != 1)
      throw ContractViolation("backward: loss is not scalar");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    nodes_[loss].grad = Mat<S>::Ones(1, 1);
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.requires_grad || !n.back || n.grad.size() == 0) continue;
      n.back(*this, i);
    }
    for (auto& [idx, p] : leaves_) {
      if (nodes_[idx].grad.size() != 0) p->grad += nodes_[idx].grad;
    }
  }

 private:
  struct Node {
    Mat<S> value;
    Mat<S> grad;
    bool requires_grad = false;
    std::function<void(Tape&, Var)> back;
  };

  std::vector<Node> nodes_;
  std::vector<std::pair<int, Param<S>*>> leaves_;

  const Mat<S>& val(Var i) const { return nodes_[i].value; }
  bool needs(Var i) const { return nodes_[i].requires_grad; }

  const Mat<S>& grad_ref(Var i) const { return nodes_[i].grad; }

  Mat<S>& grad_acc(Var i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) n.grad = Mat<S>::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void check_same(Var a, Var b, const char* op) {
    if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols())
      throw ContractViolation(std::string(op) + ": shape mismatch");
  }

  template <typename F>
  Var push(Mat<S> v, bool req, F&& back) {
    Node n;
    n.value = std::move(v);
    n.requires_grad = req;
    if constexpr (!std::is_same_v<std::decay_t<F>, std::nullptr_t>) {
      if (req) n.back = std::forward<F>(back);
    }
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  Var push(Mat<S> v, bool req, std::nullptr_t) {
    Node n;
    n.value = std::move(v);
    n.requires_grad = req;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }
};

}  // namespace soac
