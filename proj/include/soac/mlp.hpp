#pragma once

#include "soac/tape.hpp"

#include <vector>

namespace soac {

enum class Act { Identity, Relu, Tanh };

template <typename S>
struct Mlp {
  std::vector<Param<S>> W;
  std::vector<Param<S>> b;
  std::vector<Act> act;
  int in_dim = 0;
  int out_dim = 0;

  // Uniform +-1/sqrt(fan_in) init; if final_scale >= 0 the last layer is
  // drawn from +-final_scale instead (small heads keep early policies tame).
  static Mlp make(int in, const std::vector<int>& hidden, int out, Act hidden_act,
                  Act out_act, Rng& rng, double final_scale = -1.0) {
    if (in <= 0 || out <= 0) throw ConfigError("mlp: non-positive layer width");
    for (int h : hidden)
      if (h <= 0) throw ConfigError("mlp: non-positive hidden width");
    Mlp m;
    m.in_dim = in;
    m.out_dim = out;
    std::vector<int> dims;
    dims.push_back(in);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(out);
    size_t L = dims.size() - 1;
    for (size_t l = 0; l < L; ++l) {
      double bound = 1.0 / std::sqrt(double(dims[l]));
      if (l + 1 == L && final_scale >= 0.0) bound = final_scale;
      std::uniform_real_distribution<double> U(-bound, bound);
      Mat<S> w(dims[l], dims[l + 1]);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = S(U(rng));
      Mat<S> bias(1, dims[l + 1]);
      for (Eigen::Index i = 0; i < bias.size(); ++i) bias.data()[i] = S(U(rng));
      m.W.emplace_back(std::move(w));
      m.b.emplace_back(std::move(bias));
      m.act.push_back(l + 1 == L ? out_act : hidden_act);
    }
    return m;
  }

  Mat<S> forward(const Mat<S>& x) const {
    if (x.cols() != in_dim) throw ConfigError("mlp: input dim mismatch");
    Mat<S> h = x;
    for (size_t l = 0; l < W.size(); ++l) {
      Mat<S> z = h * W[l].value;
      z.rowwise() += b[l].value.row(0);
      h = apply_act(act[l], std::move(z));
    }
    return h;
  }

  typename Tape<S>::Var forward(Tape<S>& t, typename Tape<S>::Var x) {
    if (t.value(x).cols() != in_dim) throw ConfigError("mlp: input dim mismatch");
    auto h = x;
    for (size_t l = 0; l < W.size(); ++l) {
      h = t.add_rowvec(t.matmul(h, t.leaf(W[l])), t.leaf(b[l]));
      h = apply_act(t, act[l], h);
    }
    return h;
  }

  // Parameters constant; gradients still flow to the activations feeding in.
  typename Tape<S>::Var forward_frozen(Tape<S>& t, typename Tape<S>::Var x) const {
    if (t.value(x).cols() != in_dim) throw ConfigError("mlp: input dim mismatch");
    auto h = x;
    for (size_t l = 0; l < W.size(); ++l) {
      h = t.add_rowvec(t.matmul(h, t.leaf_frozen(W[l])), t.leaf_frozen(b[l]));
      h = apply_act(t, act[l], h);
    }
    return h;
  }

  std::vector<Param<S>*> params() {
    std::vector<Param<S>*> out;
    for (size_t l = 0; l < W.size(); ++l) {
      out.push_back(&W[l]);
      out.push_back(&b[l]);
    }
    return out;
  }

  std::vector<const Param<S>*> params() const {
    std::vector<const Param<S>*> out;
    for (size_t l = 0; l < W.size(); ++l) {
      out.push_back(&W[l]);
      out.push_back(&b[l]);
    }
    return out;
  }

  void copy_from(const Mlp& other) {
    if (W.size() != other.W.size()) throw ContractViolation("mlp copy: layer count");
    for (size_t l = 0; l < W.size(); ++l) {
      W[l].value = other.W[l].value;
      b[l].value = other.b[l].value;
    }
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

 private:
  static Mat<S> apply_act(Act a, Mat<S> z) {
    switch (a) {
      case Act::Identity: return z;
      case Act::Relu: return z.cwiseMax(S(0));
      case Act::Tanh: return z.array().tanh().matrix();
    }
    throw ContractViolation("mlp: unknown activation");
  }

  static typename Tape<S>::Var apply_act(Tape<S>& t, Act a, typename Tape<S>::Var z) {
    switch (a) {
      case Act::Identity: return z;
      case Act::Relu: return t.relu(z);
      case Act::Tanh: return t.tanh_(z);
    }
    throw ContractViolation("mlp: unknown activation");
  }
};

}  // namespace soac
