#pragma once

// Fixed-capacity ring buffer of transitions with uniform sampling.

#include "soac/batch.hpp"

#include <cstddef>
#include <vector>

namespace soac {

template <typename S>
struct Transition {
  Vec<S> s;
  int z_prev = kNoOption;
  int z = 0;
  Vec<S> a;
  S r = S(0);
  Vec<S> s_next;
  bool done = false;
};

template <typename S>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay: capacity must be positive");
    data_.reserve(std::min<size_t>(capacity, size_t(1) << 16));
  }

  size_t capacity() const { return capacity_; }
  size_t size() const { return data_.size(); }

  void add(Transition<S> t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[cursor_] = std::move(t);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  const Transition<S>& at(size_t i) const { return data_.at(i); }

  TransitionBatch<S> sample(int batch_size, Rng& rng) const {
    if (batch_size <= 0) throw ConfigError("replay: batch size must be positive");
    if (data_.empty()) throw ContractViolation("replay: sampling from empty buffer");
    std::uniform_int_distribution<size_t> pick(0, data_.size() - 1);
    const Transition<S>& probe = data_[0];
    int sd = int(probe.s.size()), ad = int(probe.a.size());

    TransitionBatch<S> b;
    b.s.resize(batch_size, sd);
    b.a.resize(batch_size, ad);
    b.s_next.resize(batch_size, sd);
    b.r.resize(batch_size);
    b.done.resize(batch_size);
    b.z_prev.reserve(size_t(batch_size));
    b.z.reserve(size_t(batch_size));
    for (int i = 0; i < batch_size; ++i) {
      const Transition<S>& t = data_[pick(rng)];
      b.s.row(i) = t.s.transpose();
      b.a.row(i) = t.a.transpose();
      b.s_next.row(i) = t.s_next.transpose();
      b.r(i) = t.r;
      b.done(i) = t.done ? S(1) : S(0);
      b.z_prev.push_back(t.z_prev);
      b.z.push_back(t.z);
    }
    return b;
  }

 private:
  size_t capacity_;
  size_t cursor_ = 0;
  std::vector<Transition<S>> data_;
};

}  // namespace soac
