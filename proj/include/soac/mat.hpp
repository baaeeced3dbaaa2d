#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace soac {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

using Matf = Mat<float>;
using Matd = Mat<double>;
using Vecf = Vec<float>;
using Vecd = Vec<double>;

using Rng = std::mt19937;

// Deterministic sub-stream derivation so independent components (env, action
// sampling, noise, replay) never share a generator.
inline Rng derive_rng(uint32_t seed, uint32_t stream) {
  uint64_t x = (uint64_t(seed) << 32) ^ (uint64_t(stream) * 0x9E3779B97F4A7C15ull);
  x ^= x >> 30; x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27; x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return Rng(static_cast<uint32_t>(x));
}

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

struct TrainingFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PolicyFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EnvFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace soac
