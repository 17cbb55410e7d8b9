#pragma once

// Deterministic random number generation. Gaussian draws are produced by an
// explicit Box-Muller transform over mt19937_64 output so that results do not
// depend on the standard library's unspecified normal_distribution algorithm.

#include "qsise/common.hpp"

#include <cstdint>
#include <random>

namespace qsise {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Seed-splitting rule: child seed i of a master seed is the i-th iterate of
/// splitmix64 started at master ^ (i+1). Runs seeded this way are independent
/// of scheduling order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master ^ (stream + 1);
  splitmix64(s);
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform on (0, 1].
  double uniform01() {
    return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
  }

  double gaussian() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Vector gaussian_vector(Index k) {
    Vector v(k);
    for (Index i = 0; i < k; ++i) v(i) = gaussian();
    return v;
  }

 private:
  std::mt19937_64 eng_;
};

/// Symmetric PSD square root via eigendecomposition, negative eigenvalues
/// clamped to zero. Handles semidefinite covariances (including exact zeros).
inline Matrix matrix_sqrt_psd(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
  Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

inline Vector sample_gaussian(const Vector& mean, const Matrix& cov, Rng& rng) {
  return mean + matrix_sqrt_psd(cov) * rng.gaussian_vector(mean.size());
}

}  // namespace qsise
