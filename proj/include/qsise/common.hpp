#pragma once

// Shared numeric helpers and the error hierarchy used across the library.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace qsise {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structurally inconsistent inputs (matrix dimension mismatch).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be (semi)definite failed factorization, even after a
/// single jitter retry.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

/// rank(CG) = m does not hold numerically at run time.
class RankError : public Error {
 public:
  using Error::Error;
};

/// Every raw mixture weight underflowed during a measurement update.
class DegenerateUpdateError : public Error {
 public:
  using Error::Error;
};

/// Explicit partition does not contain the queried point.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// Level not present in the quantizer.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Degenerate quantization cell (zero width).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Test-only exact integration path failed.
class OracleError : public Error {
 public:
  using Error::Error;
};

/// Configuration file cannot be parsed or validated.
class ConfigError : public Error {
 public:
  using Error::Error;
};

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// log(sum(exp(v))) without overflow; -inf for empty input.
inline double log_sum_exp(std::span<const double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

/// Cholesky factorization with a single jitter retry (1e-9 * trace / dim on
/// the diagonal). Throws ConditioningError if the retry also fails.
class CholFactor {
 public:
  explicit CholFactor(const Matrix& s, const char* what = "matrix") {
    llt_.compute(s);
    if (llt_.info() != Eigen::Success) {
      const double jitter = 1e-9 * s.trace() / static_cast<double>(s.rows());
      Matrix sj = s + jitter * Matrix::Identity(s.rows(), s.cols());
      llt_.compute(sj);
      if (llt_.info() != Eigen::Success) {
        throw ConditioningError(std::string(what) + " is not positive definite");
      }
    }
  }

  Matrix solve(const Matrix& b) const { return llt_.solve(b); }
  Vector solve(const Vector& b) const { return llt_.solve(b); }

  double log_det() const {
    return 2.0 * llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
  }

  /// log N(x; mean, S) for the factored S.
  double log_gauss(const Vector& x, const Vector& mean) const {
    const Vector r = x - mean;
    const Vector u = llt_.matrixL().solve(r);
    const double k = static_cast<double>(x.size());
    return -0.5 * (k * std::log(2.0 * M_PI) + log_det() + u.squaredNorm());
  }

 private:
  Eigen::LLT<Matrix> llt_;
};

/// Smallest eigenvalue of a symmetric matrix (self-adjoint solver).
inline double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace qsise
