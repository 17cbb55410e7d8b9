#pragma once

// System description, input prior, extended-state construction and the
// output quantizer geometry.

#include "qsise/common.hpp"

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace qsise {

/// Linear discrete-time system
///   x[t+1] = A x[t] + G d[t] + w[t],   w ~ N(0, Q)
///   z[t]   = C x[t] + v[t],            v ~ N(0, R)
/// with Gaussian initial state x[1] ~ N(mu1, P1). The input d is unknown.
struct SystemModel {
  Matrix A;   // n x n state transition
  Matrix G;   // n x m input map
  Matrix C;   // p x n output map
  Matrix Q;   // n x n process noise covariance (PSD)
  Matrix R;   // p x p output noise covariance (PD)
  Vector mu1; // initial state mean
  Matrix P1;  // initial state covariance (PSD)

  Index n() const { return A.rows(); }
  Index m() const { return G.cols(); }
  Index p() const { return C.rows(); }
};

/// I.i.d. Gaussian prior on the unknown input: d[t] ~ N(d_mean, D).
struct InputPrior {
  Vector d_mean;  // m
  Matrix D;       // m x m, PD
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const {
    std::string s;
    for (const auto& v : violations) {
      if (!s.empty()) s += "; ";
      s += v;
    }
    return s.empty() ? "ok" : s;
  }
};

namespace detail {

inline void require_dims(const SystemModel& mdl) {
  const Index n = mdl.A.rows(), m = mdl.G.cols(), p = mdl.C.rows();
  auto fail = [](const std::string& msg) { throw DimensionError(msg); };
  if (mdl.A.cols() != n) fail("A must be square");
  if (mdl.G.rows() != n) fail("G must have n rows");
  if (mdl.C.cols() != n) fail("C must have n columns");
  if (mdl.Q.rows() != n || mdl.Q.cols() != n) fail("Q must be n x n");
  if (mdl.R.rows() != p || mdl.R.cols() != p) fail("R must be p x p");
  if (mdl.mu1.size() != n) fail("mu1 must have length n");
  if (mdl.P1.rows() != n || mdl.P1.cols() != n) fail("P1 must be n x n");
  if (n < 1 || m < 1 || p < 1) fail("dimensions must be positive");
}

inline bool symmetric_within(const Matrix& m, double tol) {
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

inline bool psd_within(const Matrix& m, double tol) {
  return min_eigenvalue(m) >= -tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

inline bool pd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(symmetrized(m));
  return llt.info() == Eigen::Success && min_eigenvalue(m) > 0.0;
}

}  // namespace detail

/// Numerical rank of CG via singular values, threshold p * eps * sigma_max.
inline Index rank_cg(const SystemModel& mdl) {
  Eigen::JacobiSVD<Matrix> svd(mdl.C * mdl.G);
  const Vector sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  const double thresh = static_cast<double>(mdl.p()) *
                        std::numeric_limits<double>::epsilon() * sv(0);
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > thresh) ++r;
  return r;
}

/// Checks the model invariants. Throws DimensionError for structural
/// problems; invariant violations are collected in the report.
inline ValidationReport validate_model(const SystemModel& mdl) {
  detail::require_dims(mdl);
  ValidationReport rep;
  constexpr double sym_tol = 1e-10;
  if (!detail::symmetric_within(mdl.Q, sym_tol)) rep.violations.push_back("Q not symmetric");
  if (!detail::symmetric_within(mdl.R, sym_tol)) rep.violations.push_back("R not symmetric");
  if (!detail::symmetric_within(mdl.P1, sym_tol)) rep.violations.push_back("P1 not symmetric");
  if (!detail::psd_within(mdl.Q, 1e-9)) rep.violations.push_back("Q not positive semidefinite");
  if (!detail::pd(mdl.R)) rep.violations.push_back("R not positive definite");
  if (!detail::psd_within(mdl.P1, 1e-9)) rep.violations.push_back("P1 not positive semidefinite");
  const Index r = rank_cg(mdl);
  if (r != mdl.m()) {
    std::ostringstream os;
    os << "rank(CG)=" << r << " < " << mdl.m();
    rep.violations.push_back(os.str());
  }
  return rep;
}

inline ValidationReport validate_prior(const InputPrior& prior, Index m) {
  ValidationReport rep;
  if (prior.d_mean.size() != m || prior.D.rows() != m || prior.D.cols() != m)
    throw DimensionError("input prior dimensions inconsistent with model");
  if (!detail::symmetric_within(prior.D, 1e-10)) rep.violations.push_back("D not symmetric");
  else if (!detail::pd(prior.D)) rep.violations.push_back("D not positive definite");
  return rep;
}

/// Validates and returns the model with covariances symmetrized, guarding
/// downstream Cholesky factorizations. Throws on any violation.
inline SystemModel make_validated(SystemModel mdl) {
  ValidationReport rep = validate_model(mdl);
  if (!rep.ok()) throw ConfigError("invalid model: " + rep.to_string());
  mdl.Q = symmetrized(mdl.Q);
  mdl.R = symmetrized(mdl.R);
  mdl.P1 = symmetrized(mdl.P1);
  return mdl;
}

/// Extended state x~[t] = [x[t]; d[t-1]] transition parameters:
///   A~ = [[A, 0], [0, 0]],  b~ = [G d; d],  Q~ = [[Q + G D G', G D], [D G', D]],
///   C~ = [C, 0].
struct ExtendedModel {
  Matrix A_tilde;
  Vector b_tilde;
  Matrix Q_tilde;
  Matrix C_tilde;
};

inline ExtendedModel build_extended(const SystemModel& mdl, const InputPrior& prior) {
  const Index n = mdl.n(), m = mdl.m(), p = mdl.p();
  ExtendedModel ext;
  ext.A_tilde = Matrix::Zero(n + m, n + m);
  ext.A_tilde.topLeftCorner(n, n) = mdl.A;
  ext.b_tilde = Vector(n + m);
  ext.b_tilde.head(n) = mdl.G * prior.d_mean;
  ext.b_tilde.tail(m) = prior.d_mean;
  const Matrix GD = mdl.G * prior.D;
  ext.Q_tilde = Matrix(n + m, n + m);
  ext.Q_tilde.topLeftCorner(n, n) = mdl.Q + GD * mdl.G.transpose();
  ext.Q_tilde.topRightCorner(n, m) = GD;
  ext.Q_tilde.bottomLeftCorner(m, n) = GD.transpose();
  ext.Q_tilde.bottomRightCorner(m, m) = prior.D;
  ext.Q_tilde = symmetrized(ext.Q_tilde);
  ext.C_tilde = Matrix::Zero(p, n + m);
  ext.C_tilde.leftCols(n) = mdl.C;
  return ext;
}

/// Hyperrectangular quantization cell [lower, upper) with representative
/// level. Bounds may be +-infinity.
struct QuantizerCell {
  Vector lower;
  Vector upper;
  Vector level;

  bool contains(const Vector& z) const {
    for (Index i = 0; i < z.size(); ++i)
      if (!(z(i) >= lower(i) && z(i) < upper(i))) return false;
    return true;
  }
};

/// Piecewise-constant output map q(z): each z is assigned the level of the
/// unique cell containing it. Cells are half-open [lower, upper), which
/// resolves boundary ties upward (round half up).
class Quantizer {
 public:
  enum class Kind { UniformRounding, ExplicitPartition };

  /// q(z) = delta .* round(z ./ delta) per dimension.
  static Quantizer uniform(Vector delta) {
    if (delta.size() < 1 || (delta.array() <= 0.0).any())
      throw std::invalid_argument("quantizer step sizes must be positive");
    Quantizer q;
    q.kind_ = Kind::UniformRounding;
    q.delta_ = std::move(delta);
    return q;
  }

  static Quantizer uniform_scalar(double delta, Index p = 1) {
    return uniform(Vector::Constant(p, delta));
  }

  /// Finite list of cells that must partition R^p (validated for axis-aligned
  /// grids at construction).
  static Quantizer partition(std::vector<QuantizerCell> cells) {
    if (cells.empty()) throw std::invalid_argument("empty partition");
    Quantizer q;
    q.kind_ = Kind::ExplicitPartition;
    q.cells_ = std::move(cells);
    q.validate_partition();
    return q;
  }

  Kind kind() const { return kind_; }
  Index dim() const {
    return kind_ == Kind::UniformRounding ? delta_.size() : cells_.front().level.size();
  }
  const std::vector<QuantizerCell>& cells() const { return cells_; }
  const Vector& delta() const { return delta_; }

  struct QuantizeResult {
    Vector level;
    std::optional<std::size_t> partition_index;  // ExplicitPartition only
  };

  QuantizeResult quantize(const Vector& z) const {
    if (z.size() != dim()) throw DimensionError("quantize: wrong output dimension");
    if (!z.allFinite()) throw std::invalid_argument("quantize: z must be finite");
    if (kind_ == Kind::UniformRounding) {
      Vector level(z.size());
      for (Index i = 0; i < z.size(); ++i)
        level(i) = delta_(i) * std::floor(z(i) / delta_(i) + 0.5);
      return {level, std::nullopt};
    }
    for (std::size_t i = 0; i < cells_.size(); ++i)
      if (cells_[i].contains(z)) return {cells_[i].level, i};
    throw CoverageError("no cell contains the given point");
  }

  QuantizerCell cell_of_level(const Vector& y) const {
    if (y.size() != dim()) throw DimensionError("cell_of_level: wrong output dimension");
    if (kind_ == Kind::UniformRounding) {
      QuantizerCell cell;
      cell.level = y;
      cell.lower = y - 0.5 * delta_;
      cell.upper = y + 0.5 * delta_;
      for (Index i = 0; i < y.size(); ++i) {
        const double k = y(i) / delta_(i);
        if (std::abs(k - std::round(k)) > 1e-9)
          throw LookupError("level is not a multiple of the quantizer step");
      }
      return cell;
    }
    for (const auto& c : cells_) {
      if ((c.level - y).cwiseAbs().maxCoeff() <=
          1e-12 * std::max(1.0, y.cwiseAbs().maxCoeff()))
        return c;
    }
    throw LookupError("unknown quantizer level");
  }

 private:
  Quantizer() = default;

  // Explicit partitions must be pairwise disjoint and tile R^p as an
  // axis-aligned grid: per-dimension cut points are collected and every grid
  // box must appear exactly once with infinite outer bounds.
  void validate_partition() const {
    const Index p = cells_.front().level.size();
    for (const auto& c : cells_) {
      if (c.lower.size() != p || c.upper.size() != p || c.level.size() != p)
        throw DimensionError("partition cells have inconsistent dimensions");
      for (Index i = 0; i < p; ++i)
        if (!(c.lower(i) < c.upper(i)))
          throw std::invalid_argument("partition cell with empty extent");
    }
    std::vector<std::vector<double>> cuts(p);
    for (Index i = 0; i < p; ++i) {
      std::vector<double> edges;
      for (const auto& c : cells_) {
        edges.push_back(c.lower(i));
        edges.push_back(c.upper(i));
      }
      std::sort(edges.begin(), edges.end());
      edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
      if (!std::isinf(edges.front()) || !std::isinf(edges.back()))
        throw std::invalid_argument("partition does not cover R^p (finite outer bounds)");
      cuts[i] = std::move(edges);
    }
    std::size_t boxes = 1;
    for (Index i = 0; i < p; ++i) boxes *= cuts[i].size() - 1;
    if (boxes != cells_.size())
      throw std::invalid_argument("partition cells do not form a disjoint grid cover");
    // Every cell must span whole grid intervals in each dimension.
    std::vector<bool> seen(boxes, false);
    for (const auto& c : cells_) {
      std::size_t idx = 0;
      for (Index i = 0; i < p; ++i) {
        const auto& e = cuts[i];
        auto lo = std::lower_bound(e.begin(), e.end(), c.lower(i));
        auto hi = std::lower_bound(e.begin(), e.end(), c.upper(i));
        if (lo == e.end() || hi == e.end() || *lo != c.lower(i) || *hi != c.upper(i) ||
            hi != lo + 1)
          throw std::invalid_argument("partition cells overlap or leave gaps");
        idx = idx * (e.size() - 1) + static_cast<std::size_t>(lo - e.begin());
      }
      if (seen[idx]) throw std::invalid_argument("partition cells overlap");
      seen[idx] = true;
    }
  }

  Kind kind_{Kind::UniformRounding};
  Vector delta_;
  std::vector<QuantizerCell> cells_;
};

}  // namespace qsise
