#pragma once

// Gaussian-mixture approximation of the quantized-output likelihood
//   p(y | x) = integral over the level's cell of N(z; C x, R) dz
// built by Gauss-Legendre quadrature, plus an exact-integral oracle used by
// tests to pin quadrature accuracy.

#include "qsise/common.hpp"
#include "qsise/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace qsise {

/// Gauss-Legendre rule on [-1, 1]: sum(w) = 2, nodes symmetric about zero,
/// exact for polynomials of degree <= 2*order - 1.
struct QuadratureRule {
  int order = 0;
  Vector nodes;
  Vector weights;
};

namespace detail {

// Legendre polynomial value and derivative at x via the three-term recurrence.
inline std::pair<double, double> legendre(int k, double x) {
  double p0 = 1.0, p1 = x;
  if (k == 0) return {1.0, 0.0};
  for (int j = 2; j <= k; ++j) {
    const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
    p0 = p1;
    p1 = p2;
  }
  const double dp = k * (x * p1 - p0) / (x * x - 1.0);
  return {p1, dp};
}

inline QuadratureRule build_rule(int order) {
  QuadratureRule rule;
  rule.order = order;
  rule.nodes = Vector(order);
  rule.weights = Vector(order);
  for (int i = 0; i < (order + 1) / 2; ++i) {
    // Tricomi initial guess, then Newton.
    double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
    for (int it = 0; it < 100; ++it) {
      auto [p, dp] = legendre(order, x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    auto [p, dp] = legendre(order, x);
    (void)p;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes(order - 1 - i) = x;
    rule.nodes(i) = -x;
    rule.weights(i) = w;
    rule.weights(order - 1 - i) = w;
  }
  if (order % 2 == 1) rule.nodes(order / 2) = 0.0;  // exact central node
  return rule;
}

}  // namespace detail

inline constexpr int kMaxQuadratureOrder = 32;

/// Cached rule table, built lazily and immutable afterwards.
inline const QuadratureRule& gauss_legendre_rule(int order) {
  if (order < 1 || order > kMaxQuadratureOrder)
    throw std::invalid_argument("quadrature order must be in [1, 32]");
  static const std::vector<QuadratureRule> table = [] {
    std::vector<QuadratureRule> t;
    t.reserve(kMaxQuadratureOrder);
    for (int k = 1; k <= kMaxQuadratureOrder; ++k) t.push_back(detail::build_rule(k));
    return t;
  }();
  return table[static_cast<std::size_t>(order - 1)];
}

/// One term of the likelihood mixture: phi * N(zeta; C x + mu, R). The offset
/// mu is part of the general mixture form; the affine node map used here
/// always produces mu = 0.
struct GmmComponent {
  double phi = 0.0;
  Vector zeta;
  Vector mu;
};

struct LikelihoodGmm {
  std::vector<GmmComponent> components;
  Matrix R;

  /// Single-component stand-in for a linear measurement: phi = 1,
  /// zeta(y) = y, mu = 0. Collapses both filters to their linear baselines.
  static LikelihoodGmm linear(const Vector& y, const Matrix& R) {
    LikelihoodGmm lik;
    lik.R = R;
    lik.components.push_back({1.0, y, Vector::Zero(y.size())});
    return lik;
  }

  std::size_t size() const { return components.size(); }
};

/// Replacement of infinite cell edges: an infinite edge is moved to
/// tail_sigmas * sqrt(max diag R) beyond the plausible output range
/// [-range, range] (or beyond the cell's finite edge if that lies outside the
/// range). Beyond that distance the integrand contributes less than 1e-15 of
/// local mass for any center inside the range.
struct TruncationPolicy {
  double tail_sigmas = 8.0;
  double range = 1e4;
};

/// Quadrature refinement: cells wider than max_panel_sigmas noise standard
/// deviations per dimension are split into equal panels of at most that width
/// before applying the rule. Infinity keeps the plain single-panel map whose
/// component count is order^p.
struct PanelPolicy {
  double max_panel_sigmas = std::numeric_limits<double>::infinity();
};

/// Builds the mixture for one cell. Per tensor-product node the component is
///   zeta = panel midpoint + panel half-width .* node,
///   phi  = prod over dimensions of (panel half-width * weight),  mu = 0,
/// so that sum(phi) equals the (truncated) cell volume.
inline LikelihoodGmm cell_likelihood_gmm(const QuantizerCell& cell,
                                         const QuadratureRule& rule,
                                         const Matrix& R,
                                         const TruncationPolicy& trunc = {},
                                         const PanelPolicy& panels = {}) {
  const Index p = cell.lower.size();
  if (R.rows() != p || R.cols() != p)
    throw DimensionError("cell_likelihood_gmm: R dimension mismatch");
  const double w_tail = trunc.tail_sigmas * std::sqrt(R.diagonal().maxCoeff());

  Vector lo = cell.lower, hi = cell.upper;
  for (Index i = 0; i < p; ++i) {
    if (std::isinf(lo(i))) lo(i) = std::min(hi(i), -trunc.range) - w_tail;
    if (std::isinf(hi(i))) hi(i) = std::max(lo(i), trunc.range) + w_tail;
    if (!(hi(i) > lo(i))) throw GeometryError("degenerate quantization cell");
  }

  std::vector<int> npanels(p);
  std::vector<double> pwidth(p);
  std::size_t count = 1;
  for (Index i = 0; i < p; ++i) {
    const double width = hi(i) - lo(i);
    const double cap = panels.max_panel_sigmas * std::sqrt(R(i, i));
    npanels[i] = std::isfinite(cap) ? std::max(1, static_cast<int>(std::ceil(width / cap))) : 1;
    pwidth[i] = width / npanels[i];
    count *= static_cast<std::size_t>(npanels[i]) * rule.order;
  }

  LikelihoodGmm lik;
  lik.R = R;
  lik.components.reserve(count);
  // Odometer over (panel, node) pairs per dimension; dimension 0 varies fastest.
  std::vector<int> panel_idx(p, 0), node_idx(p, 0);
  const Vector zero = Vector::Zero(p);
  for (std::size_t c = 0; c < count; ++c) {
    GmmComponent comp;
    comp.phi = 1.0;
    comp.zeta = Vector(p);
    comp.mu = zero;
    for (Index i = 0; i < p; ++i) {
      const double a = lo(i) + panel_idx[i] * pwidth[i];
      const double half = 0.5 * pwidth[i];
      comp.zeta(i) = a + half + half * rule.nodes(node_idx[i]);
      comp.phi *= half * rule.weights(node_idx[i]);
    }
    lik.components.push_back(std::move(comp));
    for (Index i = 0; i < p; ++i) {
      if (++node_idx[i] < rule.order) break;
      node_idx[i] = 0;
      if (++panel_idx[i] < npanels[i]) break;
      panel_idx[i] = 0;
    }
  }
  return lik;
}

/// log of sum(phi * N(zeta; center + mu, R)), the mixture at a given center.
inline double likelihood_gmm_eval_log(const LikelihoodGmm& lik, const Vector& center) {
  CholFactor chol(lik.R, "R");
  std::vector<double> terms;
  terms.reserve(lik.size());
  for (const auto& c : lik.components)
    terms.push_back(std::log(c.phi) + chol.log_gauss(c.zeta, center + c.mu));
  return log_sum_exp(terms);
}

inline double likelihood_gmm_eval(const LikelihoodGmm& lik, const Vector& center) {
  return std::exp(likelihood_gmm_eval_log(lik, center));
}

namespace detail {

// P(a <= X < b) for X ~ N(c, var), evaluated on whichever side avoids
// catastrophic cancellation.
inline double normal_interval_prob(double a, double b, double c, double var) {
  const double s = std::sqrt(var);
  const double lo = (a - c) / s, hi = (b - c) / s;
  const double inv_sqrt2 = 0.7071067811865475244;
  if (lo >= 0.0) return 0.5 * (std::erfc(lo * inv_sqrt2) - std::erfc(hi * inv_sqrt2));
  if (hi <= 0.0) return 0.5 * (std::erfc(-hi * inv_sqrt2) - std::erfc(-lo * inv_sqrt2));
  return 0.5 * (std::erf(hi * inv_sqrt2) - std::erf(lo * inv_sqrt2));
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double fa, double fm, double fb,
                               double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0) throw OracleError("adaptive integration did not converge");
  if (std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate_adaptive(const std::function<double(double)>& f, double a,
                                 double b, double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace detail

/// Exact cell probability: integral over the cell of N(z; center, R) dz.
/// Product of 1-D CDF differences when R is diagonal (or p = 1); a nested
/// adaptive rule over the conditional Gaussian for correlated p = 2. This is
/// the test oracle for cell_likelihood_gmm; accuracy >= 1e-10 on the CDF path.
inline double likelihood_eval_exact(const QuantizerCell& cell, const Vector& center,
                                    const Matrix& R) {
  const Index p = cell.lower.size();
  if (center.size() != p || R.rows() != p || R.cols() != p)
    throw DimensionError("likelihood_eval_exact: dimension mismatch");
  const bool diagonal = [&] {
    for (Index i = 0; i < p; ++i)
      for (Index j = 0; j < p; ++j)
        if (i != j && R(i, j) != 0.0) return false;
    return true;
  }();
  if (diagonal) {
    double prob = 1.0;
    for (Index i = 0; i < p; ++i) {
      double q;
      if (std::isinf(cell.lower(i)) && std::isinf(cell.upper(i))) {
        q = 1.0;
      } else if (std::isinf(cell.lower(i))) {
        q = 0.5 * std::erfc(-(cell.upper(i) - center(i)) / std::sqrt(2.0 * R(i, i)));
      } else if (std::isinf(cell.upper(i))) {
        q = 0.5 * std::erfc((cell.lower(i) - center(i)) / std::sqrt(2.0 * R(i, i)));
      } else {
        q = detail::normal_interval_prob(cell.lower(i), cell.upper(i), center(i), R(i, i));
      }
      prob *= q;
    }
    return prob;
  }
  if (p == 2) {
    // Outer integral over z1; inner dimension integrated in closed form via
    // the conditional N(c2 + r (z1 - c1), R22 - r R12), r = R12 / R11.
    const double r = R(0, 1) / R(0, 0);
    const double cvar = R(1, 1) - r * R(0, 1);
    const double s1 = std::sqrt(R(0, 0));
    double a = cell.lower(0), b = cell.upper(0);
    if (std::isinf(a)) a = center(0) - 10.0 * s1;
    if (std::isinf(b)) b = center(0) + 10.0 * s1;
    auto f = [&](double z1) {
      const double cm = center(1) + r * (z1 - center(0));
      double inner;
      if (std::isinf(cell.lower(1)))
        inner = 0.5 * std::erfc(-(cell.upper(1) - cm) / std::sqrt(2.0 * cvar));
      else if (std::isinf(cell.upper(1)))
        inner = 0.5 * std::erfc((cell.lower(1) - cm) / std::sqrt(2.0 * cvar));
      else
        inner = detail::normal_interval_prob(cell.lower(1), cell.upper(1), cm, cvar);
      const double u = (z1 - center(0)) / s1;
      return inner * std::exp(-0.5 * u * u) / (s1 * std::sqrt(2.0 * M_PI));
    };
    return detail::integrate_adaptive(f, a, b, 1e-12);
  }
  throw OracleError("exact likelihood requires diagonal R or p <= 2");
}

}  // namespace qsise
