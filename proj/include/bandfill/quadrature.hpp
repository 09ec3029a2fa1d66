#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bandfill/error.hpp"

namespace bandfill::quad {

enum class Scheme { GaussLegendre, CompositeGraded };

inline const char* to_string(Scheme s) {
  return s == Scheme::GaussLegendre ? "GaussLegendre" : "CompositeGraded";
}

/// Nodes and weights for integrals over (0, a).
struct QuadratureGrid {
  double a = 1.0;
  std::vector<double> nodes;
  std::vector<double> weights;
  Scheme scheme = Scheme::GaussLegendre;

  std::size_t size() const noexcept { return nodes.size(); }
};

/// Gauss-Legendre rule on [-1, 1] by Newton iteration on P_n.
struct GaussRule {
  std::vector<double> nodes;  // ascending
  std::vector<double> weights;
};

namespace detail {

// P_n(x) and P_{n-1}(x) by the three-term recurrence.
inline std::pair<double, double> legendre_pair(std::size_t n, double x) {
  double p0 = 1.0, p1 = x;
  for (std::size_t k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * double(k) - 1.0) * x * p1 - (double(k) - 1.0) * p0) / double(k);
    p0 = p1;
    p1 = p2;
  }
  return {p1, p0};
}

}  // namespace detail

inline GaussRule gauss_legendre(std::size_t n) {
  if (n == 0) throw PreconditionError("gauss_legendre: n must be positive");
  GaussRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  const double dn = double(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    // Tricomi initial guess for the i-th largest root
    double x = std::cos(std::numbers::pi * (double(i) + 0.75) / (dn + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [pn, pm] = detail::legendre_pair(n, x);
      const double dx = pn / (dn * (x * pn - pm) / (x * x - 1.0));
      x -= dx;
      if (std::abs(dx) <= 1e-16) break;
    }
    const auto [pn, pm] = detail::legendre_pair(n, x);
    const double dp = dn * (x * pn - pm) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[n - 1 - i] = x;
    r.nodes[i] = -x;
    r.weights[n - 1 - i] = w;
    r.weights[i] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  return r;
}

/// Gauss-Legendre rule mapped to (0, a).
inline QuadratureGrid gauss_legendre_grid(double a, std::size_t n) {
  if (!(a > 0.0)) throw PreconditionError("gauss_legendre_grid: a must be positive");
  const GaussRule g = gauss_legendre(n);
  QuadratureGrid q;
  q.a = a;
  q.scheme = Scheme::GaussLegendre;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    q.nodes[i] = 0.5 * a * (g.nodes[i] + 1.0);
    q.weights[i] = 0.5 * a * g.weights[i];
  }
  return q;
}

/// Composite Gauss rule on (0, a), geometrically graded toward 0.
///
/// Panels are [a r^{k+1}, a r^k] for k = 0..panels-2 and a final panel
/// [0, a r^{panels-1}], each carrying `order` Gauss points.
inline QuadratureGrid graded_grid(double a, std::size_t panels, std::size_t order = 10,
                                  double ratio = 0.5) {
  if (!(a > 0.0)) throw PreconditionError("graded_grid: a must be positive");
  if (panels < 1 || order < 1 || !(ratio > 0.0 && ratio < 1.0)) {
    throw PreconditionError("graded_grid: need panels >= 1, order >= 1, ratio in (0,1)");
  }
  const GaussRule g = gauss_legendre(order);
  QuadratureGrid q;
  q.a = a;
  q.scheme = Scheme::CompositeGraded;
  q.nodes.reserve(panels * order);
  q.weights.reserve(panels * order);
  auto add_panel = [&](double lo, double hi) {
    for (std::size_t i = 0; i < order; ++i) {
      q.nodes.push_back(lo + 0.5 * (hi - lo) * (g.nodes[i] + 1.0));
      q.weights.push_back(0.5 * (hi - lo) * g.weights[i]);
    }
  };
  add_panel(0.0, a * std::pow(ratio, double(panels - 1)));
  for (std::size_t k = panels - 1; k-- > 0;) {
    add_panel(a * std::pow(ratio, double(k + 1)), a * std::pow(ratio, double(k)));
  }
  return q;
}

/// Checks the grid invariants; returns an empty string when they hold.
inline std::string validate(const QuadratureGrid& q) {
  if (q.nodes.size() != q.weights.size()) return "node/weight size mismatch";
  const double total = std::accumulate(q.weights.begin(), q.weights.end(), 0.0);
  if (std::abs(total - q.a) > 1e-12 * q.a) return "weights do not sum to a";
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    if (!(q.nodes[i] > 0.0 && q.nodes[i] < q.a)) return "node outside (0,a)";
    if (!(q.weights[i] > 0.0)) return "non-positive weight";
    if (i > 0 && !(q.nodes[i] > q.nodes[i - 1])) return "nodes not strictly increasing";
  }
  return {};
}

/// Panel of Gauss points on [lo, hi] together with its indefinite-integration
/// matrix: (Q f)_i approximates the integral of f from lo to node i, exact for
/// polynomials of degree < order.
struct Panel {
  double lo = 0.0, hi = 0.0;
  std::vector<double> nodes;
  std::vector<double> weights;
  Eigen::MatrixXd cumulative;
};

inline Eigen::MatrixXd gauss_integration_matrix(const GaussRule& g) {
  const std::size_t n = g.nodes.size();
  // Legendre values P_m(s) for m = 0..n at every node
  Eigen::MatrixXd P(n + 1, n);
  for (std::size_t j = 0; j < n; ++j) {
    const double s = g.nodes[j];
    P(0, j) = 1.0;
    if (n >= 1) P(1, j) = s;
    for (std::size_t m = 2; m <= n; ++m) {
      P(m, j) = ((2.0 * double(m) - 1.0) * s * P(m - 1, j) - (double(m) - 1.0) * P(m - 2, j)) /
                double(m);
    }
  }
  Eigen::MatrixXd Q(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = g.nodes[i];
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.5 * P(0, j) * (s + 1.0);
      for (std::size_t m = 1; m < n; ++m) {
        const double integral = (P(m + 1, i) - P(m - 1, i)) / (2.0 * double(m) + 1.0);
        acc += 0.5 * (2.0 * double(m) + 1.0) * P(m, j) * integral;
      }
      Q(i, j) = g.weights[j] * acc;
    }
  }
  return Q;
}

/// Splits [lo, hi] into panels of `order` Gauss points. Breakpoints inside the
/// interval become panel boundaries; remaining panels are spread in proportion
/// to segment length.
inline std::vector<Panel> composite_panels(double lo, double hi, std::vector<double> breakpoints,
                                           std::size_t total_panels, std::size_t order) {
  if (!(hi > lo)) throw PreconditionError("composite_panels: empty interval");
  std::vector<double> cuts = {lo};
  std::sort(breakpoints.begin(), breakpoints.end());
  for (double b : breakpoints) {
    if (b > lo + 1e-12 * (hi - lo) && b < hi - 1e-12 * (hi - lo)) cuts.push_back(b);
  }
  cuts.push_back(hi);
  const std::size_t segments = cuts.size() - 1;
  total_panels = std::max(total_panels, segments);

  const GaussRule g = gauss_legendre(order);
  const Eigen::MatrixXd Q = gauss_integration_matrix(g);
  std::vector<Panel> panels;
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < segments; ++s) {
    const double a = cuts[s], b = cuts[s + 1];
    std::size_t count;
    if (s + 1 == segments) {
      count = assigned < total_panels ? total_panels - assigned : 1;
    } else {
      count = std::max<std::size_t>(
          1, std::size_t(std::llround(double(total_panels) * (b - a) / (hi - lo))));
    }
    assigned += count;
    for (std::size_t k = 0; k < count; ++k) {
      Panel p;
      p.lo = a + (b - a) * double(k) / double(count);
      p.hi = a + (b - a) * double(k + 1) / double(count);
      const double half = 0.5 * (p.hi - p.lo);
      for (std::size_t i = 0; i < order; ++i) {
        p.nodes.push_back(p.lo + half * (g.nodes[i] + 1.0));
        p.weights.push_back(half * g.weights[i]);
      }
      p.cumulative = half * Q;
      panels.push_back(std::move(p));
    }
  }
  return panels;
}

}  // namespace bandfill::quad
