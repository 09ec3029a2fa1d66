#pragma once

// 2x2 scattering matrix of -d^2/dx^2 + V on the line, by ODE matching and by
// the stationary formula S = I - 2 pi i Z J (I + T J)^{-1} Z^*, together with
// eigenphases, band radii and the spectral shift by eigenvalue counting.
//
// Basis: index 0 is the direction +k (right-moving), index 1 is -k. Columns
// label the incoming direction, rows the outgoing one, so
//   S = [[t, r_R], [r_L, t]]
// and V = 0 gives S = I.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bandfill/error.hpp"
#include "bandfill/linalg.hpp"
#include "bandfill/quadrature.hpp"
#include "bandfill/schrodinger.hpp"

namespace bandfill::scattering {

using cplx = std::complex<double>;
using schrodinger::BoxDiscretization;
using schrodinger::Potential;

inline constexpr double kOdeUnitarityTol = 1e-8;
inline constexpr double kStationaryUnitarityTol = 1e-6;
inline constexpr double kSingularCondition = 1e12;
inline constexpr double kDefaultPhaseTol = 1e-6;

enum class Method { OdeMatch, Stationary };

inline const char* to_string(Method m) { return m == Method::OdeMatch ? "OdeMatch" : "Stationary"; }

struct ScatteringMatrix {
  double lambda = 0.0;
  double k = 0.0;
  Eigen::Matrix2cd S = Eigen::Matrix2cd::Identity();
  Method method = Method::OdeMatch;
  double unitarity_defect = 0.0;

  cplx transmission() const { return S(0, 0); }
  cplx reflection_left() const { return S(1, 0); }
  cplx reflection_right() const { return S(0, 1); }
  double symmetry_defect() const { return std::abs(S(0, 1) - S(1, 0)); }
  cplx det() const { return S.determinant(); }
};

inline double unitarity_defect(const Eigen::Matrix2cd& s) {
  return (s.adjoint() * s - Eigen::Matrix2cd::Identity()).norm();
}

namespace detail {

inline void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw PreconditionError("scattering: lambda must be > 0 (got " + std::to_string(lambda) + ")");
  }
}

}  // namespace detail

/// Truncation radius beyond which |V| <= 1e-10, plus one unit of free space.
inline double default_x_max(const Potential& v) { return v.support_radius(1e-10) + 1.0; }

/// Largest admissible RK4 step for the phase accuracy target.
inline double default_step(const Potential& v, double lambda) {
  return 0.01 / std::sqrt(lambda + v.max_abs());
}

namespace detail {

struct State {
  cplx u, du;
};

// RK4 for u'' = (V - lambda) u from x0 to x1 in `steps` equal steps; V is
// evaluated strictly inside [min(x0,x1), max(x0,x1)] so jumps at the
// segment ends take the one-sided value.
inline State rk4_segment(const Potential& v, double lambda, State s, double x0, double x1,
                         std::size_t steps) {
  const double lo = std::min(x0, x1), hi = std::max(x0, x1);
  const double guard = 1e-9 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
  auto q = [&](double x) { return v(std::clamp(x, lo + guard, hi - guard)) - lambda; };
  const double h = (x1 - x0) / double(steps);
  double x = x0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double qa = q(x), qm = q(x + 0.5 * h), qb = q(x + h);
    const cplx k1u = s.du, k1d = qa * s.u;
    const cplx k2u = s.du + 0.5 * h * k1d, k2d = qm * (s.u + 0.5 * h * k1u);
    const cplx k3u = s.du + 0.5 * h * k2d, k3d = qm * (s.u + 0.5 * h * k2u);
    const cplx k4u = s.du + h * k3d, k4d = qb * (s.u + h * k3u);
    s.u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
    s.du += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
    x = x0 + double(i + 1) * h;
  }
  return s;
}

// Integrates across [-x_max, x_max] in the given direction, splitting at the
// potential's breakpoints.
inline State integrate(const Potential& v, double lambda, State s, double from, double to,
                       double step) {
  std::vector<double> cuts = {from};
  std::vector<double> bps = v.breakpoints();
  const double lo = std::min(from, to), hi = std::max(from, to);
  std::vector<double> inner;
  for (double b : bps)
    if (b > lo && b < hi) inner.push_back(b);
  std::sort(inner.begin(), inner.end());
  if (to < from) std::reverse(inner.begin(), inner.end());
  cuts.insert(cuts.end(), inner.begin(), inner.end());
  cuts.push_back(to);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double len = std::abs(cuts[i + 1] - cuts[i]);
    const auto steps = std::max<std::size_t>(1, std::size_t(std::ceil(len / step - 1e-9)));
    s = rk4_segment(v, lambda, s, cuts[i], cuts[i + 1], steps);
  }
  return s;
}

}  // namespace detail

/// S(lambda) by shooting pure outgoing waves across the potential.
inline ScatteringMatrix s_matrix_ode(const Potential& v, double lambda, double x_max, double step) {
  detail::check_lambda(lambda);
  if (!(step > 0.0)) throw PreconditionError("s_matrix_ode: step must be positive");
  if (!(x_max > 0.0) || std::abs(v(x_max)) > 1e-10 || std::abs(v(-x_max)) > 1e-10) {
    std::ostringstream os;
    os << "s_matrix_ode: x_max = " << x_max << " is inside the effective support of " << v.label();
    throw PreconditionError(os.str());
  }
  const double k = std::sqrt(lambda);
  const cplx ik(0.0, k);

  // transmitted e^{ikx} on the right, traced back to the left
  detail::State s{std::exp(ik * x_max), ik * std::exp(ik * x_max)};
  s = detail::integrate(v, lambda, s, x_max, -x_max, step);
  const double xl = -x_max;
  const cplx a = (ik * s.u + s.du) * std::exp(-ik * xl) / (2.0 * ik);
  const cplx b = (ik * s.u - s.du) * std::exp(ik * xl) / (2.0 * ik);

  // transmitted e^{-ikx} on the left, traced forward to the right
  detail::State w{std::exp(-ik * xl), -ik * std::exp(-ik * xl)};
  w = detail::integrate(v, lambda, w, xl, x_max, step);
  const cplx c = (ik * w.u - w.du) * std::exp(ik * x_max) / (2.0 * ik);
  const cplx d = (ik * w.u + w.du) * std::exp(-ik * x_max) / (2.0 * ik);

  ScatteringMatrix out;
  out.lambda = lambda;
  out.k = k;
  out.method = Method::OdeMatch;
  out.S(0, 0) = 1.0 / a;  // t for incidence from the left
  out.S(1, 0) = b / a;    // r_L
  out.S(1, 1) = 1.0 / c;  // t for incidence from the right
  out.S(0, 1) = d / c;    // r_R
  out.unitarity_defect = unitarity_defect(out.S);
  if (out.unitarity_defect > kOdeUnitarityTol) {
    std::ostringstream os;
    os << "s_matrix_ode: unitarity defect " << out.unitarity_defect << " exceeds " << kOdeUnitarityTol
       << " at step " << step;
    throw RefinementError(os.str(), 0.5 * step);
  }
  return out;
}

inline ScatteringMatrix s_matrix_ode(const Potential& v, double lambda) {
  detail::check_lambda(lambda);
  return s_matrix_ode(v, lambda, default_x_max(v), default_step(v, lambda));
}

/// Quadrature for the stationary route: `panels` Gauss panels of `order`
/// points over [-x_max, x_max] (x_max = 0 picks the support radius), with the
/// potential's breakpoints as panel boundaries.
struct StationaryGrid {
  double x_max = 0.0;
  std::size_t panels = 60;
  std::size_t order = 10;
};

struct StationaryOperators {
  std::vector<double> nodes;
  std::vector<double> weights;
  Eigen::VectorXd Gdiag;
  Eigen::VectorXd Jdiag;
  Eigen::MatrixXcd T;  // Nystrom matrix of G R0(lambda + i0) G acting on nodal values
  Eigen::MatrixXcd Z;  // 2 x n, rows z_{+-}(y) = (4 pi k)^{-1/2} e^{-+iky} G(y)
  double condition = 1.0;

  std::size_t size() const { return nodes.size(); }
};

/// Builds G, J, T and Z. The panel containing x_i is split at x_i with the
/// Gauss indefinite-integration matrix, so the kink of e^{ik|x-y|} costs no
/// accuracy.
inline StationaryOperators stationary_operators(const Potential& v, double lambda,
                                                const StationaryGrid& grid = {}) {
  detail::check_lambda(lambda);
  const double k = std::sqrt(lambda);
  const double r = grid.x_max > 0.0 ? grid.x_max : v.support_radius(1e-10);
  if (!(r > 0.0)) throw PreconditionError("stationary_operators: empty support");
  if (grid.x_max > 0.0 && std::abs(v(r + 1e-9 * r)) > 1e-10) {
    throw PreconditionError("stationary_operators: grid does not cover the effective support of " + v.label());
  }
  const std::vector<quad::Panel> panels =
      quad::composite_panels(-r, r, v.breakpoints(), grid.panels, grid.order);

  StationaryOperators op;
  std::vector<std::size_t> panel_of;
  for (std::size_t p = 0; p < panels.size(); ++p) {
    for (std::size_t i = 0; i < panels[p].nodes.size(); ++i) {
      op.nodes.push_back(panels[p].nodes[i]);
      op.weights.push_back(panels[p].weights[i]);
      panel_of.push_back(p);
    }
  }
  const auto n = Eigen::Index(op.nodes.size());
  op.Gdiag.resize(n);
  op.Jdiag.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // nodes are interior to panels, so jumps never sit on a node
    const double vi = v(op.nodes[std::size_t(i)]);
    op.Gdiag(i) = std::sqrt(std::abs(vi));
    op.Jdiag(i) = vi < 0.0 ? -1.0 : 1.0;
  }

  const cplx ik(0.0, k);
  const cplx pref = cplx(0.0, 1.0) / (2.0 * k);
  op.T.resize(n, n);
  std::size_t offset = 0;
  std::vector<std::size_t> panel_start(panels.size());
  for (std::size_t p = 0; p < panels.size(); ++p) {
    panel_start[p] = offset;
    offset += panels[p].nodes.size();
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xi = op.nodes[std::size_t(i)];
    const std::size_t pi = panel_of[std::size_t(i)];
    const std::size_t li = std::size_t(i) - panel_start[pi];
    for (Eigen::Index j = 0; j < n; ++j) {
      const double yj = op.nodes[std::size_t(j)];
      cplx kernel_weight;
      if (panel_of[std::size_t(j)] != pi) {
        kernel_weight = op.weights[std::size_t(j)] * std::exp(ik * std::abs(xi - yj));
      } else {
        const std::size_t lj = std::size_t(j) - panel_start[pi];
        const double below = panels[pi].cumulative(Eigen::Index(li), Eigen::Index(lj));
        const double above = op.weights[std::size_t(j)] - below;
        kernel_weight = below * std::exp(ik * (xi - yj)) + above * std::exp(ik * (yj - xi));
      }
      op.T(i, j) = op.Gdiag(i) * pref * kernel_weight * op.Gdiag(j);
    }
  }

  const double norm = 1.0 / std::sqrt(4.0 * std::numbers::pi * k);
  op.Z.resize(2, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double y = op.nodes[std::size_t(j)];
    op.Z(0, j) = norm * std::exp(-ik * y) * op.Gdiag(j);
    op.Z(1, j) = norm * std::exp(ik * y) * op.Gdiag(j);
  }
  return op;
}

/// S(lambda) = I - 2 pi i Z J (I + T J)^{-1} Z^*.
inline ScatteringMatrix s_matrix_stationary(const Potential& v, double lambda,
                                            const StationaryGrid& grid = {}) {
  detail::check_lambda(lambda);
  ScatteringMatrix out;
  out.lambda = lambda;
  out.k = std::sqrt(lambda);
  out.method = Method::Stationary;
  if (v.is_zero()) return out;

  StationaryOperators op = stationary_operators(v, lambda, grid);
  const auto n = Eigen::Index(op.size());
  const Eigen::MatrixXcd tj = op.T * op.Jdiag.cast<cplx>().asDiagonal();
  const Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(n, n) + tj;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
  const double rcond = lu.rcond();
  op.condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(op.condition <= kSingularCondition)) {
    std::ostringstream os;
    os << "s_matrix_stationary: I + T J is numerically singular at lambda = " << lambda;
    throw SingularityError(os.str(), op.condition);
  }
  // Z W J (I + T J)^{-1} Z^*, with Z^* evaluated at the nodes
  Eigen::MatrixXcd zstar = op.Z.adjoint();
  const Eigen::MatrixXcd y = lu.solve(zstar);
  Eigen::MatrixXcd zw = op.Z;
  for (Eigen::Index j = 0; j < n; ++j) zw.col(j) *= op.weights[std::size_t(j)] * op.Jdiag(j);
  const Eigen::Matrix2cd m = zw * y;
  out.S = Eigen::Matrix2cd::Identity() - 2.0 * std::numbers::pi * cplx(0.0, 1.0) * m;
  out.unitarity_defect = unitarity_defect(out.S);
  return out;
}

struct EigenphaseSet {
  std::vector<double> thetas;  // in (-pi, pi], ordered with kappas
  std::vector<double> kappas;  // descending

  double kappa_max() const { return kappas.empty() ? 0.0 : kappas.front(); }
  std::size_t size() const { return kappas.size(); }
};

/// Eigenphases of S distinct from 1 and the band radii |e^{i theta} - 1| / 2.
inline EigenphaseSet eigenphases(const ScatteringMatrix& s, double phase_tol = kDefaultPhaseTol) {
  const double defect = unitarity_defect(s.S);
  if (defect > kStationaryUnitarityTol) {
    throw PreconditionError("eigenphases: S is not unitary (defect " + std::to_string(defect) + ")");
  }
  Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(s.S, false);
  if (es.info() != Eigen::Success) throw ConvergenceError("eigenphases: eigensolver failed");
  std::vector<std::pair<double, double>> kept;  // (kappa, theta)
  for (Eigen::Index i = 0; i < 2; ++i) {
    const cplx mu = es.eigenvalues()(i) / std::abs(es.eigenvalues()(i));
    double theta = std::arg(mu);
    if (theta <= -std::numbers::pi) theta = std::numbers::pi;
    if (std::abs(theta) < phase_tol) continue;
    kept.emplace_back(std::abs(mu - 1.0) / 2.0, theta);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second > b.second;
  });
  EigenphaseSet out;
  for (const auto& [kappa, theta] : kept) {
    out.kappas.push_back(kappa);
    out.thetas.push_back(theta);
  }
  return out;
}

/// max over consecutive pairs of ||S(l_i) - S(l_j)|| / |l_i - l_j|^{1/2}.
inline double holder_constant(const std::vector<ScatteringMatrix>& ss) {
  double c = 0.0;
  for (std::size_t i = 0; i + 1 < ss.size(); ++i) {
    const double d = std::abs(ss[i + 1].lambda - ss[i].lambda);
    if (d > 0.0) c = std::max(c, (ss[i + 1].S - ss[i].S).norm() / std::sqrt(d));
  }
  return c;
}

namespace detail {

// Throws if lambda lies within 1e-9 ||A|| of an eigenvalue of the box operator.
inline void check_level(const schrodinger::SymmetricOperator& op, double lambda) {
  const double tol = 1e-9 * std::max(op.norm_bound(), 1.0);
  const std::size_t lo = linalg::sturm_count(op.tri, lambda - tol);
  const std::size_t hi = linalg::sturm_count(op.tri, lambda + tol);
  if (lo != hi) {
    std::ostringstream os;
    os.precision(17);
    os << "spectral shift: lambda = " << lambda << " collides with eigenvalue "
       << linalg::eigenvalue_by_index(op.tri, lo) << " of " << op.label;
    throw PreconditionError(os.str());
  }
}

}  // namespace detail

/// -(#{eig H < lambda} - #{eig H0 < lambda}) on the box.
inline long spectral_shift_count(const Potential& v, double lambda, const BoxDiscretization& box) {
  const auto h = schrodinger::build_h(box, v);
  const auto h0 = schrodinger::build_h0(box);
  detail::check_level(h, lambda);
  detail::check_level(h0, lambda);
  return -(long(linalg::sturm_count(h.tri, lambda)) - long(linalg::sturm_count(h0.tri, lambda)));
}

namespace detail {

// Lattice momentum q with E = (4/h^2) sin^2(q h / 2); the box levels of H0
// sit at q = j pi / (2L).
inline double lattice_momentum(double e, double h) {
  const double s = std::clamp(0.5 * h * std::sqrt(std::max(e, 0.0)), 0.0, 1.0);
  return 2.0 / h * std::asin(s);
}

inline double lattice_energy(double q, double h) {
  const double s = std::sin(0.5 * q * h);
  return 4.0 / (h * h) * s * s;
}

// Mean of #{eig < E(q)} over q in [q0 - W/2, q0 + W/2].
inline double averaged_count(const schrodinger::SymmetricOperator& op, double q0, double width) {
  const double h = op.box.spacing();
  const double qa = q0 - 0.5 * width, qb = q0 + 0.5 * width;
  const std::size_t below = linalg::sturm_count(op.tri, lattice_energy(qa, h));
  const std::size_t upto = linalg::sturm_count(op.tri, lattice_energy(qb, h));
  double acc = double(below) * width;
  for (std::size_t j = below; j < upto; ++j) {
    const double q = lattice_momentum(linalg::eigenvalue_by_index(op.tri, j), h);
    acc += qb - std::clamp(q, qa, qb);
  }
  return acc / width;
}

}  // namespace detail

/// Counting shift averaged over a lattice-momentum window of width pi/L.
///
/// Each parity family of box levels is spaced by pi/L in lattice momentum, so
/// the window average recovers the continuum spectral shift up to O(1/L).
inline double smoothed_spectral_shift(const Potential& v, double lambda, const BoxDiscretization& box) {
  detail::check_lambda(lambda);
  const auto h = schrodinger::build_h(box, v);
  const auto h0 = schrodinger::build_h0(box);
  const double q0 = detail::lattice_momentum(lambda, box.spacing());
  const double width = std::numbers::pi / box.half_length;
  if (q0 <= 0.5 * width) throw PreconditionError("smoothed_spectral_shift: lambda too close to 0 for this box");
  return -(detail::averaged_count(h, q0, width) - detail::averaged_count(h0, q0, width));
}

inline double distance_to_integer(double x) { return std::abs(x - std::round(x)); }

struct BirmanKreinResult {
  double lambda = 0.0;
  cplx det_s;
  /// -arg det S / (2 pi), principal branch
  double det_phase = 0.0;
  long xi_count = 0;
  double xi_smoothed = 0.0;
  /// distance of det_phase - xi_smoothed to the nearest integer
  double residual = 0.0;
  /// same with the raw integer count
  double residual_count = 0.0;
};

/// Birman-Krein check with det S from the ODE route.
inline BirmanKreinResult birman_krein_check(const Potential& v, double lambda, const BoxDiscretization& box) {
  detail::check_lambda(lambda);
  BirmanKreinResult r;
  r.lambda = lambda;
  const ScatteringMatrix s = s_matrix_ode(v, lambda);
  r.det_s = s.det();
  r.det_phase = -std::arg(r.det_s) / (2.0 * std::numbers::pi);
  r.xi_count = spectral_shift_count(v, lambda, box);
  r.xi_smoothed = smoothed_spectral_shift(v, lambda, box);
  r.residual = distance_to_integer(r.det_phase - r.xi_smoothed);
  r.residual_count = distance_to_integer(r.det_phase - double(r.xi_count));
  return r;
}

}  // namespace bandfill::scattering
