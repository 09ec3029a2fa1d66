#pragma once

// Nystrom discretizations of the half-Carleman operator on (0,a), its square,
// the model operator C_a^2 (x) Gamma, and related kernels.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bandfill/error.hpp"
#include "bandfill/quadrature.hpp"
#include "bandfill/specfun.hpp"

namespace bandfill::carleman {

using quad::QuadratureGrid;

enum class KernelId { HalfCarleman, CarlemanSquared, LogCompact, Model };

inline const char* to_string(KernelId k) {
  switch (k) {
    case KernelId::HalfCarleman: return "HalfCarleman";
    case KernelId::CarlemanSquared: return "CarlemanSquared";
    case KernelId::LogCompact: return "LogCompact";
    case KernelId::Model: return "Model";
  }
  return "?";
}

/// Symmetrized Nystrom matrix sqrt(w_i) K(x_i, x_j) sqrt(w_j).
struct KernelOperator {
  QuadratureGrid grid;
  Eigen::MatrixXd matrix;
  KernelId kernel_id = KernelId::HalfCarleman;
  double p = 0.0, q = 0.0;  // LogCompact exponents
};

template <class Kernel>
Eigen::MatrixXd nystrom_matrix(const QuadratureGrid& g, Kernel&& kernel) {
  const auto n = Eigen::Index(g.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double si = std::sqrt(g.weights[std::size_t(i)]);
    for (Eigen::Index j = 0; j < n; ++j) {
      m(i, j) = si * kernel(g.nodes[std::size_t(i)], g.nodes[std::size_t(j)]) *
                std::sqrt(g.weights[std::size_t(j)]);
    }
  }
  return m;
}

inline double half_carleman_kernel(double x, double y) { return 1.0 / (std::numbers::pi * (x + y)); }

/// Closed form of (1/pi^2) int_0^a dt / ((x+t)(y+t)).
inline double carleman_squared_kernel(double a, double x, double y) {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  if (x == y) return a / (pi2 * x * (x + a));
  // log(y(x+a) / (x(y+a))); the log1p form is only accurate for y close to x
  const double ratio = a * (y - x) / (x * (y + a));
  const double lg = std::abs(ratio) < 0.5 ? std::log1p(ratio)
                                          : std::log(y / x) + std::log1p((x - y) / (y + a));
  return lg / (pi2 * (y - x));
}

inline KernelOperator half_carleman(const QuadratureGrid& grid) {
  if (grid.size() < 4) throw PreconditionError("half_carleman: need at least 4 nodes");
  KernelOperator op;
  op.grid = grid;
  op.kernel_id = KernelId::HalfCarleman;
  op.matrix = nystrom_matrix(grid, half_carleman_kernel);
  op.matrix = 0.5 * (op.matrix + op.matrix.transpose()).eval();
  return op;
}

inline KernelOperator half_carleman(double a, std::size_t n) {
  return half_carleman(quad::gauss_legendre_grid(a, n));
}

inline KernelOperator carleman_squared(const QuadratureGrid& grid) {
  if (grid.size() < 4) throw PreconditionError("carleman_squared: need at least 4 nodes");
  KernelOperator op;
  op.grid = grid;
  op.kernel_id = KernelId::CarlemanSquared;
  const double a = grid.a;
  op.matrix = nystrom_matrix(grid, [a](double x, double y) { return carleman_squared_kernel(a, x, y); });
  op.matrix = 0.5 * (op.matrix + op.matrix.transpose()).eval();
  return op;
}

inline KernelOperator carleman_squared(double a, std::size_t n) {
  return carleman_squared(quad::gauss_legendre_grid(a, n));
}

/// Ascending eigenvalues of a symmetric kernel matrix.
inline Eigen::VectorXd spectrum(const KernelOperator& op) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.matrix, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw ConvergenceError("spectrum: eigensolver failed");
  return es.eigenvalues();
}

/// Samples of f_t(u) = P_{-1/2+it}(a/u) / u at the grid nodes.
///
/// C_a f_t = f_t / cosh(pi t) in the continuum.
inline std::vector<double> mehler_eigenfunction(double a, double t, const QuadratureGrid& grid) {
  if (!(t > 0.0) || t > specfun::kMaxConicalOrder) {
    throw DomainError("mehler_eigenfunction: t must lie in (0, 16]");
  }
  std::vector<double> f(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double u = grid.nodes[i];
    f[i] = specfun::conical_p(t, a / u).value / u;
  }
  return f;
}

inline double mehler_eigenvalue(double t) { return 1.0 / std::cosh(std::numbers::pi * t); }

/// (C_a f)(x) by quadrature over the grid on which f is sampled.
inline double apply_half_carleman(const QuadratureGrid& grid, const std::vector<double>& f, double x) {
  double s = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) s += grid.weights[j] * f[j] / (x + grid.nodes[j]);
  return s / std::numbers::pi;
}

struct MehlerResidual {
  double t = 0.0;
  std::size_t nodes = 0;
  double eigenvalue = 0.0;
  /// max |C f - mu f| / max |f| over the sample points
  double relative = 0.0;
  double max_abs = 0.0;
  double max_f = 0.0;
};

/// Residual of the eigenfunction relation on `samples` points of [lo a, hi a].
inline MehlerResidual mehler_residual(double a, double t, const QuadratureGrid& grid,
                                      double lo = 0.2, double hi = 0.8, std::size_t samples = 61) {
  const std::vector<double> f = mehler_eigenfunction(a, t, grid);
  MehlerResidual r;
  r.t = t;
  r.nodes = grid.size();
  r.eigenvalue = mehler_eigenvalue(t);
  for (std::size_t k = 0; k < samples; ++k) {
    const double x = a * (lo + (hi - lo) * double(k) / double(samples - 1));
    const double fx = specfun::conical_p(t, a / x).value / x;
    const double cf = apply_half_carleman(grid, f, x);
    r.max_abs = std::max(r.max_abs, std::abs(cf - r.eigenvalue * fx));
    r.max_f = std::max(r.max_f, std::abs(fx));
  }
  r.relative = r.max_abs / r.max_f;
  return r;
}

/// Gamma = (1/2)(I - (S0 + S0^*)/2), Hermitian, with eigenvalues kappa_n^2.
struct GammaMatrix {
  std::size_t dim = 0;
  Eigen::MatrixXcd matrix;
  std::vector<double> kappa_sq;  // ascending
};

inline GammaMatrix gamma_matrix(const Eigen::MatrixXcd& s0, double unitarity_tol = 1e-8) {
  if (s0.rows() != s0.cols() || s0.rows() == 0) throw PreconditionError("gamma_matrix: S(0) must be square");
  const auto n = s0.rows();
  const double defect = (s0.adjoint() * s0 - Eigen::MatrixXcd::Identity(n, n)).norm();
  if (defect > unitarity_tol) {
    throw PreconditionError("gamma_matrix: S(0) is not unitary (||S*S - I|| = " +
                            std::to_string(defect) + ")");
  }
  GammaMatrix g;
  g.dim = std::size_t(n);
  const Eigen::MatrixXcd herm = 0.5 * (s0 + s0.adjoint());
  g.matrix = 0.5 * (Eigen::MatrixXcd::Identity(n, n) - herm);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g.matrix, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw ConvergenceError("gamma_matrix: eigensolver failed");
  for (Eigen::Index i = 0; i < n; ++i) g.kappa_sq.push_back(es.eigenvalues()(i));
  return g;
}

/// C_a^2 (x) Gamma on the tensor grid; row index i*N + n.
struct ModelOperator {
  KernelOperator factor;
  GammaMatrix gamma;
  Eigen::MatrixXcd matrix;
};

inline ModelOperator model_operator(const KernelOperator& csq, const GammaMatrix& gamma) {
  if (csq.kernel_id != KernelId::CarlemanSquared) {
    throw PreconditionError("model_operator: first factor must be a CarlemanSquared operator");
  }
  ModelOperator m;
  m.factor = csq;
  m.gamma = gamma;
  const Eigen::Index n = csq.matrix.rows();
  const Eigen::Index d = gamma.matrix.rows();
  m.matrix.resize(n * d, n * d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      m.matrix.block(i * d, j * d, d, d) = csq.matrix(i, j) * gamma.matrix;
  return m;
}

inline Eigen::VectorXd spectrum(const ModelOperator& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m.matrix, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw ConvergenceError("spectrum: eigensolver failed");
  return es.eigenvalues();
}

/// Global logarithmic weight: (1+|log x|)^{-gamma} on (0,a), 1 elsewhere.
inline double log_weight(double gamma, double x, double a = 1.0) {
  if (!(gamma > 0.0)) throw DomainError("log_weight: gamma must be positive");
  if (x == 0.0) throw DomainError("log_weight: x = 0 is excluded");
  if (x > 0.0 && x < a) return std::pow(1.0 + std::abs(std::log(x)), -gamma);
  return 1.0;
}

struct SvdDecayReport {
  double p = 0.0, q = 0.0, a = 1.0;
  std::size_t n = 0;
  std::vector<double> singular_values;  // descending
  double norm = 0.0;
  bool all_finite = true;

  double ratio(std::size_t k) const {
    return k < singular_values.size() ? singular_values[k] / singular_values.front() : 0.0;
  }
};

/// (1+|log x|)^{-p} (x+y)^{-1} (1+|log y|)^{q}, without a 1/pi factor.
inline double log_compact_kernel(double p, double q, double x, double y) {
  return std::pow(1.0 + std::abs(std::log(x)), -p) / (x + y) * std::pow(1.0 + std::abs(std::log(y)), q);
}

inline KernelOperator log_compact(double p, double q, const QuadratureGrid& grid) {
  if (!(p > q && q > 0.0)) throw PreconditionError("log_compact: need p > q > 0");
  KernelOperator op;
  op.grid = grid;
  op.kernel_id = KernelId::LogCompact;
  op.p = p;
  op.q = q;
  op.matrix = nystrom_matrix(grid, [p, q](double x, double y) { return log_compact_kernel(p, q, x, y); });
  return op;
}

inline SvdDecayReport log_kernel_svd_decay(double p, double q, double a, std::size_t n) {
  const KernelOperator op = log_compact(p, q, quad::gauss_legendre_grid(a, n));
  SvdDecayReport r;
  r.p = p;
  r.q = q;
  r.a = a;
  r.n = n;
  r.all_finite = op.matrix.allFinite();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(op.matrix);
  const Eigen::VectorXd s = svd.singularValues();
  r.singular_values.assign(s.data(), s.data() + s.size());
  r.norm = r.singular_values.empty() ? 0.0 : r.singular_values.front();
  return r;
}

}  // namespace bandfill::carleman
