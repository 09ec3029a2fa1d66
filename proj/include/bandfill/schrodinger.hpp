#pragma once

// Finite-box discretizations of H0 = -d^2/dx^2 and H = H0 + V on [-L, L]
// with Dirichlet ends, spectral projections below a Fermi level, the
// projection difference D = P - P0 and the compressions M+ and M-.
//
// Projections are carried as orthonormal bases of their ranges. Every n x n
// object built from them (D, M+, M-) vanishes on the orthogonal complement of
// span(Ran P, Ran P0), so spectra are computed on that joint subspace and
// padded with zeros.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bandfill/error.hpp"
#include "bandfill/linalg.hpp"

namespace bandfill::schrodinger {

struct BoxDiscretization {
  double half_length = 1.0;
  std::size_t n = 16;

  double spacing() const { return 2.0 * half_length / double(n + 1); }
  /// i-th interior node, i = 0..n-1.
  double node(std::size_t i) const { return -half_length + double(i + 1) * spacing(); }

  static BoxDiscretization make(double half_length, std::size_t n) {
    if (!(half_length > 0.0)) throw PreconditionError("BoxDiscretization: L must be positive");
    if (n < 16) throw PreconditionError("BoxDiscretization: need n >= 16");
    return {half_length, n};
  }
  /// Box with the number of nodes chosen so the spacing is (close to) h.
  static BoxDiscretization with_spacing(double half_length, double h) {
    if (!(h > 0.0)) throw PreconditionError("BoxDiscretization: spacing must be positive");
    const auto intervals = std::llround(2.0 * half_length / h);
    if (intervals < 17) throw PreconditionError("BoxDiscretization: spacing too coarse");
    return make(half_length, std::size_t(intervals - 1));
  }
};

enum class PotentialKind { SquareWell, PoschlTeller, Gaussian };

/// Real, even potential with |V(x)| <= C (1+|x|)^{-rho}.
struct Potential {
  PotentialKind kind = PotentialKind::SquareWell;
  double depth = 0.0;       // SquareWell value inside the well
  double half_width = 1.0;  // SquareWell
  int strength = 1;         // PoschlTeller: V = -s(s+1) sech^2 x
  double amplitude = 0.0;   // Gaussian: amplitude * exp(-x^2 / (2 width^2))
  double width = 1.0;
  double rho = 2.0;

  static Potential square_well(double depth, double half_width) {
    if (!(half_width > 0.0)) throw PreconditionError("square_well: half_width must be positive");
    Potential p;
    p.kind = PotentialKind::SquareWell;
    p.depth = depth;
    p.half_width = half_width;
    return p;
  }
  static Potential poschl_teller(int strength) {
    if (strength < 0) throw PreconditionError("poschl_teller: strength must be >= 0");
    Potential p;
    p.kind = PotentialKind::PoschlTeller;
    p.strength = strength;
    return p;
  }
  static Potential gaussian(double amplitude, double width) {
    if (!(width > 0.0)) throw PreconditionError("gaussian: width must be positive");
    Potential p;
    p.kind = PotentialKind::Gaussian;
    p.amplitude = amplitude;
    p.width = width;
    return p;
  }
  static Potential zero() { return square_well(0.0, 1.0); }

  /// Square-well jumps take the mean of the one-sided limits.
  double operator()(double x) const {
    switch (kind) {
      case PotentialKind::SquareWell: {
        const double ax = std::abs(x);
        if (std::abs(ax - half_width) <= 1e-12 * half_width) return 0.5 * depth;
        return ax < half_width ? depth : 0.0;
      }
      case PotentialKind::PoschlTeller: {
        const double s = 1.0 / std::cosh(x);
        return -double(strength) * double(strength + 1) * s * s;
      }
      case PotentialKind::Gaussian:
        return amplitude * std::exp(-0.5 * x * x / (width * width));
    }
    return 0.0;
  }

  bool is_zero() const {
    switch (kind) {
      case PotentialKind::SquareWell: return depth == 0.0;
      case PotentialKind::PoschlTeller: return strength == 0;
      case PotentialKind::Gaussian: return amplitude == 0.0;
    }
    return true;
  }

  /// All supported kinds are even in x.
  bool is_even() const { return true; }

  double max_abs() const {
    switch (kind) {
      case PotentialKind::SquareWell: return std::abs(depth);
      case PotentialKind::PoschlTeller: return double(strength) * double(strength + 1);
      case PotentialKind::Gaussian: return std::abs(amplitude);
    }
    return 0.0;
  }

  /// Points where V is not smooth.
  std::vector<double> breakpoints() const {
    if (kind == PotentialKind::SquareWell) return {-half_width, half_width};
    return {};
  }

  /// Smallest R with |V(x)| <= tol for |x| >= R.
  double support_radius(double tol = 1e-10) const {
    if (is_zero()) return 0.0;
    switch (kind) {
      case PotentialKind::SquareWell: return half_width;
      case PotentialKind::PoschlTeller: {
        const double c = double(strength) * double(strength + 1);
        // c sech^2 R = tol  ->  R = acosh(sqrt(c / tol))
        return std::acosh(std::sqrt(c / tol));
      }
      case PotentialKind::Gaussian:
        return width * std::sqrt(2.0 * std::log(std::max(std::abs(amplitude) / tol, 1.0)));
    }
    return 0.0;
  }

  /// Sampled estimate of C in |V(x)| <= C (1+|x|)^{-rho}.
  double decay_constant(double x_max = 200.0, std::size_t samples = 20001) const {
    double c = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
      const double x = x_max * double(i) / double(samples - 1);
      c = std::max(c, std::abs((*this)(x)) * std::pow(1.0 + x, rho));
    }
    return c;
  }

  std::string label() const {
    std::ostringstream os;
    switch (kind) {
      case PotentialKind::SquareWell:
        os << "SquareWell(" << depth << "," << half_width << ")";
        break;
      case PotentialKind::PoschlTeller:
        os << "PoschlTeller(" << strength << ")";
        break;
      case PotentialKind::Gaussian:
        os << "Gaussian(" << amplitude << "," << width << ")";
        break;
    }
    return os.str();
  }
};

struct SymmetricOperator {
  linalg::Tridiagonal tri;
  BoxDiscretization box;
  std::string label;

  std::size_t size() const noexcept { return tri.size(); }
  Eigen::MatrixXd dense() const { return tri.dense(); }
  double norm_bound() const { return linalg::norm_bound(tri); }
};

/// Three-point Dirichlet Laplacian h^{-2} tridiag(-1, 2, -1).
inline SymmetricOperator build_h0(const BoxDiscretization& box) {
  const double h = box.spacing();
  SymmetricOperator op;
  op.box = box;
  op.label = "H0";
  op.tri.diag.assign(box.n, 2.0 / (h * h));
  op.tri.off.assign(box.n - 1, -1.0 / (h * h));
  return op;
}

inline SymmetricOperator build_h(const BoxDiscretization& box, const Potential& v) {
  SymmetricOperator op = build_h0(box);
  op.label = "H0+" + v.label();
  for (std::size_t i = 0; i < box.n; ++i) op.tri.diag[i] += v(box.node(i));
  return op;
}

/// Eigenpairs in ascending order. `complete` is false when only the part of
/// the spectrum below some level (plus the first level above it) is stored.
struct EigenData {
  std::vector<double> values;
  Eigen::MatrixXd vectors;
  double norm = 0.0;
  bool complete = true;
};

inline EigenData eigendecompose(const Eigen::MatrixXd& a) {
  auto [vals, vecs] = linalg::dense_symmetric_eigen(a);
  EigenData e;
  e.values.assign(vals.data(), vals.data() + vals.size());
  e.vectors = std::move(vecs);
  e.norm = vals.size() ? std::max(std::abs(vals(0)), std::abs(vals(vals.size() - 1))) : 0.0;
  return e;
}

/// Full dense decomposition.
inline EigenData eigendecompose(const SymmetricOperator& op) {
  if (op.size() > 6000) {
    throw PreconditionError("eigendecompose: n = " + std::to_string(op.size()) +
                            " too large for a dense solve; use eigendecompose_below");
  }
  return eigendecompose(op.dense());
}

/// Eigenpairs below `level` plus the first one at or above it.
inline EigenData eigendecompose_below(const SymmetricOperator& op, double level) {
  const std::size_t count = linalg::sturm_count(op.tri, level);
  const std::size_t last = std::min(op.size(), count + 1);
  linalg::TridiagonalEigenpairs tp = linalg::eigenpairs_by_index(op.tri, 0, last);
  EigenData e;
  e.values = std::move(tp.values);
  e.vectors = std::move(tp.vectors);
  e.norm = op.norm_bound();
  e.complete = last == op.size();
  return e;
}

struct Residuals {
  double eigen = 0.0;   // max ||A v - lambda v|| / ||A||
  double orthonormality = 0.0;  // ||V^T V - I||_max
};

inline Residuals check_eigendata(const Eigen::MatrixXd& a, const EigenData& e) {
  Residuals r;
  const auto m = Eigen::Index(e.values.size());
  const double an = std::max(e.norm, 1e-300);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::VectorXd res = a * e.vectors.col(k) - e.values[std::size_t(k)] * e.vectors.col(k);
    r.eigen = std::max(r.eigen, res.norm() / an);
  }
  const Eigen::MatrixXd g = e.vectors.transpose() * e.vectors - Eigen::MatrixXd::Identity(m, m);
  r.orthonormality = m ? g.cwiseAbs().maxCoeff() : 0.0;
  return r;
}

inline Residuals check_eigendata(const SymmetricOperator& op, const EigenData& e) {
  Residuals r;
  const auto m = Eigen::Index(e.values.size());
  const double an = std::max(e.norm, 1e-300);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::VectorXd v = e.vectors.col(k);
    r.eigen = std::max(r.eigen, (op.tri.apply(v) - e.values[std::size_t(k)] * v).norm() / an);
  }
  const Eigen::MatrixXd g = e.vectors.transpose() * e.vectors - Eigen::MatrixXd::Identity(m, m);
  r.orthonormality = m ? g.cwiseAbs().maxCoeff() : 0.0;
  return r;
}

/// Orthogonal projection represented by an orthonormal basis of its range.
struct Projection {
  Eigen::MatrixXd basis;  // dim x rank

  Eigen::Index dim() const { return basis.rows(); }
  Eigen::Index rank() const { return basis.cols(); }
  Eigen::MatrixXd dense() const { return basis * basis.transpose(); }

  static Projection from_basis(Eigen::MatrixXd b) { return Projection{std::move(b)}; }
};

/// P = sum over lambda_k < lambda of v_k v_k^T.
inline Projection spectral_projection(const EigenData& eig, double lambda) {
  const double tol = 1e-9 * std::max(eig.norm, 1.0);
  std::size_t below = 0;
  for (double v : eig.values) {
    if (std::abs(v - lambda) < tol) {
      std::ostringstream os;
      os.precision(17);
      os << "spectral_projection: level " << lambda << " is within " << tol << " of eigenvalue " << v;
      throw PreconditionError(os.str());
    }
    if (v < lambda) ++below;
  }
  if (!eig.complete && below == eig.values.size()) {
    throw PreconditionError("spectral_projection: partial eigendata does not reach the level");
  }
  return Projection{eig.vectors.leftCols(Eigen::Index(below))};
}

struct ProjectionDifference {
  double lambda = 0.0;
  Eigen::Index dim = 0;
  Eigen::Index rank_p = 0, rank_p0 = 0;
  /// D = W C W^T with W orthonormal (dim x r)
  Eigen::MatrixXd joint_basis;
  Eigen::MatrixXd compressed;
  /// all dim eigenvalues, ascending
  std::vector<double> eigenvalues;

  Eigen::MatrixXd dense() const { return joint_basis * compressed * joint_basis.transpose(); }
  /// rank(P) - rank(P0)
  long trace() const { return long(rank_p) - long(rank_p0); }
  double max_abs_eigenvalue() const {
    return eigenvalues.empty() ? 0.0 : std::max(std::abs(eigenvalues.front()), std::abs(eigenvalues.back()));
  }
};

namespace detail {

inline std::vector<double> pad_with_zeros(const Eigen::VectorXd& nonzero, Eigen::Index dim) {
  std::vector<double> out(nonzero.data(), nonzero.data() + nonzero.size());
  out.resize(std::size_t(dim), 0.0);
  std::sort(out.begin(), out.end());
  return out;
}

inline void require_same_dim(const Projection& p, const Projection& p0) {
  if (p.dim() != p0.dim()) throw PreconditionError("projection dimensions differ");
}

}  // namespace detail

/// Orthonormal basis of span(Ran P, Ran P0).
inline Eigen::MatrixXd joint_basis(const Projection& p, const Projection& p0) {
  detail::require_same_dim(p, p0);
  Eigen::MatrixXd cols(p.dim(), p.rank() + p0.rank());
  cols << p.basis, p0.basis;
  return linalg::orthonormal_span(cols);
}

inline ProjectionDifference projection_difference(const Projection& p, const Projection& p0,
                                                  double lambda) {
  ProjectionDifference d;
  d.lambda = lambda;
  d.dim = p.dim();
  d.rank_p = p.rank();
  d.rank_p0 = p0.rank();
  d.joint_basis = joint_basis(p, p0);
  const Eigen::MatrixXd a = d.joint_basis.transpose() * p.basis;
  const Eigen::MatrixXd a0 = d.joint_basis.transpose() * p0.basis;
  d.compressed = a * a.transpose() - a0 * a0.transpose();
  d.compressed = 0.5 * (d.compressed + d.compressed.transpose()).eval();
  const Eigen::VectorXd nz = d.compressed.rows() ? linalg::dense_symmetric_eigenvalues(d.compressed)
                                                 : Eigen::VectorXd();
  d.eigenvalues = detail::pad_with_zeros(nz, d.dim);
  return d;
}

/// Spectrum of P - P0 from the principal angles between the two ranges:
/// +-sin(theta_j) for each angle, +1 / -1 for excess dimensions, zeros elsewhere.
inline std::vector<double> principal_angle_spectrum(const Projection& p, const Projection& p0) {
  detail::require_same_dim(p, p0);
  std::vector<double> out;
  const Eigen::Index m = std::min(p.rank(), p0.rank());
  if (m > 0) {
    // sines are the singular values of the smaller range projected off the larger
    const Projection& small = p.rank() <= p0.rank() ? p : p0;
    const Projection& large = p.rank() <= p0.rank() ? p0 : p;
    const Eigen::MatrixXd off = small.basis - large.basis * (large.basis.transpose() * small.basis);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(off);
    const Eigen::VectorXd s = svd.singularValues();
    for (Eigen::Index j = 0; j < m; ++j) {
      out.push_back(std::min(s(j), 1.0));
      out.push_back(-std::min(s(j), 1.0));
    }
  }
  for (Eigen::Index j = m; j < p.rank(); ++j) out.push_back(1.0);
  for (Eigen::Index j = m; j < p0.rank(); ++j) out.push_back(-1.0);
  out.resize(std::size_t(p.dim()), 0.0);
  std::sort(out.begin(), out.end());
  return out;
}

/// M+ = (I-P0) P (I-P0) and M- = P0 (I-P) P0 as dense matrices.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> m_plus_minus(const Projection& p, const Projection& p0) {
  detail::require_same_dim(p, p0);
  if (p.dim() > 6000) throw PreconditionError("m_plus_minus: dimension too large for dense matrices");
  const Eigen::Index n = p.dim();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd pd = p.dense(), p0d = p0.dense();
  Eigen::MatrixXd plus = (id - p0d) * pd * (id - p0d);
  Eigen::MatrixXd minus = p0d * (id - pd) * p0d;
  plus = 0.5 * (plus + plus.transpose()).eval();
  minus = 0.5 * (minus + minus.transpose()).eval();
  return {std::move(plus), std::move(minus)};
}

/// M+ and M- compressed to an orthonormal basis W of span(Ran P, Ran P0).
struct CompressedMPlusMinus {
  Eigen::MatrixXd plus, minus;
};

inline CompressedMPlusMinus compress_m_plus_minus(const Eigen::MatrixXd& w, const Projection& p,
                                                  const Projection& p0) {
  const Eigen::Index r = w.cols();
  const Eigen::MatrixXd a = w.transpose() * p.basis;
  const Eigen::MatrixXd a0 = w.transpose() * p0.basis;
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(r, r);
  const Eigen::MatrixXd pc = a * a.transpose(), p0c = a0 * a0.transpose();
  CompressedMPlusMinus out;
  out.plus = (id - p0c) * pc * (id - p0c);
  out.minus = p0c * (id - pc) * p0c;
  out.plus = 0.5 * (out.plus + out.plus.transpose()).eval();
  out.minus = 0.5 * (out.minus + out.minus.transpose()).eval();
  return out;
}

/// ||C^2 - (M+ + M-)||_F on the joint subspace (equal to the full-space value).
inline double algebra_defect(const ProjectionDifference& d, const CompressedMPlusMinus& m) {
  if (d.compressed.rows() == 0) return 0.0;
  return (d.compressed * d.compressed - (m.plus + m.minus)).norm();
}

struct MPlusMinusSpectra {
  std::vector<double> plus;   // ascending, length dim
  std::vector<double> minus;  // ascending, length dim
};

inline MPlusMinusSpectra m_plus_minus_spectra(const CompressedMPlusMinus& m, Eigen::Index dim) {
  MPlusMinusSpectra out;
  if (m.plus.rows() == 0) {
    out.plus.assign(std::size_t(dim), 0.0);
    out.minus = out.plus;
    return out;
  }
  out.plus = detail::pad_with_zeros(linalg::dense_symmetric_eigenvalues(m.plus), dim);
  out.minus = detail::pad_with_zeros(linalg::dense_symmetric_eigenvalues(m.minus), dim);
  return out;
}

/// Spectra of M+ and M- computed on the joint subspace.
inline MPlusMinusSpectra m_plus_minus_spectra(const Projection& p, const Projection& p0) {
  return m_plus_minus_spectra(compress_m_plus_minus(joint_basis(p, p0), p, p0), p.dim());
}

struct SymmetryPairingReport {
  double epsilon = 0.0;
  double tolerance = 0.0;
  std::vector<std::pair<double, double>> pairs;  // (-mu, +mu) as observed
  double max_error = 0.0;
  std::vector<double> unpaired;
};

/// Pairs eigenvalues in (eps, 1-eps) with their negatives.
inline SymmetryPairingReport symmetry_pairing_report(const std::vector<double>& eigenvalues,
                                                     double epsilon, double tolerance = 1e-8) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw PreconditionError("symmetry_pairing_report: need eps in (0, 0.5)");
  SymmetryPairingReport rep;
  rep.epsilon = epsilon;
  rep.tolerance = tolerance;
  // magnitudes with a margin so partners just outside the window still match
  std::vector<double> pos, neg;
  for (double v : eigenvalues) {
    const double m = std::abs(v);
    if (m > epsilon - tolerance && m < 1.0 - epsilon + tolerance) (v > 0 ? pos : neg).push_back(m);
  }
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  auto inside = [&](double m) { return m > epsilon && m < 1.0 - epsilon; };
  std::size_t i = 0, j = 0;
  while (i < pos.size() || j < neg.size()) {
    if (i < pos.size() && j < neg.size() && std::abs(pos[i] - neg[j]) <= tolerance) {
      if (inside(pos[i]) || inside(neg[j])) {
        rep.pairs.emplace_back(-neg[j], pos[i]);
        rep.max_error = std::max(rep.max_error, std::abs(pos[i] - neg[j]));
      }
      ++i;
      ++j;
    } else if (j >= neg.size() || (i < pos.size() && pos[i] < neg[j])) {
      if (inside(pos[i])) rep.unpaired.push_back(pos[i]);
      ++i;
    } else {
      if (inside(neg[j])) rep.unpaired.push_back(-neg[j]);
      ++j;
    }
  }
  return rep;
}

inline SymmetryPairingReport symmetry_pairing_report(const ProjectionDifference& d, double epsilon,
                                                     double tolerance = 1e-8) {
  return symmetry_pairing_report(d.eigenvalues, epsilon, tolerance);
}

}  // namespace bandfill::schrodinger
