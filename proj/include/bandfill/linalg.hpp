#pragma once

// Symmetric tridiagonal eigenvalue tools: Sturm counts, bisection for
// individual eigenvalues, and inverse iteration for selected eigenvectors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bandfill/error.hpp"

namespace bandfill::linalg {

struct Tridiagonal {
  std::vector<double> diag;
  std::vector<double> off;  // size n-1

  std::size_t size() const noexcept { return diag.size(); }

  Eigen::MatrixXd dense() const {
    const auto n = Eigen::Index(diag.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      m(i, i) = diag[std::size_t(i)];
      if (i + 1 < n) m(i, i + 1) = m(i + 1, i) = off[std::size_t(i)];
    }
    return m;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    const std::size_t n = diag.size();
    Eigen::VectorXd out(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      double s = diag[i] * v(Eigen::Index(i));
      if (i > 0) s += off[i - 1] * v(Eigen::Index(i - 1));
      if (i + 1 < n) s += off[i] * v(Eigen::Index(i + 1));
      out(Eigen::Index(i)) = s;
    }
    return out;
  }
};

/// Gershgorin enclosure [lo, hi] of the spectrum.
inline std::pair<double, double> gershgorin(const Tridiagonal& t) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const std::size_t n = t.size();
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(t.off[i - 1]);
    if (i + 1 < n) r += std::abs(t.off[i]);
    lo = std::min(lo, t.diag[i] - r);
    hi = std::max(hi, t.diag[i] + r);
  }
  return {lo, hi};
}

inline double norm_bound(const Tridiagonal& t) {
  const auto [lo, hi] = gershgorin(t);
  return std::max(std::abs(lo), std::abs(hi));
}

/// Number of eigenvalues strictly below x.
inline std::size_t sturm_count(const Tridiagonal& t, double x) {
  const std::size_t n = t.size();
  if (n == 0) return 0;
  double emax2 = 1.0;
  for (double e : t.off) emax2 = std::max(emax2, e * e);
  const double pivmin = std::numeric_limits<double>::min() * emax2;
  std::size_t count = 0;
  double q = t.diag[0] - x;
  if (std::abs(q) < pivmin) q = -pivmin;
  if (q < 0) ++count;
  for (std::size_t i = 1; i < n; ++i) {
    q = t.diag[i] - x - t.off[i - 1] * t.off[i - 1] / q;
    if (std::abs(q) < pivmin) q = -pivmin;
    if (q < 0) ++count;
  }
  return count;
}

/// The k-th smallest eigenvalue (0-based) by bisection to full precision.
inline double eigenvalue_by_index(const Tridiagonal& t, std::size_t k) {
  if (k >= t.size()) throw PreconditionError("eigenvalue_by_index: index out of range");
  auto [lo, hi] = gershgorin(t);
  const double scale = std::max(std::abs(lo), std::abs(hi));
  lo -= 1e-12 * scale + 1e-300;
  hi += 1e-12 * scale + 1e-300;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (sturm_count(t, mid) > k) {
      hi = mid;
    } else {
      lo = mid;
    }
    if (hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi)))
      break;
  }
  return 0.5 * (lo + hi);
}

namespace detail {

// Tridiagonal LU with partial pivoting (same layout as LAPACK gttrf/gttrs).
struct PivotedLU {
  std::vector<double> dl, d, du, du2;
  std::vector<std::uint8_t> swapped;

  PivotedLU(const Tridiagonal& t, double shift, double tiny) {
    const std::size_t n = t.size();
    dl.assign(t.off.begin(), t.off.end());
    du.assign(t.off.begin(), t.off.end());
    d.resize(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = t.diag[i] - shift;
    du2.assign(n > 2 ? n - 2 : 0, 0.0);
    swapped.assign(n > 1 ? n - 1 : 0, 0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (std::abs(d[i]) >= std::abs(dl[i])) {
        if (d[i] == 0.0) d[i] = tiny;
        const double fact = dl[i] / d[i];
        dl[i] = fact;
        d[i + 1] -= fact * du[i];
      } else {
        const double fact = d[i] / dl[i];
        d[i] = dl[i];
        dl[i] = fact;
        const double temp = du[i];
        du[i] = d[i + 1];
        d[i + 1] = temp - fact * d[i + 1];
        if (i + 2 < n) {
          du2[i] = du[i + 1];
          du[i + 1] = -fact * du[i + 1];
        }
        swapped[i] = 1;
      }
    }
    for (double& v : d) {
      if (std::abs(v) < tiny) v = v < 0 ? -tiny : tiny;
    }
  }

  void solve(std::vector<double>& b) const {
    const std::size_t n = d.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (!swapped[i]) {
        b[i + 1] -= dl[i] * b[i];
      } else {
        const double temp = b[i];
        b[i] = b[i + 1];
        b[i + 1] = temp - dl[i] * b[i];
      }
    }
    b[n - 1] /= d[n - 1];
    if (n < 2) return;
    b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    for (std::size_t i = n - 2; i-- > 0;) {
      b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
  }
};

inline void normalize(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  s = std::sqrt(s);
  for (double& x : v) x /= s;
}

}  // namespace detail

struct TridiagonalEigenpairs {
  std::vector<double> values;
  Eigen::MatrixXd vectors;  // n x m
};

/// Eigenpairs with indices [first, last) by bisection and inverse iteration.
/// Vectors in a cluster (eigenvalue gap below 1e-3 ||T||) are
/// reorthogonalized against each other.
inline TridiagonalEigenpairs eigenpairs_by_index(const Tridiagonal& t, std::size_t first,
                                                 std::size_t last) {
  const std::size_t n = t.size();
  if (first > last || last > n) throw PreconditionError("eigenpairs_by_index: bad index range");
  const std::size_t m = last - first;
  TridiagonalEigenpairs out;
  out.values.resize(m);
  out.vectors.resize(Eigen::Index(n), Eigen::Index(m));
  const double tnorm = std::max(norm_bound(t), std::numeric_limits<double>::min());
  const double tiny = std::numeric_limits<double>::epsilon() * tnorm;
  const double cluster = 1e-3 * tnorm;

  for (std::size_t j = 0; j < m; ++j) out.values[j] = eigenvalue_by_index(t, first + j);

  std::vector<double> v(n);
  for (std::size_t j = 0; j < m; ++j) {
    const double mu = out.values[j];
    const detail::PivotedLU lu(t, mu, tiny);
    // deterministic start vector
    std::uint64_t state = 0x9E3779B97F4A7C15ULL ^ (std::uint64_t(first + j) * 0xBF58476D1CE4E5B9ULL);
    for (std::size_t i = 0; i < n; ++i) {
      state = state * 6364136223846793005ULL + 1442695040888963407ULL;
      v[i] = double(state >> 11) / double(1ULL << 53) - 0.5;
    }
    std::size_t cluster_start = j;
    while (cluster_start > 0 && mu - out.values[cluster_start - 1] < cluster) --cluster_start;
    auto reorthogonalize = [&] {
      for (std::size_t k = cluster_start; k < j; ++k) {
        const auto col = out.vectors.col(Eigen::Index(k));
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += col(Eigen::Index(i)) * v[i];
        for (std::size_t i = 0; i < n; ++i) v[i] -= dot * col(Eigen::Index(i));
      }
    };
    detail::normalize(v);
    for (int it = 0; it < 4; ++it) {
      lu.solve(v);
      reorthogonalize();
      detail::normalize(v);
    }
    reorthogonalize();
    detail::normalize(v);
    // sign convention: first component of significant size is positive
    double pivot = 0.0;
    for (double x : v) {
      if (std::abs(x) > 1e-8) {
        pivot = x;
        break;
      }
    }
    const double sign = pivot < 0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.vectors(Eigen::Index(i), Eigen::Index(j)) = sign * v[i];
  }
  return out;
}

/// Dense symmetric eigendecomposition, ascending eigenvalues.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> dense_symmetric_eigen(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) {
    throw ConvergenceError("dense_symmetric_eigen: eigensolver failed to converge (n = " +
                           std::to_string(a.rows()) + ")");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

inline Eigen::VectorXd dense_symmetric_eigenvalues(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw ConvergenceError("dense_symmetric_eigenvalues: eigensolver failed to converge (n = " +
                           std::to_string(a.rows()) + ")");
  }
  return es.eigenvalues();
}

/// Orthonormal basis for the column span, dropping directions whose
/// R-diagonal falls below rel_tol times the largest.
inline Eigen::MatrixXd orthonormal_span(const Eigen::MatrixXd& cols, double rel_tol = 1e-12) {
  if (cols.cols() == 0) return Eigen::MatrixXd(cols.rows(), 0);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(cols);
  qr.setThreshold(rel_tol);
  const Eigen::Index r = qr.rank();
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(cols.rows(), r);
  return q;
}

}  // namespace bandfill::linalg
