#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "bandfill/schrodinger.hpp"

namespace {

using namespace bandfill;
using namespace bandfill::schrodinger;

constexpr double kPi = std::numbers::pi;

Eigen::MatrixXd random_basis(std::mt19937_64& rng, Eigen::Index n, Eigen::Index r) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(n, r);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < r; ++j) m(i, j) = nd(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, r);
}

std::vector<double> sorted_eigenvalues(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size()};
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  EXPECT_EQ(a.size(), b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TEST(Box, NodesAndSpacing) {
  const BoxDiscretization b = BoxDiscretization::make(1.0, 19);
  EXPECT_DOUBLE_EQ(b.spacing(), 0.1);
  EXPECT_DOUBLE_EQ(b.node(0), -0.9);
  EXPECT_NEAR(b.node(9), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(b.node(18), 0.9);
}

TEST(Box, WithSpacing) {
  const BoxDiscretization b = BoxDiscretization::with_spacing(200.0, 0.02);
  EXPECT_EQ(b.n, 19999u);
  EXPECT_NEAR(b.spacing(), 0.02, 1e-15);
  EXPECT_EQ(BoxDiscretization::with_spacing(50.0, 0.02).n, 4999u);
}

TEST(Box, Preconditions) {
  EXPECT_THROW(BoxDiscretization::make(0.0, 100), PreconditionError);
  EXPECT_THROW(BoxDiscretization::make(1.0, 15), PreconditionError);
  EXPECT_THROW(BoxDiscretization::with_spacing(1.0, 0.0), PreconditionError);
  EXPECT_THROW(BoxDiscretization::with_spacing(1.0, 0.5), PreconditionError);
}

TEST(Potential, SquareWellValues) {
  const Potential v = Potential::square_well(-2.0, 1.0);
  EXPECT_EQ(v(0.0), -2.0);
  EXPECT_EQ(v(0.999), -2.0);
  EXPECT_EQ(v(1.0), -1.0);
  EXPECT_EQ(v(-1.0), -1.0);
  EXPECT_EQ(v(1.001), 0.0);
  EXPECT_EQ(v.max_abs(), 2.0);
  EXPECT_EQ(v.support_radius(), 1.0);
  EXPECT_EQ(v.breakpoints(), (std::vector<double>{-1.0, 1.0}));
  EXPECT_EQ(v.label(), "SquareWell(-2,1)");
  EXPECT_THROW(Potential::square_well(-1.0, 0.0), PreconditionError);
}

TEST(Potential, PoschlTellerValues) {
  const Potential v = Potential::poschl_teller(1);
  EXPECT_DOUBLE_EQ(v(0.0), -2.0);
  EXPECT_NEAR(v(1.0), -2.0 / std::pow(std::cosh(1.0), 2), 1e-15);
  const double r = v.support_radius(1e-10);
  EXPECT_LE(std::abs(v(r)), 1e-10 * (1 + 1e-9));
  EXPECT_GT(std::abs(v(0.99 * r)), 1e-10);
  EXPECT_TRUE(v.breakpoints().empty());
  EXPECT_THROW(Potential::poschl_teller(-1), PreconditionError);
}

TEST(Potential, GaussianAndZero) {
  const Potential g = Potential::gaussian(-1.5, 0.5);
  EXPECT_DOUBLE_EQ(g(0.0), -1.5);
  EXPECT_NEAR(g(0.5), -1.5 * std::exp(-0.5), 1e-15);
  EXPECT_LE(std::abs(g(g.support_radius(1e-10))), 1e-10 * (1 + 1e-9));
  EXPECT_TRUE(Potential::zero().is_zero());
  EXPECT_FALSE(g.is_zero());
  EXPECT_EQ(Potential::zero().support_radius(), 0.0);
}

TEST(Potential, ShortRangeDecayConstantFinite) {
  for (const Potential& v : {Potential::square_well(-2.0, 1.0), Potential::poschl_teller(2), Potential::gaussian(1.0, 2.0)}) {
    const double c = v.decay_constant();
    EXPECT_TRUE(std::isfinite(c));
    EXPECT_GE(c, v.max_abs());
    EXPECT_TRUE(v.is_even());
    for (double x : {0.3, 1.7, 5.0}) EXPECT_EQ(v(x), v(-x));
  }
}

// Bound states of a square well of depth |v0| on |x| < a: roots of the
// even (q tan(qa) = p) and odd (-q cot(qa) = p) matching conditions with
// q^2 + p^2 = |v0|, located by sign changes and refined by bisection.
std::size_t square_well_bound_states(double v0, double a) {
  const double depth = std::abs(v0);
  auto even = [&](double q) { return q * std::sin(q * a) - std::sqrt(depth - q * q) * std::cos(q * a); };
  auto odd = [&](double q) { return -q * std::cos(q * a) - std::sqrt(depth - q * q) * std::sin(q * a); };
  auto roots = [&](auto&& g) {
    const int samples = 20000;
    const double top = std::sqrt(depth);
    std::size_t found = 0;
    for (int i = 0; i < samples; ++i) {
      double lo = top * i / samples, hi = top * (i + 1) / samples;
      if (g(lo) == 0.0 || (g(lo) > 0.0) == (g(hi) > 0.0)) continue;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        ((g(lo) > 0.0) == (g(mid) > 0.0) ? lo : hi) = mid;
      }
      if (hi < top) ++found;
    }
    return found;
  };
  return roots(even) + roots(odd);
}

TEST(Operators, FreeLaplacianSpectrum) {
  const BoxDiscretization b = BoxDiscretization::make(5.0, 199);
  const SymmetricOperator h0 = build_h0(b);
  const EigenData e = eigendecompose(h0);
  const double h = b.spacing();
  for (std::size_t j = 0; j < b.n; j += 17) {
    const double s = std::sin(double(j + 1) * kPi / (2.0 * double(b.n + 1)));
    EXPECT_NEAR(e.values[j], 4.0 / (h * h) * s * s, 1e-9) << j;
  }
  // low levels approach the continuum (j pi / 2L)^2
  EXPECT_NEAR(e.values[0], std::pow(kPi / 10.0, 2), 1e-4);
}

TEST(Operators, GroundStateApproachesContinuumBox) {
  const SymmetricOperator h0 = build_h0(BoxDiscretization::make(20.0, 2000));
  const double want = std::pow(kPi / 40.0, 2);
  EXPECT_NEAR(linalg::eigenvalue_by_index(h0.tri, 0) / want, 1.0, 1e-2);
}

TEST(Operators, PoschlTellerSingleBoundState) {
  const SymmetricOperator h = build_h(BoxDiscretization::make(20.0, 2000), Potential::poschl_teller(1));
  EXPECT_EQ(linalg::sturm_count(h.tri, 0.0), 1u);
  EXPECT_NEAR(linalg::eigenvalue_by_index(h.tri, 0), -1.0, 2e-2);
}

TEST(Operators, SquareWellBoundStateCount) {
  const BoxDiscretization box = BoxDiscretization::make(20.0, 3999);
  for (double depth : {-0.5, -2.0, -8.0, -20.0, -40.0}) {
    const SymmetricOperator h = build_h(box, Potential::square_well(depth, 1.0));
    EXPECT_EQ(linalg::sturm_count(h.tri, 0.0), square_well_bound_states(depth, 1.0)) << depth;
  }
  EXPECT_EQ(square_well_bound_states(-2.0, 1.0), 1u);
  EXPECT_EQ(square_well_bound_states(-8.0, 1.0), 2u);
}

TEST(Operators, PotentialOnDiagonal) {
  const BoxDiscretization b = BoxDiscretization::make(4.0, 39);
  const Potential v = Potential::square_well(-2.0, 1.0);
  const SymmetricOperator h = build_h(b, v), h0 = build_h0(b);
  for (std::size_t i = 0; i < b.n; ++i) EXPECT_DOUBLE_EQ(h.tri.diag[i] - h0.tri.diag[i], v(b.node(i)));
  EXPECT_EQ(h.tri.off, h0.tri.off);
}

TEST(Operators, DenseDecompositionResiduals) {
  const BoxDiscretization b = BoxDiscretization::make(10.0, 499);
  const SymmetricOperator h = build_h(b, Potential::poschl_teller(1));
  const EigenData e = eigendecompose(h);
  EXPECT_TRUE(e.complete);
  const Residuals r = check_eigendata(h, e);
  EXPECT_LT(r.eigen, 1e-12);
  EXPECT_LT(r.orthonormality, 1e-12);
  const Residuals rd = check_eigendata(h.dense(), e);
  EXPECT_LT(rd.eigen, 1e-12);
}

TEST(Operators, PartialDecompositionMatchesDense) {
  const BoxDiscretization b = BoxDiscretization::make(10.0, 499);
  const SymmetricOperator h = build_h(b, Potential::square_well(-2.0, 1.0));
  const EigenData full = eigendecompose(h);
  const EigenData part = eigendecompose_below(h, 1.0);
  EXPECT_FALSE(part.complete);
  ASSERT_GE(part.values.size(), 2u);
  EXPECT_LT(part.values[part.values.size() - 2], 1.0);
  EXPECT_GE(part.values.back(), 1.0);
  for (std::size_t k = 0; k < part.values.size(); ++k) EXPECT_NEAR(part.values[k], full.values[k], 1e-10);
  const Residuals r = check_eigendata(h, part);
  EXPECT_LT(r.eigen, 1e-12);
  EXPECT_LT(r.orthonormality, 1e-10);
  // projections built from either agree
  const Projection p1 = spectral_projection(full, 1.0), p2 = spectral_projection(part, 1.0);
  EXPECT_EQ(p1.rank(), p2.rank());
  EXPECT_LT((p1.dense() - p2.dense()).norm(), 1e-9);
}

TEST(Operators, DenseSolveSizeLimit) {
  const SymmetricOperator h0 = build_h0(BoxDiscretization::make(100.0, 9999));
  EXPECT_THROW(eigendecompose(h0), PreconditionError);
}

TEST(Projection, CollisionWithEigenvalueNamesIt) {
  const BoxDiscretization b = BoxDiscretization::make(5.0, 99);
  const EigenData e = eigendecompose(build_h0(b));
  const double level = e.values[3];
  try {
    spectral_projection(e, level);
    FAIL() << "expected PreconditionError";
  } catch (const PreconditionError& err) {
    EXPECT_NE(std::string(err.what()).find("eigenvalue"), std::string::npos);
  }
  EXPECT_EQ(spectral_projection(e, 0.5 * (e.values[3] + e.values[4])).rank(), 4);
}

TEST(Projection, PartialDataMustReachLevel) {
  const SymmetricOperator h0 = build_h0(BoxDiscretization::make(5.0, 99));
  const EigenData part = eigendecompose_below(h0, 1.0);
  EXPECT_THROW(spectral_projection(part, 50.0), PreconditionError);
}

TEST(ProjectionDifference, RotationToyHasPlusMinusSine) {
  for (double phi : {0.2, 0.7, 1.3}) {
    Eigen::MatrixXd pb = Eigen::MatrixXd::Zero(5, 1), p0b = Eigen::MatrixXd::Zero(5, 1);
    pb(0, 0) = std::cos(phi);
    pb(1, 0) = std::sin(phi);
    p0b(0, 0) = 1.0;
    const Projection p = Projection::from_basis(pb), p0 = Projection::from_basis(p0b);
    const ProjectionDifference d = projection_difference(p, p0, 0.0);
    ASSERT_EQ(d.eigenvalues.size(), 5u);
    EXPECT_NEAR(d.eigenvalues.front(), -std::sin(phi), 1e-14);
    EXPECT_NEAR(d.eigenvalues.back(), std::sin(phi), 1e-14);
    EXPECT_NEAR(d.eigenvalues[2], 0.0, 1e-14);
    EXPECT_EQ(d.trace(), 0);
    const auto angles = principal_angle_spectrum(p, p0);
    EXPECT_LT(max_diff(angles, d.eigenvalues), 1e-14);
    // M+ has top sin^2, as does M-
    const MPlusMinusSpectra m = m_plus_minus_spectra(p, p0);
    EXPECT_NEAR(m.plus.back(), std::pow(std::sin(phi), 2), 1e-14);
    EXPECT_NEAR(m.minus.back(), std::pow(std::sin(phi), 2), 1e-14);
  }
}

TEST(ProjectionDifference, CompressedMatchesDense) {
  std::mt19937_64 rng(21);
  for (auto [rp, rp0] : std::vector<std::pair<int, int>>{{5, 5}, {7, 4}, {3, 9}, {0, 2}}) {
    const Projection p = Projection::from_basis(random_basis(rng, 30, rp));
    const Projection p0 = Projection::from_basis(random_basis(rng, 30, rp0));
    const ProjectionDifference d = projection_difference(p, p0, 0.0);
    const auto dense = sorted_eigenvalues(p.dense() - p0.dense());
    EXPECT_LT(max_diff(d.eigenvalues, dense), 1e-12) << rp << "," << rp0;
    EXPECT_LT((d.dense() - (p.dense() - p0.dense())).norm(), 1e-12);
    EXPECT_LT(max_diff(principal_angle_spectrum(p, p0), dense), 1e-12);
    EXPECT_EQ(d.trace(), rp - rp0);
    double sum = 0.0;
    for (double v : d.eigenvalues) sum += v;
    EXPECT_NEAR(sum, double(rp - rp0), 1e-12);
    EXPECT_LE(d.max_abs_eigenvalue(), 1.0 + 1e-12);
  }
}

TEST(ProjectionDifference, SquareDecomposesIntoMPlusMinus) {
  std::mt19937_64 rng(22);
  const Projection p = Projection::from_basis(random_basis(rng, 25, 6));
  const Projection p0 = Projection::from_basis(random_basis(rng, 25, 8));
  const auto [plus, minus] = m_plus_minus(p, p0);
  const Eigen::MatrixXd d = p.dense() - p0.dense();
  EXPECT_LT((d * d - (plus + minus)).norm(), 1e-12);
  const ProjectionDifference pd = projection_difference(p, p0, 0.0);
  const CompressedMPlusMinus cm = compress_m_plus_minus(pd.joint_basis, p, p0);
  EXPECT_LT(algebra_defect(pd, cm), 1e-12);
  // compressed spectra equal the dense ones, and both are >= 0
  const MPlusMinusSpectra s = m_plus_minus_spectra(cm, 25);
  EXPECT_LT(max_diff(s.plus, sorted_eigenvalues(plus)), 1e-12);
  EXPECT_LT(max_diff(s.minus, sorted_eigenvalues(minus)), 1e-12);
  EXPECT_GE(s.plus.front(), -1e-12);
  EXPECT_GE(s.minus.front(), -1e-12);
}

TEST(ProjectionDifference, DimensionMismatchRejected) {
  const Projection a = Projection::from_basis(Eigen::MatrixXd::Identity(4, 1));
  const Projection b = Projection::from_basis(Eigen::MatrixXd::Identity(5, 1));
  EXPECT_THROW(projection_difference(a, b, 0.0), PreconditionError);
  EXPECT_THROW(principal_angle_spectrum(a, b), PreconditionError);
}

TEST(Pairing, InteriorEigenvaluesPairUp) {
  std::mt19937_64 rng(23);
  const Projection p = Projection::from_basis(random_basis(rng, 50, 12));
  const Projection p0 = Projection::from_basis(random_basis(rng, 50, 9));
  const ProjectionDifference d = projection_difference(p, p0, 0.0);
  const SymmetryPairingReport r = symmetry_pairing_report(d, 0.05);
  EXPECT_LE(r.max_error, 1e-8);
  EXPECT_TRUE(r.unpaired.empty());
  EXPECT_FALSE(r.pairs.empty());
}

TEST(Pairing, SyntheticReport) {
  const std::vector<double> ev = {-0.5 + 1e-10, -0.3, -0.01, 0.0, 0.02, 0.3, 0.5, 0.7, 1.0};
  const SymmetryPairingReport r = symmetry_pairing_report(ev, 0.05, 1e-8);
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_NEAR(r.max_error, 1e-10, 1e-12);
  ASSERT_EQ(r.unpaired.size(), 1u);
  EXPECT_EQ(r.unpaired[0], 0.7);
  EXPECT_THROW(symmetry_pairing_report(ev, 0.0), PreconditionError);
  EXPECT_THROW(symmetry_pairing_report(ev, 0.5), PreconditionError);
}

TEST(Pipeline, SmallBoxDenseAndCompressedAgree) {
  const BoxDiscretization b = BoxDiscretization::make(10.0, 999);
  const Potential v = Potential::square_well(-2.0, 1.0);
  const double lambda = 1.0;
  const EigenData eh = eigendecompose_below(build_h(b, v), lambda);
  const EigenData eh0 = eigendecompose_below(build_h0(b), lambda);
  const Projection p = spectral_projection(eh, lambda), p0 = spectral_projection(eh0, lambda);
  const ProjectionDifference d = projection_difference(p, p0, lambda);
  const auto dense = sorted_eigenvalues(p.dense() - p0.dense());
  EXPECT_LT(max_diff(d.eigenvalues, dense), 1e-10);
  EXPECT_LE(d.max_abs_eigenvalue(), 1.0 + 1e-12);
  // rank difference equals the difference of Sturm counts
  EXPECT_EQ(d.trace(), long(linalg::sturm_count(build_h(b, v).tri, lambda)) -
                           long(linalg::sturm_count(build_h0(b).tri, lambda)));
  double sum = 0.0;
  for (double x : d.eigenvalues) sum += x;
  EXPECT_NEAR(sum, double(d.trace()), 1e-9);
}

TEST(Pipeline, CorrectBoxPairsAndDecomposes) {
  const BoxDiscretization b = BoxDiscretization::with_spacing(100.0, 0.02);
  const Potential v = Potential::square_well(-2.0, 1.0);
  const SymmetricOperator h = build_h(b, v), h0 = build_h0(b);
  const EigenData eh = eigendecompose_below(h, 1.0), eh0 = eigendecompose_below(h0, 1.0);
  EXPECT_LT(check_eigendata(h, eh).eigen, 1e-12);
  const Projection p = spectral_projection(eh, 1.0), p0 = spectral_projection(eh0, 1.0);
  const ProjectionDifference d = projection_difference(p, p0, 1.0);
  const SymmetryPairingReport r = symmetry_pairing_report(d, 0.05);
  EXPECT_LE(r.max_error, 1e-8);
  EXPECT_TRUE(r.unpaired.empty());
  const CompressedMPlusMinus m = compress_m_plus_minus(d.joint_basis, p, p0);
  EXPECT_LE(algebra_defect(d, m), 1e-12);
}

}  // namespace
