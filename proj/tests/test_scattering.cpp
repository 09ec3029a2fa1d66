#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "bandfill/scattering.hpp"

namespace {

using namespace bandfill;
using namespace bandfill::scattering;
using schrodinger::BoxDiscretization;
using schrodinger::Potential;
using cplx = std::complex<double>;

constexpr double kPi = std::numbers::pi;

// Exact S for a piecewise-constant potential: regions separated by `cuts`,
// value `levels[i]` between cuts[i-1] and cuts[i], zero at both ends.
Eigen::Matrix2cd transfer_oracle(const std::vector<double>& cuts, const std::vector<double>& levels,
                                 double lambda) {
  const double k = std::sqrt(lambda);
  auto wavenumber = [&](double v) { return std::sqrt(cplx(lambda - v)); };
  // right-moving unit wave on the far right, carried to the far left
  auto sweep = [&](const std::vector<double>& xs, const std::vector<double>& vs) {
    cplx a = 1.0, b = 0.0, q = k;  // coefficients of e^{iqx}, e^{-iqx} in the current region
    for (std::size_t m = xs.size(); m-- > 0;) {
      const double x0 = xs[m];
      const cplx ql = wavenumber(m == 0 ? 0.0 : vs[m - 1]);
      const cplx psi = a * std::exp(cplx(0, 1) * q * x0) + b * std::exp(-cplx(0, 1) * q * x0);
      const cplx dpsi = cplx(0, 1) * q * (a * std::exp(cplx(0, 1) * q * x0) - b * std::exp(-cplx(0, 1) * q * x0));
      a = 0.5 * (psi + dpsi / (cplx(0, 1) * ql)) * std::exp(-cplx(0, 1) * ql * x0);
      b = 0.5 * (psi - dpsi / (cplx(0, 1) * ql)) * std::exp(cplx(0, 1) * ql * x0);
      q = ql;
    }
    return std::pair<cplx, cplx>{1.0 / a, b / a};  // (t, r)
  };
  const auto [t, r_left] = sweep(cuts, levels);
  std::vector<double> mirrored_cuts, mirrored_levels(levels.rbegin(), levels.rend());
  for (auto it = cuts.rbegin(); it != cuts.rend(); ++it) mirrored_cuts.push_back(-*it);
  const auto [t2, r_right] = sweep(mirrored_cuts, mirrored_levels);
  Eigen::Matrix2cd s;
  s << t, r_right, r_left, t2;
  return s;
}

Eigen::Matrix2cd square_well_oracle(double depth, double a, double lambda) {
  return transfer_oracle({-a, a}, {depth}, lambda);
}

// First-order Born term for a square well of depth v0 on |x| < a.
Eigen::Matrix2cd born_square_well(double v0, double a, double lambda) {
  const double k = std::sqrt(lambda);
  const cplx i(0, 1);
  const cplx mean = 2.0 * a * v0;
  const cplx fourier = v0 * std::sin(2.0 * k * a) / k;  // int V e^{2ikx}
  Eigen::Matrix2cd b;
  b << -i / (2.0 * k) * mean, -i / (2.0 * k) * fourier, -i / (2.0 * k) * fourier, -i / (2.0 * k) * mean;
  return b;
}

TEST(Oracle, TransferMatrixIsUnitary) {
  const Eigen::Matrix2cd s = transfer_oracle({-2.0, -0.5, 1.0}, {1.5, -3.0}, 0.8);
  EXPECT_LT(unitarity_defect(s), 1e-13);
}

TEST(OdeRoute, FreeMotionGivesIdentity) {
  const ScatteringMatrix s = s_matrix_ode(Potential::zero(), 1.3, 1.0, 0.01);
  EXPECT_LT((s.S - Eigen::Matrix2cd::Identity()).norm(), kOdeUnitarityTol);
}

TEST(OdeRoute, SquareWellMatchesClosedForm) {
  const Potential v = Potential::square_well(-2.0, 1.0);
  for (double lambda : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const ScatteringMatrix s = s_matrix_ode(v, lambda);
    EXPECT_LT((s.S - square_well_oracle(-2.0, 1.0, lambda)).norm(), 1e-8) << lambda;
    EXPECT_EQ(s.method, Method::OdeMatch);
    EXPECT_DOUBLE_EQ(s.k, std::sqrt(lambda));
  }
}

TEST(OdeRoute, BarrierBelowTopMatchesClosedForm) {
  const Potential v = Potential::square_well(1.5, 0.7);
  for (double lambda : {0.5, 1.0, 3.0}) {
    EXPECT_LT((s_matrix_ode(v, lambda).S - square_well_oracle(1.5, 0.7, lambda)).norm(), 1e-8) << lambda;
  }
}

TEST(OdeRoute, PoschlTellerIsReflectionless) {
  const Potential v = Potential::poschl_teller(1);
  for (double lambda : {0.25, 0.5, 1.0, 2.0}) {
    const ScatteringMatrix s = s_matrix_ode(v, lambda);
    const double k = std::sqrt(lambda);
    EXPECT_LE(std::abs(s.reflection_left()), 1e-8) << lambda;
    EXPECT_LE(std::abs(s.reflection_right()), 1e-8) << lambda;
    // t(k) = (k + i) / (k - i) for V = -2 sech^2 x
    EXPECT_LT(std::abs(s.transmission() - (k + cplx(0, 1)) / (k - cplx(0, 1))), 1e-8) << lambda;
  }
}

TEST(OdeRoute, Preconditions) {
  const Potential v = Potential::poschl_teller(1);
  EXPECT_THROW(s_matrix_ode(v, 0.0), PreconditionError);
  EXPECT_THROW(s_matrix_ode(v, -1.0), PreconditionError);
  EXPECT_THROW(s_matrix_ode(v, 1.0, 3.0, 0.01), PreconditionError);
  EXPECT_THROW(s_matrix_ode(v, 1.0, 30.0, 0.0), PreconditionError);
}

TEST(OdeRoute, CoarseStepAsksForRefinement) {
  const Potential v = Potential::square_well(-2.0, 1.0);
  try {
    s_matrix_ode(v, 2.0, 2.0, 0.4);
    FAIL() << "expected RefinementError";
  } catch (const RefinementError& e) {
    EXPECT_DOUBLE_EQ(e.suggested_step(), 0.2);
  }
}

TEST(StationaryRoute, FreeMotionGivesIdentity) {
  const ScatteringMatrix s = s_matrix_stationary(Potential::zero(), 0.7);
  EXPECT_EQ(s.S, Eigen::Matrix2cd::Identity());
  EXPECT_EQ(s.method, Method::Stationary);
}

TEST(StationaryRoute, SquareWellMatchesClosedForm) {
  const Potential v = Potential::square_well(-2.0, 1.0);
  for (double lambda : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    EXPECT_LT((s_matrix_stationary(v, lambda).S - square_well_oracle(-2.0, 1.0, lambda)).norm(), 1e-10) << lambda;
  }
}

TEST(StationaryRoute, GaussianAgreesWithOde) {
  const Potential v = Potential::gaussian(-1.0, 0.8);
  for (double lambda : {0.3, 1.0, 2.5}) {
    const ScatteringMatrix a = s_matrix_ode(v, lambda), b = s_matrix_stationary(v, lambda);
    EXPECT_LT((a.S - b.S).norm(), 1e-6) << lambda;
  }
}

TEST(StationaryRoute, OperatorsLayout) {
  const Potential v = Potential::square_well(-2.0, 1.0);
  const StationaryOperators op = stationary_operators(v, 1.0, {0.0, 8, 6});
  EXPECT_EQ(op.size(), 48u);
  EXPECT_EQ(op.Z.rows(), 2);
  for (double x : op.nodes) {
    EXPECT_GT(x, -1.0);
    EXPECT_LT(x, 1.0);
  }
  for (Eigen::Index j = 0; j < op.Jdiag.size(); ++j) EXPECT_EQ(op.Jdiag(j), -1.0);
  EXPECT_THROW(stationary_operators(Potential::poschl_teller(1), 1.0, {2.0, 60, 10}), PreconditionError);
}

TEST(BornLimit, RemainderScalesQuadratically) {
  // S(eps V) - I - eps B = O(eps^2); halving eps cuts the remainder by 4
  const double lambda = 1.0;
  const Eigen::Matrix2cd born = born_square_well(-2.0, 1.0, lambda);
  auto remainder = [&](double eps) {
    const ScatteringMatrix s = s_matrix_stationary(Potential::square_well(-2.0 * eps, 1.0), lambda);
    return (s.S - Eigen::Matrix2cd::Identity() - eps * born).norm();
  };
  const double r1 = remainder(1e-3), r2 = remainder(2e-3);
  EXPECT_NEAR(r2 / r1, 4.0, 0.1);
  EXPECT_LT(r1, 1e-4);
  const ScatteringMatrix ode = s_matrix_ode(Potential::square_well(-2e-3, 1.0), lambda);
  EXPECT_NEAR((ode.S - Eigen::Matrix2cd::Identity() - 1e-3 * born).norm() / r1, 1.0, 1e-2);
}

TEST(Unitarity, SweepBothRoutes) {
  for (const Potential& v : {Potential::square_well(-2.0, 1.0), Potential::poschl_teller(1)}) {
    for (int i = 0; i <= 15; ++i) {
      const double lambda = 0.25 * std::pow(16.0, double(i) / 15.0);
      const ScatteringMatrix a = s_matrix_ode(v, lambda), b = s_matrix_stationary(v, lambda);
      EXPECT_LE(a.unitarity_defect, 1e-8) << v.label() << " " << lambda;
      EXPECT_LE(b.unitarity_defect, 1e-6) << v.label() << " " << lambda;
      EXPECT_LE((a.S - b.S).norm(), 1e-3) << v.label() << " " << lambda;
      EXPECT_LE(a.symmetry_defect(), 1e-8);
      EXPECT_NEAR(std::abs(a.det()), 1.0, 1e-8);
    }
  }
}

TEST(Continuity, HolderQuotientStable) {
  const Potential v = Potential::square_well(-2.0, 1.0);
  auto sweep = [&](int n) {
    std::vector<ScatteringMatrix> ss;
    for (int i = 0; i < n; ++i) ss.push_back(s_matrix_ode(v, 0.5 + 1.5 * double(i) / double(n - 1)));
    return holder_constant(ss);
  };
  const double c1 = sweep(21), c2 = sweep(41);
  EXPECT_TRUE(std::isfinite(c1));
  EXPECT_GT(c1, 0.0);
  // a Lipschitz map has Holder-1/2 quotient O(sqrt(step))
  EXPECT_LT(c2, c1);
}

TEST(Eigenphases, DiagonalExamples) {
  ScatteringMatrix s;
  s.S = Eigen::Matrix2cd::Identity();
  EXPECT_EQ(eigenphases(s).size(), 0u);
  EXPECT_EQ(eigenphases(s).kappa_max(), 0.0);

  s.S(0, 0) = std::polar(1.0, kPi / 3);
  const EigenphaseSet one = eigenphases(s);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_NEAR(one.thetas[0], kPi / 3, 1e-14);
  EXPECT_NEAR(one.kappas[0], 0.5, 1e-14);

  s.S = -Eigen::Matrix2cd::Identity();
  const EigenphaseSet flip = eigenphases(s);
  ASSERT_EQ(flip.size(), 2u);
  EXPECT_NEAR(flip.kappa_max(), 1.0, 1e-14);
  EXPECT_NEAR(flip.thetas[0], kPi, 1e-14);
}

TEST(Eigenphases, ToleranceDropsNearOnePhases) {
  ScatteringMatrix s;
  s.S(0, 0) = std::polar(1.0, 1e-7);
  s.S(1, 1) = std::polar(1.0, -2.0);
  const EigenphaseSet e = eigenphases(s, 1e-6);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_NEAR(e.thetas[0], -2.0, 1e-14);
  EXPECT_NEAR(e.kappas[0], std::sin(1.0), 1e-14);
  EXPECT_EQ(eigenphases(s, 1e-8).size(), 2u);
}

TEST(Eigenphases, KappaIsHalfChord) {
  const ScatteringMatrix s = s_matrix_ode(Potential::square_well(-2.0, 1.0), 1.0);
  const EigenphaseSet e = eigenphases(s);
  ASSERT_EQ(e.size(), 2u);
  for (std::size_t n = 0; n < 2; ++n) EXPECT_NEAR(e.kappas[n], std::sin(std::abs(e.thetas[n]) / 2), 1e-14);
  EXPECT_GE(e.kappas[0], e.kappas[1]);
  // independent: eigenvalues of the oracle matrix
  Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(square_well_oracle(-2.0, 1.0, 1.0));
  std::vector<double> want;
  for (int i = 0; i < 2; ++i) want.push_back(std::abs(es.eigenvalues()(i) - 1.0) / 2.0);
  std::sort(want.rbegin(), want.rend());
  EXPECT_NEAR(e.kappas[0], want[0], 1e-8);
  EXPECT_NEAR(e.kappas[1], want[1], 1e-8);
}

TEST(Eigenphases, ReflectionlessPhasesEqualTransmissionPhase) {
  const ScatteringMatrix s = s_matrix_ode(Potential::poschl_teller(1), 1.0);
  const EigenphaseSet e = eigenphases(s);
  ASSERT_EQ(e.size(), 2u);
  const double phase = std::arg(s.transmission());
  EXPECT_NEAR(e.thetas[0], phase, 1e-8);
  EXPECT_NEAR(e.thetas[1], phase, 1e-8);
  EXPECT_NEAR(e.kappas[0], e.kappas[1], 1e-8);
}

TEST(Eigenphases, NonUnitaryRejected) {
  ScatteringMatrix s;
  s.S(0, 1) = 0.01;
  EXPECT_THROW(eigenphases(s), PreconditionError);
}

TEST(SpectralShift, FreeCaseIsZero) {
  const BoxDiscretization box = BoxDiscretization::make(20.0, 1999);
  EXPECT_EQ(spectral_shift_count(Potential::zero(), 1.0 + 1e-3, box), 0);
  EXPECT_EQ(smoothed_spectral_shift(Potential::zero(), 1.0, box), 0.0);
}

TEST(SpectralShift, BetweenBoundStatesCountsOne) {
  const BoxDiscretization box = BoxDiscretization::make(20.0, 1999);
  // depth 8, half-width 1: two bound states
  const Potential v = Potential::square_well(-8.0, 1.0);
  const auto h = schrodinger::build_h(box, v);
  const double e0 = linalg::eigenvalue_by_index(h.tri, 0), e1 = linalg::eigenvalue_by_index(h.tri, 1);
  ASSERT_LT(e1, 0.0);
  EXPECT_EQ(spectral_shift_count(v, 0.5 * (e0 + e1), box), -1);
  EXPECT_GT(linalg::eigenvalue_by_index(h.tri, 2), 0.0);
  EXPECT_EQ(spectral_shift_count(v, 0.5 * e1, box), -2);
}

TEST(SpectralShift, SingleBoundStateNearThreshold) {
  // depth 2, half-width 1 holds exactly one bound state
  const BoxDiscretization box = BoxDiscretization::make(50.0, 4999);
  const Potential v = Potential::square_well(-2.0, 1.0);
  ASSERT_EQ(linalg::sturm_count(schrodinger::build_h(box, v).tri, 0.0), 1u);
  const auto h0 = schrodinger::build_h0(box);
  // just above 0, between the two lowest free levels
  const double lambda = 0.5 * linalg::eigenvalue_by_index(h0.tri, 0);
  EXPECT_EQ(spectral_shift_count(v, lambda, box), -1);
}

TEST(SpectralShift, CollisionNamesEigenvalue) {
  const BoxDiscretization box = BoxDiscretization::make(20.0, 1999);
  const auto h0 = schrodinger::build_h0(box);
  const double level = linalg::eigenvalue_by_index(h0.tri, 30);
  try {
    spectral_shift_count(Potential::square_well(-2.0, 1.0), level, box);
    FAIL() << "expected PreconditionError";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("eigenvalue"), std::string::npos);
  }
}

TEST(BirmanKrein, SmoothedShiftMatchesDeterminantPhase) {
  const BoxDiscretization box = BoxDiscretization::with_spacing(200.0, 0.02);
  const Potential v = Potential::square_well(-2.0, 1.0);
  for (double lambda : {0.5, 0.9, 1.3, 2.0}) {
    const BirmanKreinResult r = birman_krein_check(v, lambda, box);
    EXPECT_LE(r.residual, 0.05) << lambda;
    EXPECT_NEAR(std::abs(r.det_s), 1.0, 1e-8);
    EXPECT_NEAR(r.det_phase, -std::arg(s_matrix_stationary(v, lambda).det()) / (2 * kPi), 1e-6);
  }
}

TEST(BirmanKrein, DistanceToInteger) {
  EXPECT_DOUBLE_EQ(distance_to_integer(2.25), 0.25);
  EXPECT_NEAR(distance_to_integer(-0.9), 0.1, 1e-15);
  EXPECT_EQ(distance_to_integer(3.0), 0.0);
}

TEST(BirmanKrein, LambdaMustBePositive) {
  const BoxDiscretization box = BoxDiscretization::make(20.0, 1999);
  EXPECT_THROW(birman_krein_check(Potential::square_well(-2.0, 1.0), 0.0, box), PreconditionError);
  EXPECT_THROW(smoothed_spectral_shift(Potential::square_well(-2.0, 1.0), 1e-6, box), PreconditionError);
}

}  // namespace
