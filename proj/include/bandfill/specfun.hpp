#pragma once

// Complex Gauss hypergeometric series, complex gamma, and the conical
// (Mehler) functions P_{-1/2+it}(x) for real t >= 0, x >= 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "bandfill/error.hpp"

namespace bandfill::specfun {

using cplx = std::complex<double>;

inline constexpr double kSeriesTolerance = 1e-16;
inline constexpr int kSeriesMaxTerms = 10000;
inline constexpr double kMaxSeriesArgument = 0.9;
/// Switch point between the near-one and large-argument representations.
inline constexpr double kConicalSeam = 2.0;
inline constexpr double kMaxConicalOrder = 16.0;

namespace detail {

inline bool near_nonpositive_integer(cplx z, double tol) {
  if (std::abs(z.imag()) > tol || z.real() > tol) return false;
  return std::abs(z.real() - std::round(z.real())) <= tol;
}

}  // namespace detail

/// Gauss series F(a,b;c;z) = sum (a)_n (b)_n / (c)_n z^n / n!.
///
/// Summation stops once three consecutive terms fall below 1e-16 times the
/// running sum. Only the convergent regime |z| <= 0.9 is accepted.
inline cplx hyp2f1(cplx a, cplx b, cplx c, cplx z) {
  if (detail::near_nonpositive_integer(c, 1e-12)) {
    std::ostringstream os;
    os << "hyp2f1: c = " << c << " is a pole of the series";
    throw DomainError(os.str());
  }
  if (std::abs(z) > kMaxSeriesArgument * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "hyp2f1: |z| = " << std::abs(z) << " outside the series regime |z| <= 0.9";
    throw DomainError(os.str());
  }
  cplx sum = 1.0;
  cplx term = 1.0;
  int small_run = 0;
  for (int n = 0; n < kSeriesMaxTerms; ++n) {
    const double dn = n;
    term *= (a + dn) * (b + dn) / ((c + dn) * (dn + 1.0)) * z;
    sum += term;
    if (!std::isfinite(sum.real()) || !std::isfinite(sum.imag())) {
      throw ConvergenceError("hyp2f1: partial sums overflowed after " + std::to_string(n + 1) + " terms",
                             std::abs(term));
    }
    if (std::abs(term) <= kSeriesTolerance * std::abs(sum)) {
      if (++small_run == 3) return sum;
    } else {
      small_run = 0;
    }
  }
  throw ConvergenceError("hyp2f1: series did not converge within 10000 terms",
                         std::abs(term));
}

namespace detail {

// Lanczos approximation, g = 7, nine coefficients.
inline constexpr double kLanczosG = 7.0;
inline constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993227684700473478,  676.520368121885098567009190444019,
    -1259.13921672240287047156078755283, 771.3234287776530788486528258894,
    -176.61502916214059906584551354,     12.507343278686904814458936853,
    -0.13857109526572011689554707,       9.984369578019570859563e-6,
    1.50563273514931155834e-7};

inline cplx gamma_right_half(cplx z) {
  // valid for Re z >= 1/2
  z -= 1.0;
  cplx x = kLanczos[0];
  for (std::size_t i = 1; i < kLanczos.size(); ++i) x += kLanczos[i] / (z + double(i));
  const cplx t = z + kLanczosG + 0.5;
  return std::sqrt(2.0 * std::numbers::pi) * std::pow(t, z + 0.5) * std::exp(-t) * x;
}

}  // namespace detail

/// Gamma function for complex argument away from the poles.
inline cplx complex_gamma(cplx z) {
  if (detail::near_nonpositive_integer(z, 1e-12)) {
    std::ostringstream os;
    os << "complex_gamma: z = " << z << " is within 1e-12 of a pole";
    throw DomainError(os.str());
  }
  if (z.real() < 0.5) {
    const double pi = std::numbers::pi;
    return pi / (std::sin(pi * z) * detail::gamma_right_half(1.0 - z));
  }
  return detail::gamma_right_half(z);
}

enum class ConicalRepresentation { NearOne, FarBranch };

inline const char* to_string(ConicalRepresentation r) {
  return r == ConicalRepresentation::NearOne ? "NearOne" : "FarBranch";
}

struct ConicalEval {
  double t = 0.0;
  double x = 1.0;
  double value = 1.0;
  ConicalRepresentation representation = ConicalRepresentation::NearOne;
  /// Imaginary part carried by the branch formula before it was dropped.
  double discarded_imag = 0.0;
};

namespace detail {

inline void check_conical_args(double t, double x) {
  if (!(t >= 0.0) || t > kMaxConicalOrder) {
    throw DomainError("conical_p: t = " + std::to_string(t) + " outside [0, 16]");
  }
  if (!(x >= 1.0) || !std::isfinite(x)) {
    throw DomainError("conical_p: x = " + std::to_string(x) + " must be >= 1");
  }
}

// The two conjugate branches of the large-argument representation, summed
// separately. Needs t > 0.
inline cplx conical_far_raw(double t, double x) {
  const double sqrt_pi = std::sqrt(std::numbers::pi);
  const cplx it(0.0, t);
  const double w = 1.0 / (x * x);
  const cplx first = complex_gamma(-it) / (sqrt_pi * complex_gamma(0.5 - it)) *
                     std::pow(cplx(2.0 * x), -0.5 - it) *
                     hyp2f1(0.25 + 0.5 * it, 0.75 + 0.5 * it, 1.0 + it, w);
  const cplx second = complex_gamma(it) / (sqrt_pi * complex_gamma(0.5 + it)) *
                      std::pow(cplx(2.0 * x), -0.5 + it) *
                      hyp2f1(0.25 - 0.5 * it, 0.75 - 0.5 * it, 1.0 - it, w);
  return first + second;
}

}  // namespace detail

/// P_{-1/2+it}(x) from the hypergeometric series about x = 1. Needs x < 2.8.
inline cplx conical_p_near(double t, double x) {
  detail::check_conical_args(t, x);
  const cplx it(0.0, t);
  return hyp2f1(0.5 - it, 0.5 + it, 1.0, (1.0 - x) / 2.0);
}

/// P_{-1/2+it}(x) from the large-argument representation (series in 1/x^2).
///
/// The gamma prefactors have poles at t = 0 where the branches cancel; for
/// t < 1e-3 the value is extrapolated to t through a quadratic in t^2 fitted
/// at t = 1e-3, 2e-3, 3e-3 (the function is even and analytic in t).
inline cplx conical_p_far(double t, double x) {
  detail::check_conical_args(t, x);
  if (x * x < 1.0 / kMaxSeriesArgument) {
    throw DomainError("conical_p_far: x = " + std::to_string(x) +
                      " too close to 1 for the 1/x^2 series");
  }
  constexpr double kSmall = 1e-3;
  if (t >= kSmall) return detail::conical_far_raw(t, x);
  const double s = t * t;
  const std::array<double, 3> nodes = {kSmall, 2 * kSmall, 3 * kSmall};
  cplx value = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    double weight = 1.0;
    const double si = nodes[i] * nodes[i];
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      if (j == i) continue;
      const double sj = nodes[j] * nodes[j];
      weight *= (s - sj) / (si - sj);
    }
    value += weight * detail::conical_far_raw(nodes[i], x);
  }
  return value;
}

/// Conical function P_{-1/2+it}(x), t in [0,16], x >= 1.
inline ConicalEval conical_p(double t, double x) {
  detail::check_conical_args(t, x);
  ConicalEval out;
  out.t = t;
  out.x = x;
  if (x == 1.0) {
    out.value = 1.0;
    return out;
  }
  const bool near = x < kConicalSeam;
  const cplx v = near ? conical_p_near(t, x) : conical_p_far(t, x);
  out.value = v.real();
  out.discarded_imag = v.imag();
  out.representation =
      near ? ConicalRepresentation::NearOne : ConicalRepresentation::FarBranch;
  return out;
}

struct ConicalBoundReport {
  double t_max = 0.0;
  std::size_t t_samples = 0;
  std::size_t x_samples = 0;
  /// sup sqrt(x) |P_{-1/2+it}(x)|
  double decay_sup = 0.0;
  double decay_argmax_t = 0.0;
  double decay_argmax_x = 1.0;
  /// sup |P_{t2} - P_{t1}| / (|t2-t1|^delta x^{-1/2} (1+log x)^delta)
  double holder_sup = 0.0;
  double holder_delta = 0.5;
  double max_discarded_imag = 0.0;
};

/// Empirical suprema of the decay and Holder quotients on a sample set.
///
/// The t samples are uniform on [0, t_max]; the Holder quotient runs over all
/// distinct pairs of t samples at each x.
inline ConicalBoundReport check_conical_bounds(double t_max, std::span<const double> xs,
                                               std::size_t t_samples = 31,
                                               double delta = 0.5) {
  if (t_samples < 2) throw PreconditionError("check_conical_bounds: need >= 2 t samples");
  ConicalBoundReport rep;
  rep.t_max = t_max;
  rep.t_samples = t_samples;
  rep.x_samples = xs.size();
  rep.holder_delta = delta;
  std::vector<double> ts(t_samples);
  for (std::size_t i = 0; i < t_samples; ++i) ts[i] = t_max * double(i) / double(t_samples - 1);

  std::vector<double> values(t_samples);
  for (double x : xs) {
    for (std::size_t i = 0; i < t_samples; ++i) {
      const ConicalEval e = conical_p(ts[i], x);
      values[i] = e.value;
      rep.max_discarded_imag = std::max(rep.max_discarded_imag, std::abs(e.discarded_imag));
      const double q = std::sqrt(x) * std::abs(e.value);
      if (q > rep.decay_sup) {
        rep.decay_sup = q;
        rep.decay_argmax_t = ts[i];
        rep.decay_argmax_x = x;
      }
    }
    const double scale = std::pow(x, -0.5) * std::pow(1.0 + std::log(x), delta);
    for (std::size_t i = 0; i < t_samples; ++i) {
      for (std::size_t j = i + 1; j < t_samples; ++j) {
        if (ts[j] == ts[i]) continue;  // numerator is 0
        const double num = std::abs(values[j] - values[i]);
        const double den = std::pow(ts[j] - ts[i], delta) * scale;
        rep.holder_sup = std::max(rep.holder_sup, num / den);
      }
    }
  }
  return rep;
}

/// n points log-uniform on [lo, hi].
inline std::vector<double> logspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a + (b - a) * double(i) / double(n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

}  // namespace bandfill::specfun
