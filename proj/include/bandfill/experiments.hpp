#pragma once

// Verification campaigns. Each run_* takes a finalized config and returns a
// report whose verdicts name the tolerance they were judged against.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bandfill/carleman.hpp"
#include "bandfill/config.hpp"
#include "bandfill/error.hpp"
#include "bandfill/parallel.hpp"
#include "bandfill/quadrature.hpp"
#include "bandfill/report.hpp"
#include "bandfill/scattering.hpp"
#include "bandfill/schrodinger.hpp"
#include "bandfill/specfun.hpp"

namespace bandfill::experiments {

struct RunOptions {
  std::size_t jobs = 1;
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

inline ExperimentReport new_report(const ExperimentConfig& c) {
  ExperimentReport r;
  r.experiment = to_string(c.experiment);
  r.config = to_json(c);
  return r;
}

inline void require(Experiment got, Experiment want) {
  if (got != want) {
    throw ConfigError(std::string("config is for ") + to_string(got) + ", expected " + to_string(want));
  }
}

inline const Potential& require_potential(const ExperimentConfig& c) {
  if (!c.potential) throw ConfigError(std::string(to_string(c.experiment)) + " needs a 'potential'");
  return *c.potential;
}

inline void require_positive_lambdas(const ExperimentConfig& c) {
  if (c.lambda_grid.empty()) throw ConfigError("lambda_grid must not be empty");
  for (double l : c.lambda_grid) {
    if (!(l > 0.0)) throw PreconditionError("lambda must be > 0 (got " + fmt(l) + ")");
  }
}

inline std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline json complex_matrix(const Eigen::Matrix2cd& s) {
  json j = json::array();
  for (int r = 0; r < 2; ++r) {
    json row = json::array();
    for (int c = 0; c < 2; ++c) row.push_back(json::array({s(r, c).real(), s(r, c).imag()}));
    j.push_back(row);
  }
  return j;
}

}  // namespace detail

// ---------------------------------------------------------------- specfun

inline ExperimentReport run_specfun_audit(const ExperimentConfig& c, const RunOptions& opt = {}) {
  detail::require(c.experiment, Experiment::SpecfunAudit);
  const GridParams& g = c.grids;
  ExperimentReport rep = detail::new_report(c);

  // seam: both representations on the overlap
  std::vector<double> xs(g.seam_x_samples);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = g.seam_x_lo + (g.seam_x_hi - g.seam_x_lo) * double(i) / double(std::max<std::size_t>(xs.size() - 1, 1));
  }
  struct SeamCase {
    Record rec;
    double diff = 0.0;
    double seconds = 0.0;
  };
  auto seams = parallel_map<SeamCase>(g.seam_t.size(), opt.jobs, [&](std::size_t i) {
    detail::Stopwatch sw;
    const double t = g.seam_t[i];
    double worst = 0.0, at = xs.front();
    for (double x : xs) {
      const double d = std::abs(specfun::conical_p_near(t, x) - specfun::conical_p_far(t, x));
      if (d > worst) {
        worst = d;
        at = x;
      }
    }
    SeamCase sc;
    sc.rec.id = "seam_t" + detail::fmt(t);
    sc.rec.inputs = {{"t", t}, {"x_lo", g.seam_x_lo}, {"x_hi", g.seam_x_hi}, {"x_samples", xs.size()}};
    sc.rec.outputs = {{"argmax_x", at}};
    sc.rec.residuals = {{"max_abs_difference", worst}};
    sc.diff = worst;
    sc.seconds = sw.seconds();
    return sc;
  });
  double seam_max = 0.0;
  for (auto& s : seams) {
    seam_max = std::max(seam_max, s.diff);
    rep.timing[s.rec.id] = s.seconds;
    rep.records.push_back(std::move(s.rec));
  }
  rep.add_verdict("seam_consistency", c, "seam", seam_max, "<=", seam_max <= c.tolerance("seam"));

  // decay bound on a grid and on its refinement
  struct BoundCase {
    Record rec;
    specfun::ConicalBoundReport b;
    double seconds = 0.0;
  };
  auto bounds = parallel_map<BoundCase>(2, opt.jobs, [&](std::size_t level) {
    detail::Stopwatch sw;
    const std::size_t nx = g.bound_x_samples << level;
    const std::size_t nt = ((g.bound_t_samples - 1) << level) + 1;
    const auto grid = specfun::logspace(1.0, g.bound_x_max, nx);
    BoundCase bc;
    bc.b = specfun::check_conical_bounds(g.bound_t_max, grid, nt);
    bc.rec.id = level == 0 ? "bounds_base" : "bounds_refined";
    bc.rec.inputs = {{"t_max", g.bound_t_max}, {"x_max", g.bound_x_max}, {"x_samples", nx}, {"t_samples", nt}};
    bc.rec.outputs = {{"decay_sup", bc.b.decay_sup},
                      {"decay_argmax_t", bc.b.decay_argmax_t},
                      {"decay_argmax_x", bc.b.decay_argmax_x},
                      {"holder_sup", bc.b.holder_sup},
                      {"holder_delta", bc.b.holder_delta}};
    bc.rec.residuals = {{"max_discarded_imag", bc.b.max_discarded_imag}};
    bc.seconds = sw.seconds();
    return bc;
  });
  const double s0 = bounds[0].b.decay_sup, s1 = bounds[1].b.decay_sup;
  const double change = std::abs(s1 - s0) / s0;
  for (auto& b : bounds) {
    rep.timing[b.rec.id] = b.seconds;
    rep.records.push_back(std::move(b.rec));
  }
  rep.add_verdict("decay_sup_finite", c, "bound_change", s1, "finite",
                  std::isfinite(s0) && std::isfinite(s1));
  rep.add_verdict("decay_sup_refinement", c, "bound_change", change, "<=", change <= c.tolerance("bound_change"));
  const double h0 = bounds[0].b.holder_sup, h1 = bounds[1].b.holder_sup;
  const double hchange = std::abs(h1 - h0) / h0;
  rep.add_verdict("holder_sup_finite", c, "bound_change", h1, "finite", std::isfinite(h0) && std::isfinite(h1));
  rep.add_verdict("holder_sup_refinement", c, "bound_change", hchange, "<=",
                  hchange <= c.tolerance("bound_change"));
  return rep;
}

// ---------------------------------------------------------------- carleman

inline ExperimentReport run_carleman_mehler(const ExperimentConfig& c, const RunOptions& opt = {}) {
  detail::require(c.experiment, Experiment::CarlemanMehler);
  const GridParams& g = c.grids;
  ExperimentReport rep = detail::new_report(c);
  const double tol_contain = c.tolerance("containment");

  // spectrum on Gauss-Legendre grids for a and a_alt
  struct SpecCase {
    Record rec;
    Eigen::VectorXd eig;
    double seconds = 0.0;
  };
  const std::vector<double> as = {g.a, g.a_alt};
  auto specs = parallel_map<SpecCase>(as.size(), opt.jobs, [&](std::size_t i) {
    detail::Stopwatch sw;
    SpecCase sc;
    sc.eig = carleman::spectrum(carleman::half_carleman(as[i], g.gauss_nodes));
    sc.rec.id = "half_carleman_gl_a" + detail::fmt(as[i]);
    sc.rec.inputs = {{"a", as[i]}, {"nodes", g.gauss_nodes}, {"scheme", "GaussLegendre"}};
    sc.rec.outputs = {{"min_eigenvalue", sc.eig.minCoeff()},
                      {"max_eigenvalue", sc.eig.maxCoeff()},
                      {"eigenvalues", detail::to_vector(sc.eig)}};
    sc.rec.residuals = {{"below_zero", std::max(0.0, -sc.eig.minCoeff())},
                        {"above_one", std::max(0.0, sc.eig.maxCoeff() - 1.0)}};
    sc.seconds = sw.seconds();
    return sc;
  });
  const double lo = specs[0].eig.minCoeff(), hi = specs[0].eig.maxCoeff();
  const double scaling = (specs[0].eig - specs[1].eig).cwiseAbs().maxCoeff();
  for (auto& s : specs) {
    rep.timing[s.rec.id] = s.seconds;
    rep.records.push_back(std::move(s.rec));
  }
  Record sr;
  sr.id = "scaling_invariance";
  sr.inputs = {{"a", g.a}, {"a_alt", g.a_alt}, {"nodes", g.gauss_nodes}};
  sr.residuals = {{"max_entrywise_difference", scaling}};
  rep.records.push_back(std::move(sr));
  const double containment = std::max(std::max(0.0, -lo), std::max(0.0, hi - 1.0));
  rep.add_verdict("spectrum_containment", c, "containment", containment, "<=", containment <= tol_contain);
  rep.add_verdict("top_eigenvalue", c, "top_eigenvalue", hi, ">=", hi >= c.tolerance("top_eigenvalue"));
  rep.add_verdict("scaling_invariance", c, "scaling", scaling, "<=", scaling <= c.tolerance("scaling"));

  // Mehler residual on the graded refinement sequence
  struct MehlerCase {
    Record rec;
    double relative = 0.0;
    double top = 0.0;
    double seconds = 0.0;
  };
  const std::size_t levels = g.graded_panels.size();
  auto cases = parallel_map<MehlerCase>(g.mehler_t.size() * levels, opt.jobs, [&](std::size_t idx) {
    detail::Stopwatch sw;
    const double t = g.mehler_t[idx / levels];
    const std::size_t panels = g.graded_panels[idx % levels];
    const auto grid = quad::graded_grid(g.a, panels, g.graded_order, g.graded_ratio);
    const auto res = carleman::mehler_residual(g.a, t, grid, g.mehler_lo, g.mehler_hi, g.mehler_samples);
    MehlerCase mc;
    mc.relative = res.relative;
    mc.rec.id = "mehler_t" + detail::fmt(t) + "_n" + std::to_string(grid.size());
    mc.rec.inputs = {{"a", g.a}, {"t", t}, {"panels", panels}, {"nodes", grid.size()}, {"scheme", "CompositeGraded"}};
    mc.rec.outputs = {{"eigenvalue", res.eigenvalue}, {"max_f", res.max_f}};
    mc.rec.residuals = {{"relative", res.relative}, {"max_abs", res.max_abs}};
    mc.seconds = sw.seconds();
    return mc;
  });
  bool decreasing = true;
  double finest = 0.0;
  for (std::size_t ti = 0; ti < g.mehler_t.size(); ++ti) {
    for (std::size_t l = 0; l < levels; ++l) {
      const double r = cases[ti * levels + l].relative;
      if (l > 0 && !(r < cases[ti * levels + l - 1].relative)) decreasing = false;
      if (l + 1 == levels) finest = std::max(finest, r);
    }
  }
  for (auto& m : cases) {
    rep.timing[m.rec.id] = m.seconds;
    rep.records.push_back(std::move(m.rec));
  }
  const double tol_m = c.tolerance("mehler_residual");
  rep.add_verdict("mehler_residual_finest", c, "mehler_residual", finest, "<=", finest <= tol_m);
  rep.add_verdict("mehler_residual_decreasing", c, "mehler_residual", decreasing ? 1.0 : 0.0, "strictly decreasing",
                  decreasing);
  return rep;
}

// ---------------------------------------------------------------- model operator

struct ModelSpectrumResult {
  std::vector<double> spectrum;        // eig(C_a^2 (x) Gamma), ascending
  std::vector<double> products;        // {mu_i kappa_n^2}, ascending
  std::vector<double> kappa_sq_gamma;  // eig(Gamma), ascending
  double product_error = 0.0;
};

inline ModelSpectrumResult model_spectrum(const carleman::KernelOperator& csq, const carleman::GammaMatrix& gamma) {
  ModelSpectrumResult r;
  const Eigen::VectorXd mu = carleman::spectrum(csq);
  r.spectrum = detail::to_vector(carleman::spectrum(carleman::model_operator(csq, gamma)));
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    for (double k2 : gamma.kappa_sq) r.products.push_back(mu(i) * k2);
  std::sort(r.products.begin(), r.products.end());
  r.kappa_sq_gamma = gamma.kappa_sq;
  for (std::size_t i = 0; i < r.spectrum.size(); ++i)
    r.product_error = std::max(r.product_error, std::abs(r.spectrum[i] - r.products[i]));
  return r;
}

inline ExperimentReport run_model_spectrum(const ExperimentConfig& c, const RunOptions& = {}) {
  detail::require(c.experiment, Experiment::ModelSpectrum);
  const GridParams& g = c.grids;
  ExperimentReport rep = detail::new_report(c);
  detail::Stopwatch sw;

  Eigen::Matrix2cd s0;
  std::vector<double> kappa_sq_expected;
  Record rec;
  if (!c.s0_phases.empty()) {
    if (c.s0_phases.size() != 2) throw ConfigError("s0_phases: expected two phases");
    s0 = Eigen::Matrix2cd::Zero();
    for (int i = 0; i < 2; ++i) {
      const double phi = c.s0_phases[std::size_t(i)];
      s0(i, i) = std::polar(1.0, phi);
      kappa_sq_expected.push_back(std::pow(std::sin(0.5 * phi), 2));
    }
    rec.id = "model_synthetic";
    rec.inputs = {{"source", "synthetic"}, {"phases", c.s0_phases}};
  } else {
    const Potential& v = detail::require_potential(c);
    const double lambda = c.lambda_grid.empty() ? 0.25 : c.lambda_grid.front();
    if (!(lambda > 0.0)) throw PreconditionError("lambda must be > 0");
    const auto s = scattering::s_matrix_ode(v, lambda);
    s0 = s.S;
    const auto ph = scattering::eigenphases(s, g.phase_tol);
    for (double k : ph.kappas) kappa_sq_expected.push_back(k * k);
    while (kappa_sq_expected.size() < 2) kappa_sq_expected.push_back(0.0);
    rec.id = "model_potential";
    rec.inputs = {{"source", "potential"}, {"potential", potential_to_json(v)}, {"lambda", lambda}};
  }
  std::sort(kappa_sq_expected.begin(), kappa_sq_expected.end());
  const auto gamma = carleman::gamma_matrix(s0);
  const auto csq = carleman::carleman_squared(g.a, g.model_nodes);
  const ModelSpectrumResult m = model_spectrum(csq, gamma);
  double kappa_err = 0.0;
  for (std::size_t i = 0; i < 2; ++i) kappa_err = std::max(kappa_err, std::abs(gamma.kappa_sq[i] - kappa_sq_expected[i]));

  const double top = m.spectrum.empty() ? 0.0 : m.spectrum.back();
  const double mu_max = carleman::spectrum(csq).maxCoeff();
  rec.inputs["a"] = g.a;
  rec.inputs["nodes"] = g.model_nodes;
  rec.outputs = {{"kappa_sq", gamma.kappa_sq},
                 {"factor_top", mu_max},
                 {"top_eigenvalue", top},
                 {"band_tops", json::array({mu_max * gamma.kappa_sq[0], mu_max * gamma.kappa_sq[1]})},
                 {"spectrum", m.spectrum}};
  rec.residuals = {{"product_identity", m.product_error}, {"kappa_match", kappa_err}};
  rep.timing[rec.id] = sw.seconds();
  rep.records.push_back(std::move(rec));
  rep.add_verdict("product_spectrum", c, "product_identity", m.product_error, "<=",
                  m.product_error <= c.tolerance("product_identity"));
  rep.add_verdict("gamma_bands", c, "kappa_match", kappa_err, "<=", kappa_err <= c.tolerance("kappa_match"));
  return rep;
}

// ---------------------------------------------------------------- band filling

struct BandStats {
  double lambda = 0.0;
  double lambda_used = 0.0;
  double kappa_max = 0.0;
  std::vector<double> kappas;
  long rank_p = 0, rank_p0 = 0;
  long xi_count = 0;
  double max_abs = 0.0;
  double coverage_gap = 0.0;
  long overflow = 0;
  long rank_excess = 0;
  long overflow_excluding_excess = 0;
  double m_plus_top = 0.0, m_minus_top = 0.0;
  double algebra = 0.0;
  double pairing_error = 0.0;
  long unpaired = 0;
  std::vector<double> d_nonzero;
  std::vector<double> m_plus_nonzero, m_minus_nonzero;
};

/// Largest gap between consecutive points of {eig} inside [lo, hi], the
/// interval endpoints included.
inline double coverage_gap(const std::vector<double>& eig, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  std::vector<double> pts = {lo, hi};
  for (double v : eig)
    if (v > lo && v < hi) pts.push_back(v);
  std::sort(pts.begin(), pts.end());
  double gap = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) gap = std::max(gap, pts[i] - pts[i - 1]);
  return gap;
}

namespace detail {

// Moves lambda off the box spectra by half the local level spacing.
inline double nudge_lambda(const schrodinger::SymmetricOperator& h, const schrodinger::SymmetricOperator& h0,
                           double lambda) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    bool clash = false;
    for (const auto* op : {&h, &h0}) {
      const double tol = 1e-9 * std::max(op->norm_bound(), 1.0);
      const std::size_t lo = linalg::sturm_count(op->tri, lambda - tol);
      if (lo != linalg::sturm_count(op->tri, lambda + tol)) {
        const double here = linalg::eigenvalue_by_index(op->tri, lo);
        const double next = lo + 1 < op->size() ? linalg::eigenvalue_by_index(op->tri, lo + 1) : here + 1.0;
        lambda = here + 0.5 * (next - here);
        clash = true;
      }
    }
    if (!clash) return lambda;
  }
  throw PreconditionError("nudge_lambda: could not separate lambda from the box spectra");
}

inline std::vector<double> nonzero(const std::vector<double>& v, double tol = 1e-10) {
  std::vector<double> out;
  for (double x : v)
    if (std::abs(x) > tol) out.push_back(x);
  return out;
}

}  // namespace detail

inline BandStats band_filling_case(const Potential& v, double lambda, const BoxSpec& spec, const GridParams& g,
                                   double overflow_margin, double pairing_tol) {
  BandStats st;
  st.lambda = lambda;
  const auto box = spec.box();
  const auto h = schrodinger::build_h(box, v);
  const auto h0 = schrodinger::build_h0(box);
  st.lambda_used = detail::nudge_lambda(h, h0, lambda);

  const auto phases = scattering::eigenphases(scattering::s_matrix_ode(v, st.lambda_used), g.phase_tol);
  st.kappas = phases.kappas;
  st.kappa_max = phases.kappa_max();

  const auto e = schrodinger::eigendecompose_below(h, st.lambda_used);
  const auto e0 = schrodinger::eigendecompose_below(h0, st.lambda_used);
  const auto p = schrodinger::spectral_projection(e, st.lambda_used);
  const auto p0 = schrodinger::spectral_projection(e0, st.lambda_used);
  const auto d = schrodinger::projection_difference(p, p0, st.lambda_used);
  const auto mc = schrodinger::compress_m_plus_minus(d.joint_basis, p, p0);
  const auto ms = schrodinger::m_plus_minus_spectra(mc, d.dim);
  const auto pairing = schrodinger::symmetry_pairing_report(d, g.pairing_epsilon, pairing_tol);

  st.rank_p = long(d.rank_p);
  st.rank_p0 = long(d.rank_p0);
  st.xi_count = scattering::spectral_shift_count(v, st.lambda_used, box);
  st.max_abs = d.max_abs_eigenvalue();
  const double eps = g.coverage_margin * st.kappa_max;
  st.coverage_gap = coverage_gap(d.eigenvalues, -st.kappa_max + eps, st.kappa_max - eps);
  for (double x : d.eigenvalues) {
    const bool over = std::abs(x) > st.kappa_max + overflow_margin;
    const bool excess = std::abs(x) >= 1.0 - 1e-8;
    st.overflow += over;
    st.rank_excess += excess;
    st.overflow_excluding_excess += over && !excess;
  }
  st.m_plus_top = ms.plus.back();
  st.m_minus_top = ms.minus.back();
  st.algebra = schrodinger::algebra_defect(d, mc);
  st.pairing_error = pairing.max_error;
  st.unpaired = long(pairing.unpaired.size());
  st.d_nonzero = detail::nonzero(d.eigenvalues);
  st.m_plus_nonzero = detail::nonzero(ms.plus);
  st.m_minus_nonzero = detail::nonzero(ms.minus);
  return st;
}

inline ExperimentReport run_band_filling(const ExperimentConfig& c, const RunOptions& opt = {}) {
  detail::require(c.experiment, Experiment::BandFilling);
  const Potential& v = detail::require_potential(c);
  detail::require_positive_lambdas(c);
  if (c.box_sequence.empty()) throw ConfigError("BandFilling needs a non-empty box_sequence");
  ExperimentReport rep = detail::new_report(c);
  const double margin = c.tolerance("overflow_margin");
  const double m_margin = c.tolerance("m_margin");
  const std::size_t nb = c.box_sequence.size();

  struct Case {
    BandStats st;
    double seconds = 0.0;
  };
  auto cases = parallel_map<Case>(c.lambda_grid.size() * nb, opt.jobs, [&](std::size_t idx) {
    detail::Stopwatch sw;
    Case cs;
    cs.st = band_filling_case(v, c.lambda_grid[idx / nb], c.box_sequence[idx % nb], c.grids, margin,
                              c.tolerance("pairing"));
    cs.seconds = sw.seconds();
    return cs;
  });

  long overflow = 0;
  double m_excess = 0.0, algebra = 0.0, pairing = 0.0, trace_err = 0.0;
  long unpaired = 0;
  double deficit = 0.0, m_deficit = 0.0, gap_growth = 0.0;
  for (std::size_t li = 0; li < c.lambda_grid.size(); ++li) {
    for (std::size_t b = 0; b < nb; ++b) {
      const Case& cs = cases[li * nb + b];
      const BandStats& st = cs.st;
      const BoxSpec& spec = c.box_sequence[b];
      Record rec;
      rec.id = "band_lambda" + detail::fmt(st.lambda) + "_L" + detail::fmt(spec.half_length);
      rec.inputs = {{"potential", potential_to_json(v)},
                    {"lambda", st.lambda},
                    {"L", spec.half_length},
                    {"n", spec.n},
                    {"h", spec.box().spacing()}};
      const double k2 = st.kappa_max * st.kappa_max;
      rec.outputs = {{"lambda_used", st.lambda_used},
                     {"lambda_nudge", st.lambda_used - st.lambda},
                     {"kappas", st.kappas},
                     {"kappa_max", st.kappa_max},
                     {"rank_p", st.rank_p},
                     {"rank_p0", st.rank_p0},
                     {"trace_d", st.rank_p - st.rank_p0},
                     {"xi_count", st.xi_count},
                     {"max_abs_eigenvalue", st.max_abs},
                     {"coverage_gap", st.coverage_gap},
                     {"overflow_count", st.overflow},
                     {"rank_excess_count", st.rank_excess},
                     {"overflow_excluding_rank_excess", st.overflow_excluding_excess},
                     {"m_plus_top", st.m_plus_top},
                     {"m_minus_top", st.m_minus_top},
                     {"unpaired_count", st.unpaired},
                     {"d_spectrum_nonzero", st.d_nonzero},
                     {"m_plus_spectrum_nonzero", st.m_plus_nonzero},
                     {"m_minus_spectrum_nonzero", st.m_minus_nonzero}};
      rec.residuals = {{"kappa_deficit", st.kappa_max - st.max_abs},
                       {"m_plus_deficit", k2 - st.m_plus_top},
                       {"m_minus_deficit", k2 - st.m_minus_top},
                       {"algebra_defect", st.algebra},
                       {"pairing_error", st.pairing_error}};
      rep.timing[rec.id] = cs.seconds;
      rep.records.push_back(std::move(rec));

      overflow += st.overflow;
      m_excess = std::max(m_excess, std::max(st.m_plus_top, st.m_minus_top) - k2);
      algebra = std::max(algebra, st.algebra);
      pairing = std::max(pairing, st.pairing_error);
      unpaired += st.unpaired;
      trace_err = std::max(trace_err, std::abs(double(st.rank_p - st.rank_p0 + st.xi_count)));
      if (b + 1 == nb) {
        deficit = std::max(deficit, std::abs(st.kappa_max - st.max_abs));
        m_deficit = std::max(m_deficit, std::max(std::abs(k2 - st.m_plus_top), std::abs(k2 - st.m_minus_top)));
      }
      if (b > 0) {
        const double prev = cases[li * nb + b - 1].st.coverage_gap;
        if (prev > 0.0) gap_growth = std::max(gap_growth, st.coverage_gap / prev - 1.0);
      }
    }
  }
  rep.add_verdict("no_overflow", c, "overflow_margin", double(overflow), "== 0", overflow == 0);
  rep.add_verdict("final_box_deficit", c, "max_deficit", deficit, "<=", deficit <= c.tolerance("max_deficit"));
  rep.add_verdict("coverage_gap_nonincreasing", c, "gap_noise", gap_growth, "<=",
                  gap_growth <= c.tolerance("gap_noise"));
  rep.add_verdict("m_confinement", c, "m_margin", m_excess, "<=", m_excess <= m_margin);
  rep.add_verdict("m_top_deficit", c, "m_deficit", m_deficit, "<=", m_deficit <= c.tolerance("m_deficit"));
  rep.add_verdict("pairing_error", c, "pairing", pairing, "<=", pairing <= c.tolerance("pairing"));
  rep.add_verdict("pairing_unpaired", c, "pairing", double(unpaired), "== 0", unpaired == 0);
  rep.add_verdict("algebra_identity", c, "algebra", algebra, "<=", algebra <= c.tolerance("algebra"));
  rep.add_verdict("trace_identity", c, "trace_identity", trace_err, "<=", trace_err <= c.tolerance("trace_identity"));
  return rep;
}

// ---------------------------------------------------------------- scattering / Birman-Krein

inline ExperimentReport run_birman_krein(const ExperimentConfig& c, const RunOptions& opt = {}) {
  detail::require(c.experiment, Experiment::BirmanKrein);
  const Potential& v = detail::require_potential(c);
  detail::require_positive_lambdas(c);
  const GridParams& g = c.grids;
  ExperimentReport rep = detail::new_report(c);
  const scattering::StationaryGrid sgrid{0.0, g.stationary_panels, g.stationary_order};

  const std::size_t nl = c.lambda_grid.size();
  const std::size_t nb = std::max<std::size_t>(c.box_sequence.size(), 1);
  struct Case {
    scattering::ScatteringMatrix ode, st;
    scattering::EigenphaseSet phases;
    bool has_bk = false;
    scattering::BirmanKreinResult bk;
    double seconds = 0.0;
  };
  auto cases = parallel_map<Case>(nl * nb, opt.jobs, [&](std::size_t idx) {
    detail::Stopwatch sw;
    Case cs;
    const double lambda = c.lambda_grid[idx / nb];
    cs.ode = scattering::s_matrix_ode(v, lambda);
    cs.st = scattering::s_matrix_stationary(v, lambda, sgrid);
    cs.phases = scattering::eigenphases(cs.ode, g.phase_tol);
    if (!c.box_sequence.empty()) {
      cs.has_bk = true;
      cs.bk = scattering::birman_krein_check(v, lambda, c.box_sequence[idx % nb].box());
    }
    cs.seconds = sw.seconds();
    return cs;
  });

  double ode_u = 0.0, st_u = 0.0, cross = 0.0, sym = 0.0, bk_max = 0.0, jump = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    double prev_signed = 0.0;
    for (std::size_t li = 0; li < nl; ++li) {
      const Case& cs = cases[li * nb + b];
      Record rec;
      rec.id = "scatter_lambda" + detail::fmt(c.lambda_grid[li]);
      if (!c.box_sequence.empty()) rec.id += "_L" + detail::fmt(c.box_sequence[b].half_length);
      rec.inputs = {{"potential", potential_to_json(v)}, {"lambda", c.lambda_grid[li]}};
      const double diff = (cs.ode.S - cs.st.S).norm();
      rec.outputs = {{"s_ode", detail::complex_matrix(cs.ode.S)},
                     {"s_stationary", detail::complex_matrix(cs.st.S)},
                     {"transmission_abs", std::abs(cs.ode.transmission())},
                     {"reflection_abs", std::abs(cs.ode.reflection_left())},
                     {"thetas", cs.phases.thetas},
                     {"kappas", cs.phases.kappas}};
      rec.residuals = {{"ode_unitarity", cs.ode.unitarity_defect},
                       {"stationary_unitarity", cs.st.unitarity_defect},
                       {"cross_method", diff},
                       {"symmetry", cs.ode.symmetry_defect()}};
      ode_u = std::max(ode_u, cs.ode.unitarity_defect);
      st_u = std::max(st_u, cs.st.unitarity_defect);
      cross = std::max(cross, diff);
      sym = std::max(sym, std::max(cs.ode.symmetry_defect(), cs.st.symmetry_defect()));
      if (cs.has_bk) {
        // signed mismatch, moved to the integer branch closest to the previous point
        double signed_res = cs.bk.det_phase - cs.bk.xi_smoothed;
        if (li == 0) {
          signed_res -= std::round(signed_res);
        } else {
          signed_res -= std::round(signed_res - prev_signed);
          jump = std::max(jump, std::abs(signed_res - prev_signed));
        }
        prev_signed = signed_res;
        rec.inputs["L"] = c.box_sequence[b].half_length;
        rec.inputs["n"] = c.box_sequence[b].n;
        rec.outputs["det_phase"] = cs.bk.det_phase;
        rec.outputs["xi_count"] = cs.bk.xi_count;
        rec.outputs["xi_smoothed"] = cs.bk.xi_smoothed;
        rec.outputs["tracked_mismatch"] = signed_res;
        rec.residuals["bk_residual"] = cs.bk.residual;
        rec.residuals["bk_residual_integer_count"] = cs.bk.residual_count;
        bk_max = std::max(bk_max, cs.bk.residual);
      }
      rep.timing[rec.id] = cs.seconds;
      rep.records.push_back(std::move(rec));
    }
  }
  rep.add_verdict("ode_unitarity", c, "ode_unitarity", ode_u, "<=", ode_u <= c.tolerance("ode_unitarity"));
  rep.add_verdict("stationary_unitarity", c, "stationary_unitarity", st_u, "<=",
                  st_u <= c.tolerance("stationary_unitarity"));
  rep.add_verdict("cross_method", c, "cross_method", cross, "<=", cross <= c.tolerance("cross_method"));
  if (v.is_even()) rep.add_verdict("symmetry", c, "symmetry", sym, "<=", sym <= c.tolerance("symmetry"));
  if (!c.box_sequence.empty()) {
    rep.add_verdict("birman_krein_residual", c, "bk_residual", bk_max, "<=", bk_max <= c.tolerance("bk_residual"));
    rep.add_verdict("birman_krein_continuity", c, "continuity_jump", jump, "<=",
                    jump <= c.tolerance("continuity_jump"));
  }
  return rep;
}

inline ExperimentReport run_experiment(const ExperimentConfig& c, const RunOptions& opt = {}) {
  switch (c.experiment) {
    case Experiment::SpecfunAudit: return run_specfun_audit(c, opt);
    case Experiment::CarlemanMehler: return run_carleman_mehler(c, opt);
    case Experiment::ModelSpectrum: return run_model_spectrum(c, opt);
    case Experiment::BandFilling: return run_band_filling(c, opt);
    case Experiment::BirmanKrein: return run_birman_krein(c, opt);
  }
  throw ConfigError("unknown experiment");
}

}  // namespace bandfill::experiments
