#pragma once

// The acceptance suite: criteria 1-10, each a set of checks with pinned
// tolerances plus a runtime budget.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bandfill/experiments.hpp"

namespace bandfill::acceptance {

using experiments::json;

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  std::string comparison;
  bool passed = false;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  std::vector<Check> checks;
  json details = json::object();
  double seconds = 0.0;
  double runtime_limit = 0.0;  // 0: no separate budget

  bool checks_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return !checks.empty();
  }
  bool runtime_ok() const { return runtime_limit <= 0.0 || seconds < runtime_limit; }
  bool passed() const { return checks_passed() && runtime_ok(); }
};

struct Options {
  std::uint64_t seed = 20240101;
  std::size_t jobs = 1;
  bool determinism = true;
  std::function<void(const CriterionResult&)> on_result;
};

struct SuiteResult {
  std::uint64_t seed = 0;
  std::vector<CriterionResult> criteria;

  bool passed() const {
    for (const auto& c : criteria)
      if (!c.passed()) return false;
    return true;
  }
};

inline json to_json(const Check& c) {
  return json{{"name", c.name},
              {"value", c.value},
              {"tolerance", c.tolerance},
              {"comparison", c.comparison},
              {"passed", c.passed}};
}

/// The deterministic part excludes wall-clock data and the runtime verdicts.
inline json to_json(const SuiteResult& s, bool include_timing = true) {
  json j;
  j["format_version"] = experiments::kFormatVersion;
  j["suite"] = "acceptance";
  j["seed"] = s.seed;
  json crit = json::array();
  for (const auto& c : s.criteria) {
    json cj;
    cj["id"] = c.id;
    cj["title"] = c.title;
    cj["checks_passed"] = c.checks_passed();
    json checks = json::array();
    for (const auto& ch : c.checks) checks.push_back(to_json(ch));
    cj["checks"] = checks;
    cj["details"] = c.details;
    crit.push_back(cj);
  }
  j["criteria"] = crit;
  if (include_timing) {
    json t = json::object();
    for (const auto& c : s.criteria) {
      t[std::to_string(c.id)] = {{"seconds", c.seconds},
                                 {"runtime_limit", c.runtime_limit},
                                 {"runtime_ok", c.runtime_ok()},
                                 {"passed", c.passed()}};
    }
    j["timing"] = t;
    j["passed"] = s.passed();
  }
  return j;
}

inline std::string summary_line(const CriterionResult& c) {
  std::ostringstream os;
  os << (c.passed() ? "[PASS] " : "[FAIL] ") << c.id << " " << c.title << ":";
  for (std::size_t i = 0; i < c.checks.size(); ++i) {
    const Check& ch = c.checks[i];
    os << (i ? ";" : "") << " " << ch.name << " = " << ch.value << " (" << ch.comparison << " " << ch.tolerance
       << (ch.passed ? "" : ", failed") << ")";
  }
  os.precision(3);
  os << std::fixed << "; runtime " << c.seconds << " s";
  if (c.runtime_limit > 0.0) os << " (limit " << c.runtime_limit << " s" << (c.runtime_ok() ? "" : ", exceeded") << ")";
  return os.str();
}

namespace detail {

using experiments::Experiment;
using experiments::ExperimentConfig;
using experiments::ExperimentReport;

inline Check from_verdict(const ExperimentReport& r, const std::string& name) {
  for (const auto& v : r.verdicts) {
    if (v.name == name) return {v.name, v.value, v.tolerance, v.comparison, v.passed};
  }
  throw PreconditionError("acceptance: report " + r.experiment + " has no verdict '" + name + "'");
}

inline double seconds_of(const ExperimentReport& r) {
  double s = 0.0;
  for (const auto& [k, v] : r.timing.items()) s += v.get<double>();
  return s;
}

inline ExperimentReport run(const ExperimentConfig& c, const Options& opt) {
  return experiments::run_experiment(c, {opt.jobs});
}

// criteria 1 and 2
inline std::vector<CriterionResult> specfun_criteria(const Options& opt) {
  auto c = experiments::default_config(Experiment::SpecfunAudit);
  c.grids.seam_t = {0.0, 0.5, 1.0, 2.0};
  c.grids.seam_x_samples = 50;
  c.grids.seam_x_lo = 1.2;
  c.grids.seam_x_hi = 2.8;
  c.grids.bound_t_max = 3.0;
  c.grids.bound_x_max = 1e4;
  c.tolerances = {{"seam", 1e-8}, {"bound_change", 0.05}};
  experiments::detail::Stopwatch sw;
  const auto r = run(c, opt);
  const double t = sw.seconds();
  CriterionResult c1{1, "conical seam consistency", {from_verdict(r, "seam_consistency")}, {}, t, 5.0};
  CriterionResult c2{2, "Legendre bound audit",
                     {from_verdict(r, "decay_sup_finite"), from_verdict(r, "decay_sup_refinement")}, {}, t, 10.0};
  c2.details = {{"decay_sup_base", r.records[r.records.size() - 2].outputs["decay_sup"]},
                {"decay_sup_refined", r.records.back().outputs["decay_sup"]}};
  c1.details = {{"max_abs_difference", r.verdicts[0].value}};
  return {c1, c2};
}

// criteria 3 and 4
inline std::vector<CriterionResult> carleman_criteria(const Options& opt) {
  auto c = experiments::default_config(Experiment::CarlemanMehler);
  c.grids.a = 1.0;
  c.grids.a_alt = 2.0;
  c.grids.gauss_nodes = 400;
  c.grids.graded_panels = {20, 40, 80};
  c.grids.mehler_t = {0.5, 1.0, 2.0};
  c.tolerances = {{"containment", 1e-8}, {"top_eigenvalue", 0.95}, {"scaling", 1e-6}, {"mehler_residual", 1e-3}};
  const auto r = run(c, opt);
  double t_spec = 0.0, t_mehler = 0.0;
  for (const auto& [k, v] : r.timing.items()) (k.rfind("mehler", 0) == 0 ? t_mehler : t_spec) += v.get<double>();
  CriterionResult c3{3,
                     "half-Carleman spectrum",
                     {from_verdict(r, "spectrum_containment"), from_verdict(r, "top_eigenvalue"),
                      from_verdict(r, "scaling_invariance")},
                     {},
                     t_spec,
                     10.0};
  CriterionResult c4{4,
                     "Mehler eigenfunction residual",
                     {from_verdict(r, "mehler_residual_finest"), from_verdict(r, "mehler_residual_decreasing")},
                     {},
                     t_mehler,
                     30.0};
  json residuals = json::object();
  for (const auto& rec : r.records)
    if (rec.id.rfind("mehler", 0) == 0) residuals[rec.id] = rec.residuals["relative"];
  c4.details = {{"relative_residuals", residuals}};
  c3.details = {{"top_eigenvalue_a1", r.records[0].outputs["max_eigenvalue"]},
                {"min_eigenvalue_a1", r.records[0].outputs["min_eigenvalue"]}};
  return {c3, c4};
}

inline Eigen::MatrixXd random_basis(std::mt19937_64& rng, Eigen::Index n, Eigen::Index r) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(n, r);
  for (Eigen::Index j = 0; j < r; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, r);
}

// criterion 5
inline CriterionResult projection_algebra(const Options& opt) {
  experiments::detail::Stopwatch sw;
  constexpr double kAlgebraTol = 1e-12;
  constexpr double kPairingTol = 1e-8;
  constexpr Eigen::Index kDim = 50;
  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<int> rank(1, int(kDim) - 1);
  double algebra = 0.0, pairing = 0.0;
  long unpaired = 0;
  json ranks = json::array();
  for (int k = 0; k < 20; ++k) {
    const int r1 = rank(rng), r0 = rank(rng);
    const auto p = schrodinger::Projection::from_basis(random_basis(rng, kDim, r1));
    const auto p0 = schrodinger::Projection::from_basis(random_basis(rng, kDim, r0));
    const Eigen::MatrixXd d = p.dense() - p0.dense();
    const auto [mp, mm] = schrodinger::m_plus_minus(p, p0);
    algebra = std::max(algebra, (d * d - (mp + mm)).norm());
    const Eigen::VectorXd eig = linalg::dense_symmetric_eigenvalues(d);
    const auto rep = schrodinger::symmetry_pairing_report(experiments::detail::to_vector(eig), 0.05, kPairingTol);
    pairing = std::max(pairing, rep.max_error);
    unpaired += long(rep.unpaired.size());
    ranks.push_back(json::array({r1, r0}));
  }
  CriterionResult c{5,
                    "projection algebra",
                    {{"d_squared_minus_m_sum", algebra, kAlgebraTol, "<=", algebra <= kAlgebraTol},
                     {"pairing_error", pairing, kPairingTol, "<=", pairing <= kPairingTol},
                     {"unpaired_count", double(unpaired), 0.0, "==", unpaired == 0}},
                    {{"pairs", 20}, {"dimension", kDim}, {"ranks", ranks}},
                    0.0,
                    5.0};
  c.seconds = sw.seconds();
  return c;
}

// criterion 6
inline CriterionResult scattering_agreement(const Options& opt) {
  constexpr double kReflectionTol = 1e-8;
  std::vector<Check> checks;
  json details = json::object();
  double seconds = 0.0;
  for (const auto& v : {schrodinger::Potential::square_well(-2.0, 1.0), schrodinger::Potential::poschl_teller(1)}) {
    auto c = experiments::default_config(Experiment::BirmanKrein);
    c.potential = v;
    c.lambda_grid = {0.5, 1.0, 2.0};
    c.box_sequence.clear();
    c.tolerances = {{"ode_unitarity", 1e-8}, {"stationary_unitarity", 1e-6}, {"cross_method", 1e-3},
                    {"symmetry", 1e-8},      {"bk_residual", 0.05},          {"continuity_jump", 0.2}};
    const auto r = run(c, opt);
    seconds += seconds_of(r);
    for (const char* name : {"ode_unitarity", "stationary_unitarity", "cross_method"}) {
      Check ch = from_verdict(r, name);
      ch.name = v.label() + "." + ch.name;
      checks.push_back(ch);
    }
    if (v.kind == schrodinger::PotentialKind::PoschlTeller) {
      double refl = 0.0;
      for (const auto& rec : r.records) refl = std::max(refl, rec.outputs["reflection_abs"].get<double>());
      checks.push_back({v.label() + ".reflection", refl, kReflectionTol, "<=", refl <= kReflectionTol});
    }
    json kap = json::object();
    for (const auto& rec : r.records) kap[rec.id] = rec.outputs["kappas"];
    details[v.label()] = kap;
  }
  return {6, "S-matrix unitarity and cross-method agreement", checks, details, seconds, 60.0};
}

// criterion 7
inline CriterionResult birman_krein(const Options& opt) {
  auto c = experiments::default_config(Experiment::BirmanKrein);
  c.potential = schrodinger::Potential::square_well(-2.0, 1.0);
  c.lambda_grid.clear();
  for (int i = 0; i < 20; ++i) c.lambda_grid.push_back(0.5 + 1.5 * double(i) / 19.0);
  c.box_sequence = {{200.0, schrodinger::BoxDiscretization::with_spacing(200.0, 0.02).n}};
  c.tolerances = {{"ode_unitarity", 1e-8}, {"stationary_unitarity", 1e-6}, {"cross_method", 1e-3},
                  {"symmetry", 1e-8},      {"bk_residual", 0.05},          {"continuity_jump", 0.2}};
  const auto r = run(c, opt);
  json res = json::array(), raw = json::array();
  for (const auto& rec : r.records) {
    res.push_back(rec.residuals["bk_residual"]);
    raw.push_back(rec.residuals["bk_residual_integer_count"]);
  }
  return {7,
          "Birman-Krein identity",
          {from_verdict(r, "birman_krein_residual"), from_verdict(r, "birman_krein_continuity")},
          {{"lambda_grid", c.lambda_grid}, {"residuals", res}, {"residuals_integer_count", raw}},
          seconds_of(r),
          300.0};
}

// criterion 8
inline CriterionResult band_filling(const Options& opt) {
  auto c = experiments::default_config(Experiment::BandFilling);
  c.potential = schrodinger::Potential::square_well(-2.0, 1.0);
  c.lambda_grid = {1.0};
  c.box_sequence.clear();
  for (double L : {50.0, 100.0, 200.0})
    c.box_sequence.push_back({L, schrodinger::BoxDiscretization::with_spacing(L, 0.02).n});
  // criterion 8(iii) asks for a non-increasing gap: no noise allowance
  c.tolerances = {{"overflow_margin", 0.02}, {"max_deficit", 0.1}, {"gap_noise", 1e-12},
                  {"m_margin", 0.02},        {"m_deficit", 0.1},   {"pairing", 1e-8},
                  {"algebra", 1e-12},        {"trace_identity", 0.5}};
  const auto r = run(c, opt);
  json boxes = json::array();
  for (const auto& rec : r.records) {
    boxes.push_back({{"L", rec.inputs["L"]},
                     {"kappa_max", rec.outputs["kappa_max"]},
                     {"max_abs_eigenvalue", rec.outputs["max_abs_eigenvalue"]},
                     {"coverage_gap", rec.outputs["coverage_gap"]},
                     {"overflow_count", rec.outputs["overflow_count"]},
                     {"overflow_excluding_rank_excess", rec.outputs["overflow_excluding_rank_excess"]},
                     {"m_plus_top", rec.outputs["m_plus_top"]},
                     {"m_minus_top", rec.outputs["m_minus_top"]}});
  }
  return {8,
          "band filling",
          {from_verdict(r, "no_overflow"), from_verdict(r, "final_box_deficit"),
           from_verdict(r, "coverage_gap_nonincreasing"), from_verdict(r, "m_confinement"),
           from_verdict(r, "m_top_deficit")},
          {{"boxes", boxes}},
          seconds_of(r),
          600.0};
}

// criterion 9
inline CriterionResult model_operator(const Options& opt) {
  std::vector<Check> checks;
  json details = json::object();
  double seconds = 0.0;
  auto synthetic = experiments::default_config(Experiment::ModelSpectrum);
  synthetic.s0_phases = {std::numbers::pi / 3.0, std::numbers::pi / 2.0};
  auto from_s = experiments::default_config(Experiment::ModelSpectrum);
  from_s.s0_phases.clear();
  from_s.potential = schrodinger::Potential::square_well(-2.0, 1.0);
  from_s.lambda_grid = {0.25};
  for (auto* c : {&synthetic, &from_s}) {
    c->tolerances = {{"product_identity", 1e-10}, {"kappa_match", 1e-10}};
    const auto r = run(*c, opt);
    seconds += seconds_of(r);
    for (const char* name : {"product_spectrum", "gamma_bands"}) {
      Check ch = from_verdict(r, name);
      ch.name = r.records[0].id + "." + ch.name;
      checks.push_back(ch);
    }
    details[r.records[0].id] = {{"kappa_sq", r.records[0].outputs["kappa_sq"]},
                                {"top_eigenvalue", r.records[0].outputs["top_eigenvalue"]}};
  }
  return {9, "model operator product spectrum", checks, details, seconds, 10.0};
}

inline SuiteResult core(const Options& opt, bool report) {
  SuiteResult s;
  s.seed = opt.seed;
  auto add = [&](CriterionResult c) {
    if (report && opt.on_result) opt.on_result(c);
    s.criteria.push_back(std::move(c));
  };
  for (auto& c : specfun_criteria(opt)) add(std::move(c));
  for (auto& c : carleman_criteria(opt)) add(std::move(c));
  add(projection_algebra(opt));
  add(scattering_agreement(opt));
  add(birman_krein(opt));
  add(band_filling(opt));
  add(model_operator(opt));
  return s;
}

}  // namespace detail

/// Runs criteria 1-9 and, when requested, repeats them to check that the
/// deterministic part of the suite report is byte-identical (criterion 10).
inline SuiteResult run_acceptance(const Options& opt = {}) {
  SuiteResult s = detail::core(opt, true);
  if (opt.determinism) {
    experiments::detail::Stopwatch sw2;
    const SuiteResult again = detail::core(opt, false);
    const std::string a = to_json(s, false).dump(), b = to_json(again, false).dump();
    CriterionResult c{10,
                      "determinism",
                      {{"byte_identical_reports", a == b ? 1.0 : 0.0, 1.0, "==", a == b}},
                      {{"report_bytes", a.size()}},
                      sw2.seconds(),
                      0.0};
    if (opt.on_result) opt.on_result(c);
    s.criteria.push_back(std::move(c));
  }
  return s;
}

}  // namespace bandfill::acceptance
