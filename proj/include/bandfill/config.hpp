#pragma once

// Experiment configuration: JSON parsing with strict key checking, default
// tolerances per experiment, and the normalized echo written into reports.

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bandfill/error.hpp"
#include "bandfill/schrodinger.hpp"

namespace bandfill::experiments {

using json = nlohmann::ordered_json;
using schrodinger::Potential;
using schrodinger::PotentialKind;

enum class Experiment { CarlemanMehler, ModelSpectrum, BandFilling, BirmanKrein, SpecfunAudit };

inline const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::CarlemanMehler: return "CarlemanMehler";
    case Experiment::ModelSpectrum: return "ModelSpectrum";
    case Experiment::BandFilling: return "BandFilling";
    case Experiment::BirmanKrein: return "BirmanKrein";
    case Experiment::SpecfunAudit: return "SpecfunAudit";
  }
  return "?";
}

inline Experiment experiment_from_string(const std::string& s) {
  for (Experiment e : {Experiment::CarlemanMehler, Experiment::ModelSpectrum, Experiment::BandFilling,
                       Experiment::BirmanKrein, Experiment::SpecfunAudit}) {
    if (s == to_string(e)) return e;
  }
  throw ConfigError("unknown experiment '" + s + "'");
}

struct BoxSpec {
  double half_length = 0.0;
  std::size_t n = 0;

  schrodinger::BoxDiscretization box() const { return schrodinger::BoxDiscretization::make(half_length, n); }
};

/// Sampling and quadrature parameters. Fields not used by an experiment are
/// ignored by it but still echoed.
struct GridParams {
  // carleman
  double a = 1.0;
  double a_alt = 2.0;
  std::size_t gauss_nodes = 400;
  std::vector<std::size_t> graded_panels = {20, 40, 80};
  std::size_t graded_order = 10;
  double graded_ratio = 0.5;
  std::vector<double> mehler_t = {0.5, 1.0, 2.0};
  double mehler_lo = 0.2;
  double mehler_hi = 0.8;
  std::size_t mehler_samples = 61;
  // model operator
  std::size_t model_nodes = 60;
  // scattering
  std::size_t stationary_panels = 60;
  std::size_t stationary_order = 10;
  double phase_tol = 1e-6;
  // band filling
  double pairing_epsilon = 0.05;
  double coverage_margin = 0.05;  // epsilon = coverage_margin * kappa_max
  // specfun
  std::vector<double> seam_t = {0.0, 0.5, 1.0, 2.0};
  std::size_t seam_x_samples = 50;
  double seam_x_lo = 1.2;
  double seam_x_hi = 2.8;
  double bound_t_max = 3.0;
  double bound_x_max = 1e4;
  std::size_t bound_x_samples = 200;
  std::size_t bound_t_samples = 61;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::BandFilling;
  std::optional<Potential> potential;
  std::vector<double> lambda_grid;
  std::vector<BoxSpec> box_sequence;
  GridParams grids;
  std::map<std::string, double> tolerances;
  std::uint64_t seed = 0;
  /// synthetic S(0) = diag(e^{i phi_n}) for ModelSpectrum; empty means S from the potential
  std::vector<double> s0_phases;

  double tolerance(const std::string& name) const {
    auto it = tolerances.find(name);
    if (it == tolerances.end()) throw ConfigError("tolerance '" + name + "' is not defined");
    return it->second;
  }
};

/// Tolerances each experiment reads, with their defaults.
inline std::map<std::string, double> default_tolerances(Experiment e) {
  switch (e) {
    case Experiment::SpecfunAudit:
      return {{"seam", 1e-8}, {"bound_change", 0.05}};
    case Experiment::CarlemanMehler:
      return {{"containment", 1e-8}, {"top_eigenvalue", 0.95}, {"scaling", 1e-6}, {"mehler_residual", 1e-3}};
    case Experiment::ModelSpectrum:
      return {{"product_identity", 1e-10}, {"kappa_match", 1e-10}};
    case Experiment::BandFilling:
      return {{"overflow_margin", 0.02}, {"max_deficit", 0.1},  {"gap_noise", 0.10},
              {"m_margin", 0.02},        {"m_deficit", 0.1},    {"pairing", 1e-8},
              {"algebra", 1e-12},        {"trace_identity", 0.5}};
    case Experiment::BirmanKrein:
      return {{"ode_unitarity", 1e-8}, {"stationary_unitarity", 1e-6}, {"cross_method", 1e-3},
              {"symmetry", 1e-8},      {"bk_residual", 0.05},          {"continuity_jump", 0.2}};
  }
  return {};
}

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
void read_opt(const json& j, const std::string& key, T& out, const std::string& where) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

inline Potential parse_potential(const json& j) {
  const std::string where = "potential";
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("potential: missing 'kind'");
  const auto kind = get<std::string>(j, "kind", where);
  if (kind == "SquareWell") {
    check_keys(j, {"kind", "depth", "half_width"}, where);
    return Potential::square_well(get<double>(j, "depth", where), get<double>(j, "half_width", where));
  }
  if (kind == "PoschlTeller") {
    check_keys(j, {"kind", "strength"}, where);
    return Potential::poschl_teller(get<int>(j, "strength", where));
  }
  if (kind == "Gaussian") {
    check_keys(j, {"kind", "amplitude", "width"}, where);
    return Potential::gaussian(get<double>(j, "amplitude", where), get<double>(j, "width", where));
  }
  throw ConfigError("potential: unknown kind '" + kind + "'");
}

inline BoxSpec parse_box(const json& j) {
  BoxSpec b;
  if (j.is_array()) {
    if (j.size() != 2) throw ConfigError("box_sequence: entries must be [L, n]");
    b.half_length = j[0].get<double>();
    b.n = j[1].get<std::size_t>();
  } else {
    check_keys(j, {"L", "n", "h"}, "box_sequence");
    b.half_length = get<double>(j, "L", "box_sequence");
    if (j.contains("n") == j.contains("h")) throw ConfigError("box_sequence: give exactly one of 'n' or 'h'");
    b.n = j.contains("n") ? get<std::size_t>(j, "n", "box_sequence")
                          : schrodinger::BoxDiscretization::with_spacing(b.half_length, get<double>(j, "h", "box_sequence")).n;
  }
  try {
    (void)b.box();
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("box_sequence: ") + e.what());
  }
  return b;
}

inline void parse_grids(const json& j, GridParams& g) {
  const std::string w = "grids";
  check_keys(j,
             {"a", "a_alt", "gauss_nodes", "graded_panels", "graded_order", "graded_ratio", "mehler_t",
              "mehler_lo", "mehler_hi", "mehler_samples", "model_nodes", "stationary_panels",
              "stationary_order", "phase_tol", "pairing_epsilon", "coverage_margin", "seam_t",
              "seam_x_samples", "seam_x_lo", "seam_x_hi", "bound_t_max", "bound_x_max", "bound_x_samples",
              "bound_t_samples"},
             w);
  read_opt(j, "a", g.a, w);
  read_opt(j, "a_alt", g.a_alt, w);
  read_opt(j, "gauss_nodes", g.gauss_nodes, w);
  read_opt(j, "graded_panels", g.graded_panels, w);
  read_opt(j, "graded_order", g.graded_order, w);
  read_opt(j, "graded_ratio", g.graded_ratio, w);
  read_opt(j, "mehler_t", g.mehler_t, w);
  read_opt(j, "mehler_lo", g.mehler_lo, w);
  read_opt(j, "mehler_hi", g.mehler_hi, w);
  read_opt(j, "mehler_samples", g.mehler_samples, w);
  read_opt(j, "model_nodes", g.model_nodes, w);
  read_opt(j, "stationary_panels", g.stationary_panels, w);
  read_opt(j, "stationary_order", g.stationary_order, w);
  read_opt(j, "phase_tol", g.phase_tol, w);
  read_opt(j, "pairing_epsilon", g.pairing_epsilon, w);
  read_opt(j, "coverage_margin", g.coverage_margin, w);
  read_opt(j, "seam_t", g.seam_t, w);
  read_opt(j, "seam_x_samples", g.seam_x_samples, w);
  read_opt(j, "seam_x_lo", g.seam_x_lo, w);
  read_opt(j, "seam_x_hi", g.seam_x_hi, w);
  read_opt(j, "bound_t_max", g.bound_t_max, w);
  read_opt(j, "bound_x_max", g.bound_x_max, w);
  read_opt(j, "bound_x_samples", g.bound_x_samples, w);
  read_opt(j, "bound_t_samples", g.bound_t_samples, w);
}

}  // namespace detail

/// Fills default tolerances and checks the config invariants.
inline void finalize(ExperimentConfig& c) {
  const auto defaults = default_tolerances(c.experiment);
  for (const auto& [name, value] : c.tolerances) {
    if (!defaults.count(name)) {
      throw ConfigError(std::string("tolerances: '") + name + "' is not used by " + to_string(c.experiment));
    }
    if (!(value > 0.0)) throw ConfigError("tolerances: '" + name + "' must be > 0");
  }
  for (const auto& [name, value] : defaults) c.tolerances.emplace(name, value);
  for (std::size_t i = 1; i < c.box_sequence.size(); ++i) {
    if (!(c.box_sequence[i].half_length > c.box_sequence[i - 1].half_length)) {
      throw ConfigError("box_sequence must be strictly increasing in L");
    }
  }
}

inline ExperimentConfig parse_config(const json& j) {
  detail::check_keys(j, {"experiment", "potential", "lambda_grid", "box_sequence", "grids", "tolerances", "seed",
                         "s0_phases"},
                     "config");
  ExperimentConfig c;
  if (!j.contains("experiment")) throw ConfigError("config: missing 'experiment'");
  c.experiment = experiment_from_string(detail::get<std::string>(j, "experiment", "config"));
  try {
    if (j.contains("potential")) c.potential = detail::parse_potential(j.at("potential"));
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
  detail::read_opt(j, "lambda_grid", c.lambda_grid, "config");
  if (j.contains("box_sequence")) {
    if (!j.at("box_sequence").is_array()) throw ConfigError("box_sequence: expected an array");
    for (const auto& b : j.at("box_sequence")) c.box_sequence.push_back(detail::parse_box(b));
  }
  if (j.contains("grids")) detail::parse_grids(j.at("grids"), c.grids);
  if (j.contains("tolerances")) {
    if (!j.at("tolerances").is_object()) throw ConfigError("tolerances: expected an object");
    for (const auto& [k, v] : j.at("tolerances").items()) {
      if (!v.is_number()) throw ConfigError("tolerances." + k + ": expected a number");
      c.tolerances[k] = v.get<double>();
    }
  }
  detail::read_opt(j, "seed", c.seed, "config");
  detail::read_opt(j, "s0_phases", c.s0_phases, "config");
  finalize(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

inline json potential_to_json(const Potential& p) {
  json j;
  switch (p.kind) {
    case PotentialKind::SquareWell:
      j["kind"] = "SquareWell";
      j["depth"] = p.depth;
      j["half_width"] = p.half_width;
      break;
    case PotentialKind::PoschlTeller:
      j["kind"] = "PoschlTeller";
      j["strength"] = p.strength;
      break;
    case PotentialKind::Gaussian:
      j["kind"] = "Gaussian";
      j["amplitude"] = p.amplitude;
      j["width"] = p.width;
      break;
  }
  return j;
}

/// Normalized echo; parse_config(to_json(c)) reproduces c.
inline json to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.experiment);
  if (c.potential) j["potential"] = potential_to_json(*c.potential);
  j["lambda_grid"] = c.lambda_grid;
  json boxes = json::array();
  for (const auto& b : c.box_sequence) boxes.push_back(json::array({b.half_length, b.n}));
  j["box_sequence"] = boxes;
  const GridParams& g = c.grids;
  j["grids"] = {{"a", g.a},
                {"a_alt", g.a_alt},
                {"gauss_nodes", g.gauss_nodes},
                {"graded_panels", g.graded_panels},
                {"graded_order", g.graded_order},
                {"graded_ratio", g.graded_ratio},
                {"mehler_t", g.mehler_t},
                {"mehler_lo", g.mehler_lo},
                {"mehler_hi", g.mehler_hi},
                {"mehler_samples", g.mehler_samples},
                {"model_nodes", g.model_nodes},
                {"stationary_panels", g.stationary_panels},
                {"stationary_order", g.stationary_order},
                {"phase_tol", g.phase_tol},
                {"pairing_epsilon", g.pairing_epsilon},
                {"coverage_margin", g.coverage_margin},
                {"seam_t", g.seam_t},
                {"seam_x_samples", g.seam_x_samples},
                {"seam_x_lo", g.seam_x_lo},
                {"seam_x_hi", g.seam_x_hi},
                {"bound_t_max", g.bound_t_max},
                {"bound_x_max", g.bound_x_max},
                {"bound_x_samples", g.bound_x_samples},
                {"bound_t_samples", g.bound_t_samples}};
  json tol = json::object();
  for (const auto& [k, v] : c.tolerances) tol[k] = v;
  j["tolerances"] = tol;
  j["seed"] = c.seed;
  if (!c.s0_phases.empty()) j["s0_phases"] = c.s0_phases;
  return j;
}

/// Built-in configuration for an experiment (the benchmark defaults).
inline ExperimentConfig default_config(Experiment e) {
  ExperimentConfig c;
  c.experiment = e;
  switch (e) {
    case Experiment::BandFilling:
      c.potential = Potential::square_well(-2.0, 1.0);
      c.lambda_grid = {1.0};
      c.box_sequence = {{50.0, 4999}, {100.0, 9999}, {200.0, 19999}};
      break;
    case Experiment::BirmanKrein:
      c.potential = Potential::square_well(-2.0, 1.0);
      for (int i = 0; i < 20; ++i) c.lambda_grid.push_back(0.5 + 1.5 * double(i) / 19.0);
      c.box_sequence = {{200.0, 19999}};
      break;
    case Experiment::ModelSpectrum:
      c.s0_phases = {std::numbers::pi / 3.0, std::numbers::pi / 2.0};
      break;
    case Experiment::CarlemanMehler:
    case Experiment::SpecfunAudit:
      break;
  }
  finalize(c);
  return c;
}

}  // namespace bandfill::experiments
