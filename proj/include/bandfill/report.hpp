#pragma once

// Experiment reports and their JSON / CSV serialization.

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bandfill/config.hpp"
#include "bandfill/error.hpp"

namespace bandfill::experiments {

inline constexpr int kFormatVersion = 1;

struct Record {
  std::string id;
  json inputs = json::object();
  json outputs = json::object();
  json residuals = json::object();
};

struct Verdict {
  std::string name;
  std::string tolerance_name;
  double tolerance = 0.0;
  double value = 0.0;
  std::string comparison;  // e.g. "<=", ">=", "== 0"
  bool passed = false;
};

struct ExperimentReport {
  int format_version = kFormatVersion;
  std::string experiment;
  json config = json::object();
  std::vector<Record> records;
  std::vector<Verdict> verdicts;
  /// wall-clock seconds per case; excluded from determinism comparisons
  json timing = json::object();

  bool passed() const {
    for (const auto& v : verdicts)
      if (!v.passed) return false;
    return true;
  }

  Verdict& add_verdict(std::string name, const ExperimentConfig& c, const std::string& tol_name, double value,
                       std::string comparison, bool passed) {
    verdicts.push_back({std::move(name), tol_name, c.tolerance(tol_name), value, std::move(comparison), passed});
    return verdicts.back();
  }
};

inline json to_json(const Record& r) {
  return json{{"id", r.id}, {"inputs", r.inputs}, {"outputs", r.outputs}, {"residuals", r.residuals}};
}

inline json to_json(const Verdict& v) {
  return json{{"name", v.name},   {"tolerance_name", v.tolerance_name}, {"tolerance", v.tolerance},
              {"value", v.value}, {"comparison", v.comparison},         {"passed", v.passed}};
}

inline json to_json(const ExperimentReport& r, bool include_timing = true) {
  json j;
  j["format_version"] = r.format_version;
  j["experiment"] = r.experiment;
  j["config"] = r.config;
  json recs = json::array();
  for (const auto& rec : r.records) recs.push_back(to_json(rec));
  j["records"] = recs;
  json verd = json::array();
  for (const auto& v : r.verdicts) verd.push_back(to_json(v));
  j["verdicts"] = verd;
  j["passed"] = r.passed();
  if (include_timing) j["timing"] = r.timing;
  return j;
}

inline ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  r.format_version = j.at("format_version").get<int>();
  r.experiment = j.at("experiment").get<std::string>();
  r.config = j.at("config");
  for (const auto& rec : j.at("records")) {
    r.records.push_back({rec.at("id").get<std::string>(), rec.at("inputs"), rec.at("outputs"), rec.at("residuals")});
  }
  for (const auto& v : j.at("verdicts")) {
    r.verdicts.push_back({v.at("name").get<std::string>(), v.at("tolerance_name").get<std::string>(),
                          v.at("tolerance").get<double>(), v.at("value").get<double>(),
                          v.at("comparison").get<std::string>(), v.at("passed").get<bool>()});
  }
  if (j.contains("timing")) r.timing = j.at("timing");
  return r;
}

enum class Format { Json, Csv };

inline Format format_from_string(const std::string& s) {
  if (s == "json") return Format::Json;
  if (s == "csv") return Format::Csv;
  throw ConfigError("unknown format '" + s + "' (expected json or csv)");
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Scalar leaves of a record section, in insertion order, as (column, cell).
inline void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  for (const auto& [key, value] : j.items()) {
    const std::string name = prefix + "." + key;
    if (value.is_object()) {
      flatten(value, name, out);
    } else if (value.is_number_float()) {
      out.emplace_back(name, format_number(value.get<double>()));
    } else if (value.is_number() || value.is_boolean()) {
      out.emplace_back(name, value.dump());
    } else if (value.is_string()) {
      out.emplace_back(name, csv_escape(value.get<std::string>()));
    }
    // arrays are JSON-only
  }
}

}  // namespace detail

/// One CSV row per record. Columns: experiment, case, then every scalar field
/// of inputs, outputs and residuals (prefixed by section) in order of first
/// appearance across the records. Fields a record lacks are left empty.
inline std::string to_csv(const ExperimentReport& r) {
  std::vector<std::string> header = {"experiment", "case"};
  std::map<std::string, std::size_t> column;
  std::vector<std::vector<std::pair<std::string, std::string>>> cells(r.records.size());
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const Record& rec = r.records[i];
    detail::flatten(rec.inputs, "inputs", cells[i]);
    detail::flatten(rec.outputs, "outputs", cells[i]);
    detail::flatten(rec.residuals, "residuals", cells[i]);
    for (const auto& c : cells[i]) {
      if (column.emplace(c.first, header.size()).second) header.push_back(c.first);
    }
  }
  std::ostringstream os;
  auto write_row = [&](const std::vector<std::string>& row) {
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << row[k];
    os << "\n";
  };
  write_row(header);
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    std::vector<std::string> row(header.size());
    row[0] = detail::csv_escape(r.experiment);
    row[1] = detail::csv_escape(r.records[i].id);
    for (const auto& c : cells[i]) row[column.at(c.first)] = c.second;
    write_row(row);
  }
  return os.str();
}

inline std::string serialize(const ExperimentReport& r, Format f) {
  return f == Format::Json ? to_json(r).dump(2) + "\n" : to_csv(r);
}

inline void write_text(const std::string& text, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline void emit_report(const ExperimentReport& r, Format f, const std::string& path) {
  write_text(serialize(r, f), path);
}

}  // namespace bandfill::experiments
