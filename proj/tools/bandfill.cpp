// bandfill: command-line front end for the verification campaigns.
//
// Exit codes: 0 all verdicts pass, 1 some verdict fails, 2 usage or
// configuration error, 3 numerical failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bandfill/acceptance.hpp"
#include "bandfill/experiments.hpp"

namespace {

using namespace bandfill;
using experiments::Experiment;

struct CommonFlags {
  std::string config;
  std::string out;
  std::string format = "json";
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  std::vector<double> lambdas;
};

void add_common(CLI::App* sub, CommonFlags& f, bool with_lambda) {
  sub->add_option("--config", f.config, "JSON configuration file");
  sub->add_option("--out", f.out, "report path (default: standard output)");
  sub->add_option("--format", f.format, "report format")->check(CLI::IsMember({"json", "csv"}));
  sub->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--seed", f.seed, "seed for randomized checks");
  sub->add_flag("--quiet", f.quiet, "suppress the verdict summary");
  if (with_lambda) sub->add_option("--lambda", f.lambdas, "energies, overriding lambda_grid");
}

void write_output(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
  } else {
    experiments::write_text(text, path);
  }
}

int run_experiment(Experiment e, const CommonFlags& f) {
  experiments::ExperimentConfig cfg =
      f.config.empty() ? experiments::default_config(e) : experiments::load_config(f.config);
  if (cfg.experiment != e) {
    throw ConfigError(std::string("config '") + f.config + "' is for " + experiments::to_string(cfg.experiment) +
                      ", not " + experiments::to_string(e));
  }
  if (f.seed) cfg.seed = *f.seed;
  if (!f.lambdas.empty()) cfg.lambda_grid = f.lambdas;
  const auto format = experiments::format_from_string(f.format);
  const auto report = experiments::run_experiment(cfg, {f.jobs});
  write_output(experiments::serialize(report, format), f.out);
  if (!f.quiet) {
    for (const auto& v : report.verdicts) {
      std::fprintf(stderr, "[%s] %s = %.6g (%s %s = %.6g)\n", v.passed ? "PASS" : "FAIL", v.name.c_str(), v.value,
                   v.comparison.c_str(), v.tolerance_name.c_str(), v.tolerance);
    }
  }
  return report.passed() ? 0 : 1;
}

int run_verify(const CommonFlags& f, bool skip_determinism) {
  if (!f.config.empty()) throw ConfigError("verify uses the built-in acceptance configuration; drop --config");
  acceptance::Options opt;
  if (f.seed) opt.seed = *f.seed;
  opt.jobs = f.jobs;
  opt.determinism = !skip_determinism;
  if (!f.quiet) {
    opt.on_result = [](const acceptance::CriterionResult& c) {
      std::fprintf(stderr, "%s\n", acceptance::summary_line(c).c_str());
    };
  }
  const auto suite = acceptance::run_acceptance(opt);
  std::string text;
  if (f.format == "csv") {
    text = "criterion,title,checks_passed,runtime_ok,passed,seconds\n";
    for (const auto& c : suite.criteria) {
      text += std::to_string(c.id) + "," + c.title + "," + (c.checks_passed() ? "true" : "false") + "," +
              (c.runtime_ok() ? "true" : "false") + "," + (c.passed() ? "true" : "false") + "," +
              experiments::format_number(c.seconds) + "\n";
    }
  } else {
    text = acceptance::to_json(suite).dump(2) + "\n";
  }
  write_output(text, f.out);
  return suite.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral projection band-filling laboratory"};
  app.require_subcommand(1);
  CommonFlags flags;
  bool skip_determinism = false;
  struct Sub {
    const char* name;
    const char* help;
    std::optional<Experiment> experiment;
  };
  const std::vector<Sub> subs = {
      {"specfun", "conical function seam and bound audit", Experiment::SpecfunAudit},
      {"carleman", "half-Carleman spectrum and Mehler residuals", Experiment::CarlemanMehler},
      {"model", "spectrum of the model operator", Experiment::ModelSpectrum},
      {"scatter", "S-matrix routes and the Birman-Krein identity", Experiment::BirmanKrein},
      {"dspec", "band filling for the projection difference", Experiment::BandFilling},
      {"verify", "full acceptance suite", std::nullopt},
  };
  std::vector<CLI::App*> handles;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    const bool with_lambda = s.experiment && (*s.experiment == Experiment::BirmanKrein ||
                                              *s.experiment == Experiment::BandFilling ||
                                              *s.experiment == Experiment::ModelSpectrum);
    add_common(sub, flags, with_lambda);
    if (!s.experiment) sub->add_flag("--skip-determinism", skip_determinism, "do not repeat the suite");
    handles.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!handles[i]->parsed()) continue;
      if (subs[i].experiment) return run_experiment(*subs[i].experiment, flags);
      return run_verify(flags, skip_determinism);
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  }
  return 2;
}
