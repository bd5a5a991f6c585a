// qrlab: batch front-end for the quantisation/reduction checks.
//
//   qrlab validate-prequant [--sabotage-cocycle]
//   qrlab scan --grid 16 --truncation 12 --csv scan.csv
//   qrlab verify-qr [--skip-chern] --out verdict.json
//   qrlab finite-model --group 12 --subgroup 3
//   qrlab normalize-bench --bump-radius 1
//
// Exit codes: 0 pass, 1 verification failure, 2 usage or configuration error.

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>

#include "commands.hpp"

namespace {

using namespace qrlab::cli;

// Flags are bound to scratch values and copied over the config only when
// given, so they win over the config file.
struct Overrides {
  std::string config;
  RunConfig v;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> apply;

  template <class T>
  void add(CLI::App* app, const std::string& flag, T RunConfig::*field, const std::string& help) {
    auto* opt = app->add_option(flag, v.*field, help);
    apply.emplace_back(opt, [this, field](RunConfig& c) { c.*field = v.*field; });
  }
  void add_flag(CLI::App* app, const std::string& flag, bool RunConfig::*field, const std::string& help) {
    auto* opt = app->add_flag(flag, v.*field, help);
    apply.emplace_back(opt, [this, field](RunConfig& c) { c.*field = v.*field; });
  }

  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : load_config(config);
    for (const auto& [opt, fn] : apply)
      if (opt->count() > 0) fn(c);
    return c;
  }
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "JSON config file (flags override it)");
  o.add(app, "--n", &RunConfig::n, "complex dimension");
  o.add(app, "--truncation", &RunConfig::truncation, "theta series truncation K");
  o.add(app, "--zak-half-width", &RunConfig::zak_half_width, "Zak interval half-width T");
  o.add(app, "--zak-points", &RunConfig::zak_points, "Zak grid points N");
  o.add(app, "--grid", &RunConfig::grid, "character grid nodes per axis");
  o.add(app, "--step", &RunConfig::step, "finite-difference step");
  o.add(app, "--tol", &RunConfig::tol, "validator tolerance");
  o.add(app, "--curvature-tol", &RunConfig::curvature_tol, "curvature tolerance");
  o.add(app, "--gap-threshold", &RunConfig::gap_threshold, "singular-value gap threshold");
  o.add(app, "--samples", &RunConfig::samples, "random sample points");
  o.add(app, "--seed", &RunConfig::seed, "random seed");
  o.add(app, "--second-derivative", &RunConfig::second_derivative, "sinc, fd4 or fd6");
  o.add(app, "--group", &RunConfig::group, "cyclic orders of the finite group");
  o.add(app, "--subgroup", &RunConfig::subgroup, "subgroup generators, flattened");
  o.add(app, "--chain", &RunConfig::chain, "generators of a subgroup inside --subgroup");
  o.add(app, "--trials", &RunConfig::trials, "random group-algebra elements");
  o.add(app, "--bump-radius", &RunConfig::bump_radius, "support radius of the bump normalising function");
  o.add(app, "--matrix-size", &RunConfig::matrix_size, "size of the random graded matrices");
  o.add(app, "--threads", &RunConfig::threads, "parallel degree (0: QRLAB_THREADS or 1)");
  o.add(app, "--csv", &RunConfig::csv, "CSV output path");
  o.add(app, "--out", &RunConfig::out, "JSON output path (default stdout)");
  o.add_flag(app, "--skip-chern", &RunConfig::skip_chern, "skip the Chern number");
  o.add_flag(app, "--sabotage-cocycle", &RunConfig::sabotage_cocycle, "break the lifted action (negative control)");
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw qrlab::ConfigError("cannot write " + path);
  f << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantisation commutes with reduction: lattice checks"};
  app.require_subcommand(1);
  struct Entry {
    const char* name;
    const char* help;
    CommandResult (*run)(const RunConfig&);
  };
  const Entry entries[] = {
      {"validate-prequant", "check the equivariant prequantisation data", cmd_validate_prequant},
      {"scan", "kernel dimensions over the character grid (CSV)", cmd_scan},
      {"verify-qr", "full pipeline and verdict (JSON)", cmd_verify_qr},
      {"finite-model", "finite abelian reduction identities", cmd_finite_model},
      {"normalize-bench", "normalising functions and functional calculus", cmd_normalize_bench},
  };
  std::vector<Overrides> overrides(std::size(entries));
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < std::size(entries); ++i) {
    subs.push_back(app.add_subcommand(entries[i].name, entries[i].help));
    add_common(subs.back(), overrides[i]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }

  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      const RunConfig cfg = overrides[i].resolve();
      const auto res = entries[i].run(cfg);
      const std::string name = entries[i].name;
      if (name == "scan") {
        if (cfg.csv.empty()) std::cout << res.csv;
        else write_file(cfg.csv, res.csv);
        if (!cfg.out.empty()) write_file(cfg.out, render(res.report));
        else std::cerr << render(res.report);
      } else {
        if (!cfg.csv.empty() && !res.csv.empty()) write_file(cfg.csv, res.csv);
        if (cfg.out.empty()) std::cout << render(res.report);
        else write_file(cfg.out, render(res.report));
      }
      if (res.code != kPass) {
        const auto cause = res.report.value("cause", std::string{});
        std::cerr << name << ": FAIL" << (cause.empty() ? "" : " (" + cause + ")") << '\n';
      }
      return res.code;
    }
  } catch (const std::invalid_argument& e) {  // ConfigError, DimensionError
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const qrlab::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kFail;
  }
  return kUsage;
}
