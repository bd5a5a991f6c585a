#ifndef QRLAB_TOOLS_COMMANDS_HPP
#define QRLAB_TOOLS_COMMANDS_HPP

#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "config.hpp"
#include "qrlab/avg_reduction.hpp"
#include "qrlab/characters.hpp"
#include "qrlab/index_bundle.hpp"
#include "qrlab/prequant.hpp"

namespace qrlab::cli {

enum ExitCode : int { kPass = 0, kFail = 1, kUsage = 2 };

/// JSON writer that prints every float with 17 significant digits.
inline void write_json(std::ostream& os, const json& j, int indent = 0) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  const std::string inner(static_cast<std::size_t>(indent + 2), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) os << ",\n";
        first = false;
        os << inner << json(k).dump() << ": ";
        write_json(os, v, indent + 2);
      }
      os << '\n' << pad << '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      os << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ",\n";
        os << inner;
        write_json(os, j[i], indent + 2);
      }
      os << '\n' << pad << ']';
      return;
    }
    case json::value_t::number_float: {
      const double x = j.get<double>();
      if (std::isfinite(x)) os << index::format_double(x);
      else os << (std::isnan(x) ? "\"nan\"" : x > 0 ? "\"inf\"" : "\"-inf\"");
      return;
    }
    default:
      os << j.dump();
  }
}

inline std::string render(const json& j) {
  std::ostringstream os;
  write_json(os, j);
  os << '\n';
  return os.str();
}

inline json to_json(const ValidationReport& r) {
  json j{{"check", r.check}, {"max_residual", r.max_residual}, {"tol", r.tol}, {"passed", r.passed}, {"samples", r.samples}};
  if (r.order) j["order"] = *r.order;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

inline prequant::PrequantValidationConfig prequant_config(const RunConfig& c) {
  prequant::PrequantValidationConfig p;
  p.n = c.n;
  p.samples = c.samples;
  p.seed = c.seed;
  p.tol = c.tol;
  p.step = c.step;
  p.curvature_tol = c.curvature_tol;
  p.generator_twist = c.sabotage_cocycle ? 1.01 : 1.0;
  return p;
}

inline index::ScanConfig scan_config(const RunConfig& c) {
  if (c.n != 1) throw ConfigError("twisted operators are implemented for n = 1");
  index::ScanConfig s;
  s.zak = {c.zak_half_width, c.zak_points};
  s.second = parse_second(c.second_derivative);
  s.kernel.gap_threshold = c.gap_threshold;
  s.threads = c.threads;
  return s;
}

struct CommandResult {
  int code = kPass;
  json report;
  std::string csv;  // scan output, when produced
};

inline CommandResult cmd_validate_prequant(const RunConfig& c) {
  validate(c);
  const auto reports = prequant::validate_prequantisation(prequant_config(c));
  CommandResult out;
  json list = json::array();
  std::string first_failure;
  for (const auto& r : reports) {
    list.push_back(to_json(r));
    if (!r.passed && first_failure.empty()) first_failure = r.check;
  }
  out.code = first_failure.empty() ? kPass : kFail;
  out.report = {{"command", "validate-prequant"}, {"passed", first_failure.empty()}, {"reports", list}};
  if (!first_failure.empty()) out.report["cause"] = first_failure;
  return out;
}

inline json scan_summary(const std::vector<index::IndexSample>& samples, const index::RankCheck& ranks) {
  double min_gap = std::numeric_limits<double>::infinity(), max_floor = 0.0;
  for (const auto& s : samples) {
    min_gap = std::min(min_gap, s.kernel.plus.sigma_gap);
    max_floor = std::max(max_floor, s.kernel.plus.sigma_min);
  }
  return {{"nodes", samples.size()},
          {"constant", ranks.constant},
          {"rank_plus", ranks.rank_plus},
          {"rank_minus", ranks.rank_minus},
          {"offending", ranks.offending},
          {"min_sigma_gap_plus", min_gap},
          {"max_sigma_min_plus", max_floor}};
}

inline CommandResult cmd_scan(const RunConfig& c) {
  validate(c);
  const auto sc = scan_config(c);
  const index::CharacterGrid grid{c.grid, c.grid};
  auto cfg = sc;
  cfg.kernel.want_frames = false;
  const auto samples = index::scan(grid, cfg);
  std::ostringstream csv;
  index::write_scan_csv(csv, samples);
  const auto ranks = index::check_rank_constancy(samples);
  CommandResult out;
  out.csv = csv.str();
  out.code = ranks.constant ? kPass : kFail;
  out.report = {{"command", "scan"}, {"grid", {c.grid, c.grid}}, {"summary", scan_summary(samples, ranks)}};
  return out;
}

inline CommandResult cmd_verify_qr(const RunConfig& c) {
  validate(c);
  index::VerdictConfig v;
  v.grid = {c.grid, c.grid};
  v.scan = scan_config(c);
  v.prequant = prequant_config(c);
  v.truncation = c.truncation;
  v.skip_chern = c.skip_chern;
  const auto rep = index::qr_verdict(v);

  CommandResult out;
  out.code = rep.pass ? kPass : kFail;
  json pq = json::array();
  for (const auto& r : rep.prequant) pq.push_back(to_json(r));
  json j{{"command", "verify-qr"}, {"verdict", rep.pass ? "PASS" : "FAIL"}, {"config", to_json(c)}, {"prequant", pq}};
  if (!rep.pass) j["cause"] = rep.cause;
  if (rep.common_value) j["value"] = *rep.common_value;
  if (!rep.convention.empty()) j["convention"] = {{"used", rep.convention_used}, {"note", rep.convention}};
  if (rep.ranks) j["scan"] = scan_summary(rep.samples, *rep.ranks);
  if (!rep.chern_status.empty()) {
    json ch{{"status", rep.chern_status},
            {"role", "extension: degree of the kernel bundle over the dual torus, not part of the verdict"}};
    if (rep.chern) {
      ch["value"] = rep.chern->value;
      ch["raw"] = rep.chern->raw;
      ch["min_overlap"] = rep.chern->min_overlap;
    }
    j["chern"] = ch;
  }
  json red = json::object();
  if (rep.reduced_rank) red["at_trivial"] = *rep.reduced_rank;
  if (rep.spectral) {
    red["spectral"] = rep.spectral->value;
    red["spectral_sigma_gap_plus"] = rep.spectral->kernel.plus.sigma_gap;
  }
  if (rep.topological) {
    red["topological"] = rep.topological->value;
    red["topological_raw"] = rep.topological->raw;
    red["topological_residual"] = rep.topological->residual;
  }
  if (!red.empty()) j["reduction"] = red;
  out.report = j;
  if (!rep.samples.empty()) {
    std::ostringstream csv;
    index::write_scan_csv(csv, rep.samples);
    out.csv = csv.str();
  }
  return out;
}

inline characters::Subgroup make_subgroup(const characters::FiniteAbelianGroup& g, const std::vector<std::int64_t>& flat,
                                          const char* what) {
  const std::size_t r = g.rank();
  if (flat.size() % r != 0) throw ConfigError(std::string(what) + " entries must come in groups of the group rank");
  std::vector<std::vector<std::int64_t>> gens;
  for (std::size_t i = 0; i < flat.size(); i += r) gens.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(i),
                                                                    flat.begin() + static_cast<std::ptrdiff_t>(i + r));
  return characters::Subgroup(g, gens);
}

inline CommandResult cmd_finite_model(const RunConfig& c) {
  validate(c);
  const characters::FiniteAbelianGroup g(c.group);
  if (g.size() > 4096) throw ConfigError("finite model groups are limited to order 4096");
  const auto n = make_subgroup(g, c.subgroup, "subgroup");
  std::vector<ValidationReport> reports{characters::check_reduction_in_stages(n, c.trials, c.seed),
                                        characters::check_delta_identities(g)};
  if (!c.chain.empty()) {
    const auto inner = make_subgroup(g, c.chain, "chain");
    reports.push_back(characters::check_reduction_chain(n, inner, c.trials, c.seed + 1));
  }
  CommandResult out;
  json list = json::array();
  bool ok = true;
  for (const auto& r : reports) {
    list.push_back(to_json(r));
    ok = ok && r.passed;
  }
  out.code = ok ? kPass : kFail;
  out.report = {{"command", "finite-model"},
                {"group", c.group},
                {"subgroup_order", n.order()},
                {"passed", ok},
                {"reports", list}};
  return out;
}

inline CommandResult cmd_normalize_bench(const RunConfig& c) {
  validate(c);
  const auto standard = avg::NormalizingFunction::standard();
  const auto bump = avg::NormalizingFunction::bump(c.bump_radius);
  json list = json::array();
  bool ok = true;
  for (const auto* b : {&standard, &bump}) {
    const auto r = avg::check_normalizing_axioms(*b);
    list.push_back(to_json(r));
    ok = ok && r.passed;
  }
  json calc = json::array();
  const auto half = static_cast<Eigen::Index>(c.matrix_size / 2);
  for (const auto* b : {&standard, &bump}) {
    const auto k = avg::check_functional_calculus([&](double x) { return (*b)(x); }, half, c.seed);
    const bool pass = k.norm <= 1.0 + 1e-12 && k.self_adjoint < 1e-10 && k.diagonal_block < 1e-10 && k.conjugation < 1e-10;
    ok = ok && pass;
    calc.push_back({{"function", b->kind()},
                    {"norm", k.norm},
                    {"self_adjoint", k.self_adjoint},
                    {"diagonal_block", k.diagonal_block},
                    {"conjugation", k.conjugation},
                    {"passed", pass}});
  }
  const auto D = avg::discrete_dirac_1d(static_cast<Eigen::Index>(std::max<std::size_t>(c.matrix_size, 128)));
  const auto prop_bump = avg::check_finite_propagation(D, bump, 1.0, 1e-8);
  const auto prop_std = avg::check_finite_propagation(D, standard, 1.0, 1e-8);
  ok = ok && prop_bump.passed;
  CommandResult out;
  out.code = ok ? kPass : kFail;
  auto diag = to_json(prop_std);
  diag["informative_only"] = true;
  out.report = {{"command", "normalize-bench"},
                {"passed", ok},
                {"axioms", list},
                {"functional_calculus", calc},
                {"finite_propagation", {to_json(prop_bump), diag}}};
  return out;
}

}  // namespace qrlab::cli

#endif  // QRLAB_TOOLS_COMMANDS_HPP
