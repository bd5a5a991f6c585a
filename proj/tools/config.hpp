#ifndef QRLAB_TOOLS_CONFIG_HPP
#define QRLAB_TOOLS_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qrlab/core.hpp"
#include "qrlab/twisted_kernels.hpp"

namespace qrlab::cli {

using nlohmann::json;

struct RunConfig {
  std::size_t n = 1;
  int truncation = 12;
  double zak_half_width = 5.0;
  std::size_t zak_points = 256;
  std::size_t grid = 16;
  double step = 1e-4;
  double tol = 1e-10;
  double curvature_tol = 1e-6;
  double gap_threshold = 1e3;
  std::size_t samples = 200;
  std::uint64_t seed = 20240601;
  std::string second_derivative = "sinc";
  std::vector<std::int64_t> group{12};
  std::vector<std::int64_t> subgroup{3};
  std::vector<std::int64_t> chain;  // generators of a subgroup inside `subgroup`; empty: no chain
  std::size_t trials = 100;
  double bump_radius = 1.0;
  std::size_t matrix_size = 64;
  bool skip_chern = false;
  bool sabotage_cocycle = false;  // test hook: perturbs the imaginary generator of the action
  unsigned threads = 0;
  std::string csv;
  std::string out;
};

inline twisted::SecondDerivative parse_second(const std::string& s) {
  if (s == "sinc") return twisted::SecondDerivative::sinc;
  if (s == "fd4") return twisted::SecondDerivative::fd4;
  if (s == "fd6") return twisted::SecondDerivative::fd6;
  throw ConfigError("second_derivative must be sinc, fd4 or fd6");
}

inline void validate(const RunConfig& c) {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  need(c.n >= 1 && c.n <= 4, "n must lie in [1, 4]");
  need(c.truncation >= 4 && c.truncation <= 64, "truncation must lie in [4, 64]");
  need(c.zak_half_width >= 3.0 && c.zak_half_width <= 10.0, "zak_half_width must lie in [3, 10]");
  need(c.zak_points >= 64 && c.zak_points <= 2048, "zak_points must lie in [64, 2048]");
  need(c.grid >= 1 && c.grid <= 256, "grid must lie in [1, 256]");
  need(c.step > 0.0 && c.step <= 1e-2, "step must lie in (0, 1e-2]");
  need(c.tol > 0.0, "tol must be positive");
  need(c.curvature_tol > 0.0, "curvature_tol must be positive");
  need(c.gap_threshold > 1.0, "gap_threshold must exceed 1");
  need(c.samples >= 1 && c.samples <= 100000, "samples must lie in [1, 100000]");
  need(c.trials >= 1 && c.trials <= 100000, "trials must lie in [1, 100000]");
  need(c.bump_radius > 0.0, "bump_radius must be positive");
  need(c.matrix_size >= 2 && c.matrix_size <= 1024 && c.matrix_size % 2 == 0, "matrix_size must be even, in [2, 1024]");
  need(c.threads <= 256, "threads must not exceed 256");
  need(!c.group.empty(), "group needs at least one cyclic order");
  parse_second(c.second_derivative);
}

/// Reads a JSON object whose keys are RunConfig field names. Unknown keys are
/// rejected so typos do not pass silently.
inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "n") c.n = v.get<std::size_t>();
      else if (key == "truncation") c.truncation = v.get<int>();
      else if (key == "zak_half_width") c.zak_half_width = v.get<double>();
      else if (key == "zak_points") c.zak_points = v.get<std::size_t>();
      else if (key == "grid") c.grid = v.get<std::size_t>();
      else if (key == "step") c.step = v.get<double>();
      else if (key == "tol") c.tol = v.get<double>();
      else if (key == "curvature_tol") c.curvature_tol = v.get<double>();
      else if (key == "gap_threshold") c.gap_threshold = v.get<double>();
      else if (key == "samples") c.samples = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "second_derivative") c.second_derivative = v.get<std::string>();
      else if (key == "group") c.group = v.get<std::vector<std::int64_t>>();
      else if (key == "subgroup") c.subgroup = v.get<std::vector<std::int64_t>>();
      else if (key == "chain") c.chain = v.get<std::vector<std::int64_t>>();
      else if (key == "trials") c.trials = v.get<std::size_t>();
      else if (key == "bump_radius") c.bump_radius = v.get<double>();
      else if (key == "matrix_size") c.matrix_size = v.get<std::size_t>();
      else if (key == "skip_chern") c.skip_chern = v.get<bool>();
      else if (key == "sabotage_cocycle") c.sabotage_cocycle = v.get<bool>();
      else if (key == "threads") c.threads = v.get<unsigned>();
      else if (key == "csv") c.csv = v.get<std::string>();
      else if (key == "out") c.out = v.get<std::string>();
      else throw ConfigError("unknown config key: " + key);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  return c;
}

inline json to_json(const RunConfig& c) {
  return json{{"n", c.n},
              {"truncation", c.truncation},
              {"zak_half_width", c.zak_half_width},
              {"zak_points", c.zak_points},
              {"grid", c.grid},
              {"step", c.step},
              {"tol", c.tol},
              {"curvature_tol", c.curvature_tol},
              {"gap_threshold", c.gap_threshold},
              {"samples", c.samples},
              {"seed", c.seed},
              {"second_derivative", c.second_derivative},
              {"group", c.group},
              {"subgroup", c.subgroup},
              {"chain", c.chain},
              {"trials", c.trials},
              {"bump_radius", c.bump_radius},
              {"matrix_size", c.matrix_size},
              {"skip_chern", c.skip_chern},
              {"sabotage_cocycle", c.sabotage_cocycle}};
}

}  // namespace qrlab::cli

#endif  // QRLAB_TOOLS_CONFIG_HPP
