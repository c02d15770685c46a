#pragma once

// JSON run configuration shared by the CLI subcommands.

#include <nlohmann/json.hpp>

#include "nsbang/bench.hpp"

namespace nsbang {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline BenchConfig default_config() { return {}; }

inline BenchConfig parse_config_json(const nlohmann::json& j) {
  BenchConfig cfg;
  try {
    if (j.contains("nu")) cfg.nu = j.at("nu").get<double>();
    if (j.contains("bounds")) {
      const auto& b = j.at("bounds");
      auto a = b.at("a").get<std::vector<double>>();
      auto bb = b.at("b").get<std::vector<double>>();
      if (a.size() != 2 || bb.size() != 2)
        throw ConfigError("bounds.a and bounds.b must have length 2");
      cfg.bounds.a = {a[0], a[1]};
      cfg.bounds.b = {bb[0], bb[1]};
    }
    if (j.contains("mesh")) {
      const auto& m = j.at("mesh");
      if (m.contains("type") && m.at("type").get<std::string>() != "square")
        throw ConfigError("mesh.type must be \"square\"");
      if (m.contains("n")) cfg.mesh_n = m.at("n").get<int>();
    }
    if (j.contains("ladder")) {
      const auto& l = j.at("ladder");
      if (l.contains("levels")) cfg.levels = l.at("levels").get<int>();
      if (l.contains("mode")) cfg.mode = l.at("mode").get<std::string>();
      if (l.contains("theta")) cfg.theta = l.at("theta").get<double>();
    }
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      if (s.contains("newton_tol")) cfg.newton_tol = s.at("newton_tol").get<double>();
      if (s.contains("newton_max")) cfg.newton_max = s.at("newton_max").get<int>();
    }
    if (j.contains("ocp")) {
      const auto& o = j.at("ocp");
      if (o.contains("gap_tol")) cfg.gap_tol = o.at("gap_tol").get<double>();
      if (o.contains("max_outer")) cfg.max_outer = o.at("max_outer").get<int>();
    }
    if (j.contains("estimator")) {
      const auto& e = j.at("estimator");
      if (e.contains("t_prime")) cfg.t_prime = e.at("t_prime").get<double>();
      if (e.contains("p")) cfg.p = e.at("p").get<double>();
      if (e.contains("gamma")) cfg.gamma = e.at("gamma").get<double>();
      if (e.contains("c_b")) cfg.c_b = e.at("c_b").get<double>();
    }
    if (j.contains("output")) {
      const auto& o = j.at("output");
      if (o.contains("csv") && !o.at("csv").is_null())
        cfg.csv_path = o.at("csv").get<std::string>();
      if (o.contains("vtk") && !o.at("vtk").is_null())
        cfg.vtk_path = o.at("vtk").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  if (!(cfg.nu > 0.0)) throw ConfigError("nu must be positive");
  if (!(cfg.bounds.a.x < cfg.bounds.b.x && cfg.bounds.a.y < cfg.bounds.b.y))
    throw ConfigError("bounds require a_i < b_i");
  if (cfg.mesh_n < 1) throw ConfigError("mesh.n must be >= 1");
  if (cfg.levels < 1) throw ConfigError("ladder.levels must be >= 1");
  if (cfg.mode != "uniform" && cfg.mode != "adaptive")
    throw ConfigError("ladder.mode must be \"uniform\" or \"adaptive\"");
  if (!(cfg.theta > 0.0 && cfg.theta <= 1.0))
    throw ConfigError("ladder.theta must be in (0,1]");
  if (!(cfg.newton_tol > 0.0)) throw ConfigError("solver.newton_tol must be positive");
  if (cfg.newton_max < 1) throw ConfigError("solver.newton_max must be >= 1");
  if (!(cfg.gap_tol > 0.0)) throw ConfigError("ocp.gap_tol must be positive");
  if (cfg.max_outer < 1) throw ConfigError("ocp.max_outer must be >= 1");
  if (!(cfg.t_prime >= 2.0 && cfg.t_prime <= 4.0))
    throw ConfigError("estimator.t_prime must be in [2,4]");
  if (!(cfg.p > 2.0)) throw ConfigError("estimator.p must exceed the dimension 2");
  if (!(cfg.gamma > 0.5 && cfg.gamma <= 1.0))
    throw ConfigError("estimator.gamma must be in (1/2, 1]");
  if (!(cfg.c_b > 0.0)) throw ConfigError("estimator.c_b must be positive");
  return cfg;
}

inline BenchConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid JSON in ") + path + ": " + e.what());
  }
  return parse_config_json(j);
}

}  // namespace nsbang
