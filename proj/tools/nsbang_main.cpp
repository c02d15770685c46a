// nsbang: manufactured-solution convergence studies and diagnostics for the
// Taylor-Hood bang-bang flow control solver.
//
// Exit codes: 0 success, 2 solver failure, 3 config error.

#include <CLI11.hpp>

#include <iostream>

#include "nsbang/config.hpp"
#include "nsbang/diagnostics.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSolver = 2;
constexpr int kExitConfig = 3;

void print_records(const std::vector<nsbang::RunRecord>& recs) {
  std::printf(
      "%5s %10s %9s %9s %12s %12s %12s %8s %8s %9s\n", "level", "h", "ndof_v",
      "ndof_p", "err_u_L1", "err_y_L2", "err_z_Linf", "eoc_u", "eoc_y", "wall_s");
  for (const auto& r : recs)
    std::printf("%5d %10.4e %9d %9d %12.5e %12.5e %12.5e %8.3f %8.3f %9.2f\n",
                r.level, r.h, r.ndof_v, r.ndof_p, r.err_u_L1, r.err_y_L2,
                r.err_z_Linf, r.eoc_u, r.eoc_y, r.wall_s);
  std::printf("%5s %12s %12s %12s %12s %12s\n", "level", "eta_st2", "eta_stp",
              "eta_adj_inf", "div_term", "total_bound");
  for (const auto& r : recs)
    std::printf("%5d %12.5e %12.5e %12.5e %12.5e %12.5e\n", r.level, r.eta_st2,
                r.eta_stp, r.eta_adj_inf, r.div_term, r.total_bound);
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  auto dot = path.rfind('.');
  if (dot == std::string::npos) return path + suffix;
  return path.substr(0, dot) + suffix + path.substr(dot);
}

int run_ns(const nsbang::BenchConfig& cfg) {
  nsbang::ManufacturedNS mnf = nsbang::make_ns_benchmark(cfg.nu);
  auto recs = nsbang::run_convergence(mnf, cfg);
  print_records(recs);
  if (!cfg.csv_path.empty()) nsbang::export_csv(recs, cfg.csv_path);
  if (!cfg.vtk_path.empty()) {
    // re-solve the finest level once for the field export
    nsbang::TriMesh mesh = nsbang::build_structured(cfg.mesh_n, cfg.mesh_n);
    for (int l = 1; l < cfg.levels; ++l) mesh = nsbang::refine_uniform(mesh);
    auto space = nsbang::build_space(mesh);
    auto st = nsbang::solve_state(space, nullptr,
                                  [&](nsbang::Vec2 x) { return mnf.forcing(x); },
                                  cfg.nu, nullptr, cfg.newton_tol, cfg.newton_max);
    nsbang::export_vtk(st.solution, cfg.vtk_path);
  }
  return kExitOk;
}

int run_ocp(nsbang::BenchConfig cfg, bool force_adaptive) {
  if (force_adaptive) cfg.mode = "adaptive";
  nsbang::ManufacturedOCP mocp = nsbang::make_ocp_benchmark(cfg.nu, cfg.bounds);
  auto recs = nsbang::run_convergence(mocp, cfg);
  print_records(recs);
  if (!cfg.csv_path.empty()) nsbang::export_csv(recs, cfg.csv_path);
  if (!cfg.vtk_path.empty()) {
    // final level fields for export
    nsbang::AdaptiveConfig acfg;
    acfg.levels = 1;
    acfg.gap_tol = cfg.gap_tol;
    acfg.max_outer = cfg.max_outer;
    nsbang::TriMesh mesh = nsbang::build_structured(cfg.mesh_n, cfg.mesh_n);
    auto factory = [&](std::shared_ptr<const nsbang::THSpace> sp) {
      auto p = mocp.problem(std::move(sp));
      p.newton_tol = cfg.newton_tol;
      p.newton_max = cfg.newton_max;
      return p;
    };
    auto lv = nsbang::adaptive_loop(mesh, factory, acfg);
    nsbang::export_vtk(lv.front().solution.state, cfg.vtk_path);
    nsbang::export_vtk(lv.front().solution.adjoint,
                       with_suffix(cfg.vtk_path, "_adjoint"), "adjoint_velocity",
                       "adjoint_pressure");
  }
  return kExitOk;
}

int run_check_invariants(const nsbang::BenchConfig& cfg) {
  auto checks = nsbang::run_invariant_checks(cfg.mesh_n, cfg.nu);
  bool all_ok = true;
  for (const auto& c : checks) {
    std::printf("[%s] %-32s %s\n", c.ok ? "ok" : "FAIL", c.name.c_str(),
                c.detail.c_str());
    all_ok = all_ok && c.ok;
  }
  return all_ok ? kExitOk : kExitSolver;
}

int run_report_assumptions(const nsbang::BenchConfig& cfg) {
  nsbang::ManufacturedOCP mocp = nsbang::make_ocp_benchmark(cfg.nu, cfg.bounds);
  auto space = nsbang::build_space(nsbang::build_structured(cfg.mesh_n, cfg.mesh_n));
  nsbang::QuadControl u = nsbang::QuadControl::from_function(
      *space, [&](nsbang::Vec2 x) { return mocp.control(x); });
  auto st = nsbang::solve_state(space, &u,
                                [&](nsbang::Vec2 x) { return mocp.forcing(x); },
                                cfg.nu, nullptr, cfg.newton_tol, cfg.newton_max);
  auto rep = nsbang::check_assumptions(st.solution, cfg.nu, cfg.c_b);
  std::printf("|grad y_l|_L2      = %.12e\n", rep.grad_l2);
  std::printf("|grad y_l|_L12/5   = %.12e\n", rep.grad_l12_5);
  std::printf("nu                 = %.12e\n", rep.nu);
  std::printf("C_b (heuristic)    = %.12e\n", rep.c_b);
  std::printf("|grad y_l|   < nu/C_b : %s\n", rep.state_smallness ? "yes" : "no");
  std::printf("2|grad y_l|  < nu/C_b : %s\n", rep.adjoint_smallness ? "yes" : "no");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Taylor-Hood Navier-Stokes bang-bang control benchmarks"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON configuration file");

  auto* ns = app.add_subcommand("ns-converge",
                                "uniform NS convergence study (manufactured)");
  auto* ocp = app.add_subcommand("ocp-converge",
                                 "control problem convergence study");
  auto* adapt = app.add_subcommand("adapt", "adaptive OCP run (Dorfler marking)");
  auto* chk = app.add_subcommand("check-invariants",
                                 "structural invariant sweep");
  auto* rep = app.add_subcommand("report-assumptions",
                                 "smallness-assumption report for the state");
  for (auto* sc : {ns, ocp, adapt, chk, rep}) sc->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  nsbang::BenchConfig cfg;
  try {
    if (!config_path.empty()) cfg = nsbang::load_config(config_path);
  } catch (const nsbang::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (ns->parsed()) return run_ns(cfg);
    if (ocp->parsed()) return run_ocp(cfg, false);
    if (adapt->parsed()) return run_ocp(cfg, true);
    if (chk->parsed()) return run_check_invariants(cfg);
    if (rep->parsed()) return run_report_assumptions(cfg);
  } catch (const nsbang::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitOk;
}
