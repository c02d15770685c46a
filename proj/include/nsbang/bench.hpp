#pragma once

// Manufactured problems on the unit square, convergence studies with EOC
// tables, and file export. The NS benchmark drives the state solver alone;
// the OCP benchmark prescribes a full optimality system in reverse: a
// divergence-free adjoint with transversal zero curves induces the exact
// bang-bang control, and forcing/desired-state closures make the prescribed
// fields satisfy the PDEs identically.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "nsbang/estimators.hpp"

namespace nsbang {

namespace mf {

// factor functions of the stream-function constructions
inline double S(double t) { return std::pow(std::sin(M_PI * t), 2); }
inline double S1(double t) { return M_PI * std::sin(2.0 * M_PI * t); }
inline double S2(double t) { return 2.0 * M_PI * M_PI * std::cos(2.0 * M_PI * t); }
inline double S3(double t) { return -4.0 * std::pow(M_PI, 3) * std::sin(2.0 * M_PI * t); }

inline double G(double x) { return S(x) * (x - 0.5); }
inline double G1(double x) { return S1(x) * (x - 0.5) + S(x); }
inline double G2(double x) { return S2(x) * (x - 0.5) + 2.0 * S1(x); }
inline double G3(double x) { return S3(x) * (x - 0.5) + 3.0 * S2(x); }

}  // namespace mf

struct Mat2 {
  double a[2][2] = {{0, 0}, {0, 0}};
};

/// Manufactured stationary NS problem: velocity is the curl of
/// psi = sin^2(pi x) sin^2(pi y), pressure sin(2 pi x) cos(2 pi y) (zero
/// mean), forcing from the momentum equation with the control folded in.
struct ManufacturedNS {
  double nu = 1.0;

  Vec2 velocity(Vec2 p) const {
    return {mf::S(p.x) * mf::S1(p.y), -mf::S1(p.x) * mf::S(p.y)};
  }
  Mat2 velocity_grad(Vec2 p) const {
    Mat2 g;
    g.a[0][0] = mf::S1(p.x) * mf::S1(p.y);
    g.a[0][1] = mf::S(p.x) * mf::S2(p.y);
    g.a[1][0] = -mf::S2(p.x) * mf::S(p.y);
    g.a[1][1] = -mf::S1(p.x) * mf::S1(p.y);
    return g;
  }
  Vec2 velocity_laplacian(Vec2 p) const {
    return {mf::S2(p.x) * mf::S1(p.y) + mf::S(p.x) * mf::S3(p.y),
            -mf::S3(p.x) * mf::S(p.y) - mf::S1(p.x) * mf::S2(p.y)};
  }
  double pressure(Vec2 p) const {
    return std::sin(2.0 * M_PI * p.x) * std::cos(2.0 * M_PI * p.y);
  }
  Vec2 pressure_grad(Vec2 p) const {
    return {2.0 * M_PI * std::cos(2.0 * M_PI * p.x) * std::cos(2.0 * M_PI * p.y),
            -2.0 * M_PI * std::sin(2.0 * M_PI * p.x) * std::sin(2.0 * M_PI * p.y)};
  }
  Vec2 forcing(Vec2 p) const {
    Vec2 v = velocity(p), lap = velocity_laplacian(p), gp = pressure_grad(p);
    Mat2 g = velocity_grad(p);
    return {-nu * lap.x + v.x * g.a[0][0] + v.y * g.a[0][1] + gp.x,
            -nu * lap.y + v.x * g.a[1][0] + v.y * g.a[1][1] + gp.y};
  }
};

inline ManufacturedNS make_ns_benchmark(double nu) {
  if (!(nu > 0.0)) throw std::invalid_argument("make_ns_benchmark: nu > 0 required");
  return {nu};
}

/// Manufactured optimality system. The prescribed adjoint is the curl of
/// phi_z = sin^2(pi x) sin^2(pi y) (x - 1/2); both components vanish on
/// transversal curves, the gamma = 1 regime of the growth condition.
struct ManufacturedOCP {
  double nu = 1.0;
  ControlBounds bounds;
  ManufacturedNS state_part;  // exact state/pressure and their derivatives

  Vec2 state(Vec2 p) const { return state_part.velocity(p); }
  Mat2 state_grad(Vec2 p) const { return state_part.velocity_grad(p); }
  double state_pressure(Vec2 p) const { return state_part.pressure(p); }

  Vec2 adjoint(Vec2 p) const {
    return {mf::G(p.x) * mf::S1(p.y), -mf::G1(p.x) * mf::S(p.y)};
  }
  Mat2 adjoint_grad(Vec2 p) const {
    Mat2 g;
    g.a[0][0] = mf::G1(p.x) * mf::S1(p.y);
    g.a[0][1] = mf::G(p.x) * mf::S2(p.y);
    g.a[1][0] = -mf::G2(p.x) * mf::S(p.y);
    g.a[1][1] = -mf::G1(p.x) * mf::S1(p.y);
    return g;
  }
  Vec2 adjoint_laplacian(Vec2 p) const {
    return {mf::G2(p.x) * mf::S1(p.y) + mf::G(p.x) * mf::S3(p.y),
            -mf::G3(p.x) * mf::S(p.y) - mf::G1(p.x) * mf::S2(p.y)};
  }
  double adjoint_pressure(Vec2 p) const {
    return std::sin(2.0 * M_PI * p.x) * std::sin(2.0 * M_PI * p.y);
  }
  Vec2 adjoint_pressure_grad(Vec2 p) const {
    return {2.0 * M_PI * std::cos(2.0 * M_PI * p.x) * std::sin(2.0 * M_PI * p.y),
            2.0 * M_PI * std::sin(2.0 * M_PI * p.x) * std::cos(2.0 * M_PI * p.y)};
  }

  // bang-bang control induced by the sign of the adjoint velocity
  Vec2 control(Vec2 p) const {
    Vec2 z = adjoint(p);
    auto pick = [&](double zc, int c) {
      return zc > 0.0   ? bounds.lower(c)
             : zc < 0.0 ? bounds.upper(c)
                        : 0.5 * (bounds.lower(c) + bounds.upper(c));
    };
    return {pick(z.x, 0), pick(z.y, 1)};
  }

  // state-equation forcing: f = -nu lap(y) + (y.grad)y + grad p - u
  Vec2 forcing(Vec2 p) const {
    Vec2 f = state_part.forcing(p);
    Vec2 u = control(p);
    return {f.x - u.x, f.y - u.y};
  }

  // desired state: y_O = y + nu lap(z) + (y.grad)z - (grad y)^T z - grad r
  Vec2 desired_state(Vec2 p) const {
    Vec2 y = state(p), lz = adjoint_laplacian(p), z = adjoint(p);
    Vec2 gr = adjoint_pressure_grad(p);
    Mat2 gy = state_grad(p), gz = adjoint_grad(p);
    double conv_x = y.x * gz.a[0][0] + y.y * gz.a[0][1];
    double conv_y = y.x * gz.a[1][0] + y.y * gz.a[1][1];
    double gyt_x = gy.a[0][0] * z.x + gy.a[1][0] * z.y;
    double gyt_y = gy.a[0][1] * z.x + gy.a[1][1] * z.y;
    return {y.x + nu * lz.x + conv_x - gyt_x - gr.x,
            y.y + nu * lz.y + conv_y - gyt_y - gr.y};
  }

  OcpProblem problem(std::shared_ptr<const THSpace> space) const {
    OcpProblem p;
    p.space = std::move(space);
    p.nu = nu;
    p.bounds = bounds;
    p.extra_forcing = [self = *this](Vec2 x) { return self.forcing(x); };
    p.y_omega = [self = *this](Vec2 x) { return self.desired_state(x); };
    return p;
  }

  OcpExact exact() const {
    return {[self = *this](Vec2 x) { return self.control(x); },
            [self = *this](Vec2 x) { return self.state(x); },
            [self = *this](Vec2 x) { return self.adjoint(x); }};
  }
};

inline ManufacturedOCP make_ocp_benchmark(double nu, const ControlBounds& bounds) {
  if (!(nu > 0.0)) throw std::invalid_argument("make_ocp_benchmark: nu > 0 required");
  bounds.check();
  return {nu, bounds, {nu}};
}

// ---------------------------------------------------------------------------
// Convergence studies
// ---------------------------------------------------------------------------

struct RunRecord {
  int level = 0;
  double h = 0.0, h_min = 0.0;
  int ndof_v = 0, ndof_p = 0;
  double err_u_L1 = std::numeric_limits<double>::quiet_NaN();
  double err_y_L2 = std::numeric_limits<double>::quiet_NaN();
  double err_z_Linf = std::numeric_limits<double>::quiet_NaN();
  double eta_st2 = std::numeric_limits<double>::quiet_NaN();
  double eta_stp = std::numeric_limits<double>::quiet_NaN();
  double eta_adj_inf = std::numeric_limits<double>::quiet_NaN();
  double div_term = std::numeric_limits<double>::quiet_NaN();
  double total_bound = std::numeric_limits<double>::quiet_NaN();
  double eoc_u = std::numeric_limits<double>::quiet_NaN();
  double eoc_y = std::numeric_limits<double>::quiet_NaN();
  double wall_s = 0.0;
};

struct BenchConfig {
  double nu = 1.0;
  ControlBounds bounds;
  int mesh_n = 8;            // initial square subdivisions per side
  int levels = 4;
  std::string mode = "uniform";  // "uniform" | "adaptive"
  double theta = 0.5;
  double newton_tol = 1e-10;
  int newton_max = 25;
  double gap_tol = 1e-12;
  int max_outer = 60;
  double t_prime = 3.0;  // exponent of the second state estimator (= p)
  double p = 3.0;
  double gamma = 1.0;
  double c_b = 0.5;
  int line_search_evals = 14;
  std::string csv_path;
  std::string vtk_path;
};

inline void compute_eocs(std::vector<RunRecord>& recs) {
  for (size_t k = 1; k < recs.size(); ++k) {
    double lh = std::log(recs[k - 1].h / recs[k].h);
    auto eoc = [&](double e0, double e1) {
      if (!(e0 > 0.0) || !(e1 > 0.0) || lh == 0.0)
        return std::numeric_limits<double>::quiet_NaN();
      return std::log(e0 / e1) / lh;
    };
    recs[k].eoc_u = eoc(recs[k - 1].err_u_L1, recs[k].err_u_L1);
    recs[k].eoc_y = eoc(recs[k - 1].err_y_L2, recs[k].err_y_L2);
  }
}

/// Uniform-refinement study of the plain NS solve against the manufactured
/// solution; the state estimator runs with the full load as "control".
inline std::vector<RunRecord> run_convergence(const ManufacturedNS& mnf,
                                              const BenchConfig& cfg) {
  std::vector<RunRecord> recs;
  TriMesh mesh = build_structured(cfg.mesh_n, cfg.mesh_n);
  for (int lvl = 0; lvl < cfg.levels; ++lvl) {
    auto t0 = std::chrono::steady_clock::now();
    auto space = build_space(mesh);
    VecFn f = [&mnf](Vec2 x) { return mnf.forcing(x); };
    StateSolve st = solve_state(space, nullptr, f, mnf.nu, nullptr, cfg.newton_tol,
                                cfg.newton_max);
    RunRecord r;
    r.level = lvl;
    r.h = mesh.h_max();
    r.h_min = mesh.h_min();
    r.ndof_v = space->nv_dofs;
    r.ndof_p = space->np_dofs;
    r.err_y_L2 = norm_lp_velocity(st.solution, 2.0,
                                  [&mnf](Vec2 x) { return mnf.velocity(x); });
    QuadControl load_qc = QuadControl::from_function(*space, f);
    r.eta_st2 = estimate_state(*space, st.solution, load_qc, 2.0, mnf.nu).aggregate;
    r.eta_stp =
        estimate_state(*space, st.solution, load_qc, cfg.t_prime, mnf.nu).aggregate;
    double mu = 2.0 * cfg.p / (2.0 + cfg.p);
    r.div_term = norm_lp_div(st.solution, mu);
    r.wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    recs.push_back(r);
    if (lvl + 1 < cfg.levels) mesh = refine_uniform(mesh);
  }
  compute_eocs(recs);
  return recs;
}

/// Uniform or adaptive study of the manufactured control problem.
inline std::vector<RunRecord> run_convergence(const ManufacturedOCP& mocp,
                                              const BenchConfig& cfg) {
  AdaptiveConfig acfg;
  acfg.theta = cfg.theta;
  acfg.levels = cfg.levels;
  acfg.t_prime = cfg.t_prime;
  acfg.p = cfg.p;
  acfg.gamma = cfg.gamma;
  acfg.c_b = cfg.c_b;
  acfg.gap_tol = cfg.gap_tol;
  acfg.max_outer = cfg.max_outer;
  acfg.line_search_evals = cfg.line_search_evals;

  OcpExact exact = mocp.exact();
  auto factory = [&](std::shared_ptr<const THSpace> space) {
    OcpProblem p = mocp.problem(std::move(space));
    p.newton_tol = cfg.newton_tol;
    p.newton_max = cfg.newton_max;
    return p;
  };

  std::vector<AdaptiveLevel> levels;
  if (cfg.mode == "adaptive") {
    levels = adaptive_loop(build_structured(cfg.mesh_n, cfg.mesh_n), factory, acfg,
                           &exact);
  } else {
    // uniform ladder through the same per-level machinery
    TriMesh mesh = build_structured(cfg.mesh_n, cfg.mesh_n);
    for (int lvl = 0; lvl < cfg.levels; ++lvl) {
      AdaptiveConfig one = acfg;
      one.levels = 1;
      auto lv = adaptive_loop(
          mesh, factory, one, &exact,
          levels.empty() ? nullptr : &levels.back().solution);
      levels.push_back(std::move(lv.front()));
      if (lvl + 1 < cfg.levels) mesh = refine_uniform(mesh);
    }
  }

  std::vector<RunRecord> recs;
  for (size_t k = 0; k < levels.size(); ++k) {
    const AdaptiveLevel& lv = levels[k];
    RunRecord r;
    r.level = static_cast<int>(k);
    r.h = lv.h;
    r.h_min = lv.h_min;
    r.ndof_v = lv.ndof_v;
    r.ndof_p = lv.ndof_p;
    r.err_u_L1 = lv.err_u_l1;
    r.err_y_L2 = lv.err_y_l2;
    r.err_z_Linf = lv.err_z_linf;
    r.eta_st2 = lv.eta_st2.aggregate;
    r.eta_stp = lv.eta_stp.aggregate;
    r.eta_adj_inf = lv.eta_adj.aggregate;
    r.div_term = lv.div_term;
    r.total_bound = lv.total_bound;
    r.wall_s = lv.wall_s;
    recs.push_back(r);
  }
  compute_eocs(recs);
  return recs;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void export_csv(const std::vector<RunRecord>& recs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_csv: cannot open " + path);
  out << "level,h,h_min,ndof_v,ndof_p,err_u_L1,err_y_L2,err_z_Linf,eta_st2,"
         "eta_stp,eta_adj_inf,div_term,total_bound,eoc_u,eoc_y,wall_s\n";
  for (const auto& r : recs) {
    out << r.level << ',' << format_g17(r.h) << ',' << format_g17(r.h_min) << ','
        << r.ndof_v << ',' << r.ndof_p << ',' << format_g17(r.err_u_L1) << ','
        << format_g17(r.err_y_L2) << ',' << format_g17(r.err_z_Linf) << ','
        << format_g17(r.eta_st2) << ',' << format_g17(r.eta_stp) << ','
        << format_g17(r.eta_adj_inf) << ',' << format_g17(r.div_term) << ','
        << format_g17(r.total_bound) << ',' << format_g17(r.eoc_u) << ','
        << format_g17(r.eoc_y) << ',' << format_g17(r.wall_s) << '\n';
  }
  if (!out) throw std::runtime_error("export_csv: write failed on " + path);
}

/// Legacy ASCII VTK of a Taylor-Hood pair; every P2 triangle is written as
/// its four midpoint sub-triangles so the quadratic nodes carry data.
inline void export_vtk(const THFunction& f, const std::string& path,
                       const std::string& vec_name = "velocity",
                       const std::string& scal_name = "pressure") {
  const THSpace& s = *f.space;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_vtk: cannot open " + path);
  out << "# vtk DataFile Version 3.0\n";
  out << "taylor-hood field\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << s.n_vnodes << " double\n";
  for (int n = 0; n < s.n_vnodes; ++n)
    out << format_g17(s.vnode_xy[n].x) << ' ' << format_g17(s.vnode_xy[n].y)
        << " 0\n";
  const int nt = s.n_elements();
  out << "CELLS " << 4 * nt << ' ' << 16 * nt << '\n';
  for (int t = 0; t < nt; ++t) {
    int v0 = s.vnode(t, 0), v1 = s.vnode(t, 1), v2 = s.vnode(t, 2);
    int m01 = s.vnode(t, 3), m12 = s.vnode(t, 4), m20 = s.vnode(t, 5);
    out << "3 " << v0 << ' ' << m01 << ' ' << m20 << '\n';
    out << "3 " << v1 << ' ' << m12 << ' ' << m01 << '\n';
    out << "3 " << v2 << ' ' << m20 << ' ' << m12 << '\n';
    out << "3 " << m01 << ' ' << m12 << ' ' << m20 << '\n';
  }
  out << "CELL_TYPES " << 4 * nt << '\n';
  for (int c = 0; c < 4 * nt; ++c) out << "5\n";
  out << "POINT_DATA " << s.n_vnodes << '\n';
  out << "VECTORS " << vec_name << " double\n";
  for (int n = 0; n < s.n_vnodes; ++n)
    out << format_g17(f.vcoeff(n, 0)) << ' ' << format_g17(f.vcoeff(n, 1)) << " 0\n";
  out << "SCALARS " << scal_name << " double 1\n";
  out << "LOOKUP_TABLE default\n";
  // P1 pressure at edge midpoints: mean of the endpoint values
  for (int v = 0; v < s.mesh.n_vertices(); ++v) out << format_g17(f.pcoeff(v)) << '\n';
  for (int e = 0; e < s.edges.n_edges(); ++e) {
    const auto& ed = s.edges.edges[e];
    out << format_g17(0.5 * (f.pcoeff(ed.a) + f.pcoeff(ed.b))) << '\n';
  }
  if (!out) throw std::runtime_error("export_vtk: write failed on " + path);
}

}  // namespace nsbang
