#pragma once

// Residual a posteriori indicators for the state (L^t' framework) and the
// adjoint (maximum-norm framework), the combined reliability bound with its
// logarithmic mesh-size weight, Dorfler marking, the adaptive
// SOLVE -> ESTIMATE -> MARK -> REFINE loop, and the smallness-assumption
// report for the discrete state.

#include <chrono>

#include "nsbang/ocp.hpp"

namespace nsbang {

struct IndicatorField {
  std::vector<double> eta;  // per-element indicator values
  double aggregate = 0.0;
  double t_prime = 2.0;     // kInf marks the max-type aggregate
  int dim = 2;
  double nu = 1.0;

  bool max_aggregate() const { return t_prime == kInf; }

  double recompute_aggregate() const {
    if (max_aggregate()) {
      double m = 0.0;
      for (double e : eta) m = std::max(m, e);
      return m;
    }
    double s = 0.0;
    for (double e : eta) s += std::pow(e, t_prime);
    return std::pow(s, 1.0 / t_prime);
  }
};

struct AssumptionReport {
  double grad_l2 = 0.0;      // || grad y_l ||_{L^2}
  double grad_l12_5 = 0.0;   // || grad y_l ||_{L^{12/5}}
  double nu = 0.0;
  double c_b = 0.0;          // configured constant, heuristic
  bool state_smallness = false;    // || grad y_l || < nu / C_b
  bool adjoint_smallness = false;  // 2 || grad y_l || < nu / C_b
};

namespace detail {

inline void ref_coords(const ElemGeom& g, Vec2 x, double& xi, double& eta) {
  Vec2 d = x - g.p0;
  xi = g.jinv[0][0] * d.x + g.jinv[0][1] * d.y;
  eta = g.jinv[1][0] * d.x + g.jinv[1][1] * d.y;
}

// per-element constant data: Laplacian of the P2 velocity and gradient of
// the P1 pressure
struct ElemConstants {
  Vec2 lap_v;
  Vec2 grad_p;
};

inline ElemConstants elem_constants(const THSpace& s, const THFunction& f, int t,
                                    const ElemGeom& g) {
  ElemConstants ec{};
  for (int k = 0; k < 6; ++k) {
    double lap = g.laplacian_p2(k);
    int node = s.vnode(t, k);
    ec.lap_v.x += f.vcoeff(node, 0) * lap;
    ec.lap_v.y += f.vcoeff(node, 1) * lap;
  }
  const auto& tr = s.mesh.triangles[t];
  for (int r = 0; r < 3; ++r) {
    double gp[2];
    g.grad_to_phys(basis::p1_grad_ref[r], gp);
    ec.grad_p.x += f.pcoeff(tr[r]) * gp[0];
    ec.grad_p.y += f.pcoeff(tr[r]) * gp[1];
  }
  return ec;
}

}  // namespace detail

/// State indicators: for every element T,
///   eta_T^t' = h_T^{2t'} ||u + nu lap(y) - (y.grad)y - grad p||^t'_{L^t'(T)}
///            + h_T^{t'}  ||div y||^t'_{L^t'(T)}
///            + h_T^{t'+1} || [[ (nu grad y - p I) n ]] ||^t'_{L^t'(dT \ dOmega)}
/// with each interior edge contributing at full weight to both neighbors.
inline IndicatorField estimate_state(const THSpace& s, const THFunction& yp,
                                     const QuadControl& u, double t_prime,
                                     double nu) {
  if (!(t_prime >= 2.0 && t_prime <= 4.0))
    throw std::invalid_argument("estimate_state: t_prime must be in [2,4]");
  if (!u.layout_matches(s))
    throw std::invalid_argument("estimate_state: control layout mismatch");

  IndicatorField ind;
  ind.t_prime = t_prime;
  ind.nu = nu;
  std::vector<double> power(s.n_elements(), 0.0);

  // volume terms
  for (int t = 0; t < s.n_elements(); ++t) {
    ElemGeom g = ElemGeom::of(s.mesh, t);
    detail::ElemConstants ec = detail::elem_constants(s, yp, t, g);
    double h = s.mesh.diameter(t);
    double res_int = 0.0, div_int = 0.0;
    for (int q = 0; q < s.rule.size(); ++q) {
      FieldSample fs = evaluate(yp, t, s.rule.x[q], s.rule.y[q]);
      double conv_x = fs.velocity.x * fs.grad[0][0] + fs.velocity.y * fs.grad[0][1];
      double conv_y = fs.velocity.x * fs.grad[1][0] + fs.velocity.y * fs.grad[1][1];
      double rx = u.at(t, q, 0) + nu * ec.lap_v.x - conv_x - ec.grad_p.x;
      double ry = u.at(t, q, 1) + nu * ec.lap_v.y - conv_y - ec.grad_p.y;
      double w = s.rule.w[q] * g.det;
      res_int += w * std::pow(std::sqrt(rx * rx + ry * ry), t_prime);
      div_int += w * std::pow(std::abs(fs.divergence), t_prime);
    }
    power[t] = std::pow(h, 2.0 * t_prime) * res_int + std::pow(h, t_prime) * div_int;
  }

  // interior edge jumps of the flux (nu grad y - p I) n
  EdgeQuadRule er = edge_rule(11);
  for (const auto& e : s.edges.edges) {
    if (!e.interior) continue;
    Vec2 pa = s.mesh.vertices[e.a], pb = s.mesh.vertices[e.b];
    ElemGeom g0 = ElemGeom::of(s.mesh, e.tri[0]);
    ElemGeom g1 = ElemGeom::of(s.mesh, e.tri[1]);
    double jump_int = 0.0;
    for (int q = 0; q < er.size(); ++q) {
      Vec2 x = pa + er.t[q] * (pb - pa);
      Vec2 flux[2];
      for (int side = 0; side < 2; ++side) {
        const ElemGeom& g = side == 0 ? g0 : g1;
        double xi, eta;
        detail::ref_coords(g, x, xi, eta);
        FieldSample fs = evaluate(yp, e.tri[side], xi, eta);
        flux[side] = {
            nu * (fs.grad[0][0] * e.normal.x + fs.grad[0][1] * e.normal.y) -
                fs.pressure * e.normal.x,
            nu * (fs.grad[1][0] * e.normal.x + fs.grad[1][1] * e.normal.y) -
                fs.pressure * e.normal.y};
      }
      Vec2 jump = flux[0] - flux[1];
      jump_int += er.w[q] * e.length * std::pow(norm(jump), t_prime);
    }
    for (int side = 0; side < 2; ++side) {
      double h = s.mesh.diameter(e.tri[side]);
      power[e.tri[side]] += std::pow(h, t_prime + 1.0) * jump_int;
    }
  }

  ind.eta.resize(s.n_elements());
  double total = 0.0;
  for (int t = 0; t < s.n_elements(); ++t) {
    ind.eta[t] = std::pow(power[t], 1.0 / t_prime);
    total += power[t];
  }
  ind.aggregate = std::pow(total, 1.0 / t_prime);
  return ind;
}

/// Adjoint indicators (maximum-norm): for every element T,
///   eta_T = h_T^2 || y - y_O + nu lap(z) - (grad y)^T z + (y.grad) z
///                  + div(y) z - grad r ||_{L^inf(T)}
///         + h_T || div z ||_{L^inf(T)}
///         + 1/2 h_T || [[ (nu grad z + y (x) z - r I) n ]] ||_{L^inf(dT \ dOmega)}
/// and eta_adj_inf = max_T eta_T. Maxima are taken over quadrature points
/// and Lagrange nodes (edge rule points and endpoints on edges).
inline IndicatorField estimate_adjoint(const THSpace& s, const THFunction& yp,
                                       const THFunction& zr, const VecFn& y_omega,
                                       double nu) {
  IndicatorField ind;
  ind.t_prime = kInf;
  ind.nu = nu;
  ind.eta.assign(s.n_elements(), 0.0);

  std::vector<double> elem_term(s.n_elements(), 0.0);
  std::vector<double> div_term(s.n_elements(), 0.0);
  std::vector<double> jump_term(s.n_elements(), 0.0);

  // reference sample points: quadrature points plus the 6 Lagrange nodes
  std::vector<std::pair<double, double>> pts;
  for (int q = 0; q < s.rule.size(); ++q) pts.push_back({s.rule.x[q], s.rule.y[q]});
  for (auto& nref : basis::p2_nodes_ref) pts.push_back({nref[0], nref[1]});

  for (int t = 0; t < s.n_elements(); ++t) {
    ElemGeom g = ElemGeom::of(s.mesh, t);
    detail::ElemConstants zc = detail::elem_constants(s, zr, t, g);
    double m_res = 0.0, m_div = 0.0;
    for (auto [xi, eta] : pts) {
      FieldSample y = evaluate(yp, t, xi, eta);
      FieldSample z = evaluate(zr, t, xi, eta);
      Vec2 x = g.map(xi, eta);
      Vec2 yo = y_omega ? y_omega(x) : Vec2{};
      // (grad y)^T z and (y.grad) z
      double gyt_z_x = y.grad[0][0] * z.velocity.x + y.grad[1][0] * z.velocity.y;
      double gyt_z_y = y.grad[0][1] * z.velocity.x + y.grad[1][1] * z.velocity.y;
      double conv_x = y.velocity.x * z.grad[0][0] + y.velocity.y * z.grad[0][1];
      double conv_y = y.velocity.x * z.grad[1][0] + y.velocity.y * z.grad[1][1];
      double rx = y.velocity.x - yo.x + nu * zc.lap_v.x - gyt_z_x + conv_x +
                  y.divergence * z.velocity.x - zc.grad_p.x;
      double ry = y.velocity.y - yo.y + nu * zc.lap_v.y - gyt_z_y + conv_y +
                  y.divergence * z.velocity.y - zc.grad_p.y;
      m_res = std::max(m_res, std::sqrt(rx * rx + ry * ry));
      m_div = std::max(m_div, std::abs(z.divergence));
    }
    elem_term[t] = m_res;
    div_term[t] = m_div;
  }

  // interior edge jumps of (nu grad z + y (x) z - r I) n
  EdgeQuadRule er = edge_rule(9);
  std::vector<double> ts(er.t.begin(), er.t.end());
  ts.push_back(0.0);
  ts.push_back(0.5);
  ts.push_back(1.0);
  for (const auto& e : s.edges.edges) {
    if (!e.interior) continue;
    Vec2 pa = s.mesh.vertices[e.a], pb = s.mesh.vertices[e.b];
    ElemGeom g0 = ElemGeom::of(s.mesh, e.tri[0]);
    ElemGeom g1 = ElemGeom::of(s.mesh, e.tri[1]);
    double m_jump = 0.0;
    for (double tq : ts) {
      Vec2 x = pa + tq * (pb - pa);
      Vec2 flux[2];
      for (int side = 0; side < 2; ++side) {
        const ElemGeom& g = side == 0 ? g0 : g1;
        double xi, eta;
        detail::ref_coords(g, x, xi, eta);
        FieldSample y = evaluate(yp, e.tri[side], xi, eta);
        FieldSample z = evaluate(zr, e.tri[side], xi, eta);
        double zn = z.velocity.x * e.normal.x + z.velocity.y * e.normal.y;
        flux[side] = {
            nu * (z.grad[0][0] * e.normal.x + z.grad[0][1] * e.normal.y) +
                y.velocity.x * zn - z.pressure * e.normal.x,
            nu * (z.grad[1][0] * e.normal.x + z.grad[1][1] * e.normal.y) +
                y.velocity.y * zn - z.pressure * e.normal.y};
      }
      m_jump = std::max(m_jump, norm(flux[0] - flux[1]));
    }
    for (int side = 0; side < 2; ++side)
      jump_term[e.tri[side]] = std::max(jump_term[e.tri[side]], m_jump);
  }

  for (int t = 0; t < s.n_elements(); ++t) {
    double h = s.mesh.diameter(t);
    ind.eta[t] = h * h * elem_term[t] + h * div_term[t] + 0.5 * h * jump_term[t];
    ind.aggregate = std::max(ind.aggregate, ind.eta[t]);
  }
  return ind;
}

/// Bracketed estimator sum raised to gamma, with the |log h_min|^{4/n}
/// weight on the adjoint part (natural logarithm).
inline double total_reliability_bound(double eta_st2, double eta_stp,
                                      double eta_adj_inf, double div_term,
                                      double h_min, int n, double p, double gamma) {
  if (!(p > n)) throw std::invalid_argument("total_reliability_bound: need p > n");
  if (!(gamma > double(n) / (n + 2) && gamma <= 1.0))
    throw std::invalid_argument("total_reliability_bound: gamma out of (n/(n+2), 1]");
  if (!(h_min > 0.0)) throw std::invalid_argument("total_reliability_bound: h_min <= 0");
  double logw = std::pow(std::abs(std::log(h_min)), 4.0 / n);
  double sum = eta_st2 + eta_stp + logw * eta_adj_inf + div_term;
  return std::pow(sum, gamma);
}

/// Dorfler marking. Power aggregates: smallest prefix (sorted by decreasing
/// indicator) whose t'-power sum reaches theta * total. Max aggregates: all
/// elements strictly within theta of the max.
inline std::set<int> mark_dorfler(const IndicatorField& ind, double theta) {
  if (!(theta > 0.0 && theta <= 1.0))
    throw std::invalid_argument("mark_dorfler: theta must be in (0,1]");
  std::set<int> marked;
  const int n = static_cast<int>(ind.eta.size());
  if (ind.max_aggregate()) {
    double m = ind.recompute_aggregate();
    if (m <= 0.0) return marked;
    for (int t = 0; t < n; ++t)
      if (ind.eta[t] > (1.0 - theta) * m) marked.insert(t);
    return marked;
  }
  std::vector<int> order(n);
  for (int t = 0; t < n; ++t) order[t] = t;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return ind.eta[a] > ind.eta[b]; });
  double total = 0.0;
  for (double e : ind.eta) total += std::pow(e, ind.t_prime);
  if (total <= 0.0) return marked;
  double acc = 0.0;
  for (int t : order) {
    if (acc >= theta * total || ind.eta[t] <= 0.0) break;
    marked.insert(t);
    acc += std::pow(ind.eta[t], ind.t_prime);
  }
  return marked;
}

/// Smallness checks on the discrete state that the reliability theory needs.
inline AssumptionReport check_assumptions(const THFunction& y, double nu, double c_b) {
  if (!(nu > 0.0) || !(c_b > 0.0))
    throw std::invalid_argument("check_assumptions: nu and C_b must be positive");
  AssumptionReport r;
  r.grad_l2 = norm_lp_grad(y, 2.0);
  r.grad_l12_5 = norm_lp_grad(y, 12.0 / 5.0);
  r.nu = nu;
  r.c_b = c_b;
  r.state_smallness = r.grad_l2 < nu / c_b;
  r.adjoint_smallness = 2.0 * r.grad_l2 < nu / c_b;
  return r;
}

// ---------------------------------------------------------------------------
// Adaptive loop
// ---------------------------------------------------------------------------

/// Exact fields of a manufactured problem, for error columns.
struct OcpExact {
  VecFn control;
  VecFn state;
  VecFn adjoint;
};

struct AdaptiveConfig {
  double theta = 0.5;
  int levels = 1;
  bool mark_by_state = false;  // default marks by the adjoint indicator
  double t_prime = 3.0;        // second state estimator exponent (= p)
  double p = 3.0;
  double gamma = 1.0;
  double c_b = 0.5;
  double gap_tol = 1e-12;
  int max_outer = 60;
  int line_search_evals = 14;
};

struct AdaptiveLevel {
  TriMesh mesh;
  int ndof_v = 0, ndof_p = 0;
  double h = 0.0, h_min = 0.0;
  OcpIterate solution;
  IndicatorField eta_st2, eta_stp, eta_adj;
  double div_term = 0.0, total_bound = 0.0;
  AssumptionReport assumptions;
  double err_u_l1 = std::numeric_limits<double>::quiet_NaN();
  double err_y_l2 = std::numeric_limits<double>::quiet_NaN();
  double err_z_linf = std::numeric_limits<double>::quiet_NaN();
  std::set<int> marked;
  double wall_s = 0.0;
};

using ProblemFactory = std::function<OcpProblem(std::shared_ptr<const THSpace>)>;

/// SOLVE -> ESTIMATE -> MARK -> REFINE with the semidiscrete control solve
/// at every level; controls and states are transferred between meshes to
/// warm-start the conditional-gradient loop. warm_from seeds the first level
/// from a solution on another mesh.
inline std::vector<AdaptiveLevel> adaptive_loop(TriMesh initial_mesh,
                                                const ProblemFactory& make_problem,
                                                const AdaptiveConfig& cfg,
                                                const OcpExact* exact = nullptr,
                                                const OcpIterate* warm_from = nullptr) {
  if (cfg.levels < 1) throw std::invalid_argument("adaptive_loop: levels >= 1");
  std::vector<AdaptiveLevel> out;
  TriMesh mesh = std::move(initial_mesh);
  THFunction prev_adjoint, prev_state;
  bool have_prev = false;
  if (warm_from && warm_from->adjoint.space && warm_from->state.space) {
    prev_adjoint = warm_from->adjoint;
    prev_state = warm_from->state;
    have_prev = true;
  }

  for (int lvl = 0; lvl < cfg.levels; ++lvl) {
    auto t0 = std::chrono::steady_clock::now();
    auto space = build_space(mesh);
    OcpProblem prob = make_problem(space);

    OcpOptions opts;
    opts.line_search_evals = cfg.line_search_evals;
    QuadControl u0;
    THFunction y0;
    if (have_prev) {
      TriLocator loc(prev_adjoint.space->mesh);
      u0 = QuadControl::zeros(*space);
      for (int e = 0; e < u0.n_elems; ++e) {
        ElemGeom g = ElemGeom::of(space->mesh, e);
        for (int q = 0; q < u0.n_qp; ++q) {
          Vec2 x = g.map(space->rule.x[q], space->rule.y[q]);
          Vec2 z = evaluate_at(prev_adjoint, loc, x).velocity;
          for (int c = 0; c < 2; ++c) {
            double zc = c == 0 ? z.x : z.y;
            u0.at(e, q, c) = zc > 0.0   ? prob.bounds.lower(c)
                             : zc < 0.0 ? prob.bounds.upper(c)
                                        : 0.5 * (prob.bounds.lower(c) +
                                                 prob.bounds.upper(c));
          }
        }
      }
      y0 = THFunction(space);
      for (int n = 0; n < space->n_vnodes; ++n) {
        if (space->vnode_boundary[n]) continue;
        Vec2 v = evaluate_at(prev_state, loc, space->vnode_xy[n]).velocity;
        y0.coeffs[space->vdof(n, 0)] = v.x;
        y0.coeffs[space->vdof(n, 1)] = v.y;
      }
      opts.initial_control = &u0;
      opts.initial_state = &y0;
    }

    OcpResult run = solve_ocp(prob, cfg.gap_tol, cfg.max_outer, opts);

    AdaptiveLevel rec;
    rec.mesh = mesh;
    rec.ndof_v = space->nv_dofs;
    rec.ndof_p = space->np_dofs;
    rec.h = mesh.h_max();
    rec.h_min = mesh.h_min();
    rec.solution = std::move(run.final);
    rec.eta_st2 = estimate_state(*space, rec.solution.state, rec.solution.control,
                                 2.0, prob.nu);
    rec.eta_stp = estimate_state(*space, rec.solution.state, rec.solution.control,
                                 cfg.t_prime, prob.nu);
    rec.eta_adj = estimate_adjoint(*space, rec.solution.state, rec.solution.adjoint,
                                   prob.y_omega, prob.nu);
    double mu = 2.0 * cfg.p / (2.0 + cfg.p);
    rec.div_term = norm_lp_div(rec.solution.state, mu);
    rec.total_bound =
        total_reliability_bound(rec.eta_st2.aggregate, rec.eta_stp.aggregate,
                                rec.eta_adj.aggregate, rec.div_term, rec.h_min, 2,
                                cfg.p, cfg.gamma);
    rec.assumptions = check_assumptions(rec.solution.state, prob.nu, cfg.c_b);

    if (exact) {
      QuadControl u_exact = QuadControl::from_function(*space, exact->control);
      rec.err_u_l1 = control_lp_distance(*space, rec.solution.control, u_exact, 1.0);
      rec.err_y_l2 = norm_lp_velocity(rec.solution.state, 2.0, exact->state);
      rec.err_z_linf = norm_lp_velocity(rec.solution.adjoint, kInf, exact->adjoint);
    }

    rec.marked = mark_dorfler(cfg.mark_by_state ? rec.eta_stp : rec.eta_adj,
                              cfg.theta);
    rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                     .count();

    prev_adjoint = rec.solution.adjoint;
    prev_state = rec.solution.state;
    have_prev = true;

    bool last = lvl + 1 == cfg.levels;
    std::set<int> marked = rec.marked;
    out.push_back(std::move(rec));
    if (!last) mesh = refine_marked(mesh, marked);
  }
  return out;
}

}  // namespace nsbang
