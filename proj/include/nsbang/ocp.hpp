#pragma once

// Variational-discretization optimal control layer: pointwise sign map from
// the adjoint velocity, reduced cost and its first/second variations, the
// variational-inequality gap, a conditional-gradient outer loop whose vertex
// subproblem is exactly the sign map, and the level-set growth-exponent fit.

#include "nsbang/solvers.hpp"

namespace nsbang {

struct MaxOuterIterations;

struct OcpProblem {
  std::shared_ptr<const THSpace> space;
  double nu = 1.0;
  ControlBounds bounds;
  VecFn extra_forcing;  // state forcing beyond the control; may be empty
  VecFn y_omega;        // desired state
  double newton_tol = 1e-10;
  int newton_max = 25;
};

/// Velocity samples of a discrete field at every quadrature point, in the
/// same layout as a QuadControl.
inline QuadControl sample_velocity(const THFunction& f) {
  const THSpace& s = *f.space;
  const BasisTable& bt = detail::basis_table(s);
  QuadControl out = QuadControl::zeros(s);
  for (int t = 0; t < s.n_elements(); ++t) {
    for (int q = 0; q < bt.nq; ++q) {
      double vx = 0.0, vy = 0.0;
      for (int k = 0; k < 6; ++k) {
        int node = s.vnode(t, k);
        vx += f.vcoeff(node, 0) * bt.n2[q][k];
        vy += f.vcoeff(node, 1) * bt.n2[q][k];
      }
      out.at(t, q, 0) = vx;
      out.at(t, q, 1) = vy;
    }
  }
  return out;
}

/// Pointwise sign map: a_i where z_i > 0, b_i where z_i < 0, the midpoint on
/// the (measure-zero) exact zero set.
inline QuadControl bang_bang_from_adjoint(const QuadControl& z_samples,
                                          const ControlBounds& bounds) {
  QuadControl u = z_samples;
  for (int e = 0; e < u.n_elems; ++e)
    for (int q = 0; q < u.n_qp; ++q)
      for (int c = 0; c < 2; ++c) {
        double z = z_samples.at(e, q, c);
        u.at(e, q, c) = z > 0.0 ? bounds.lower(c)
                       : z < 0.0 ? bounds.upper(c)
                                 : 0.5 * (bounds.lower(c) + bounds.upper(c));
      }
  return u;
}

inline QuadControl bang_bang_from_adjoint(const THFunction& z,
                                          const ControlBounds& bounds) {
  return bang_bang_from_adjoint(sample_velocity(z), bounds);
}

/// Quadrature pairing (z, g)_{L^2}; realizes J'(u)g through the adjoint.
inline double first_variation(const THSpace& s, const QuadControl& z_samples,
                              const QuadControl& g) {
  if (!z_samples.layout_matches(s) || !g.layout_matches(s))
    throw std::invalid_argument("first_variation: layout mismatch");
  double acc = 0.0;
  for (int e = 0; e < s.n_elements(); ++e) {
    ElemGeom geom = ElemGeom::of(s.mesh, e);
    for (int q = 0; q < z_samples.n_qp; ++q) {
      double w = s.rule.w[q] * geom.det;
      acc += w * (z_samples.at(e, q, 0) * g.at(e, q, 0) +
                  z_samples.at(e, q, 1) * g.at(e, q, 1));
    }
  }
  return acc;
}

inline double first_variation(const THFunction& z, const QuadControl& g) {
  return first_variation(*z.space, sample_velocity(z), g);
}

/// Gap (z, u - v*) with v* the bang-bang vertex minimizer; zero exactly when
/// the discrete variational inequality holds for all admissible controls.
inline double vi_gap(const THSpace& s, const QuadControl& z_samples,
                     const QuadControl& u, const ControlBounds& bounds) {
  QuadControl v = bang_bang_from_adjoint(z_samples, bounds);
  double acc = 0.0;
  for (int e = 0; e < s.n_elements(); ++e) {
    ElemGeom geom = ElemGeom::of(s.mesh, e);
    for (int q = 0; q < u.n_qp; ++q) {
      double w = s.rule.w[q] * geom.det;
      for (int c = 0; c < 2; ++c)
        acc += w * z_samples.at(e, q, c) * (u.at(e, q, c) - v.at(e, q, c));
    }
  }
  return acc;
}

inline double vi_gap(const THFunction& z, const QuadControl& u,
                     const ControlBounds& bounds) {
  return vi_gap(*z.space, sample_velocity(z), u, bounds);
}

struct CostEval {
  double value = 0.0;
  THFunction state;
  THFunction adjoint;
  NewtonReport report;
};

/// Reduced cost J_h(u) = 1/2 ||y_h(u) - y_Omega||^2 with the adjoint
/// returned for reuse. The misfit is measured with the same quadrature that
/// defines the control pairing, so the adjoint is the exact gradient of the
/// computed value.
inline CostEval cost(const OcpProblem& p, const NSContext& ctx, const QuadControl& u,
                     const THFunction* state_init = nullptr) {
  StateSolve st = solve_state(ctx, &u, p.extra_forcing, state_init,
                              p.newton_tol, p.newton_max);
  double j = norm_lp_velocity(st.solution, 2.0, p.y_omega);
  j = 0.5 * j * j;
  THFunction z = solve_adjoint(ctx, st.solution, st.solution, p.y_omega);
  return {j, std::move(st.solution), std::move(z), std::move(st.report)};
}

inline CostEval cost(const OcpProblem& p, const QuadControl& u) {
  NSContext ctx(p.space, p.nu);
  return cost(p, ctx, u);
}

/// J''(u)g^2 = ||phi_g||^2 - 2 b(phi_g; phi_g, z_u): one linearized solve
/// plus one trilinear evaluation.
inline double second_variation(const OcpProblem& p, const NSContext& ctx,
                               const QuadControl& u, const QuadControl& g) {
  CostEval ce = cost(p, ctx, u);
  THFunction phi = solve_linearized(ctx, ce.state, g);
  std::vector<double> mphi(ctx.space->n_system, 0.0);
  ctx.blocks.M.add_apply(phi.coeffs, mphi);
  double phi_l2_sq = 0.0;
  for (int i = 0; i < ctx.space->n_system; ++i) phi_l2_sq += mphi[i] * phi.coeffs[i];
  return phi_l2_sq - 2.0 * trilinear_value(*ctx.space, phi, phi, ce.adjoint);
}

inline double second_variation(const OcpProblem& p, const QuadControl& u,
                               const QuadControl& g) {
  NSContext ctx(p.space, p.nu);
  return second_variation(p, ctx, u, g);
}

struct OcpIterate {
  QuadControl control;  // populated when keep_fields is set (and on the final)
  THFunction state;
  THFunction adjoint;
  double cost = 0.0;
  double gap = 0.0;
  double step = 0.0;  // line-search step that produced this iterate
};

struct OcpResult {
  std::vector<OcpIterate> history;
  OcpIterate final;
  bool converged = false;
  int outer_iterations = 0;
};

struct MaxOuterIterations : std::runtime_error {
  OcpResult result;
  explicit MaxOuterIterations(OcpResult r)
      : std::runtime_error("solve_ocp: max_outer reached with gap " +
                           std::to_string(r.final.gap)),
        result(std::move(r)) {}
};

struct OcpOptions {
  bool keep_fields = false;          // store full fields in every history entry
  int line_search_evals = 14;        // golden-section budget, capped at 20
  const QuadControl* initial_control = nullptr;
  const THFunction* initial_state = nullptr;
};

/// Conditional-gradient (Frank-Wolfe) loop. The vertex subproblem is the
/// bang-bang sign map; state solves are warm-started along the line search
/// and across outer iterations. Stops when gap <= gap_tol * (1 + |J_h|).
inline OcpResult solve_ocp(const OcpProblem& p, double gap_tol, int max_outer,
                           const OcpOptions& opts = {}) {
  if (!(p.bounds.a.x <= p.bounds.b.x && p.bounds.a.y <= p.bounds.b.y))
    throw std::invalid_argument("solve_ocp: infeasible bounds");
  const THSpace& s = *p.space;
  NSContext ctx(p.space, p.nu);

  QuadControl u = opts.initial_control
                      ? *opts.initial_control
                      : QuadControl::constant(s, 0.5 * (p.bounds.a + p.bounds.b));
  const int ls_budget = std::min(opts.line_search_evals, 20);

  OcpResult res;
  THFunction warm_state;
  bool have_warm = false;
  if (opts.initial_state) {
    warm_state = *opts.initial_state;
    have_warm = true;
  }
  double alpha_prev = 0.0;

  for (int k = 0; k < max_outer; ++k) {
    CostEval ce = cost(p, ctx, u, have_warm ? &warm_state : nullptr);
    QuadControl z_samples = sample_velocity(ce.adjoint);
    QuadControl vertex = bang_bang_from_adjoint(z_samples, p.bounds);
    double gap = vi_gap(s, z_samples, u, p.bounds);

    OcpIterate it;
    it.cost = ce.value;
    it.gap = gap;
    it.step = alpha_prev;
    if (opts.keep_fields) {
      it.control = u;
      it.state = ce.state;
      it.adjoint = ce.adjoint;
    }
    res.history.push_back(std::move(it));
    res.outer_iterations = k + 1;

    if (gap <= gap_tol * (1.0 + std::abs(ce.value))) {
      res.converged = true;
      res.final = {std::move(u), std::move(ce.state), std::move(ce.adjoint),
                   ce.value, gap, alpha_prev};
      return res;
    }

    // golden-section line search on J(u + alpha (v - u)), alpha in (0, 1];
    // every probe is a warm-started state solve, best sample wins
    auto blend = [&](double alpha) {
      QuadControl w = u;
      for (size_t i = 0; i < w.vals.size(); ++i)
        w.vals[i] += alpha * (vertex.vals[i] - w.vals[i]);
      return w;
    };
    struct Probe {
      double alpha, j;
      THFunction state;
    };
    std::vector<Probe> probes;
    probes.reserve(ls_budget + 2);  // pointers into probes stay valid
    auto eval = [&](double alpha) -> const Probe& {
      const THFunction* init = &ce.state;
      double best_d = std::numeric_limits<double>::max();
      for (const auto& pr : probes) {
        double d = std::abs(pr.alpha - alpha);
        if (d < best_d) {
          best_d = d;
          init = &pr.state;
        }
      }
      QuadControl w = blend(alpha);
      StateSolve st = solve_state(ctx, &w, p.extra_forcing, init, p.newton_tol,
                                  p.newton_max);
      double j = norm_lp_velocity(st.solution, 2.0, p.y_omega);
      j = 0.5 * j * j;
      probes.push_back({alpha, j, std::move(st.solution)});
      return probes.back();
    };

    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 0.0, hi = 1.0;
    eval(1.0);
    double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
    double f1 = eval(x1).j, f2 = eval(x2).j;
    int used = 3;
    while (used < ls_budget) {
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - invphi * (hi - lo);
        f1 = eval(x1).j;
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + invphi * (hi - lo);
        f2 = eval(x2).j;
      }
      ++used;
    }
    const Probe* best = &probes.front();
    for (const auto& pr : probes)
      if (pr.j < best->j) best = &pr;

    // conditional-gradient descent guarantee: keep the current iterate when
    // no probe improved on it (can only happen at the gap noise floor)
    if (best->j <= ce.value) {
      u = blend(best->alpha);
      warm_state = best->state;
      have_warm = true;
      alpha_prev = best->alpha;
    } else {
      warm_state = ce.state;
      have_warm = true;
      alpha_prev = 0.0;
    }
  }

  // not converged: final iterate re-evaluated for a consistent record
  CostEval ce = cost(p, ctx, u, have_warm ? &warm_state : nullptr);
  double gap = vi_gap(ce.adjoint, u, p.bounds);
  res.final = {std::move(u), std::move(ce.state), std::move(ce.adjoint), ce.value,
               gap, alpha_prev};
  throw MaxOuterIterations(std::move(res));
}

// ---------------------------------------------------------------------------
// Growth-exponent estimator: least-squares slope of log |{|z_i| <= eps}|
// against log eps. The measure is sampled on a subdivided quadrature grid
// (4^k congruent sub-triangles per element, degree-2 rule on each) so that
// level-set bands are resolved below the element scale.
// ---------------------------------------------------------------------------

struct GrowthFit {
  double gamma_hat = std::numeric_limits<double>::quiet_NaN();
  double log_intercept = 0.0;
  std::vector<double> eps;
  std::vector<double> measures;
  int points_used = 0;
  std::string flag = "ok";  // "ok" | "no active set" | "degenerate"
};

namespace detail {

template <class F>  // F: (elem, xi, eta, x) -> double (component value)
GrowthFit growth_fit(const THSpace& s, F&& comp, const std::vector<double>& eps_grid,
                     int subdivisions = 3) {
  GrowthFit fit;
  fit.eps = eps_grid;
  fit.measures.assign(eps_grid.size(), 0.0);
  for (double e : eps_grid)
    if (!(e > 0.0))
      throw std::invalid_argument("growth_exponent: eps grid must be positive");

  // sample points: degree-2 rule replicated over 4^k red sub-triangles
  QuadRule base = triangle_rule(2);
  std::vector<double> sx, sy, sw;
  struct RefTri {
    double x0, y0, x1, y1, x2, y2;
  };
  std::vector<RefTri> tris = {{0, 0, 1, 0, 0, 1}};
  for (int lvl = 0; lvl < subdivisions; ++lvl) {
    std::vector<RefTri> next;
    for (const auto& t : tris) {
      double mx01 = 0.5 * (t.x0 + t.x1), my01 = 0.5 * (t.y0 + t.y1);
      double mx12 = 0.5 * (t.x1 + t.x2), my12 = 0.5 * (t.y1 + t.y2);
      double mx20 = 0.5 * (t.x2 + t.x0), my20 = 0.5 * (t.y2 + t.y0);
      next.push_back({t.x0, t.y0, mx01, my01, mx20, my20});
      next.push_back({mx01, my01, t.x1, t.y1, mx12, my12});
      next.push_back({mx20, my20, mx12, my12, t.x2, t.y2});
      next.push_back({mx01, my01, mx12, my12, mx20, my20});
    }
    tris = std::move(next);
  }
  double scale = 1.0 / std::pow(4.0, subdivisions);
  for (const auto& t : tris)
    for (int q = 0; q < base.size(); ++q) {
      double l1 = base.x[q], l2 = base.y[q], l0 = 1.0 - l1 - l2;
      sx.push_back(l0 * t.x0 + l1 * t.x1 + l2 * t.x2);
      sy.push_back(l0 * t.y0 + l1 * t.y1 + l2 * t.y2);
      sw.push_back(base.w[q] * scale);
    }

  double area = 0.0;
  for (int t = 0; t < s.n_elements(); ++t) {
    ElemGeom g = ElemGeom::of(s.mesh, t);
    area += s.mesh.signed_area(t);
    for (size_t k = 0; k < sx.size(); ++k) {
      double v = std::abs(comp(t, sx[k], sy[k], g.map(sx[k], sy[k])));
      double w = sw[k] * g.det;
      for (size_t i = 0; i < eps_grid.size(); ++i)
        if (v <= eps_grid[i]) fit.measures[i] += w;
    }
  }

  double mmax = *std::max_element(fit.measures.begin(), fit.measures.end());
  double mmin = *std::min_element(fit.measures.begin(), fit.measures.end());
  if (mmax == 0.0) {
    fit.flag = "no active set";
    return fit;
  }
  if (mmin >= 0.99 * area) {
    fit.flag = "degenerate";
    fit.gamma_hat = 0.0;
    return fit;
  }

  double sx_ = 0, sy_ = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t i = 0; i < eps_grid.size(); ++i) {
    if (fit.measures[i] <= 0.0) continue;
    double lx = std::log(eps_grid[i]), ly = std::log(fit.measures[i]);
    sx_ += lx;
    sy_ += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  fit.points_used = n;
  if (n < 2) {
    fit.flag = "degenerate";
    return fit;
  }
  double denom = n * sxx - sx_ * sx_;
  fit.gamma_hat = (n * sxy - sx_ * sy_) / denom;
  fit.log_intercept = (sy_ - fit.gamma_hat * sx_) / n;
  return fit;
}

}  // namespace detail

/// Growth exponent of one adjoint velocity component.
inline GrowthFit growth_exponent(const THFunction& z, const std::vector<double>& eps_grid,
                                 int component) {
  const THSpace& s = *z.space;
  return detail::growth_fit(
      s,
      [&](int t, double xi, double eta, Vec2) {
        double n[6];
        basis::p2(xi, eta, n);
        double v = 0.0;
        for (int k = 0; k < 6; ++k) v += z.vcoeff(s.vnode(t, k), component) * n[k];
        return v;
      },
      eps_grid);
}

/// Growth exponent of an analytic scalar field over the mesh.
inline GrowthFit growth_exponent(const THSpace& s, const ScalFn& field,
                                 const std::vector<double>& eps_grid) {
  return detail::growth_fit(
      s, [&](int, double, double, Vec2 x) { return field(x); }, eps_grid);
}

}  // namespace nsbang
