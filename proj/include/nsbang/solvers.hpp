#pragma once

// Newton solver for the discrete Navier-Stokes state equation, the
// linearized (Oseen-type) solve, and the discrete adjoint solve. All three
// share one saddle-point composition; the adjoint velocity block is the
// exact transpose of the Newton Jacobian, so the discrete duality identity
// holds to solver precision.
//
// The stationary problem may have several solution branches; this solver
// computes the Newton-accessible branch anchored at the Stokes solution (or
// a caller-provided warm start) and makes no global-uniqueness claim. The
// smallness norms that certify the linearizations are reported separately by
// check_assumptions.

#include <optional>

#include "nsbang/assembly.hpp"

namespace nsbang {

struct NewtonDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NewtonReport {
  int iterations = 0;  // number of linear solves (Stokes initial guess included)
  std::vector<double> residual_history;  // Euclidean norms, absolute
  bool converged = false;
  std::vector<double> damping_factors;
  double rhs_norm = 0.0;  // convergence test: r <= tol * (1 + rhs_norm)
};

struct StateSolve {
  THFunction solution;
  NewtonReport report;
};

/// Assembled blocks for one (space, viscosity) pair; reusable across the
/// many solves of an optimization run.
struct NSContext {
  std::shared_ptr<const THSpace> space;
  double nu;
  SystemBlocks blocks;
  std::vector<char> pinned;

  NSContext(std::shared_ptr<const THSpace> s, double nu_)
      : space(std::move(s)), nu(nu_), blocks(assemble_stokes(*space, nu_)),
        pinned(space->n_system, 0) {
    for (int n = 0; n < space->n_vnodes; ++n)
      if (space->vnode_boundary[n]) {
        pinned[space->vdof(n, 0)] = 1;
        pinned[space->vdof(n, 1)] = 1;
      }
  }
};

namespace detail {

inline void zero_pinned(const NSContext& ctx, std::vector<double>& x) {
  for (int d = 0; d < ctx.space->n_system; ++d)
    if (ctx.pinned[d]) x[d] = 0.0;
}

inline double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Algebraic residual of the nonlinear system at x (pinned entries of x are
// maintained at exactly zero, so raw blocks coincide with the pinned ones).
inline std::vector<double> ns_residual(const NSContext& ctx,
                                       const std::vector<double>& x,
                                       const THFunction& y,
                                       const std::vector<double>& load) {
  const THSpace& s = *ctx.space;
  std::vector<double> r(s.n_system, 0.0);
  ctx.blocks.A.add_apply(x, r);
  std::vector<double> conv = assemble_convection_vector(s, y);
  for (int i = 0; i < s.n_system; ++i) r[i] += conv[i];
  ctx.blocks.B.add_apply(x, r);             // pressure rows: B y
  ctx.blocks.B.add_apply_transpose(x, r, -1.0);  // velocity rows: -B^T p
  double lam = x[s.mean_dof()];
  double mean_res = 0.0;
  for (int q = 0; q < s.np_dofs; ++q) {
    r[s.pdof(q)] += ctx.blocks.mean_row[q] * lam;
    mean_res += ctx.blocks.mean_row[q] * x[s.pdof(q)];
  }
  r[s.mean_dof()] += mean_res;
  for (int i = 0; i < s.n_system; ++i) r[i] -= load[i];
  for (int d = 0; d < s.n_system; ++d)
    if (ctx.pinned[d]) r[d] = x[d];
  return r;
}

inline THFunction wrap(const NSContext& ctx, std::vector<double> x) {
  THFunction f(ctx.space);
  f.coeffs = std::move(x);
  return f;
}

// action of the full bordered operator on a vector whose pinned entries
// vanish; pinned rows carry the identity
inline std::vector<double> bordered_apply(const NSContext& ctx,
                                          const CsrMatrix* extra,
                                          const std::vector<double>& x) {
  const THSpace& s = *ctx.space;
  std::vector<double> r(s.n_system, 0.0);
  ctx.blocks.A.add_apply(x, r);
  if (extra) extra->add_apply(x, r);
  ctx.blocks.B.add_apply(x, r);
  ctx.blocks.B.add_apply_transpose(x, r, -1.0);
  double lam = x[s.mean_dof()], mean_acc = 0.0;
  for (int q = 0; q < s.np_dofs; ++q) {
    r[s.pdof(q)] += ctx.blocks.mean_row[q] * lam;
    mean_acc += ctx.blocks.mean_row[q] * x[s.pdof(q)];
  }
  r[s.mean_dof()] = mean_acc;
  for (int d = 0; d < s.n_system; ++d)
    if (ctx.pinned[d]) r[d] = x[d];
  return r;
}

// Bordered saddle solve. The full matrix carries the dense pressure-mean
// row/column, which ruins sparse LU fill; instead the constant-pressure
// kernel is split off: the multiplier is fixed by summing the pressure
// equations (the divergence rows of zero-trace velocity basis functions sum
// to zero), a representative with one pinned pressure node is computed from
// a sparse core factorization, and the constant pressure mode is restored
// from the mean constraint. The result solves the bordered system; the
// residual against it is verified.
inline std::vector<double> saddle_solve(const NSContext& ctx,
                                        const CsrMatrix* velocity_extra,
                                        std::vector<double> rhs) {
  const THSpace& s = *ctx.space;
  detail::zero_pinned(ctx, rhs);
  const int pin = s.pdof(0);

  double csum = 0.0, bsum = 0.0;
  for (int q = 0; q < s.np_dofs; ++q) {
    csum += ctx.blocks.mean_row[q];
    bsum += rhs[s.pdof(q)];
  }
  if (!(csum > 0.0)) throw SingularMatrix("saddle_solve: degenerate mean row");
  const double lam = bsum / csum;
  const double mean_target = rhs[s.mean_dof()];

  std::vector<double> b = rhs;
  for (int q = 0; q < s.np_dofs; ++q) b[s.pdof(q)] -= lam * ctx.blocks.mean_row[q];
  b[pin] = 0.0;
  b[s.mean_dof()] = 0.0;

  CsrMatrix core = compose_core(s, ctx.blocks, velocity_extra, ctx.pinned, pin);
  std::vector<double> x = SparseLUSolver(core).solve(b);
  detail::zero_pinned(ctx, x);
  x[pin] = 0.0;

  double psum = 0.0;
  for (int q = 0; q < s.np_dofs; ++q)
    psum += ctx.blocks.mean_row[q] * x[s.pdof(q)];
  const double beta = (mean_target - psum) / csum;
  for (int q = 0; q < s.np_dofs; ++q) x[s.pdof(q)] += beta;
  x[s.mean_dof()] = lam;

  std::vector<double> check = bordered_apply(ctx, velocity_extra, x);
  double rnorm = 0.0, bnorm = 0.0;
  for (int i = 0; i < s.n_system; ++i) {
    double d = check[i] - rhs[i];
    rnorm += d * d;
    bnorm += rhs[i] * rhs[i];
  }
  if (std::sqrt(rnorm) > 1e-10 * std::max(std::sqrt(bnorm), 1e-300) && bnorm > 0.0)
    throw SingularMatrix("saddle_solve: bordered residual above tolerance");
  return x;
}

}  // namespace detail

/// Newton iteration on the discrete state equation with load = control plus
/// optional analytic forcing. Initial guess is the Stokes solution unless
/// init is given; steps are halved (at most 8 times) whenever the residual
/// fails to decrease.
inline StateSolve solve_state(const NSContext& ctx, const QuadControl* u,
                              const VecFn& extra_f,
                              const THFunction* init = nullptr,
                              double tol = 1e-10, int max_iter = 25) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_state: tol must be positive");
  const THSpace& s = *ctx.space;
  std::vector<double> load(s.n_system, 0.0);
  if (u) {
    std::vector<double> lu = assemble_load(s, *u);
    for (int i = 0; i < s.n_system; ++i) load[i] += lu[i];
  }
  if (extra_f) {
    std::vector<double> lf = assemble_load(s, extra_f);
    for (int i = 0; i < s.n_system; ++i) load[i] += lf[i];
  }

  NewtonReport rep;
  rep.rhs_norm = detail::norm2(load);
  const double target = tol * (1.0 + rep.rhs_norm);

  std::vector<double> x;
  if (init) {
    if (init->space.get() != ctx.space.get())
      throw std::invalid_argument("solve_state: init lives on a different space");
    x = init->coeffs;
    detail::zero_pinned(ctx, x);
  } else {
    x = detail::saddle_solve(ctx, nullptr, load);
    rep.iterations = 1;
  }

  THFunction y = detail::wrap(ctx, x);
  std::vector<double> r = detail::ns_residual(ctx, y.coeffs, y, load);
  double rnorm = detail::norm2(r);
  rep.residual_history.push_back(rnorm);

  while (rnorm > target) {
    if (rep.iterations >= max_iter)
      throw NewtonDiverged("solve_state: max_iter reached, residual " +
                           std::to_string(rnorm));
    CsrMatrix jac = assemble_newton_jacobian(s, y);
    std::vector<double> neg_r(r.size());
    for (size_t i = 0; i < r.size(); ++i) neg_r[i] = -r[i];
    std::vector<double> delta = detail::saddle_solve(ctx, &jac, neg_r);
    rep.iterations++;

    double alpha = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= 8; ++halving) {
      std::vector<double> x_try = y.coeffs;
      for (size_t i = 0; i < x_try.size(); ++i) x_try[i] += alpha * delta[i];
      detail::zero_pinned(ctx, x_try);
      THFunction y_try = detail::wrap(ctx, std::move(x_try));
      std::vector<double> r_try = detail::ns_residual(ctx, y_try.coeffs, y_try, load);
      double rn_try = detail::norm2(r_try);
      if (rn_try < rnorm || rn_try <= target) {
        y = std::move(y_try);
        r = std::move(r_try);
        rnorm = rn_try;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted)
      throw NewtonDiverged("solve_state: damping floor reached, residual " +
                           std::to_string(rnorm));
    rep.damping_factors.push_back(alpha);
    rep.residual_history.push_back(rnorm);
  }
  rep.converged = true;
  return {std::move(y), std::move(rep)};
}

/// Spec-surface overload assembling the context on the fly.
inline StateSolve solve_state(const std::shared_ptr<const THSpace>& s,
                              const QuadControl* u, const VecFn& extra_f,
                              double nu, const THFunction* init = nullptr,
                              double tol = 1e-10, int max_iter = 25) {
  NSContext ctx(s, nu);
  return solve_state(ctx, u, extra_f, init, tol, max_iter);
}

/// One saddle-point solve with the Newton Jacobian at y (the discrete
/// linearized state operator). Raw-load variant used internally.
inline THFunction solve_linearized_load(const NSContext& ctx, const THFunction& y,
                                        std::vector<double> load) {
  CsrMatrix jac = assemble_newton_jacobian(*ctx.space, y);
  return detail::wrap(ctx, detail::saddle_solve(ctx, &jac, std::move(load)));
}

inline THFunction solve_linearized(const NSContext& ctx, const THFunction& y,
                                   const VecFn& g) {
  return solve_linearized_load(ctx, y, assemble_load(*ctx.space, g));
}

inline THFunction solve_linearized(const NSContext& ctx, const THFunction& y,
                                   const QuadControl& g) {
  return solve_linearized_load(ctx, y, assemble_load(*ctx.space, g));
}

inline THFunction solve_linearized(const std::shared_ptr<const THSpace>& s,
                                   double nu, const THFunction& y, const VecFn& g) {
  NSContext ctx(s, nu);
  return solve_linearized(ctx, y, g);
}

/// Transposed linearized solve. Raw-load variant; the load is
/// (rhs_field, w_h) assembled over velocity rows.
inline THFunction solve_adjoint_load(const NSContext& ctx,
                                     const THFunction& transport_y,
                                     std::vector<double> load) {
  CsrMatrix adj = assemble_adjoint_operator(*ctx.space, transport_y);
  return detail::wrap(ctx, detail::saddle_solve(ctx, &adj, std::move(load)));
}

/// Adjoint solve with right-hand side y_h - y_Omega: the discrete part
/// enters exactly through the velocity mass matrix.
inline THFunction solve_adjoint(const NSContext& ctx, const THFunction& transport_y,
                                const THFunction& y_h, const VecFn& y_omega) {
  const THSpace& s = *ctx.space;
  std::vector<double> load(s.n_system, 0.0);
  ctx.blocks.M.add_apply(y_h.coeffs, load);
  if (y_omega) {
    std::vector<double> lo = assemble_load(s, y_omega);
    for (int i = 0; i < s.n_system; ++i) load[i] -= lo[i];
  }
  return solve_adjoint_load(ctx, transport_y, std::move(load));
}

inline THFunction solve_adjoint(const NSContext& ctx, const THFunction& transport_y,
                                const VecFn& rhs_field) {
  return solve_adjoint_load(ctx, transport_y, assemble_load(*ctx.space, rhs_field));
}

inline THFunction solve_adjoint(const std::shared_ptr<const THSpace>& s, double nu,
                                const THFunction& transport_y, const VecFn& rhs_field) {
  NSContext ctx(s, nu);
  return solve_adjoint(ctx, transport_y, rhs_field);
}

}  // namespace nsbang
