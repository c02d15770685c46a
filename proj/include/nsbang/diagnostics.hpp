#pragma once

// Randomized structural checks shared by the check-invariants CLI command
// and the acceptance suite: trilinear form identities, discrete duality,
// quadrature exactness, and mesh bookkeeping.

#include <random>

#include "nsbang/bench.hpp"

namespace nsbang {

/// Random Taylor-Hood coefficient field: interior velocity dofs and pressure
/// uniform in [-amp, amp], boundary velocity zero, multiplier zero.
inline THFunction random_th_function(const std::shared_ptr<const THSpace>& s,
                                     unsigned seed, double amp = 1.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-amp, amp);
  THFunction f(s);
  for (int n = 0; n < s->n_vnodes; ++n) {
    if (s->vnode_boundary[n]) continue;
    f.coeffs[s->vdof(n, 0)] = dist(rng);
    f.coeffs[s->vdof(n, 1)] = dist(rng);
  }
  for (int v = 0; v < s->mesh.n_vertices(); ++v) f.coeffs[s->pdof(v)] = dist(rng);
  return f;
}

/// Random admissible control, strictly interior by margin in (0, 1/2).
inline QuadControl random_control(const THSpace& s, const ControlBounds& bounds,
                                  unsigned seed, double margin = 0.2) {
  std::mt19937 rng(seed);
  QuadControl u = QuadControl::zeros(s);
  for (int c = 0; c < 2; ++c) {
    double lo = bounds.lower(c), hi = bounds.upper(c), w = hi - lo;
    std::uniform_real_distribution<double> dist(lo + margin * w, hi - margin * w);
    for (int e = 0; e < u.n_elems; ++e)
      for (int q = 0; q < u.n_qp; ++q) u.at(e, q, c) = dist(rng);
  }
  return u;
}

/// max over n_triples random (w, v2, v3) of
/// | b(w; v2, v3) + b(w; v3, v2) + int div(w) (v2 . v3) | -- the testable
/// form of the antisymmetry of b, exact at quadrature precision.
inline double trilinear_identity_residual(const std::shared_ptr<const THSpace>& s,
                                          int n_triples, unsigned seed) {
  double worst = 0.0;
  for (int k = 0; k < n_triples; ++k) {
    THFunction w = random_th_function(s, seed + 3 * k);
    THFunction v2 = random_th_function(s, seed + 3 * k + 1);
    THFunction v3 = random_th_function(s, seed + 3 * k + 2);
    double b23 = trilinear_value(*s, w, v2, v3);
    double b32 = trilinear_value(*s, w, v3, v2);
    // int div(w) (v2.v3) with the space rule (degree-5 integrand, exact)
    double divterm = 0.0;
    for (int t = 0; t < s->n_elements(); ++t) {
      ElemGeom g = ElemGeom::of(s->mesh, t);
      for (int q = 0; q < s->rule.size(); ++q) {
        FieldSample fw = evaluate(w, t, s->rule.x[q], s->rule.y[q]);
        FieldSample f2 = evaluate(v2, t, s->rule.x[q], s->rule.y[q]);
        FieldSample f3 = evaluate(v3, t, s->rule.x[q], s->rule.y[q]);
        divterm += s->rule.w[q] * g.det * fw.divergence *
                   (f2.velocity.x * f3.velocity.x + f2.velocity.y * f3.velocity.y);
      }
    }
    worst = std::max(worst, std::abs(b23 + b32 + divterm));
  }
  return worst;
}

/// max entrywise difference between the adjoint operator and the transposed
/// Newton Jacobian at a random transport field.
inline double adjoint_transpose_residual(const std::shared_ptr<const THSpace>& s,
                                         unsigned seed) {
  THFunction w = random_th_function(s, seed);
  CsrMatrix jac = assemble_newton_jacobian(*s, w);
  CsrMatrix adj = assemble_adjoint_operator(*s, w);
  std::vector<Triplet> ts;
  ts.reserve(jac.vals.size());
  for (int i = 0; i < jac.dim; ++i)
    for (int k = jac.row_offsets[i]; k < jac.row_offsets[i + 1]; ++k)
      ts.push_back({jac.cols[k], i, jac.vals[k]});
  CsrMatrix jact = from_triplets(jac.dim, ts);
  // sorted-column merge over the union pattern of both rows
  double worst = 0.0;
  const int sentinel = std::numeric_limits<int>::max();
  for (int i = 0; i < adj.dim; ++i) {
    int ka = adj.row_offsets[i], ea = adj.row_offsets[i + 1];
    int kb = jact.row_offsets[i], eb = jact.row_offsets[i + 1];
    while (ka < ea || kb < eb) {
      int ca = ka < ea ? adj.cols[ka] : sentinel;
      int cb = kb < eb ? jact.cols[kb] : sentinel;
      if (ca == cb) {
        worst = std::max(worst, std::abs(adj.vals[ka] - jact.vals[kb]));
        ++ka;
        ++kb;
      } else if (ca < cb) {
        worst = std::max(worst, std::abs(adj.vals[ka++]));
      } else {
        worst = std::max(worst, std::abs(jact.vals[kb++]));
      }
    }
  }
  return worst;
}

/// Relative defect of the discrete transposition identity
/// (S'(y) g, h) = (g, S'(y)^* h) for random load pairs.
inline double duality_residual(const std::shared_ptr<const THSpace>& s, double nu,
                               const THFunction& y, int n_pairs, unsigned seed) {
  NSContext ctx(s, nu);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < n_pairs; ++k) {
    auto rand_field = [&](unsigned off) {
      double ax = dist(rng), ay = dist(rng), fx = 1 + (seed + off) % 3,
             fy = 1 + (seed + off) % 2;
      return VecFn([=](Vec2 p) {
        return Vec2{ax * std::sin(fx * M_PI * p.x) * std::sin(fy * M_PI * p.y),
                    ay * std::cos(fx * M_PI * p.x) * std::sin(fy * M_PI * p.y)};
      });
    };
    VecFn gfn = rand_field(2 * k), hfn = rand_field(2 * k + 1);
    std::vector<double> gload = assemble_load(*s, gfn);
    std::vector<double> hload = assemble_load(*s, hfn);
    THFunction phi = solve_linearized_load(ctx, y, gload);
    THFunction z = solve_adjoint_load(ctx, y, hload);
    // (phi, h) via the h load vector; (g, z) via the g load vector
    double lhs = 0.0, rhs = 0.0;
    for (int i = 0; i < s->n_system; ++i) {
      lhs += hload[i] * phi.coeffs[i];
      rhs += gload[i] * z.coeffs[i];
    }
    double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return worst;
}

/// Quadrature exactness defect against the closed-form monomial integrals
/// a! b! / (a+b+2)!.
inline double quadrature_exactness_residual(int max_degree) {
  auto factorial = [](int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
  };
  double worst = 0.0;
  for (int deg = 1; deg <= max_degree; ++deg) {
    QuadRule r = triangle_rule(deg);
    for (int a = 0; a + 0 <= r.exact_degree; ++a)
      for (int b = 0; a + b <= r.exact_degree; ++b) {
        double q = 0.0;
        for (int k = 0; k < r.size(); ++k)
          q += r.w[k] * std::pow(r.x[k], a) * std::pow(r.y[k], b);
        double ex = factorial(a) * factorial(b) / factorial(a + b + 2);
        worst = std::max(worst, std::abs(q - ex));
      }
  }
  return worst;
}

struct CheckResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

/// The sweep behind the check-invariants CLI command.
inline std::vector<CheckResult> run_invariant_checks(int mesh_n, double nu,
                                                     unsigned seed = 20260810) {
  std::vector<CheckResult> out;
  auto push = [&](const std::string& name, bool ok, const std::string& detail) {
    out.push_back({name, ok, detail});
  };

  TriMesh m = build_structured(mesh_n, mesh_n);
  MeshCheck mc = validate_mesh(m, m.n_triangles() <= 512);
  push("mesh.structured", mc.ok, mc.message);
  TriMesh mu = refine_uniform(m);
  mc = validate_mesh(mu, mu.n_triangles() <= 512);
  push("mesh.refine_uniform", mc.ok, mc.message);

  std::mt19937 rng(seed);
  TriMesh mb = m;
  double angle0 = m.min_angle();
  bool angle_ok = true;
  for (int round = 0; round < 5; ++round) {
    std::set<int> marks;
    std::uniform_int_distribution<int> pick(0, mb.n_triangles() - 1);
    for (int j = 0; j < std::max(1, mb.n_triangles() / 4); ++j) marks.insert(pick(rng));
    mb = refine_marked(mb, marks);
    MeshCheck c = validate_mesh(mb, mb.n_triangles() <= 512);
    if (!c.ok) {
      push("mesh.refine_marked", false, c.message);
      angle_ok = false;
      break;
    }
    if (mb.min_angle() < 0.5 * angle0 - 1e-12) angle_ok = false;
  }
  if (angle_ok) push("mesh.refine_marked", true, "");
  push("mesh.bisection_min_angle", angle_ok,
       angle_ok ? "" : "min angle fell below half the initial value");

  double qres = quadrature_exactness_residual(10);
  push("quadrature.exactness", qres < 1e-13, "residual " + format_g17(qres));

  auto space = build_space(m);
  double tri = trilinear_identity_residual(space, 5, seed);
  push("assembly.trilinear_identity", tri < 1e-12, "residual " + format_g17(tri));
  double adjt = adjoint_transpose_residual(space, seed + 1);
  push("assembly.adjoint_transpose", adjt < 1e-12, "residual " + format_g17(adjt));

  ManufacturedNS mnf = make_ns_benchmark(nu);
  StateSolve st = solve_state(space, nullptr,
                              [&](Vec2 x) { return mnf.forcing(x); }, nu);
  push("solver.newton_converged", st.report.converged,
       "iterations " + std::to_string(st.report.iterations));
  double dual = duality_residual(space, nu, st.solution, 2, seed + 2);
  push("solver.duality", dual < 1e-9, "relative defect " + format_g17(dual));

  double pm = std::abs(st.solution.pressure_mean());
  push("solver.pressure_mean", pm < 1e-10, "mean " + format_g17(pm));
  return out;
}

}  // namespace nsbang
