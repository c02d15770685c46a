#include "test_support.hpp"

using namespace nsbang;
using nsbang::test::from_nodal;

namespace {

OcpProblem small_problem(std::shared_ptr<const THSpace> s, double nu = 1.0) {
  ManufacturedOCP mocp = make_ocp_benchmark(nu, ControlBounds{});
  OcpProblem p = mocp.problem(std::move(s));
  return p;
}

// O(1)-scale tracking problem for finite-difference derivative checks; the
// identities under test hold for any data, and mild magnitudes keep the
// second differences clear of cancellation noise.
OcpProblem mild_problem(std::shared_ptr<const THSpace> s, double nu = 1.0) {
  OcpProblem p;
  p.space = std::move(s);
  p.nu = nu;
  p.bounds = ControlBounds{{-2.0, -2.0}, {2.0, 2.0}};
  p.y_omega = [](Vec2 x) {
    return Vec2{0.5 * std::sin(M_PI * x.x) * std::sin(M_PI * x.y),
                0.4 * x.x * (1.0 - x.x) * x.y * (1.0 - x.y)};
  };
  p.newton_tol = 1e-12;
  return p;
}

QuadControl scaled(QuadControl g, double s) {
  for (auto& v : g.vals) v *= s;
  return g;
}

}  // namespace

TEST_CASE("bang-bang sign map", "[ocp]") {
  auto s = build_space(build_structured(2, 2));
  ControlBounds bounds{{-2.0, -3.0}, {1.0, 4.0}};

  THFunction zpos = from_nodal(s, [](Vec2) { return Vec2{0.5, 0.0}; });
  QuadControl u = bang_bang_from_adjoint(zpos, bounds);
  for (int e = 0; e < u.n_elems; ++e)
    for (int q = 0; q < u.n_qp; ++q) {
      CHECK(u.at(e, q, 0) == -2.0);          // z1 > 0 -> a1
      CHECK(u.at(e, q, 1) == 0.5 * (-3.0 + 4.0));  // z2 = 0 -> midpoint
    }

  THFunction zneg = from_nodal(s, [](Vec2) { return Vec2{-0.5, -1.0}; });
  u = bang_bang_from_adjoint(zneg, bounds);
  for (int e = 0; e < u.n_elems; ++e)
    for (int q = 0; q < u.n_qp; ++q) {
      CHECK(u.at(e, q, 0) == 1.0);  // z1 < 0 -> b1
      CHECK(u.at(e, q, 1) == 4.0);
    }

  // positive rescaling invariance away from zeros
  THFunction zr = random_th_function(s, 7);
  QuadControl u1 = bang_bang_from_adjoint(zr, bounds);
  THFunction zr2 = zr;
  for (auto& c : zr2.coeffs) c *= 2.0;
  QuadControl u2 = bang_bang_from_adjoint(zr2, bounds);
  for (size_t i = 0; i < u1.vals.size(); ++i) CHECK(u1.vals[i] == u2.vals[i]);
}

TEST_CASE("cost: nonnegative, zero at matched desired state", "[ocp]") {
  auto s = build_space(build_structured(4, 4));
  OcpProblem p = small_problem(s);
  NSContext ctx(s, p.nu);
  QuadControl u = QuadControl::constant(*s, {0.3, -0.2});
  CostEval ce = cost(p, ctx, u);
  CHECK(ce.value >= 0.0);

  // set y_Omega to the computed state: J becomes zero for that control
  TriLocator loc(s->mesh);
  THFunction yh = ce.state;
  OcpProblem p2 = p;
  p2.y_omega = [&, yh](Vec2 x) { return evaluate_at(yh, loc, x).velocity; };
  CostEval ce2 = cost(p2, ctx, u);
  CHECK(ce2.value < 1e-15);
}

TEST_CASE("first variation: linearity and finite differences", "[ocp]") {
  auto s = build_space(build_structured(4, 4));
  OcpProblem p = mild_problem(s);
  NSContext ctx(s, p.nu);

  QuadControl u = random_control(*s, p.bounds, 11);
  CostEval ce = cost(p, ctx, u);
  QuadControl zs = sample_velocity(ce.adjoint);

  QuadControl g0 = QuadControl::zeros(*s);
  CHECK(first_variation(*s, zs, g0) == 0.0);

  QuadControl g1 = random_control(*s, p.bounds, 12);
  QuadControl g2 = random_control(*s, p.bounds, 13);
  QuadControl gsum = g1;
  for (size_t i = 0; i < gsum.vals.size(); ++i)
    gsum.vals[i] = 2.0 * g1.vals[i] - 3.0 * g2.vals[i];
  double lhs = first_variation(*s, zs, gsum);
  double rhs = 2.0 * first_variation(*s, zs, g1) - 3.0 * first_variation(*s, zs, g2);
  CHECK(lhs == Catch::Approx(rhs).margin(1e-12 * (1.0 + std::abs(lhs))));

  // central difference against (z, g)
  const double t = 1e-4;
  auto perturbed = [&](double sign) {
    QuadControl up = u;
    for (size_t i = 0; i < up.vals.size(); ++i)
      up.vals[i] += sign * t * g1.vals[i];
    return cost(p, ctx, up, &ce.state).value;
  };
  double fd = (perturbed(1.0) - perturbed(-1.0)) / (2.0 * t);
  double jprime = first_variation(*s, zs, g1);
  CHECK(std::abs(fd - jprime) <= 1e-4 * std::abs(jprime));
}

TEST_CASE("second variation: sign and finite differences", "[ocp]") {
  auto s = build_space(build_structured(4, 4));
  OcpProblem p = mild_problem(s);
  NSContext ctx(s, p.nu);
  QuadControl u = random_control(*s, p.bounds, 21);
  QuadControl g = scaled(random_control(*s, p.bounds, 22), 4.0);

  QuadControl g0 = QuadControl::zeros(*s);
  CHECK(second_variation(p, ctx, u, g0) == 0.0);

  double j2 = second_variation(p, ctx, u, g);

  // large viscosity: the adjoint correction is negligible, J'' ~ ||phi||^2 > 0
  OcpProblem pstokes = mild_problem(s, 1e3);
  NSContext ctx_st(s, pstokes.nu);
  double j2_st = second_variation(pstokes, ctx_st, u, g);
  CHECK(j2_st > 0.0);

  // second central difference
  const double t = 1e-3;
  CostEval ce = cost(p, ctx, u);
  auto jat = [&](double sign) {
    QuadControl up = u;
    for (size_t i = 0; i < up.vals.size(); ++i) up.vals[i] += sign * t * g.vals[i];
    return cost(p, ctx, up, &ce.state).value;
  };
  double fd2 = (jat(1.0) - 2.0 * ce.value + jat(-1.0)) / (t * t);
  CHECK(std::abs(fd2 - j2) <= 1e-2 * std::abs(j2));
}

TEST_CASE("variational inequality gap", "[ocp]") {
  auto s = build_space(build_structured(3, 3));
  ControlBounds bounds{{-1.0, -1.0}, {2.0, 2.0}};

  THFunction z = random_th_function(s, 41);
  QuadControl zs = sample_velocity(z);
  QuadControl ubb = bang_bang_from_adjoint(zs, bounds);
  CHECK(std::abs(vi_gap(*s, zs, ubb, bounds)) < 1e-14);

  // z1 > 0 everywhere, u1 = b1: gap = (b1 - a1) int z1
  THFunction zpos = from_nodal(s, [](Vec2 p) { return Vec2{1.0 + p.x, 0.0}; });
  QuadControl zps = sample_velocity(zpos);
  QuadControl u = QuadControl::zeros(*s);
  for (int e = 0; e < u.n_elems; ++e)
    for (int q = 0; q < u.n_qp; ++q) {
      u.at(e, q, 0) = bounds.upper(0);
      u.at(e, q, 1) = 0.5 * (bounds.lower(1) + bounds.upper(1));
    }
  double intz = 0.0;
  for (int t = 0; t < s->n_elements(); ++t) {
    ElemGeom g = ElemGeom::of(s->mesh, t);
    for (int q = 0; q < s->rule.size(); ++q)
      intz += s->rule.w[q] * g.det * zps.at(t, q, 0);
  }
  double gap = vi_gap(*s, zps, u, bounds);
  CHECK(gap == Catch::Approx(3.0 * intz).epsilon(1e-12));

  // rescaling z doubles the gap, the argmin vertex is unchanged
  THFunction z2 = zpos;
  for (auto& c : z2.coeffs) c *= 2.0;
  CHECK(vi_gap(*s, sample_velocity(z2), u, bounds) ==
        Catch::Approx(2.0 * gap).epsilon(1e-12));
}

TEST_CASE("conditional gradient on a coarse manufactured problem", "[ocp]") {
  auto s = build_space(build_structured(8, 8));
  ManufacturedOCP mocp = make_ocp_benchmark(1.0, ControlBounds{});
  OcpProblem p = mocp.problem(s);

  OcpResult res = solve_ocp(p, 1e-6, 80);
  CHECK(res.converged);
  CHECK(res.final.gap <= 1e-6 * (1.0 + std::abs(res.final.cost)));
  // iterates remain admissible (convex combinations of box vertices)
  for (int e = 0; e < res.final.control.n_elems; ++e)
    for (int q = 0; q < res.final.control.n_qp; ++q)
      for (int c = 0; c < 2; ++c) {
        CHECK(res.final.control.at(e, q, c) >= p.bounds.lower(c) - 1e-12);
        CHECK(res.final.control.at(e, q, c) <= p.bounds.upper(c) + 1e-12);
      }
  // monotone descent along the whole run
  for (size_t k = 1; k < res.history.size(); ++k)
    CHECK(res.history[k].cost <= res.history[k - 1].cost + 1e-12);
  // last recorded gap satisfies the stopping rule
  CHECK(res.history.back().gap <=
        1e-6 * (1.0 + std::abs(res.history.back().cost)));
}

TEST_CASE("degenerate bounds return immediately", "[ocp]") {
  auto s = build_space(build_structured(2, 2));
  ManufacturedOCP mocp = make_ocp_benchmark(1.0, ControlBounds{});
  OcpProblem p = mocp.problem(s);
  p.bounds = {{0.25, -0.5}, {0.25, -0.5}};  // a = b
  OcpResult res = solve_ocp(p, 1e-10, 5);
  CHECK(res.converged);
  CHECK(res.outer_iterations == 1);
  CHECK(std::abs(res.final.gap) < 1e-14);
  for (int e = 0; e < res.final.control.n_elems; ++e)
    for (int q = 0; q < res.final.control.n_qp; ++q) {
      CHECK(res.final.control.at(e, q, 0) == 0.25);
      CHECK(res.final.control.at(e, q, 1) == -0.5);
    }
}

TEST_CASE("growth exponent fits and flags", "[ocp]") {
  auto s = build_space(build_structured(16, 16));
  std::vector<double> eps = {0.4, 0.2, 0.1, 0.05, 0.025};

  // measure of {|x1 - 1/2| <= eps} is exactly 2 eps: slope 1
  GrowthFit fit = growth_exponent(*s, [](Vec2 p) { return p.x - 0.5; }, eps);
  CHECK(fit.flag == "ok");
  CHECK(fit.gamma_hat == Catch::Approx(1.0).margin(0.03));

  // constant nonzero with grid below |c|: empty active set
  GrowthFit fconst = growth_exponent(*s, [](Vec2) { return 3.0; }, eps);
  CHECK(fconst.flag == "no active set");

  // identically zero field: full-measure level sets
  GrowthFit fzero = growth_exponent(*s, [](Vec2) { return 0.0; }, eps);
  CHECK(fzero.flag == "degenerate");
  CHECK(fzero.gamma_hat == 0.0);

  // The manufactured adjoint crosses zero transversally on interior curves
  // (slope-1 contribution), but as a zero-trace curl field it vanishes
  // quadratically along the boundary edges where the component is
  // tangential; those strips add a sqrt(eps) term to the level-set measure
  // and pull the windowed slope toward 1/2.
  ManufacturedOCP mocp = make_ocp_benchmark(1.0, ControlBounds{});
  std::vector<double> eps2 = {0.1, 0.05, 0.025, 0.0125};
  GrowthFit fz = growth_exponent(
      *s, [&](Vec2 p) { return mocp.adjoint(p).x; }, eps2);
  CHECK(fz.flag == "ok");
  CHECK(fz.gamma_hat > 0.45);
  CHECK(fz.gamma_hat < 0.75);
  GrowthFit fz2 = growth_exponent(
      *s, [&](Vec2 p) { return mocp.adjoint(p).y; }, eps2);
  CHECK(fz2.gamma_hat > 0.4);
  CHECK(fz2.gamma_hat < 0.65);
}

TEST_CASE("cost at the exact control matches the analytic optimum", "[ocp]") {
  auto s = build_space(build_structured(8, 8));
  ManufacturedOCP mocp = make_ocp_benchmark(1.0, ControlBounds{});
  OcpProblem p = mocp.problem(s);
  NSContext ctx(s, p.nu);
  QuadControl ubar =
      QuadControl::from_function(*s, [&](Vec2 x) { return mocp.control(x); });
  CostEval ce = cost(p, ctx, ubar);
  // analytic 1/2 ||ybar - y_Omega||^2 by quadrature of the closed forms
  double misfit = norm_lp_scalar_field(
      *s, [&](Vec2 x) { return norm(mocp.state(x) - mocp.desired_state(x)); },
      2.0);
  double j_exact = 0.5 * misfit * misfit;
  CHECK(ce.value == Catch::Approx(j_exact).epsilon(1e-2));
}

TEST_CASE("vi_gap is nonnegative for random pairs", "[ocp]") {
  auto s = build_space(build_structured(3, 3));
  ControlBounds bounds{{-1.5, -0.5}, {0.5, 2.0}};
  for (int rep = 0; rep < 10; ++rep) {
    THFunction z = random_th_function(s, 700 + rep);
    QuadControl u = random_control(*s, bounds, 800 + rep, 0.01);
    CHECK(vi_gap(z, u, bounds) >= -1e-12);
  }
}
