#include "test_support.hpp"

using namespace nsbang;
using nsbang::test::from_nodal;

namespace {

std::vector<char> pinned_mask(const THSpace& s) {
  std::vector<char> p(s.n_system, 0);
  for (int n = 0; n < s.n_vnodes; ++n)
    if (s.vnode_boundary[n]) {
      p[s.vdof(n, 0)] = 1;
      p[s.vdof(n, 1)] = 1;
    }
  return p;
}

}  // namespace

TEST_CASE("Stokes blocks: Laplacian, mass, divergence coupling", "[assembly]") {
  auto s = build_space(build_structured(3, 3));
  SystemBlocks blocks = assemble_stokes(*s, 2.0);
  auto pinned = pinned_mask(*s);

  // A annihilates constants on interior rows (raw block, partition of unity)
  std::vector<double> ones(s->n_system, 0.0);
  for (int n = 0; n < s->n_vnodes; ++n) ones[s->vdof(n, 0)] = 1.0;
  auto a1 = blocks.A.apply(ones);
  for (int d = 0; d < s->nv_dofs; ++d)
    if (!pinned[d]) CHECK(std::abs(a1[d]) < 1e-12);

  // symmetry of A
  for (int i = 0; i < blocks.A.dim; ++i)
    for (int k = blocks.A.row_offsets[i]; k < blocks.A.row_offsets[i + 1]; ++k) {
      int j = blocks.A.cols[k];
      if (j < i) continue;
      double aji = 0.0;
      for (int k2 = blocks.A.row_offsets[j]; k2 < blocks.A.row_offsets[j + 1]; ++k2)
        if (blocks.A.cols[k2] == i) aji = blocks.A.vals[k2];
      CHECK(std::abs(blocks.A.vals[k] - aji) < 1e-12);
    }

  // total mass of one velocity component is |Omega| = 1
  auto m1 = blocks.M.apply(ones);
  double total = 0.0;
  for (int i = 0; i < s->n_system; ++i) total += m1[i] * ones[i];
  CHECK(total == Catch::Approx(1.0).margin(1e-13));

  // B pairs the divergence-free linear field (x2, -x1) to zero
  THFunction rot = from_nodal(s, [](Vec2 p) { return Vec2{p.y, -p.x}; });
  auto brot = blocks.B.apply(rot.coeffs);
  for (int q = 0; q < s->np_dofs; ++q) CHECK(std::abs(brot[s->pdof(q)]) < 1e-13);

  // mean row integrates the P1 basis: entries sum to |Omega|
  double msum = 0.0;
  for (double v : blocks.mean_row) msum += v;
  CHECK(msum == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("convection matrix and integration-by-parts identity", "[assembly]") {
  auto s = build_space(build_structured(3, 3));

  THFunction zero(s);
  CsrMatrix n0 = assemble_convection(*s, zero);
  for (double v : n0.vals) CHECK(v == 0.0);

  for (int rep = 0; rep < 5; ++rep) {
    THFunction w = random_th_function(s, 10 + rep);
    THFunction v = random_th_function(s, 20 + rep);
    CsrMatrix nw = assemble_convection(*s, w);
    // b(w; v, v) through the matrix: tests are rows, trials are columns
    auto nv = nw.apply(v.coeffs);
    double bvv = 0.0;
    for (int i = 0; i < s->n_system; ++i) bvv += v.coeffs[i] * nv[i];
    // oracle: -1/2 int div(w) |v|^2 (v has zero trace)
    double oracle = 0.0;
    for (int t = 0; t < s->n_elements(); ++t) {
      ElemGeom g = ElemGeom::of(s->mesh, t);
      for (int q = 0; q < s->rule.size(); ++q) {
        FieldSample fw = evaluate(w, t, s->rule.x[q], s->rule.y[q]);
        FieldSample fv = evaluate(v, t, s->rule.x[q], s->rule.y[q]);
        oracle += s->rule.w[q] * g.det * fw.divergence *
                  (fv.velocity.x * fv.velocity.x + fv.velocity.y * fv.velocity.y);
      }
    }
    CHECK(bvv == Catch::Approx(-0.5 * oracle).margin(1e-12));
  }

  CHECK(trilinear_identity_residual(s, 5, 77) < 1e-12);
}

TEST_CASE("Newton Jacobian: directional derivative", "[assembly]") {
  auto s = build_space(build_structured(2, 2));
  THFunction w = random_th_function(s, 31);
  THFunction v = random_th_function(s, 32);
  CsrMatrix jac = assemble_newton_jacobian(*s, w);
  CsrMatrix nw = assemble_convection(*s, w);
  auto jv = jac.apply(v.coeffs);

  auto fvec = [&](const THFunction& field) {
    CsrMatrix n = assemble_convection(*s, field);
    return n.apply(field.coeffs);
  };
  auto f0 = fvec(w);

  double prev_err = 0.0;
  for (double t : {1e-3, 1e-4}) {
    THFunction wt = w;
    for (size_t i = 0; i < wt.coeffs.size(); ++i) wt.coeffs[i] += t * v.coeffs[i];
    auto ft = fvec(wt);
    double err = 0.0;
    for (int i = 0; i < s->n_system; ++i)
      err = std::max(err, std::abs((ft[i] - f0[i]) / t - jv[i]));
    // the remainder is exactly t * N(v) v, so err scales linearly in t
    CHECK(err < 50.0 * t);
    if (prev_err > 0.0) CHECK(err < 0.3 * prev_err);
    prev_err = err;
  }

  // w = 0 gives the zero matrix
  THFunction zero(s);
  CsrMatrix j0 = assemble_newton_jacobian(*s, zero);
  for (double val : j0.vals) CHECK(val == 0.0);
}

TEST_CASE("reaction block against analytic gradient of a quadratic field",
          "[assembly]") {
  auto s = build_space(build_structured(3, 3));
  THFunction w = from_nodal(s, [](Vec2 p) { return Vec2{p.x * p.x, p.x * p.y}; });
  THFunction vconst = from_nodal(s, [](Vec2) { return Vec2{0.7, -0.4}; });
  CsrMatrix jac = assemble_newton_jacobian(*s, w);
  CsrMatrix nw = assemble_convection(*s, w);
  auto jv = jac.apply(vconst.coeffs);
  auto nv = nw.apply(vconst.coeffs);
  // N'(w) v = (v . grad) w with grad w = [2x, 0; y, x] analytically
  std::vector<double> oracle = assemble_load(
      *s,
      [](Vec2 p) {
        return Vec2{0.7 * 2.0 * p.x, 0.7 * p.y + (-0.4) * p.x};
      },
      false);
  auto pinned = pinned_mask(*s);
  for (int d = 0; d < s->nv_dofs; ++d)
    CHECK(jv[d] - nv[d] == Catch::Approx(oracle[d]).margin(1e-12));
}

TEST_CASE("adjoint operator equals transposed Jacobian", "[assembly]") {
  auto s = build_space(build_structured(3, 2));
  CHECK(adjoint_transpose_residual(s, 5150) < 1e-12);

  THFunction zero(s);
  CsrMatrix a0 = assemble_adjoint_operator(*s, zero);
  for (double v : a0.vals) CHECK(v == 0.0);
}

TEST_CASE("composed Newton system at w=0 is the Stokes matrix", "[assembly]") {
  auto s = build_space(build_structured(2, 2));
  SystemBlocks blocks = assemble_stokes(*s, 1.5);
  THFunction zero(s);
  CsrMatrix j0 = assemble_newton_jacobian(*s, zero);
  CsrMatrix with_j = compose_system(*s, blocks, &j0);
  CsrMatrix stokes = compose_system(*s, blocks, nullptr);
  for (int rep = 0; rep < 5; ++rep) {
    THFunction r = random_th_function(s, 60 + rep);
    auto y1 = with_j.apply(r.coeffs);
    auto y2 = stokes.apply(r.coeffs);
    for (int i = 0; i < s->n_system; ++i)
      CHECK(std::abs(y1[i] - y2[i]) < 1e-13);
  }
}

TEST_CASE("load vectors", "[assembly]") {
  auto s = build_space(build_structured(3, 3));

  auto zero_load = assemble_load(*s, [](Vec2) { return Vec2{0.0, 0.0}; });
  for (double v : zero_load) CHECK(v == 0.0);

  // partition of unity: unmasked rhs of a constant sums to c |Omega|
  auto cload = assemble_load(*s, [](Vec2) { return Vec2{2.5, -1.5}; }, false);
  double sx = 0.0, sy = 0.0;
  for (int n = 0; n < s->n_vnodes; ++n) {
    sx += cload[s->vdof(n, 0)];
    sy += cload[s->vdof(n, 1)];
  }
  CHECK(sx == Catch::Approx(2.5).margin(1e-13));
  CHECK(sy == Catch::Approx(-1.5).margin(1e-13));

  // masked load zeroes boundary rows
  auto masked = assemble_load(*s, [](Vec2) { return Vec2{2.5, -1.5}; });
  for (int n = 0; n < s->n_vnodes; ++n)
    if (s->vnode_boundary[n]) {
      CHECK(masked[s->vdof(n, 0)] == 0.0);
      CHECK(masked[s->vdof(n, 1)] == 0.0);
    }

  // QuadControl constant equals the analytic constant load
  QuadControl uc = QuadControl::constant(*s, {2.5, -1.5});
  auto qload = assemble_load(*s, uc);
  for (int i = 0; i < s->n_system; ++i)
    CHECK(qload[i] == Catch::Approx(masked[i]).margin(1e-14));
}

TEST_CASE("trilinear form values", "[assembly]") {
  auto s = build_space(build_structured(3, 3));
  THFunction zero(s);
  CHECK(trilinear_value(*s, zero, zero, zero) == 0.0);

  // divergence-free linear transport, zero-trace second/third arguments
  THFunction rot = from_nodal(s, [](Vec2 p) { return Vec2{p.y, -p.x}; });
  THFunction v = random_th_function(s, 91);
  CHECK(std::abs(trilinear_value(*s, rot, v, v)) < 1e-12);

  // b(v1; v2, v2) = -1/2 int div(v1) |v2|^2 for zero-trace v2
  THFunction v1 = random_th_function(s, 92);
  double b = trilinear_value(*s, v1, v, v);
  double oracle = 0.0;
  for (int t = 0; t < s->n_elements(); ++t) {
    ElemGeom g = ElemGeom::of(s->mesh, t);
    for (int q = 0; q < s->rule.size(); ++q) {
      FieldSample f1 = evaluate(v1, t, s->rule.x[q], s->rule.y[q]);
      FieldSample fv = evaluate(v, t, s->rule.x[q], s->rule.y[q]);
      oracle += s->rule.w[q] * g.det * f1.divergence *
                (fv.velocity.x * fv.velocity.x + fv.velocity.y * fv.velocity.y);
    }
  }
  CHECK(b == Catch::Approx(-0.5 * oracle).margin(1e-12));
}

TEST_CASE("adjoint operator: constant transport hand check", "[assembly]") {
  // for constant w the reaction part vanishes (grad w = 0); diagonal
  // self-entries of interior-node dofs are b(w; phi, phi)
  // = -1/2 int div(w) phi^2 + 1/2 boundary term = 0
  auto s = build_space(build_structured(2, 2));
  auto pinned = pinned_mask(*s);
  THFunction w = from_nodal(s, [](Vec2) { return Vec2{0.8, -0.3}; });
  CsrMatrix adj = assemble_adjoint_operator(*s, w);
  CsrMatrix conv = assemble_convection(*s, w);
  for (int i = 0; i < adj.dim; ++i)
    for (int k = adj.row_offsets[i]; k < adj.row_offsets[i + 1]; ++k) {
      if (adj.cols[k] == i && !pinned[i]) CHECK(std::abs(adj.vals[k]) < 1e-14);
      // whole operator reduces to the transposed transport matrix
      double nt = 0.0;
      for (int k2 = conv.row_offsets[adj.cols[k]];
           k2 < conv.row_offsets[adj.cols[k] + 1]; ++k2)
        if (conv.cols[k2] == i) nt = conv.vals[k2];
      CHECK(adj.vals[k] == Catch::Approx(nt).margin(1e-14));
    }
}

TEST_CASE("mass block is symmetric positive definite on free dofs", "[assembly]") {
  auto s = build_space(build_structured(3, 3));
  SystemBlocks blocks = assemble_stokes(*s, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    THFunction r = random_th_function(s, 400 + rep);
    // restrict to the velocity block: pressure/multiplier carry no mass
    for (int i = s->nv_dofs; i < s->n_system; ++i) r.coeffs[i] = 0.0;
    auto mr = blocks.M.apply(r.coeffs);
    double quad = 0.0, nrm = 0.0;
    for (int i = 0; i < s->n_system; ++i) {
      quad += r.coeffs[i] * mr[i];
      nrm += r.coeffs[i] * r.coeffs[i];
    }
    REQUIRE(nrm > 0.0);
    CHECK(quad > 0.0);
  }
}
