#pragma once

// Lowest-order Taylor-Hood pair on a TriMesh: continuous piecewise-quadratic
// vector velocity with zero boundary trace, continuous piecewise-linear
// pressure with a zero-mean multiplier slot. Field evaluation, nodal
// interpolation, and L^p norms (the measurement layer).

#include <functional>
#include <limits>
#include <memory>

#include "nsbang/mesh.hpp"
#include "nsbang/quadrature.hpp"

namespace nsbang {

using VecFn = std::function<Vec2(Vec2)>;
using ScalFn = std::function<double(Vec2)>;

namespace basis {

// P2 node order: vertices 0,1,2 then midpoints of local edges (0,1),(1,2),(2,0)
inline void p2(double xi, double eta, double n[6]) {
  double l0 = 1.0 - xi - eta, l1 = xi, l2 = eta;
  n[0] = l0 * (2.0 * l0 - 1.0);
  n[1] = l1 * (2.0 * l1 - 1.0);
  n[2] = l2 * (2.0 * l2 - 1.0);
  n[3] = 4.0 * l0 * l1;
  n[4] = 4.0 * l1 * l2;
  n[5] = 4.0 * l2 * l0;
}

inline void p2_grad_ref(double xi, double eta, double g[6][2]) {
  double l0 = 1.0 - xi - eta;
  g[0][0] = 1.0 - 4.0 * l0;   g[0][1] = 1.0 - 4.0 * l0;
  g[1][0] = 4.0 * xi - 1.0;   g[1][1] = 0.0;
  g[2][0] = 0.0;              g[2][1] = 4.0 * eta - 1.0;
  g[3][0] = 4.0 * (l0 - xi);  g[3][1] = -4.0 * xi;
  g[4][0] = 4.0 * eta;        g[4][1] = 4.0 * xi;
  g[5][0] = -4.0 * eta;       g[5][1] = 4.0 * (l0 - eta);
}

// constant reference Hessians (xx, xy, yy)
constexpr double p2_hess_ref[6][3] = {{4, 4, 4},   {4, 0, 0},  {0, 0, 4},
                                      {-8, -4, 0}, {0, 4, 0},  {0, -4, -8}};

inline void p1(double xi, double eta, double n[3]) {
  n[0] = 1.0 - xi - eta;
  n[1] = xi;
  n[2] = eta;
}

constexpr double p1_grad_ref[3][2] = {{-1, -1}, {1, 0}, {0, 1}};

// reference coordinates of the six Lagrange nodes
constexpr double p2_nodes_ref[6][2] = {{0, 0},     {1, 0},     {0, 1},
                                       {0.5, 0},   {0.5, 0.5}, {0, 0.5}};

}  // namespace basis

// Affine element geometry. J maps reference to physical edge vectors.
struct ElemGeom {
  Vec2 p0;
  double j[2][2];     // columns: p1-p0, p2-p0
  double jinv[2][2];
  double det;         // = 2 * area, positive by the CCW invariant

  static ElemGeom of(const TriMesh& m, int t) {
    const auto& tr = m.triangles[t];
    ElemGeom g;
    g.p0 = m.vertices[tr[0]];
    Vec2 e1 = m.vertices[tr[1]] - g.p0, e2 = m.vertices[tr[2]] - g.p0;
    g.j[0][0] = e1.x; g.j[0][1] = e2.x;
    g.j[1][0] = e1.y; g.j[1][1] = e2.y;
    g.det = e1.x * e2.y - e1.y * e2.x;
    double inv = 1.0 / g.det;
    g.jinv[0][0] = g.j[1][1] * inv;  g.jinv[0][1] = -g.j[0][1] * inv;
    g.jinv[1][0] = -g.j[1][0] * inv; g.jinv[1][1] = g.j[0][0] * inv;
    return g;
  }

  Vec2 map(double xi, double eta) const {
    return {p0.x + j[0][0] * xi + j[0][1] * eta,
            p0.y + j[1][0] * xi + j[1][1] * eta};
  }

  // physical gradient = J^{-T} * reference gradient
  void grad_to_phys(const double gref[2], double gphys[2]) const {
    gphys[0] = jinv[0][0] * gref[0] + jinv[1][0] * gref[1];
    gphys[1] = jinv[0][1] * gref[0] + jinv[1][1] * gref[1];
  }

  // Laplacian of a P2 basis function (constant per element)
  double laplacian_p2(int k) const {
    const double* h = basis::p2_hess_ref[k];  // (xx, xy, yy)
    double href[2][2] = {{h[0], h[1]}, {h[1], h[2]}};
    double lap = 0.0;
    for (int i = 0; i < 2; ++i) {
      double t[2] = {0, 0};
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) t[b] += jinv[a][i] * href[a][b];
      for (int b = 0; b < 2; ++b) lap += t[b] * jinv[b][i];
    }
    return lap;
  }
};

struct THSpace {
  TriMesh mesh;
  EdgeSet edges;
  QuadRule rule;   // default assembly/measure rule, exact to degree 6

  int n_vnodes = 0;     // vertices + edge midpoints
  int nv_dofs = 0;      // 2 * n_vnodes
  int np_dofs = 0;      // vertex count
  int n_system = 0;     // nv_dofs + np_dofs + 1 (pressure-mean multiplier)
  std::vector<char> vnode_boundary;
  std::vector<Vec2> vnode_xy;

  int n_elements() const { return mesh.n_triangles(); }

  // global velocity node of local P2 node k in element t
  int vnode(int t, int k) const {
    return k < 3 ? mesh.triangles[t][k]
                 : mesh.n_vertices() + edges.triangle_edges[t][k - 3];
  }
  int vdof(int node, int comp) const { return 2 * node + comp; }
  int pdof(int vertex) const { return nv_dofs + vertex; }
  int mean_dof() const { return nv_dofs + np_dofs; }

  int n_boundary_vnodes() const {
    int c = 0;
    for (char b : vnode_boundary) c += b ? 1 : 0;
    return c;
  }
};

inline std::shared_ptr<const THSpace> build_space(TriMesh mesh) {
  auto s = std::make_shared<THSpace>();
  s->mesh = std::move(mesh);
  s->edges = edge_topology(s->mesh);
  s->rule = triangle_rule(6);
  const int nv = s->mesh.n_vertices(), ne = s->edges.n_edges();
  s->n_vnodes = nv + ne;
  s->nv_dofs = 2 * s->n_vnodes;
  s->np_dofs = nv;
  s->n_system = s->nv_dofs + s->np_dofs + 1;
  s->vnode_boundary.assign(s->n_vnodes, 0);
  s->vnode_xy.resize(s->n_vnodes);
  for (int v = 0; v < nv; ++v) {
    s->vnode_boundary[v] = s->mesh.boundary_flags[v];
    s->vnode_xy[v] = s->mesh.vertices[v];
  }
  for (int e = 0; e < ne; ++e) {
    const auto& ed = s->edges.edges[e];
    s->vnode_boundary[nv + e] = ed.interior ? 0 : 1;
    s->vnode_xy[nv + e] = 0.5 * (s->mesh.vertices[ed.a] + s->mesh.vertices[ed.b]);
  }
  return s;
}

/// Coefficient vector over a THSpace: velocity block (interleaved x/y per
/// node), pressure block, one multiplier slot. Velocity coefficients at
/// boundary nodes are kept exactly zero by solvers and interpolation.
struct THFunction {
  std::shared_ptr<const THSpace> space;
  std::vector<double> coeffs;

  THFunction() = default;
  explicit THFunction(std::shared_ptr<const THSpace> s)
      : space(std::move(s)), coeffs(space->n_system, 0.0) {}

  double vcoeff(int node, int comp) const { return coeffs[space->vdof(node, comp)]; }
  double pcoeff(int vertex) const { return coeffs[space->pdof(vertex)]; }

  double pressure_mean() const {
    // exact integral of the P1 pressure: each triangle contributes
    // area/3 * sum of its vertex values
    double s = 0.0;
    for (int t = 0; t < space->mesh.n_triangles(); ++t) {
      const auto& tr = space->mesh.triangles[t];
      double a = space->mesh.signed_area(t);
      s += a / 3.0 * (pcoeff(tr[0]) + pcoeff(tr[1]) + pcoeff(tr[2]));
    }
    return s;
  }
};

struct FieldSample {
  Vec2 velocity;
  double grad[2][2];  // grad[i][j] = d v_i / d x_j
  double pressure = 0.0;
  double divergence = 0.0;
};

/// Exact polynomial evaluation at a reference point of an element.
inline FieldSample evaluate(const THFunction& f, int elem, double xi, double eta) {
  const THSpace& s = *f.space;
  ElemGeom g = ElemGeom::of(s.mesh, elem);
  double n2[6], gref[6][2], n1[3];
  basis::p2(xi, eta, n2);
  basis::p2_grad_ref(xi, eta, gref);
  basis::p1(xi, eta, n1);

  FieldSample out{};
  for (int k = 0; k < 6; ++k) {
    int node = s.vnode(elem, k);
    double gp[2];
    g.grad_to_phys(gref[k], gp);
    for (int c = 0; c < 2; ++c) {
      double coef = f.vcoeff(node, c);
      (c == 0 ? out.velocity.x : out.velocity.y) += coef * n2[k];
      out.grad[c][0] += coef * gp[0];
      out.grad[c][1] += coef * gp[1];
    }
  }
  out.divergence = out.grad[0][0] + out.grad[1][1];
  const auto& tr = s.mesh.triangles[elem];
  for (int k = 0; k < 3; ++k) out.pressure += f.pcoeff(tr[k]) * n1[k];
  return out;
}

/// Point evaluation through a locator (cross-mesh transfer). Clamps to the
/// nearest element when the point falls marginally outside the mesh.
inline FieldSample evaluate_at(const THFunction& f, const TriLocator& loc, Vec2 p) {
  int t = loc.locate(p);
  if (t < 0) t = loc.locate(p, 1e-6);
  if (t < 0) throw std::runtime_error("evaluate_at: point not located in mesh");
  ElemGeom g = ElemGeom::of(f.space->mesh, t);
  Vec2 d = p - g.p0;
  double xi = g.jinv[0][0] * d.x + g.jinv[0][1] * d.y;
  double eta = g.jinv[1][0] * d.x + g.jinv[1][1] * d.y;
  return evaluate(f, t, xi, eta);
}

/// Nodal interpolation; the Dirichlet mask zeroes boundary velocity nodes.
inline THFunction interpolate(const VecFn& velocity, const ScalFn& pressure,
                              const std::shared_ptr<const THSpace>& s) {
  THFunction f(s);
  for (int n = 0; n < s->n_vnodes; ++n) {
    Vec2 v = velocity ? velocity(s->vnode_xy[n]) : Vec2{};
    if (s->vnode_boundary[n]) v = {0.0, 0.0};
    if (!std::isfinite(v.x) || !std::isfinite(v.y))
      throw std::invalid_argument("interpolate: non-finite velocity value");
    f.coeffs[s->vdof(n, 0)] = v.x;
    f.coeffs[s->vdof(n, 1)] = v.y;
  }
  if (pressure)
    for (int v = 0; v < s->mesh.n_vertices(); ++v) {
      double pv = pressure(s->mesh.vertices[v]);
      if (!std::isfinite(pv))
        throw std::invalid_argument("interpolate: non-finite pressure value");
      f.coeffs[s->pdof(v)] = pv;
    }
  return f;
}

inline THFunction interpolate(const VecFn& velocity,
                              const std::shared_ptr<const THSpace>& s) {
  return interpolate(velocity, nullptr, s);
}

// ---------------------------------------------------------------------------
// L^p norms. Finite p by quadrature with the space's rule; p = inf as the
// max over quadrature points plus all Lagrange nodes (a lower bound of the
// true max, exact for the piecewise-polynomial part as h -> 0).
// ---------------------------------------------------------------------------

constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {

// magnitude(elem, xi, eta, x) -> |field(x)|
template <class F>
double norm_lp_impl(const THSpace& s, double p, int element, F&& magnitude) {
  if (!(p >= 1.0))
    throw std::invalid_argument("norm_lp: p must be in [1, inf]");
  const int t0 = element < 0 ? 0 : element;
  const int t1 = element < 0 ? s.n_elements() : element + 1;
  if (p == kInf) {
    double m = 0.0;
    for (int t = t0; t < t1; ++t) {
      ElemGeom g = ElemGeom::of(s.mesh, t);
      for (int q = 0; q < s.rule.size(); ++q)
        m = std::max(m, magnitude(t, s.rule.x[q], s.rule.y[q],
                                  g.map(s.rule.x[q], s.rule.y[q])));
      for (auto& nref : basis::p2_nodes_ref)
        m = std::max(m, magnitude(t, nref[0], nref[1], g.map(nref[0], nref[1])));
    }
    return m;
  }
  double acc = 0.0;
  for (int t = t0; t < t1; ++t) {
    ElemGeom g = ElemGeom::of(s.mesh, t);
    for (int q = 0; q < s.rule.size(); ++q) {
      double v = magnitude(t, s.rule.x[q], s.rule.y[q],
                           g.map(s.rule.x[q], s.rule.y[q]));
      acc += s.rule.w[q] * g.det * std::pow(v, p);
    }
  }
  return std::pow(acc, 1.0 / p);
}

}  // namespace detail

inline double norm_lp_velocity(const THFunction& f, double p,
                               const VecFn& exact = nullptr, int element = -1) {
  return detail::norm_lp_impl(*f.space, p, element,
                              [&](int t, double xi, double eta, Vec2 x) {
                                FieldSample fs = evaluate(f, t, xi, eta);
                                Vec2 d = fs.velocity;
                                if (exact) d = d - exact(x);
                                return norm(d);
                              });
}

inline double norm_lp_pressure(const THFunction& f, double p,
                               const ScalFn& exact = nullptr, int element = -1) {
  return detail::norm_lp_impl(*f.space, p, element,
                              [&](int t, double xi, double eta, Vec2 x) {
                                FieldSample fs = evaluate(f, t, xi, eta);
                                double d = fs.pressure;
                                if (exact) d -= exact(x);
                                return std::abs(d);
                              });
}

/// Frobenius norm of the velocity gradient, ||grad v||_{L^p}.
inline double norm_lp_grad(const THFunction& f, double p, int element = -1) {
  return detail::norm_lp_impl(*f.space, p, element,
                              [&](int t, double xi, double eta, Vec2) {
                                FieldSample fs = evaluate(f, t, xi, eta);
                                double s2 = 0.0;
                                for (int i = 0; i < 2; ++i)
                                  for (int j = 0; j < 2; ++j)
                                    s2 += fs.grad[i][j] * fs.grad[i][j];
                                return std::sqrt(s2);
                              });
}

inline double norm_lp_div(const THFunction& f, double p, int element = -1) {
  return detail::norm_lp_impl(*f.space, p, element,
                              [&](int t, double xi, double eta, Vec2) {
                                return std::abs(evaluate(f, t, xi, eta).divergence);
                              });
}

/// L^p norm of an analytic scalar field sampled with the space's rule.
inline double norm_lp_scalar_field(const THSpace& s, const ScalFn& field, double p,
                                   int element = -1) {
  return detail::norm_lp_impl(
      s, p, element,
      [&](int, double, double, Vec2 x) { return std::abs(field(x)); });
}

inline double domain_area(const THSpace& s) {
  double a = 0.0;
  for (int t = 0; t < s.mesh.n_triangles(); ++t) a += s.mesh.signed_area(t);
  return a;
}

}  // namespace nsbang
