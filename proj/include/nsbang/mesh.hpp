#pragma once

// Conforming triangulations of convex polygons: structured generation,
// uniform (red) refinement, adaptive newest-vertex bisection with
// conformity closure, and edge topology for inter-element jump terms.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsbang {

struct Vec2 {
  double x = 0.0, y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
};

/// Conforming triangulation. Triangles are counterclockwise; the vertex
/// ordering carries the bisection rule: (t[0], t[1]) is the refinement
/// edge and t[2] the peak (newest vertex).
struct TriMesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<char> boundary_flags;  // per vertex
  int level = 0;

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_triangles() const { return static_cast<int>(triangles.size()); }

  double signed_area(int t) const {
    const auto& tr = triangles[t];
    return 0.5 * cross(vertices[tr[1]] - vertices[tr[0]],
                       vertices[tr[2]] - vertices[tr[0]]);
  }

  // h_T = diam(T) = longest edge for a triangle
  double diameter(int t) const {
    const auto& tr = triangles[t];
    double h = 0.0;
    for (int k = 0; k < 3; ++k)
      h = std::max(h, norm(vertices[tr[(k + 1) % 3]] - vertices[tr[k]]));
    return h;
  }

  double h_max() const {
    double h = 0.0;
    for (int t = 0; t < n_triangles(); ++t) h = std::max(h, diameter(t));
    return h;
  }

  double h_min() const {
    double h = std::numeric_limits<double>::max();
    for (int t = 0; t < n_triangles(); ++t) h = std::min(h, diameter(t));
    return h;
  }

  double min_angle() const {
    double amin = std::numeric_limits<double>::max();
    for (const auto& tr : triangles) {
      for (int k = 0; k < 3; ++k) {
        Vec2 u = vertices[tr[(k + 1) % 3]] - vertices[tr[k]];
        Vec2 v = vertices[tr[(k + 2) % 3]] - vertices[tr[k]];
        double ang = std::atan2(std::abs(cross(u, v)), dot(u, v));
        amin = std::min(amin, ang);
      }
    }
    return amin;
  }
};

struct EdgeSet {
  struct Edge {
    int a = -1, b = -1;         // vertex indices, a < b
    int tri[2] = {-1, -1};      // adjacent triangles (tri[1] = -1 on boundary)
    Vec2 normal;                // unit, oriented outward from tri[0]
    double length = 0.0;
    bool interior = false;
  };
  std::vector<Edge> edges;
  // per triangle: global edge index of local edge k = (t[k], t[(k+1)%3])
  std::vector<std::array<int, 3>> triangle_edges;

  int n_edges() const { return static_cast<int>(edges.size()); }
  int n_interior() const {
    int c = 0;
    for (const auto& e : edges) c += e.interior ? 1 : 0;
    return c;
  }
};

inline EdgeSet edge_topology(const TriMesh& m) {
  EdgeSet es;
  es.triangle_edges.resize(m.n_triangles());
  std::map<std::pair<int, int>, int> lookup;
  for (int t = 0; t < m.n_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    for (int k = 0; k < 3; ++k) {
      int p = tr[k], q = tr[(k + 1) % 3];
      auto key = std::minmax(p, q);
      auto it = lookup.find(key);
      if (it == lookup.end()) {
        EdgeSet::Edge e;
        e.a = key.first;
        e.b = key.second;
        e.tri[0] = t;
        Vec2 d = m.vertices[q] - m.vertices[p];
        e.length = norm(d);
        // outward normal of the first adjacent triangle
        e.normal = {d.y / e.length, -d.x / e.length};
        lookup.emplace(key, es.n_edges());
        es.triangle_edges[t][k] = es.n_edges();
        es.edges.push_back(e);
      } else {
        EdgeSet::Edge& e = es.edges[it->second];
        if (e.tri[1] != -1)
          throw std::runtime_error("edge_topology: non-manifold edge");
        e.tri[1] = t;
        e.interior = true;
        es.triangle_edges[t][k] = it->second;
      }
    }
  }
  return es;
}

namespace detail {

// Rotate triangle vertex order (orientation preserved) so that the longest
// edge becomes (t[0], t[1]); seeds the newest-vertex bisection labels.
inline std::array<int, 3> label_longest_edge(const std::vector<Vec2>& pts,
                                             std::array<int, 3> t) {
  double best = -1.0;
  int kbest = 0;
  for (int k = 0; k < 3; ++k) {
    double len = norm(pts[t[(k + 1) % 3]] - pts[t[k]]);
    if (len > best + 1e-15 * (1.0 + best)) {
      best = len;
      kbest = k;
    }
  }
  return {t[kbest], t[(kbest + 1) % 3], t[(kbest + 2) % 3]};
}

inline void recompute_boundary_flags(TriMesh& m) {
  EdgeSet es = edge_topology(m);
  m.boundary_flags.assign(m.n_vertices(), 0);
  for (const auto& e : es.edges) {
    if (!e.interior) {
      m.boundary_flags[e.a] = 1;
      m.boundary_flags[e.b] = 1;
    }
  }
}

}  // namespace detail

/// Structured triangulation of an axis-aligned rectangle, each cell split
/// along the lower-left to upper-right diagonal.
inline TriMesh build_structured(int nx, int ny, Rect r = {}) {
  if (nx < 1 || ny < 1)
    throw std::invalid_argument("build_structured: nx, ny must be >= 1");
  TriMesh m;
  const double hx = (r.x1 - r.x0) / nx, hy = (r.y1 - r.y0) / ny;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      m.vertices.push_back({r.x0 + i * hx, r.y0 + j * hy});
  auto vid = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      int v00 = vid(i, j), v10 = vid(i + 1, j);
      int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      // diagonal v00-v11; refinement edge = the diagonal
      m.triangles.push_back({v11, v00, v10});
      m.triangles.push_back({v00, v11, v01});
    }
  }
  detail::recompute_boundary_flags(m);
  return m;
}

/// Red refinement: every triangle split into 4 congruent children at the
/// edge midpoints. Halves h exactly and preserves all angles.
inline TriMesh refine_uniform(const TriMesh& m) {
  TriMesh out;
  out.vertices = m.vertices;
  out.level = m.level + 1;
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int p, int q) {
    auto key = std::minmax(p, q);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    int idx = out.n_vertices();
    out.vertices.push_back(0.5 * (m.vertices[p] + m.vertices[q]));
    midpoint.emplace(key, idx);
    return idx;
  };
  for (const auto& tr : m.triangles) {
    int a = tr[0], b = tr[1], c = tr[2];
    int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    for (auto child : {std::array<int, 3>{a, ab, ca},
                       std::array<int, 3>{ab, b, bc},
                       std::array<int, 3>{ca, bc, c},
                       std::array<int, 3>{ab, bc, ca}})
      out.triangles.push_back(detail::label_longest_edge(out.vertices, child));
  }
  detail::recompute_boundary_flags(out);
  return out;
}

/// Newest-vertex bisection of the marked triangles plus conformity closure.
/// An edge is split iff it is the refinement edge of some triangle scheduled
/// for bisection; the closure loop extends the split set until every
/// triangle touching a split edge has its own refinement edge split. Each
/// triangle then ends up bisected into 2, 3, or 4 children, and no child
/// edge is ever split, so the result is conforming by construction.
inline TriMesh refine_marked(const TriMesh& m, const std::set<int>& marked) {
  for (int t : marked)
    if (t < 0 || t >= m.n_triangles())
      throw std::invalid_argument("refine_marked: triangle index out of range");
  if (marked.empty()) return m;

  EdgeSet es = edge_topology(m);
  std::vector<char> split(es.n_edges(), 0);
  for (int t : marked) split[es.triangle_edges[t][0]] = 1;
  for (bool changed = true; changed;) {
    changed = false;
    for (int t = 0; t < m.n_triangles(); ++t) {
      const auto& te = es.triangle_edges[t];
      if ((split[te[0]] | split[te[1]] | split[te[2]]) && !split[te[0]]) {
        split[te[0]] = 1;
        changed = true;
      }
    }
  }

  TriMesh out;
  out.vertices = m.vertices;
  out.level = m.level + 1;
  std::vector<int> edge_mid(es.n_edges(), -1);
  for (int e = 0; e < es.n_edges(); ++e) {
    if (split[e]) {
      edge_mid[e] = out.n_vertices();
      out.vertices.push_back(
          0.5 * (m.vertices[es.edges[e].a] + m.vertices[es.edges[e].b]));
    }
  }

  // bisect (v0,v1,v2) at the midpoint of its refinement edge (v0,v1);
  // both children get the new vertex as peak
  auto bisect_once = [&](std::array<int, 3> t, int mid_v,
                         std::array<int, 3>& c0, std::array<int, 3>& c1) {
    c0 = {t[2], t[0], mid_v};
    c1 = {t[1], t[2], mid_v};
  };

  for (int t = 0; t < m.n_triangles(); ++t) {
    const auto& te = es.triangle_edges[t];
    if (!split[te[0]]) {
      out.triangles.push_back(m.triangles[t]);
      continue;
    }
    std::array<int, 3> c0, c1;
    bisect_once(m.triangles[t], edge_mid[te[0]], c0, c1);
    // child refinement edges are the parent's other two original edges:
    // c0 -> local edge 2 (t2,t0), c1 -> local edge 1 (t1,t2)
    for (auto [child, parent_edge] : {std::pair{c0, te[2]}, std::pair{c1, te[1]}}) {
      if (split[parent_edge]) {
        std::array<int, 3> g0, g1;
        bisect_once(child, edge_mid[parent_edge], g0, g1);
        out.triangles.push_back(g0);
        out.triangles.push_back(g1);
      } else {
        out.triangles.push_back(child);
      }
    }
  }
  detail::recompute_boundary_flags(out);
  return out;
}

/// Structural checks used by tests and the check-invariants CLI command.
/// With exhaustive=true also runs the O(V*E) hanging-node scan.
struct MeshCheck {
  bool ok = true;
  std::string message;
};

inline MeshCheck validate_mesh(const TriMesh& m, bool exhaustive = false) {
  auto fail = [](std::string msg) { return MeshCheck{false, std::move(msg)}; };
  for (int t = 0; t < m.n_triangles(); ++t)
    if (!(m.signed_area(t) > 0.0))
      return fail("nonpositive area in triangle " + std::to_string(t));

  EdgeSet es;
  try {
    es = edge_topology(m);
  } catch (const std::exception& e) {
    return fail(e.what());
  }
  int nb = 0, ni = 0;
  for (const auto& e : es.edges) {
    (e.interior ? ni : nb)++;
    if (std::abs(norm(e.normal) - 1.0) > 1e-14) return fail("non-unit normal");
  }
  if (3 * m.n_triangles() != 2 * ni + nb) return fail("handshake identity violated");
  // Euler relation for a simply connected polygon
  if (m.n_vertices() - es.n_edges() + m.n_triangles() != 1)
    return fail("Euler relation violated");

  if (exhaustive) {
    // no vertex may sit in the open interior of an edge (hanging node)
    for (const auto& e : es.edges) {
      Vec2 pa = m.vertices[e.a], pb = m.vertices[e.b];
      for (int v = 0; v < m.n_vertices(); ++v) {
        if (v == e.a || v == e.b) continue;
        Vec2 p = m.vertices[v];
        double c = cross(pb - pa, p - pa);
        if (std::abs(c) > 1e-12 * e.length) continue;
        double s = dot(p - pa, pb - pa) / (e.length * e.length);
        if (s > 1e-12 && s < 1.0 - 1e-12)
          return fail("hanging node: vertex " + std::to_string(v));
      }
    }
    // pairwise: two triangles sharing >= 2 vertices must share a full edge,
    // which the edge/handshake bookkeeping above already certifies; here we
    // additionally verify no duplicate triangles
    std::set<std::array<int, 3>> seen;
    for (auto tr : m.triangles) {
      std::sort(tr.begin(), tr.end());
      if (!seen.insert(tr).second) return fail("duplicate triangle");
    }
  }
  return {};
}

/// Uniform-bin point locator; returns the index of a triangle containing
/// the query point (ties on shared edges resolved arbitrarily), or -1.
class TriLocator {
 public:
  explicit TriLocator(const TriMesh& m) : mesh_(&m) {
    double inf = std::numeric_limits<double>::max();
    xmin_ = {inf, inf};
    xmax_ = {-inf, -inf};
    for (const auto& v : m.vertices) {
      xmin_ = {std::min(xmin_.x, v.x), std::min(xmin_.y, v.y)};
      xmax_ = {std::max(xmax_.x, v.x), std::max(xmax_.y, v.y)};
    }
    nb_ = std::max(1, static_cast<int>(std::sqrt(double(m.n_triangles()))));
    bins_.resize(static_cast<size_t>(nb_) * nb_);
    for (int t = 0; t < m.n_triangles(); ++t) {
      const auto& tr = m.triangles[t];
      Vec2 lo = {inf, inf}, hi = {-inf, -inf};
      for (int k = 0; k < 3; ++k) {
        const Vec2& p = m.vertices[tr[k]];
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
      }
      int i0 = bin_of(lo.x, xmin_.x, xmax_.x), i1 = bin_of(hi.x, xmin_.x, xmax_.x);
      int j0 = bin_of(lo.y, xmin_.y, xmax_.y), j1 = bin_of(hi.y, xmin_.y, xmax_.y);
      for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i)
          bins_[static_cast<size_t>(j) * nb_ + i].push_back(t);
    }
  }

  int locate(Vec2 p, double tol = 1e-12) const {
    int i = bin_of(p.x, xmin_.x, xmax_.x), j = bin_of(p.y, xmin_.y, xmax_.y);
    for (int t : bins_[static_cast<size_t>(j) * nb_ + i])
      if (contains(t, p, tol)) return t;
    // fallback for points straddling bin boundaries due to roundoff
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        int ii = std::clamp(i + di, 0, nb_ - 1), jj = std::clamp(j + dj, 0, nb_ - 1);
        for (int t : bins_[static_cast<size_t>(jj) * nb_ + ii])
          if (contains(t, p, tol)) return t;
      }
    return -1;
  }

 private:
  int bin_of(double v, double lo, double hi) const {
    double s = (v - lo) / std::max(hi - lo, 1e-300);
    return std::clamp(static_cast<int>(s * nb_), 0, nb_ - 1);
  }
  bool contains(int t, Vec2 p, double tol) const {
    const auto& tr = mesh_->triangles[t];
    double a2 = 2.0 * mesh_->signed_area(t);
    for (int k = 0; k < 3; ++k) {
      Vec2 e0 = mesh_->vertices[tr[k]], e1 = mesh_->vertices[tr[(k + 1) % 3]];
      if (cross(e1 - e0, p - e0) < -tol * a2) return false;
    }
    return true;
  }

  const TriMesh* mesh_;
  Vec2 xmin_, xmax_;
  int nb_ = 1;
  std::vector<std::vector<int>> bins_;
};

}  // namespace nsbang
