#include "test_support.hpp"

using namespace nsbang;

TEST_CASE("structured mesh counts and invariants", "[mesh]") {
  TriMesh m1 = build_structured(1, 1);
  CHECK(m1.n_vertices() == 4);
  CHECK(m1.n_triangles() == 2);

  TriMesh m2 = build_structured(2, 2);
  CHECK(m2.n_vertices() == 9);
  CHECK(m2.n_triangles() == 8);

  for (const TriMesh* m : {&m1, &m2}) {
    MeshCheck c = validate_mesh(*m, true);
    INFO(c.message);
    CHECK(c.ok);
  }
  CHECK_THROWS_AS(build_structured(0, 3), std::invalid_argument);
}

TEST_CASE("edge topology of the two-triangle square", "[mesh]") {
  TriMesh m = build_structured(1, 1);
  EdgeSet es = edge_topology(m);
  CHECK(es.n_edges() == 5);
  CHECK(es.n_interior() == 1);
  // handshake: 3 T = 2 interior + boundary
  CHECK(3 * m.n_triangles() == 2 * es.n_interior() +
                                   (es.n_edges() - es.n_interior()));
  for (const auto& e : es.edges) {
    CHECK(std::abs(norm(e.normal) - 1.0) < 1e-14);
    if (e.interior) {
      CHECK(e.tri[0] >= 0);
      CHECK(e.tri[1] >= 0);
    } else {
      CHECK(e.tri[1] == -1);
    }
  }
}

TEST_CASE("Euler relation across refinements", "[mesh]") {
  TriMesh m = build_structured(3, 2, {0.0, 0.0, 3.0, 1.0});
  for (int lvl = 0; lvl < 3; ++lvl) {
    EdgeSet es = edge_topology(m);
    CHECK(m.n_vertices() - es.n_edges() + m.n_triangles() == 1);
    m = refine_uniform(m);
  }
}

TEST_CASE("red refinement: counts, h halving, edge subdivision", "[mesh]") {
  TriMesh m = build_structured(1, 1);
  TriMesh r = refine_uniform(m);
  CHECK(r.n_triangles() == 8);
  CHECK(r.n_vertices() == 9);
  CHECK(r.level == m.level + 1);

  TriMesh m4 = build_structured(4, 4);
  TriMesh r4 = refine_uniform(m4);
  CHECK(r4.n_triangles() == 4 * m4.n_triangles());
  // dyadic coordinates: the diameter halves exactly
  CHECK(r4.h_max() == 0.5 * m4.h_max());

  // every interior edge of the parent splits into two child edges
  EdgeSet pes = edge_topology(m4);
  EdgeSet ces = edge_topology(r4);
  std::set<std::pair<int, int>> child_edges;
  for (const auto& e : ces.edges) child_edges.insert({e.a, e.b});
  auto vertex_at = [&](Vec2 p) {
    for (int v = 0; v < r4.n_vertices(); ++v)
      if (norm(r4.vertices[v] - p) < 1e-13) return v;
    return -1;
  };
  for (const auto& e : pes.edges) {
    if (!e.interior) continue;
    int mid = vertex_at(0.5 * (m4.vertices[e.a] + m4.vertices[e.b]));
    REQUIRE(mid >= 0);
    auto k1 = std::minmax(e.a, mid), k2 = std::minmax(mid, e.b);
    CHECK(child_edges.count({k1.first, k1.second}) == 1);
    CHECK(child_edges.count({k2.first, k2.second}) == 1);
  }
}

TEST_CASE("marked refinement: closure, conformity, angles", "[mesh]") {
  TriMesh m = build_structured(2, 2);

  TriMesh same = refine_marked(m, {});
  CHECK(same.n_triangles() == m.n_triangles());
  CHECK(same.n_vertices() == m.n_vertices());

  std::set<int> all;
  for (int t = 0; t < m.n_triangles(); ++t) all.insert(t);
  TriMesh rall = refine_marked(m, all);
  CHECK(rall.n_triangles() >= 2 * m.n_triangles());
  MeshCheck c = validate_mesh(rall, true);
  INFO(c.message);
  CHECK(c.ok);

  // random marks, several rounds; conformity and the min-angle bound
  double angle0 = m.min_angle();
  TriMesh cur = m;
  for (int round = 0; round < 5; ++round) {
    std::set<int> marks;
    for (int j = 0; j < std::max(1, cur.n_triangles() / 3); ++j)
      marks.insert(static_cast<int>(test::urand(0, cur.n_triangles() - 0.001)));
    cur = refine_marked(cur, marks);
    MeshCheck cc = validate_mesh(cur, cur.n_triangles() <= 4000);
    INFO(cc.message);
    REQUIRE(cc.ok);
    CHECK(cur.min_angle() >= 0.5 * angle0 - 1e-12);
  }
  CHECK_THROWS_AS(refine_marked(m, {999}), std::invalid_argument);
}

TEST_CASE("point locator finds containing triangles", "[mesh]") {
  TriMesh m = refine_uniform(build_structured(3, 3));
  TriLocator loc(m);
  for (int k = 0; k < 200; ++k) {
    Vec2 p = test::random_point();
    int t = loc.locate(p);
    REQUIRE(t >= 0);
    // barycentric containment
    const auto& tr = m.triangles[t];
    double a = 2.0 * m.signed_area(t);
    for (int e = 0; e < 3; ++e) {
      Vec2 p0 = m.vertices[tr[e]], p1 = m.vertices[tr[(e + 1) % 3]];
      CHECK(cross(p1 - p0, p - p0) >= -1e-10 * a);
    }
  }
}
