#include "test_support.hpp"

using namespace nsbang;

TEST_CASE("triplet assembly semantics", "[sparse]") {
  CsrMatrix m = from_triplets(2, {{0, 0, 1.0}, {0, 0, 1.0}});
  CHECK(m.nnz() == 1);
  CHECK(m.vals[0] == 2.0);

  CsrMatrix z = from_triplets(3, {});
  CHECK(z.nnz() == 0);
  auto y = z.apply({1.0, 2.0, 3.0});
  CHECK(y == std::vector<double>{0.0, 0.0, 0.0});

  CHECK_THROWS_AS(from_triplets(2, {{0, 2, 1.0}}), std::out_of_range);

  // random 5x5 vs dense reconstruction
  double dense[5][5] = {};
  std::vector<Triplet> ts;
  for (int k = 0; k < 40; ++k) {
    int i = static_cast<int>(test::urand(0, 4.999));
    int j = static_cast<int>(test::urand(0, 4.999));
    double v = test::urand();
    dense[i][j] += v;
    ts.push_back({i, j, v});
  }
  CsrMatrix r = from_triplets(5, ts);
  for (int i = 0; i < 5; ++i) {
    // column indices sorted and unique
    for (int k = r.row_offsets[i] + 1; k < r.row_offsets[i + 1]; ++k)
      CHECK(r.cols[k] > r.cols[k - 1]);
    std::vector<double> e(5, 0.0);
    for (int k = r.row_offsets[i]; k < r.row_offsets[i + 1]; ++k)
      e[r.cols[k]] = r.vals[k];
    for (int j = 0; j < 5; ++j) CHECK(e[j] == Catch::Approx(dense[i][j]).margin(1e-15));
  }
}

TEST_CASE("direct solves", "[sparse]") {
  CsrMatrix eye = from_triplets(3, {{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}});
  auto x = solve_direct(eye, {3.0, -1.0, 2.0});
  CHECK(x[0] == Catch::Approx(3.0).margin(1e-14));
  CHECK(x[1] == Catch::Approx(-1.0).margin(1e-14));
  CHECK(x[2] == Catch::Approx(2.0).margin(1e-14));

  CsrMatrix a = from_triplets(2, {{0, 0, 2.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 2.0}});
  auto x2 = solve_direct(a, {3.0, 3.0});
  CHECK(x2[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(x2[1] == Catch::Approx(1.0).margin(1e-12));

  CsrMatrix sing =
      from_triplets(2, {{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}});
  CHECK_THROWS_AS(solve_direct(sing, {1.0, 2.0}), SingularMatrix);
}

TEST_CASE("random systems: residual bound and matvec oracle", "[sparse]") {
  for (int rep = 0; rep < 50; ++rep) {
    int n = 20 + static_cast<int>(test::urand(0, 180));
    std::vector<Triplet> ts;
    std::vector<std::vector<double>> dense(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
      double rowsum = 0.0;
      for (int k = 0; k < 6; ++k) {
        int j = static_cast<int>(test::urand(0, n - 0.001));
        double v = test::urand();
        ts.push_back({i, j, v});
        dense[i][j] += v;
        rowsum += std::abs(v);
      }
      // diagonal dominance keeps the matrix comfortably nonsingular
      ts.push_back({i, i, rowsum + 1.0});
      dense[i][i] += rowsum + 1.0;
    }
    CsrMatrix a = from_triplets(n, ts);

    std::vector<double> xref(n), b(n, 0.0);
    for (int i = 0; i < n; ++i) xref[i] = test::urand();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) b[i] += dense[i][j] * xref[j];

    // matvec against the dense oracle
    auto bx = a.apply(xref);
    double scale = 0.0;
    for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(b[i]));
    for (int i = 0; i < n; ++i) CHECK(std::abs(bx[i] - b[i]) <= 1e-14 * (1.0 + scale));

    auto x = solve_direct(a, b);  // residual bound enforced inside
    double err = 0.0;
    for (int i = 0; i < n; ++i) err = std::max(err, std::abs(x[i] - xref[i]));
    CHECK(err < 1e-8);
  }
}
