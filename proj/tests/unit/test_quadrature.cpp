#include "test_support.hpp"

using namespace nsbang;

namespace {
double monomial_integral(int a, int b) {
  // int_T x^a y^b = a! b! / (a+b+2)!
  double num = 1.0;
  for (int k = 2; k <= a; ++k) num *= k;
  for (int k = 2; k <= b; ++k) num *= k;
  double den = 1.0;
  for (int k = 2; k <= a + b + 2; ++k) den *= k;
  return num / den;
}
}  // namespace

TEST_CASE("triangle rules: weight sums and positivity", "[quadrature]") {
  for (int deg = 1; deg <= 10; ++deg) {
    QuadRule r = triangle_rule(deg);
    CHECK(r.exact_degree >= deg);
    double ws = 0.0;
    for (int k = 0; k < r.size(); ++k) {
      CHECK(r.w[k] > 0.0);
      ws += r.w[k];
    }
    CHECK(std::abs(ws - 0.5) < 1e-14);
  }
  CHECK_THROWS_AS(triangle_rule(11), std::invalid_argument);
  CHECK_THROWS_AS(triangle_rule(0), std::invalid_argument);
}

TEST_CASE("triangle rules: monomial exactness sweep", "[quadrature]") {
  // spot values from the closed form
  CHECK(std::abs(monomial_integral(1, 0) - 1.0 / 6.0) < 1e-16);
  CHECK(std::abs(monomial_integral(2, 2) - 1.0 / 180.0) < 1e-16);

  CHECK(quadrature_exactness_residual(10) < 1e-13);

  QuadRule r6 = triangle_rule(6);
  double q = 0.0;
  for (int k = 0; k < r6.size(); ++k)
    q += r6.w[k] * r6.x[k] * r6.x[k] * r6.y[k] * r6.y[k];
  CHECK(std::abs(q - 1.0 / 180.0) < 1e-14);
}

TEST_CASE("edge rules: Gauss-Legendre on [0,1]", "[quadrature]") {
  for (int deg : {0, 1, 2, 3, 5, 9, 13}) {
    EdgeQuadRule r = edge_rule(deg);
    CHECK(r.exact_degree >= deg);
    double ws = 0.0;
    for (int k = 0; k < r.size(); ++k) {
      CHECK(r.w[k] > 0.0);
      CHECK(r.t[k] > 0.0);
      CHECK(r.t[k] < 1.0);
      ws += r.w[k];
    }
    CHECK(std::abs(ws - 1.0) < 1e-14);
    // full monomial sweep up to the exact degree: int t^a = 1/(a+1)
    for (int a = 0; a <= r.exact_degree; ++a) {
      double q = 0.0;
      for (int k = 0; k < r.size(); ++k) q += r.w[k] * std::pow(r.t[k], a);
      CHECK(std::abs(q - 1.0 / (a + 1)) < 1e-13);
    }
  }
  EdgeQuadRule r5 = edge_rule(5);
  double q2 = 0.0, q5 = 0.0;
  for (int k = 0; k < r5.size(); ++k) {
    q2 += r5.w[k] * r5.t[k] * r5.t[k];
    q5 += r5.w[k] * std::pow(r5.t[k], 5);
  }
  CHECK(std::abs(q2 - 1.0 / 3.0) < 1e-14);
  CHECK(std::abs(q5 - 1.0 / 6.0) < 1e-14);
}
