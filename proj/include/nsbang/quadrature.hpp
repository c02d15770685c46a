#pragma once

// Fixed-degree quadrature on the reference triangle T^ = {x,y >= 0, x+y <= 1}
// and Gauss-Legendre rules on [0,1] for edge integrals.

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace nsbang {

struct QuadRule {
  std::vector<double> x, y;  // reference coordinates
  std::vector<double> w;     // weights, sum = 1/2
  int exact_degree = 0;

  int size() const { return static_cast<int>(w.size()); }
};

struct EdgeQuadRule {
  std::vector<double> t;  // points on [0,1]
  std::vector<double> w;  // weights, sum = 1
  int exact_degree = 0;

  int size() const { return static_cast<int>(w.size()); }
};

namespace detail {

inline void push_orbit3(QuadRule& q, double a, double b, double w) {
  // permutations of barycentric (a,b,b); (x,y) = (l1,l2)
  q.x.insert(q.x.end(), {b, a, b});
  q.y.insert(q.y.end(), {b, b, a});
  q.w.insert(q.w.end(), 3, w);
}

inline void push_orbit6(QuadRule& q, double a, double b, double c, double w) {
  const double l[6][2] = {{b, c}, {c, b}, {a, c}, {c, a}, {a, b}, {b, a}};
  for (auto& p : l) {
    q.x.push_back(p[0]);
    q.y.push_back(p[1]);
    q.w.push_back(w);
  }
}

// Gauss-Legendre on [0,1]: nodes by Newton iteration on P_m.
inline void gauss_legendre01(int m, std::vector<double>& t, std::vector<double>& w) {
  t.resize(m);
  w.resize(m);
  for (int i = 0; i < m; ++i) {
    // initial guess on [-1,1]
    double x = std::cos(M_PI * (i + 0.75) / (m + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= m; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = m * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= m; ++k) {
      double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = m * (x * p1 - p0) / (x * x - 1.0);
    t[i] = 0.5 * (x + 1.0);
    w[i] = 1.0 / ((1.0 - x * x) * dp * dp);  // already scaled for [0,1]
  }
}

// Symmetrized conical-product rule. The collapsed map raises the t-degree
// of the integrand by one, so m Gauss points per direction integrate total
// degree 2m-2 exactly. All weights positive by construction.
inline QuadRule product_rule(int degree) {
  int m = (degree + 3) / 2;
  std::vector<double> gt, gw;
  gauss_legendre01(m, gt, gw);
  QuadRule raw;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      double s = gt[i], t = gt[j];
      raw.x.push_back(s * (1.0 - t));
      raw.y.push_back(t);
      raw.w.push_back(gw[i] * gw[j] * (1.0 - t));
    }
  }
  QuadRule q;
  q.exact_degree = 2 * m - 2;
  for (int k = 0; k < raw.size(); ++k) {
    double l1 = raw.x[k], l2 = raw.y[k], l0 = 1.0 - l1 - l2;
    const double bary[6][2] = {{l1, l2}, {l2, l1}, {l0, l2},
                               {l2, l0}, {l0, l1}, {l1, l0}};
    for (auto& p : bary) {
      q.x.push_back(p[0]);
      q.y.push_back(p[1]);
      q.w.push_back(raw.w[k] / 6.0);
    }
  }
  return q;
}

}  // namespace detail

/// Symmetric positive-weight rule on the reference triangle with
/// exact_degree >= degree. Degrees 1..6 use compact Dunavant tables,
/// 7..10 a symmetrized Gauss product rule.
inline QuadRule triangle_rule(int degree) {
  if (degree < 1 || degree > 10)
    throw std::invalid_argument("triangle_rule: degree must be in [1,10]");
  QuadRule q;
  switch (degree) {
    case 1:
      q.x = {1.0 / 3.0};
      q.y = {1.0 / 3.0};
      q.w = {0.5};
      q.exact_degree = 1;
      return q;
    case 2:
      detail::push_orbit3(q, 2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0);
      q.exact_degree = 2;
      return q;
    case 3:
    case 4:
      detail::push_orbit3(q, 0.108103018168070, 0.445948490915965,
                          0.5 * 0.223381589678011);
      detail::push_orbit3(q, 0.816847572980459, 0.091576213509771,
                          0.5 * 0.109951743655322);
      q.exact_degree = 4;
      return q;
    case 5: {
      const double s15 = std::sqrt(15.0);
      q.x = {1.0 / 3.0};
      q.y = {1.0 / 3.0};
      q.w = {0.5 * 9.0 / 40.0};
      double b1 = (6.0 + s15) / 21.0, b2 = (6.0 - s15) / 21.0;
      detail::push_orbit3(q, 1.0 - 2.0 * b1, b1, 0.5 * (155.0 + s15) / 1200.0);
      detail::push_orbit3(q, 1.0 - 2.0 * b2, b2, 0.5 * (155.0 - s15) / 1200.0);
      q.exact_degree = 5;
      return q;
    }
    case 6:
      detail::push_orbit3(q, 0.501426509658179, 0.249286745170910,
                          0.5 * 0.116786275726379);
      detail::push_orbit3(q, 0.873821971016996, 0.063089014491502,
                          0.5 * 0.050844906370207);
      detail::push_orbit6(q, 0.053145049844817, 0.310352451033784,
                          0.636502499121399, 0.5 * 0.082851075618374);
      q.exact_degree = 6;
      return q;
    default:
      return detail::product_rule(degree);
  }
}

/// Gauss-Legendre rule on [0,1] with exact_degree >= degree.
inline EdgeQuadRule edge_rule(int degree) {
  if (degree < 0 || degree > 50)
    throw std::invalid_argument("edge_rule: unsupported degree");
  int m = degree / 2 + 1;
  EdgeQuadRule q;
  detail::gauss_legendre01(m, q.t, q.w);
  q.exact_degree = 2 * m - 1;
  return q;
}

}  // namespace nsbang
