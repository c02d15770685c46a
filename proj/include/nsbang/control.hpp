#pragma once

// Variational-discretization control representation: the control is never
// interpolated, it exists only through its values at the quadrature points
// of every element (the only places it is ever paired with test functions).

#include <stdexcept>
#include <vector>

#include "nsbang/spaces.hpp"

namespace nsbang {

struct ControlBounds {
  Vec2 a{-1.0, -1.0};
  Vec2 b{1.0, 1.0};

  double lower(int c) const { return c == 0 ? a.x : a.y; }
  double upper(int c) const { return c == 0 ? b.x : b.y; }

  void check() const {
    if (!(a.x < b.x) || !(a.y < b.y))
      throw std::invalid_argument("ControlBounds: need a_i < b_i componentwise");
  }
};

struct QuadControl {
  int n_elems = 0;
  int n_qp = 0;
  std::vector<double> vals;  // [elem][qp][comp]

  QuadControl() = default;
  QuadControl(int elems, int qp) : n_elems(elems), n_qp(qp),
                                   vals(static_cast<size_t>(elems) * qp * 2, 0.0) {}

  static QuadControl zeros(const THSpace& s) {
    return QuadControl(s.n_elements(), s.rule.size());
  }

  static QuadControl constant(const THSpace& s, Vec2 c) {
    QuadControl u = zeros(s);
    for (int e = 0; e < u.n_elems; ++e)
      for (int q = 0; q < u.n_qp; ++q) {
        u.at(e, q, 0) = c.x;
        u.at(e, q, 1) = c.y;
      }
    return u;
  }

  static QuadControl from_function(const THSpace& s, const VecFn& f) {
    QuadControl u = zeros(s);
    for (int e = 0; e < u.n_elems; ++e) {
      ElemGeom g = ElemGeom::of(s.mesh, e);
      for (int q = 0; q < u.n_qp; ++q) {
        Vec2 v = f(g.map(s.rule.x[q], s.rule.y[q]));
        u.at(e, q, 0) = v.x;
        u.at(e, q, 1) = v.y;
      }
    }
    return u;
  }

  double& at(int e, int q, int c) {
    return vals[(static_cast<size_t>(e) * n_qp + q) * 2 + c];
  }
  double at(int e, int q, int c) const {
    return vals[(static_cast<size_t>(e) * n_qp + q) * 2 + c];
  }

  bool layout_matches(const THSpace& s) const {
    return n_elems == s.n_elements() && n_qp == s.rule.size();
  }
};

/// Quadrature L^p distance between two controls (p = 1 is the natural
/// error norm for bang-bang controls).
inline double control_lp_distance(const THSpace& s, const QuadControl& u,
                                  const QuadControl& v, double p) {
  if (!u.layout_matches(s) || !v.layout_matches(s))
    throw std::invalid_argument("control_lp_distance: layout mismatch");
  double acc = 0.0;
  for (int e = 0; e < u.n_elems; ++e) {
    ElemGeom g = ElemGeom::of(s.mesh, e);
    for (int q = 0; q < u.n_qp; ++q) {
      double w = s.rule.w[q] * g.det;
      for (int c = 0; c < 2; ++c)
        acc += w * std::pow(std::abs(u.at(e, q, c) - v.at(e, q, c)), p);
    }
  }
  return std::pow(acc, 1.0 / p);
}

/// Quadrature measure of points where the control is strictly inside the
/// bounds in some component (distance to both bounds above tol).
inline double interior_measure(const THSpace& s, const QuadControl& u,
                               const ControlBounds& bounds, double tol) {
  double acc = 0.0;
  for (int e = 0; e < u.n_elems; ++e) {
    ElemGeom g = ElemGeom::of(s.mesh, e);
    for (int q = 0; q < u.n_qp; ++q) {
      bool interior = false;
      for (int c = 0; c < 2; ++c) {
        double v = u.at(e, q, c);
        if (v - bounds.lower(c) > tol && bounds.upper(c) - v > tol) interior = true;
      }
      if (interior) acc += s.rule.w[q] * g.det;
    }
  }
  return acc;
}

}  // namespace nsbang
