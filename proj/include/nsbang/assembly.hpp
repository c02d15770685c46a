#pragma once

// Element-loop assembly of the bilinear/trilinear forms of the discrete
// Navier-Stokes systems: viscous block, pressure-divergence coupling,
// velocity mass, convection N(w), Newton derivative N'(w), the adjoint
// operator, and quadrature load vectors.
//
// Blocks are stored raw (no boundary elimination); compose_system applies
// the symmetric identity-pinning of Dirichlet dofs when building a solvable
// matrix. Element loops are sequential and deterministic.

#include "nsbang/control.hpp"
#include "nsbang/sparse.hpp"

namespace nsbang {

// Per-quadrature-point reference basis tables shared by all assemblers.
struct BasisTable {
  int nq = 0;
  std::vector<std::array<double, 6>> n2;       // P2 values
  std::vector<std::array<double, 12>> g2ref;   // P2 reference gradients (k*2+d)
  std::vector<std::array<double, 3>> n1;       // P1 values

  explicit BasisTable(const QuadRule& r) : nq(r.size()), n2(nq), g2ref(nq), n1(nq) {
    for (int q = 0; q < nq; ++q) {
      double n[6], g[6][2], l[3];
      basis::p2(r.x[q], r.y[q], n);
      basis::p2_grad_ref(r.x[q], r.y[q], g);
      basis::p1(r.x[q], r.y[q], l);
      for (int k = 0; k < 6; ++k) {
        n2[q][k] = n[k];
        g2ref[q][k * 2] = g[k][0];
        g2ref[q][k * 2 + 1] = g[k][1];
      }
      for (int k = 0; k < 3; ++k) n1[q][k] = l[k];
    }
  }
};

struct SystemBlocks {
  CsrMatrix A;                   // nu * (grad phi_j, grad phi_i), velocity block
  CsrMatrix B;                   // (psi_q, div phi_j) at (pressure row, velocity col)
  CsrMatrix M;                   // velocity mass
  std::vector<double> mean_row;  // integral of each pressure basis function
  double nu = 1.0;
};

namespace detail {

inline const BasisTable& basis_table(const THSpace& s) {
  thread_local int cached_nq = -1;
  thread_local std::unique_ptr<BasisTable> table;
  if (!table || cached_nq != s.rule.size()) {
    table = std::make_unique<BasisTable>(s.rule);
    cached_nq = s.rule.size();
  }
  return *table;
}

// physical gradients of the 6 P2 basis functions at every qp of an element
inline void phys_grads(const ElemGeom& g, const BasisTable& bt,
                       std::vector<std::array<double, 12>>& gp) {
  gp.resize(bt.nq);
  for (int q = 0; q < bt.nq; ++q)
    for (int k = 0; k < 6; ++k) {
      const double* gr = &bt.g2ref[q][k * 2];
      double out[2];
      g.grad_to_phys(gr, out);
      gp[q][k * 2] = out[0];
      gp[q][k * 2 + 1] = out[1];
    }
}

// velocity value and gradient of a coefficient field at one qp
inline void eval_velocity(const THSpace& s, const THFunction& w, int t,
                          const BasisTable& bt,
                          const std::vector<std::array<double, 12>>& gp, int q,
                          Vec2& val, double grad[2][2]) {
  val = {0.0, 0.0};
  grad[0][0] = grad[0][1] = grad[1][0] = grad[1][1] = 0.0;
  for (int k = 0; k < 6; ++k) {
    int node = s.vnode(t, k);
    double cx = w.vcoeff(node, 0), cy = w.vcoeff(node, 1);
    val.x += cx * bt.n2[q][k];
    val.y += cy * bt.n2[q][k];
    grad[0][0] += cx * gp[q][k * 2];
    grad[0][1] += cx * gp[q][k * 2 + 1];
    grad[1][0] += cy * gp[q][k * 2];
    grad[1][1] += cy * gp[q][k * 2 + 1];
  }
}

}  // namespace detail

/// Viscous block, pressure coupling, velocity mass, and the pressure-mean
/// row for the space, all in full system dimension.
inline SystemBlocks assemble_stokes(const THSpace& s, double nu) {
  if (!(nu > 0.0)) throw std::invalid_argument("assemble_stokes: nu must be positive");
  const BasisTable& bt = detail::basis_table(s);
  std::vector<Triplet> ta, tb, tm;
  ta.reserve(static_cast<size_t>(s.n_elements()) * 72);
  tb.reserve(static_cast<size_t>(s.n_elements()) * 36);
  tm.reserve(static_cast<size_t>(s.n_elements()) * 72);
  std::vector<double> mean(s.np_dofs, 0.0);
  std::vector<std::array<double, 12>> gp;

  for (int t = 0; t < s.n_elements(); ++t) {
    ElemGeom g = ElemGeom::of(s.mesh, t);
    detail::phys_grads(g, bt, gp);
    double a_loc[6][6] = {}, m_loc[6][6] = {}, b_loc[3][12] = {};
    for (int q = 0; q < bt.nq; ++q) {
      double w = s.rule.w[q] * g.det;
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
          a_loc[i][j] += w * (gp[q][i * 2] * gp[q][j * 2] +
                              gp[q][i * 2 + 1] * gp[q][j * 2 + 1]);
          m_loc[i][j] += w * bt.n2[q][i] * bt.n2[q][j];
        }
      for (int r = 0; r < 3; ++r)
        for (int j = 0; j < 6; ++j)
          for (int c = 0; c < 2; ++c)
            b_loc[r][j * 2 + c] += w * bt.n1[q][r] * gp[q][j * 2 + c];
    }
    for (int i = 0; i < 6; ++i) {
      int ni = s.vnode(t, i);
      for (int j = 0; j < 6; ++j) {
        int nj = s.vnode(t, j);
        for (int c = 0; c < 2; ++c) {
          ta.push_back({s.vdof(ni, c), s.vdof(nj, c), nu * a_loc[i][j]});
          tm.push_back({s.vdof(ni, c), s.vdof(nj, c), m_loc[i][j]});
        }
      }
    }
    const auto& tr = s.mesh.triangles[t];
    for (int r = 0; r < 3; ++r) {
      for (int j = 0; j < 6; ++j)
        for (int c = 0; c < 2; ++c)
          tb.push_back({s.pdof(tr[r]), s.vdof(s.vnode(t, j), c), b_loc[r][j * 2 + c]});
      mean[tr[r]] += g.det / 6.0;  // integral of P1 basis = area/3
    }
  }

  SystemBlocks blocks;
  blocks.nu = nu;
  blocks.A = from_triplets(s.n_system, ta);
  blocks.B = from_triplets(s.n_system, tb);
  blocks.M = from_triplets(s.n_system, tm);
  blocks.mean_row = std::move(mean);
  return blocks;
}

/// Convection matrix N(w) with entries ((w . grad) phi_j, phi_i).
inline CsrMatrix assemble_convection(const THSpace& s, const THFunction& w) {
  const BasisTable& bt = detail::basis_table(s);
  std::vector<Triplet> tn;
  tn.reserve(static_cast<size_t>(s.n_elements()) * 72);
  std::vector<std::array<double, 12>> gp;
  for (int t = 0; t < s.n_elements(); ++t) {
    ElemGeom g = ElemGeom::of(s.mesh, t);
    detail::phys_grads(g, bt, gp);
    double n_loc[6][6] = {};
    for (int q = 0; q < bt.nq; ++q) {
      double wq = s.rule.w[q] * g.det;
      Vec2 wval;
      double wgrad[2][2];
      detail::eval_velocity(s, w, t, bt, gp, q, wval, wgrad);
      for (int j = 0; j < 6; ++j) {
        double conv = wval.x * gp[q][j * 2] + wval.y * gp[q][j * 2 + 1];
        for (int i = 0; i < 6; ++i) n_loc[i][j] += wq * conv * bt.n2[q][i];
      }
    }
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        for (int c = 0; c < 2; ++c)
          tn.push_back({s.vdof(s.vnode(t, i), c), s.vdof(s.vnode(t, j), c),
                        n_loc[i][j]});
  }
  return from_triplets(s.n_system, tn);
}

/// Newton derivative block N(w) + N'(w), where N'(w) v = b(v; w, .).
inline CsrMatrix assemble_newton_jacobian(const THSpace& s, const THFunction& w) {
  const BasisTable& bt = detail::basis_table(s);
  std::vector<Triplet> tn;
  tn.reserve(static_cast<size_t>(s.n_elements()) * 216);
  std::vector<std::array<double, 12>> gp;
  for (int t = 0; t < s.n_elements(); ++t) {
    ElemGeom g = ElemGeom::of(s.mesh, t);
    detail::phys_grads(g, bt, gp);
    double n_loc[6][6] = {};        // component-diagonal transport part
    double r_loc[6][6][2][2] = {};  // reaction part, couples components
    for (int q = 0; q < bt.nq; ++q) {
      double wq = s.rule.w[q] * g.det;
      Vec2 wval;
      double wgrad[2][2];
      detail::eval_velocity(s, w, t, bt, gp, q, wval, wgrad);
      for (int j = 0; j < 6; ++j) {
        double conv = wval.x * gp[q][j * 2] + wval.y * gp[q][j * 2 + 1];
        for (int i = 0; i < 6; ++i) {
          n_loc[i][j] += wq * conv * bt.n2[q][i];
          double phiphi = wq * bt.n2[q][i] * bt.n2[q][j];
          for (int ci = 0; ci < 2; ++ci)
            for (int cj = 0; cj < 2; ++cj)
              r_loc[i][j][ci][cj] += phiphi * wgrad[ci][cj];
        }
      }
    }
    for (int i = 0; i < 6; ++i) {
      int ni = s.vnode(t, i);
      for (int j = 0; j < 6; ++j) {
        int nj = s.vnode(t, j);
        for (int ci = 0; ci < 2; ++ci)
          for (int cj = 0; cj < 2; ++cj) {
            double v = r_loc[i][j][ci][cj] + (ci == cj ? n_loc[i][j] : 0.0);
            tn.push_back({s.vdof(ni, ci), s.vdof(nj, cj), v});
          }
      }
    }
  }
  return from_triplets(s.n_system, tn);
}

/// Adjoint velocity operator with entries b(w; phi_i, phi_j) + b(phi_i; w, phi_j)
/// (rows i = tests, columns j = trials); equals the Newton Jacobian transposed.
inline CsrMatrix assemble_adjoint_operator(const THSpace& s, const THFunction& w) {
  const BasisTable& bt = detail::basis_table(s);
  std::vector<Triplet> tn;
  tn.reserve(static_cast<size_t>(s.n_elements()) * 216);
  std::vector<std::array<double, 12>> gp;
  for (int t = 0; t < s.n_elements(); ++t) {
    ElemGeom g = ElemGeom::of(s.mesh, t);
    detail::phys_grads(g, bt, gp);
    double n_loc[6][6] = {};        // ((w.grad) phi_i, phi_j)
    double r_loc[6][6][2][2] = {};  // (phi_i d_ci w_cj, phi_j)
    for (int q = 0; q < bt.nq; ++q) {
      double wq = s.rule.w[q] * g.det;
      Vec2 wval;
      double wgrad[2][2];
      detail::eval_velocity(s, w, t, bt, gp, q, wval, wgrad);
      for (int i = 0; i < 6; ++i) {
        double conv = wval.x * gp[q][i * 2] + wval.y * gp[q][i * 2 + 1];
        for (int j = 0; j < 6; ++j) {
          n_loc[i][j] += wq * conv * bt.n2[q][j];
          double phiphi = wq * bt.n2[q][i] * bt.n2[q][j];
          for (int ci = 0; ci < 2; ++ci)
            for (int cj = 0; cj < 2; ++cj)
              r_loc[i][j][ci][cj] += phiphi * wgrad[cj][ci];
        }
      }
    }
    for (int i = 0; i < 6; ++i) {
      int ni = s.vnode(t, i);
      for (int j = 0; j < 6; ++j) {
        int nj = s.vnode(t, j);
        for (int ci = 0; ci < 2; ++ci)
          for (int cj = 0; cj < 2; ++cj) {
            double v = r_loc[i][j][ci][cj] + (ci == cj ? n_loc[i][j] : 0.0);
            tn.push_back({s.vdof(ni, ci), s.vdof(nj, cj), v});
          }
      }
    }
  }
  return from_triplets(s.n_system, tn);
}

/// Load vector (f, phi_i) for an analytic field; Dirichlet rows zeroed
/// unless apply_mask is cleared.
inline std::vector<double> assemble_load(const THSpace& s, const VecFn& f,
                                         bool apply_mask = true) {
  const BasisTable& bt = detail::basis_table(s);
  std::vector<double> load(s.n_system, 0.0);
  for (int t = 0; t < s.n_elements(); ++t) {
    ElemGeom g = ElemGeom::of(s.mesh, t);
    for (int q = 0; q < bt.nq; ++q) {
      Vec2 fv = f(g.map(s.rule.x[q], s.rule.y[q]));
      if (!std::isfinite(fv.x) || !std::isfinite(fv.y))
        throw std::invalid_argument("assemble_load: non-finite forcing value");
      double w = s.rule.w[q] * g.det;
      for (int k = 0; k < 6; ++k) {
        int node = s.vnode(t, k);
        load[s.vdof(node, 0)] += w * fv.x * bt.n2[q][k];
        load[s.vdof(node, 1)] += w * fv.y * bt.n2[q][k];
      }
    }
  }
  if (apply_mask)
    for (int n = 0; n < s.n_vnodes; ++n)
      if (s.vnode_boundary[n]) {
        load[s.vdof(n, 0)] = 0.0;
        load[s.vdof(n, 1)] = 0.0;
      }
  return load;
}

/// Load vector for a variational-discretization control.
inline std::vector<double> assemble_load(const THSpace& s, const QuadControl& u,
                                         bool apply_mask = true) {
  if (!u.layout_matches(s))
    throw std::invalid_argument("assemble_load: control layout mismatch");
  const BasisTable& bt = detail::basis_table(s);
  std::vector<double> load(s.n_system, 0.0);
  for (int t = 0; t < s.n_elements(); ++t) {
    ElemGeom g = ElemGeom::of(s.mesh, t);
    for (int q = 0; q < bt.nq; ++q) {
      double w = s.rule.w[q] * g.det;
      for (int k = 0; k < 6; ++k) {
        int node = s.vnode(t, k);
        load[s.vdof(node, 0)] += w * u.at(t, q, 0) * bt.n2[q][k];
        load[s.vdof(node, 1)] += w * u.at(t, q, 1) * bt.n2[q][k];
      }
    }
  }
  if (apply_mask)
    for (int n = 0; n < s.n_vnodes; ++n)
      if (s.vnode_boundary[n]) {
        load[s.vdof(n, 0)] = 0.0;
        load[s.vdof(n, 1)] = 0.0;
      }
  return load;
}

/// Nonlinear convection vector with entries ((y.grad) y, phi_i); used for
/// Newton residual evaluation without assembling N(y).
inline std::vector<double> assemble_convection_vector(const THSpace& s,
                                                      const THFunction& y) {
  const BasisTable& bt = detail::basis_table(s);
  std::vector<double> out(s.n_system, 0.0);
  std::vector<std::array<double, 12>> gp;
  for (int t = 0; t < s.n_elements(); ++t) {
    ElemGeom g = ElemGeom::of(s.mesh, t);
    detail::phys_grads(g, bt, gp);
    for (int q = 0; q < bt.nq; ++q) {
      double w = s.rule.w[q] * g.det;
      Vec2 yv;
      double yg[2][2];
      detail::eval_velocity(s, y, t, bt, gp, q, yv, yg);
      double cx = yv.x * yg[0][0] + yv.y * yg[0][1];
      double cy = yv.x * yg[1][0] + yv.y * yg[1][1];
      for (int k = 0; k < 6; ++k) {
        int node = s.vnode(t, k);
        out[s.vdof(node, 0)] += w * cx * bt.n2[q][k];
        out[s.vdof(node, 1)] += w * cy * bt.n2[q][k];
      }
    }
  }
  return out;
}

/// Trilinear form b(v1; v2, v3) = ((v1.grad) v2, v3) by degree-6 quadrature,
/// exact for Taylor-Hood fields.
inline double trilinear_value(const THSpace& s, const THFunction& v1,
                              const THFunction& v2, const THFunction& v3) {
  const BasisTable& bt = detail::basis_table(s);
  std::vector<std::array<double, 12>> gp;
  double acc = 0.0;
  for (int t = 0; t < s.n_elements(); ++t) {
    ElemGeom g = ElemGeom::of(s.mesh, t);
    detail::phys_grads(g, bt, gp);
    for (int q = 0; q < bt.nq; ++q) {
      Vec2 a, b, c;
      double ga[2][2], gb[2][2], gc[2][2];
      detail::eval_velocity(s, v1, t, bt, gp, q, a, ga);
      detail::eval_velocity(s, v2, t, bt, gp, q, b, gb);
      detail::eval_velocity(s, v3, t, bt, gp, q, c, gc);
      double ix = (a.x * gb[0][0] + a.y * gb[0][1]) * c.x;
      double iy = (a.x * gb[1][0] + a.y * gb[1][1]) * c.y;
      acc += s.rule.w[q] * g.det * (ix + iy);
    }
  }
  return acc;
}

/// Full pinned saddle-point matrix
///   [ A + extra   -B^T   0 ]
///   [ B            0     m ]
///   [ 0           m^T    0 ]
/// with Dirichlet velocity dofs identity-pinned to zero (rows and columns
/// cleared, unit diagonal).
inline CsrMatrix compose_system(const THSpace& s, const SystemBlocks& blocks,
                                const CsrMatrix* extra = nullptr) {
  std::vector<char> pinned(s.n_system, 0);
  for (int n = 0; n < s.n_vnodes; ++n)
    if (s.vnode_boundary[n]) {
      pinned[s.vdof(n, 0)] = 1;
      pinned[s.vdof(n, 1)] = 1;
    }

  std::vector<Triplet> ts;
  size_t cap = blocks.A.vals.size() + 2 * blocks.B.vals.size() +
               2 * blocks.mean_row.size() + s.n_system;
  if (extra) cap += extra->vals.size();
  ts.reserve(cap);

  auto add_block = [&](const CsrMatrix& mtx, double scale, bool transpose) {
    for (int i = 0; i < mtx.dim; ++i)
      for (int k = mtx.row_offsets[i]; k < mtx.row_offsets[i + 1]; ++k) {
        int r = transpose ? mtx.cols[k] : i;
        int c = transpose ? i : mtx.cols[k];
        if (pinned[r] || pinned[c]) continue;
        ts.push_back({r, c, scale * mtx.vals[k]});
      }
  };
  add_block(blocks.A, 1.0, false);
  if (extra) add_block(*extra, 1.0, false);
  add_block(blocks.B, 1.0, false);
  add_block(blocks.B, -1.0, true);
  for (int q = 0; q < s.np_dofs; ++q) {
    ts.push_back({s.pdof(q), s.mean_dof(), blocks.mean_row[q]});
    ts.push_back({s.mean_dof(), s.pdof(q), blocks.mean_row[q]});
  }
  for (int d = 0; d < s.n_system; ++d)
    if (pinned[d]) ts.push_back({d, d, 1.0});
  return from_triplets(s.n_system, ts);
}

/// Core of the saddle system without the multiplier coupling: one pressure
/// node and the multiplier slot are identity-pinned on top of the Dirichlet
/// dofs. The bordered solve factors this sparse core; the dense mean row is
/// handled algebraically (see SaddleSolver).
inline CsrMatrix compose_core(const THSpace& s, const SystemBlocks& blocks,
                              const CsrMatrix* extra,
                              const std::vector<char>& dirichlet, int pressure_pin) {
  std::vector<char> pinned = dirichlet;
  pinned[pressure_pin] = 1;
  pinned[s.mean_dof()] = 1;

  std::vector<Triplet> ts;
  size_t cap = blocks.A.vals.size() + 2 * blocks.B.vals.size() + s.n_system;
  if (extra) cap += extra->vals.size();
  ts.reserve(cap);
  auto add_block = [&](const CsrMatrix& mtx, double scale, bool transpose) {
    for (int i = 0; i < mtx.dim; ++i)
      for (int k = mtx.row_offsets[i]; k < mtx.row_offsets[i + 1]; ++k) {
        int r = transpose ? mtx.cols[k] : i;
        int c = transpose ? i : mtx.cols[k];
        if (pinned[r] || pinned[c]) continue;
        ts.push_back({r, c, scale * mtx.vals[k]});
      }
  };
  add_block(blocks.A, 1.0, false);
  if (extra) add_block(*extra, 1.0, false);
  add_block(blocks.B, 1.0, false);
  add_block(blocks.B, -1.0, true);
  for (int d = 0; d < s.n_system; ++d)
    if (pinned[d]) ts.push_back({d, d, 1.0});
  return from_triplets(s.n_system, ts);
}

}  // namespace nsbang
