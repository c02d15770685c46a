#pragma once

// CSR storage with assembly-style triplet construction and a direct sparse
// LU solve (Eigen::SparseLU with COLAMD ordering behind the interface).
// Every solve is verified against the stated residual bound.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace nsbang {

struct SingularMatrix : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Triplet {
  int row, col;
  double value;
};

struct CsrMatrix {
  int dim = 0;
  std::vector<int> row_offsets;  // size dim+1
  std::vector<int> cols;         // sorted, unique per row
  std::vector<double> vals;

  int nnz() const { return static_cast<int>(vals.size()); }

  std::vector<double> apply(const std::vector<double>& x) const {
    std::vector<double> y(dim, 0.0);
    for (int i = 0; i < dim; ++i) {
      double s = 0.0;
      for (int k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
        s += vals[k] * x[cols[k]];
      y[i] = s;
    }
    return y;
  }

  // y += scale * A x   and   y += scale * A^T x
  void add_apply(const std::vector<double>& x, std::vector<double>& y,
                 double scale = 1.0) const {
    for (int i = 0; i < dim; ++i)
      for (int k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
        y[i] += scale * vals[k] * x[cols[k]];
  }
  void add_apply_transpose(const std::vector<double>& x, std::vector<double>& y,
                           double scale = 1.0) const {
    for (int i = 0; i < dim; ++i)
      for (int k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
        y[cols[k]] += scale * vals[k] * x[i];
  }
};

/// Builds a CSR matrix from (row, col, value) triplets; duplicates summed.
inline CsrMatrix from_triplets(int dim, const std::vector<Triplet>& entries) {
  for (const auto& t : entries)
    if (t.row < 0 || t.row >= dim || t.col < 0 || t.col >= dim)
      throw std::out_of_range("from_triplets: index out of range");

  std::vector<int> count(dim + 1, 0);
  for (const auto& t : entries) count[t.row + 1]++;
  std::vector<int> start(dim + 1, 0);
  for (int i = 0; i < dim; ++i) start[i + 1] = start[i] + count[i + 1];

  std::vector<std::pair<int, double>> bucket(entries.size());
  std::vector<int> fill(start.begin(), start.end() - 1);
  for (const auto& t : entries) bucket[fill[t.row]++] = {t.col, t.value};

  CsrMatrix m;
  m.dim = dim;
  m.row_offsets.assign(dim + 1, 0);
  m.cols.reserve(entries.size());
  m.vals.reserve(entries.size());
  for (int i = 0; i < dim; ++i) {
    auto first = bucket.begin() + start[i], last = bucket.begin() + start[i + 1];
    std::sort(first, last,
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto it = first; it != last;) {
      int c = it->first;
      double s = 0.0;
      for (; it != last && it->first == c; ++it) s += it->second;
      m.cols.push_back(c);
      m.vals.push_back(s);
    }
    m.row_offsets[i + 1] = static_cast<int>(m.cols.size());
  }
  return m;
}

namespace detail {

inline Eigen::SparseMatrix<double> to_eigen(const CsrMatrix& a) {
  Eigen::SparseMatrix<double> e(a.dim, a.dim);
  std::vector<Eigen::Triplet<double>> ts;
  ts.reserve(a.vals.size());
  for (int i = 0; i < a.dim; ++i)
    for (int k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
      ts.emplace_back(i, a.cols[k], a.vals[k]);
  e.setFromTriplets(ts.begin(), ts.end());
  return e;
}

}  // namespace detail

/// Sparse LU factorization wrapper. Reusable across solves with the same
/// matrix; not shared across threads.
class SparseLUSolver {
 public:
  explicit SparseLUSolver(const CsrMatrix& a) : mat_(detail::to_eigen(a)) {
    lu_.compute(mat_);
    if (lu_.info() != Eigen::Success)
      throw SingularMatrix("sparse LU factorization failed");
  }

  std::vector<double> solve(const std::vector<double>& b,
                            double residual_tol = 1e-10) const {
    Eigen::Map<const Eigen::VectorXd> bv(b.data(), b.size());
    Eigen::VectorXd x = lu_.solve(bv);
    if (!x.allFinite()) throw SingularMatrix("sparse LU solve produced non-finite values");
    double bnorm = bv.norm();
    double rnorm = (mat_ * x - bv).norm();
    if (rnorm > residual_tol * std::max(bnorm, 1e-300) && bnorm > 0.0)
      throw SingularMatrix("sparse LU solve residual above tolerance");
    return std::vector<double>(x.data(), x.data() + x.size());
  }

 private:
  Eigen::SparseMatrix<double> mat_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

/// One-shot direct solve with relative residual verified <= 1e-10.
inline std::vector<double> solve_direct(const CsrMatrix& a,
                                        const std::vector<double>& b) {
  if (a.dim != static_cast<int>(b.size()))
    throw std::invalid_argument("solve_direct: dimension mismatch");
  return SparseLUSolver(a).solve(b);
}

}  // namespace nsbang
