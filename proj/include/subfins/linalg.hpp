#pragma once

#include <Eigen/Dense>
#include <vector>

#include "subfins/dual.hpp"
#include "subfins/errors.hpp"

namespace subfins {

/// Dense matrix over an arbitrary scalar (double or nested Dual). Eigen
/// handles all double-valued linear algebra; this minimal type exists so
/// the same geometric kernels can run on dual numbers for exact derivatives.
template <class T>
class MatT {
 public:
  MatT() = default;
  MatT(int rows, int cols) : rows_(rows), cols_(cols), v_(static_cast<std::size_t>(rows * cols)) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  T& operator()(int i, int j) { return v_[static_cast<std::size_t>(i) * cols_ + j]; }
  const T& operator()(int i, int j) const { return v_[static_cast<std::size_t>(i) * cols_ + j]; }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<T> v_;
};

template <class T>
using VecT = std::vector<T>;

template <class T>
VecT<T> mat_vec(const MatT<T>& m, const VecT<T>& x) {
  VecT<T> r(static_cast<std::size_t>(m.rows()), T(0.0));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) r[i] = r[i] + m(i, j) * x[j];
  return r;
}

template <class T>
VecT<T> matT_vec(const MatT<T>& m, const VecT<T>& x) {
  VecT<T> r(static_cast<std::size_t>(m.cols()), T(0.0));
  for (int j = 0; j < m.cols(); ++j)
    for (int i = 0; i < m.rows(); ++i) r[j] = r[j] + m(i, j) * x[i];
  return r;
}

template <class T>
MatT<T> mat_mul(const MatT<T>& a, const MatT<T>& b) {
  MatT<T> r(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) {
      T acc(0.0);
      for (int l = 0; l < a.cols(); ++l) acc = acc + a(i, l) * b(l, j);
      r(i, j) = acc;
    }
  return r;
}

/// A^T B A-style congruence helper: returns X^T G X.
template <class T>
MatT<T> congruence(const MatT<T>& x, const MatT<T>& g) {
  MatT<T> gx(g.rows(), x.cols());
  for (int i = 0; i < g.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) {
      T acc(0.0);
      for (int l = 0; l < g.cols(); ++l) acc = acc + g(i, l) * x(l, j);
      gx(i, j) = acc;
    }
  MatT<T> r(x.cols(), x.cols());
  for (int i = 0; i < x.cols(); ++i)
    for (int j = 0; j < x.cols(); ++j) {
      T acc(0.0);
      for (int l = 0; l < x.rows(); ++l) acc = acc + x(l, i) * gx(l, j);
      r(i, j) = acc;
    }
  return r;
}

/// Solves A x = b by Gaussian elimination with partial pivoting on the
/// scalar value part. Throws SingularHessianError when the pivot collapses
/// relative to the largest entry (rel_tol defaults to the rank tolerance
/// used throughout the library).
template <class T>
VecT<T> solve_linear(MatT<T> a, VecT<T> b, double rel_tol = 1e-12) {
  const int n = a.rows();
  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::fabs(scalar_value(a(i, j))));
  if (scale == 0.0) throw SingularHessianError("zero matrix in linear solve");
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    double best = std::fabs(scalar_value(a(perm[col], col)));
    for (int r = col + 1; r < n; ++r) {
      const double cand = std::fabs(scalar_value(a(perm[r], col)));
      if (cand > best) { best = cand; piv = r; }
    }
    if (best <= rel_tol * scale)
      throw SingularHessianError("singular matrix in linear solve");
    std::swap(perm[col], perm[piv]);
    const int p = perm[col];
    for (int r = col + 1; r < n; ++r) {
      const int q = perm[r];
      T f = a(q, col) / a(p, col);
      for (int j = col; j < n; ++j) a(q, j) = a(q, j) - f * a(p, j);
      b[q] = b[q] - f * b[p];
    }
  }
  VecT<T> x(static_cast<std::size_t>(n), T(0.0));
  for (int col = n - 1; col >= 0; --col) {
    const int p = perm[col];
    T acc = b[p];
    for (int j = col + 1; j < n; ++j) acc = acc - a(p, j) * x[j];
    x[col] = acc / a(p, col);
  }
  return x;
}

inline Eigen::MatrixXd to_eigen(const MatT<double>& m) {
  Eigen::MatrixXd r(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) r(i, j) = m(i, j);
  return r;
}

inline Eigen::VectorXd to_eigen(const VecT<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline VecT<double> from_eigen(const Eigen::VectorXd& v) {
  return VecT<double>(v.data(), v.data() + v.size());
}

/// Numerical rank with the library-wide relative singular value cutoff.
inline int numerical_rank(const Eigen::MatrixXd& m, double rel_tol = 1e-10) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rel_tol * sv(0)) ++rank;
  return rank;
}

}  // namespace subfins
