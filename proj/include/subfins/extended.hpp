#pragma once

#include <Eigen/Dense>
#include <span>

#include "subfins/geometry.hpp"
#include "subfins/metric.hpp"

namespace subfins {

/// Fiber norm on the orthogonal complement used to extend F to a full
/// Finsler metric. The default is the taming metric's own norm; a custom
/// squared norm may be given as an expression in complement fiber
/// coordinates w1..w_{n-k} relative to the g-orthonormal complement basis.
struct FtildeSpec {
  enum class Kind { Taming, Custom };
  Kind kind = Kind::Taming;
  ScalarExpr F2;
};

/// g-orthonormal complement basis at x, generic in the scalar type. Pivot
/// decisions are made on scalar values, so dual-number evaluation
/// differentiates a locally fixed pivot sequence.
template <class T>
MatT<T> complement_basis_generic(const System& sys, std::span<const T> x) {
  const int n = sys.n();
  const int k = sys.k();
  MatT<T> X = frame_matrix_generic<T>(sys, x);
  MatT<T> g = taming_matrix_generic<T>(sys, x);
  MatT<T> M = congruence(X, g);

  // residuals of the canonical basis under the g-orthogonal projection onto D
  std::vector<VecT<T>> res(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    VecT<T> e(static_cast<std::size_t>(n), T(0.0));
    e[static_cast<std::size_t>(j)] = T(1.0);
    VecT<T> ge = mat_vec(g, e);
    VecT<T> u = solve_linear(M, matT_vec(X, ge));
    VecT<T> xu = mat_vec(X, u);
    for (int i = 0; i < n; ++i) e[static_cast<std::size_t>(i)] = e[static_cast<std::size_t>(i)] - xu[static_cast<std::size_t>(i)];
    res[static_cast<std::size_t>(j)] = std::move(e);
  }
  auto g_dot = [&](const VecT<T>& a, const VecT<T>& b) {
    VecT<T> gb = mat_vec(g, b);
    T acc(0.0);
    for (int i = 0; i < n; ++i) acc = acc + a[static_cast<std::size_t>(i)] * gb[static_cast<std::size_t>(i)];
    return acc;
  };
  MatT<T> W(n, n - k);
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (int pick = 0; pick < n - k; ++pick) {
    int best = -1;
    double best_norm = 0.0;
    for (int j = 0; j < n; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      const double norm2 = scalar_value(g_dot(res[static_cast<std::size_t>(j)], res[static_cast<std::size_t>(j)]));
      if (norm2 > best_norm) { best_norm = norm2; best = j; }
    }
    if (best < 0 || best_norm < 1e-24)
      throw RegularityError("complement construction degenerated");
    used[static_cast<std::size_t>(best)] = true;
    VecT<T>& w = res[static_cast<std::size_t>(best)];
    T inv = T(1.0) / sqrt(g_dot(w, w));
    for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)] * inv;
    for (int j = 0; j < n; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      T c = g_dot(w, res[static_cast<std::size_t>(j)]);
      for (int i = 0; i < n; ++i)
        res[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] =
            res[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] - c * w[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < n; ++i) W(i, pick) = w[static_cast<std::size_t>(i)];
  }
  return W;
}

/// Full Finsler metric F_hat obtained from the sub-Finsler metric and a
/// complement norm through the taming-metric projection split:
/// F_hat(v)^2 = F^2(P v) + Ftilde^2(Pperp v).
class ExtendedMetric {
 public:
  ExtendedMetric(System sys, FtildeSpec ftilde)
      : sys_(std::move(sys)), ftilde_(std::move(ftilde)) {}

  const System& system() const { return sys_; }

  /// Extended Lagrangian L_hat(x, v) = F_hat^2 / 2 on chart velocities.
  template <class T>
  T lagrangian(std::span<const T> x, std::span<const T> v) const {
    const int n = sys_.n();
    const int k = sys_.k();
    MatT<T> X = frame_matrix_generic<T>(sys_, x);
    if (k == n && ftilde_.kind == FtildeSpec::Kind::Taming) {
      VecT<T> u = solve_linear(X_as_square(X), VecT<T>(v.begin(), v.end()));
      return sub_lagrangian<T>(sys_, x, u);
    }
    MatT<T> g = taming_matrix_generic<T>(sys_, x);
    MatT<T> M = congruence(X, g);
    VecT<T> gv = mat_vec(g, VecT<T>(v.begin(), v.end()));
    VecT<T> u = solve_linear(M, matT_vec(X, gv));
    VecT<T> xu = mat_vec(X, u);
    VecT<T> r(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) r[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)] - xu[static_cast<std::size_t>(i)];
    T L = sub_lagrangian<T>(sys_, x, u);
    if (ftilde_.kind == FtildeSpec::Kind::Taming) {
      VecT<T> gr = mat_vec(g, r);
      T acc(0.0);
      for (int i = 0; i < n; ++i) acc = acc + r[static_cast<std::size_t>(i)] * gr[static_cast<std::size_t>(i)];
      return L + T(0.5) * acc;
    }
    MatT<T> W = complement_basis_generic<T>(sys_, x);
    VecT<T> gr = mat_vec(g, r);
    VecT<T> w = matT_vec(W, gr);  // coordinates in the orthonormal complement basis
    return L + T(0.5) * ftilde_.F2.template eval<T>(w);
  }

  double norm(std::span<const double> x, std::span<const double> v) const {
    if (is_zero(v)) return 0.0;
    return std::sqrt(std::max(0.0, 2.0 * lagrangian<double>(x, v)));
  }

  /// Split of a chart velocity into frame coordinates u and the complement
  /// residual Pperp v; the residual's g-norm is the distance to D.
  void fiber_split(std::span<const double> x, const Eigen::VectorXd& v,
                   Eigen::VectorXd& u, Eigen::VectorXd& perp) const {
    Eigen::MatrixXd X = to_eigen(frame_matrix_generic<double>(sys_, x));
    Eigen::MatrixXd g = taming_matrix(sys_, x);
    Eigen::MatrixXd M = X.transpose() * g * X;
    u = M.ldlt().solve(X.transpose() * g * v);
    perp = v - X * u;
  }

 private:
  template <class T>
  static MatT<T> X_as_square(const MatT<T>& X) { return X; }

  System sys_;
  FtildeSpec ftilde_;
};

inline ExtendedMetric extend_metric(System sys, FtildeSpec ftilde = {}) {
  return ExtendedMetric(std::move(sys), std::move(ftilde));
}

/// Berwald spray and Barthel nonlinear connection coefficients of the
/// extended metric at (x, v):
///   G^i = g^{ij} (d2L/dv^j dx^k v^k - dL/dx^j),   N^i_j = 1/2 dG^i/dv^j,
/// with g_ij the fiber Hessian of L_hat. Geodesics satisfy dv/dt = -G(x, v).
struct BarthelData {
  Eigen::VectorXd G;
  Eigen::MatrixXd N;
};

template <class T>
VecT<T> barthel_spray_generic(const ExtendedMetric& em, std::span<const T> x,
                              std::span<const T> v) {
  const int n = em.system().n();
  using D2 = Dual<Dual<T>>;
  const std::size_t nn = static_cast<std::size_t>(2 * n);
  std::vector<D2> xd(static_cast<std::size_t>(n)), vd(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Dual<T> inner = seeded(x[static_cast<std::size_t>(i)], static_cast<std::size_t>(i), nn);
    xd[static_cast<std::size_t>(i)] = seeded(inner, static_cast<std::size_t>(i), nn);
    Dual<T> innerv = seeded(v[static_cast<std::size_t>(i)], static_cast<std::size_t>(n + i), nn);
    vd[static_cast<std::size_t>(i)] = seeded(innerv, static_cast<std::size_t>(n + i), nn);
  }
  D2 L = em.lagrangian<D2>(xd, vd);
  MatT<T> A(n, n);
  VecT<T> rhs(static_cast<std::size_t>(n), T(0.0));
  for (int j = 0; j < n; ++j) {
    Dual<T> dvj = L.deriv(static_cast<std::size_t>(n + j));
    for (int l = 0; l < n; ++l) {
      A(j, l) = dvj.deriv(static_cast<std::size_t>(n + l));
      rhs[static_cast<std::size_t>(j)] =
          rhs[static_cast<std::size_t>(j)] + dvj.deriv(static_cast<std::size_t>(l)) * v[static_cast<std::size_t>(l)];
    }
    rhs[static_cast<std::size_t>(j)] = rhs[static_cast<std::size_t>(j)] - L.deriv(static_cast<std::size_t>(j)).a;
  }
  return solve_linear(A, rhs);
}

inline Eigen::VectorXd barthel_spray(const ExtendedMetric& em, std::span<const double> x,
                                     std::span<const double> v) {
  return to_eigen(barthel_spray_generic<double>(em, x, v));
}

inline BarthelData barthel(const ExtendedMetric& em, std::span<const double> x,
                           std::span<const double> v) {
  const int n = em.system().n();
  if (is_zero(v)) throw DomainError("Barthel coefficients undefined at v = 0");
  BarthelData out;
  out.G = barthel_spray(em, x, v);
  using D1 = Dual<double>;
  std::vector<D1> xd(x.begin(), x.end());
  std::vector<D1> vd(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    vd[static_cast<std::size_t>(i)] = seeded(v[static_cast<std::size_t>(i)],
                                             static_cast<std::size_t>(i),
                                             static_cast<std::size_t>(n));
  VecT<D1> G = barthel_spray_generic<D1>(em, xd, vd);
  out.N.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out.N(i, j) = 0.5 * G[static_cast<std::size_t>(i)].deriv(static_cast<std::size_t>(j));
  return out;
}

}  // namespace subfins
