#pragma once

#include <Eigen/Dense>
#include <random>
#include <span>

#include "subfins/types.hpp"

namespace subfins {

/// Sub-Lagrangian L(x, u) = F^2(x, u) / 2 on frame fiber coordinates,
/// generic in the scalar type so nested duals give exact derivatives.
template <class T>
T sub_lagrangian(const System& sys, std::span<const T> x, std::span<const T> u) {
  switch (sys.metric.kind) {
    case SubFinslerMetric::Kind::Quadratic: {
      T acc(0.0);
      for (int i = 0; i < sys.k(); ++i)
        for (int j = 0; j < sys.k(); ++j) {
          T q = sys.metric.Q[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                    .template eval<T>(x);
          acc = acc + q * u[i] * u[j];
        }
      return T(0.5) * acc;
    }
    case SubFinslerMetric::Kind::CurvatureWeighted: {
      // F^2 = (u1^4 + 2 u1^2 u2^2 + alpha u2^4) / (u1^2 + u2^2)
      const T s1 = u[0] * u[0];
      const T s2 = u[1] * u[1];
      if (scalar_value(s1) + scalar_value(s2) == 0.0)
        throw DomainError("curvature-weighted metric is singular at u = 0");
      T num = s1 * s1 + 2.0 * (s1 * s2) + sys.metric.alpha * (s2 * s2);
      return T(0.5) * (num / (s1 + s2));
    }
    case SubFinslerMetric::Kind::Custom: {
      std::vector<T> xu(x.begin(), x.end());
      xu.insert(xu.end(), u.begin(), u.end());
      return T(0.5) * sys.metric.F2.template eval<T>(xu);
    }
  }
  throw Error("Internal", "unreachable metric kind");
}

inline bool is_zero(std::span<const double> v) {
  for (double e : v)
    if (e != 0.0) return false;
  return true;
}

/// Fiber norm F(x, u) = sqrt(2 L).
inline double fiber_norm(const System& sys, std::span<const double> x,
                         std::span<const double> u) {
  if (is_zero(u)) return 0.0;
  return std::sqrt(std::max(0.0, 2.0 * sub_lagrangian<double>(sys, x, u)));
}

inline Eigen::MatrixXd quadratic_Q(const System& sys, std::span<const double> x) {
  Eigen::MatrixXd q(sys.k(), sys.k());
  for (int i = 0; i < sys.k(); ++i)
    for (int j = 0; j < sys.k(); ++j)
      q(i, j) = sys.metric.Q[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                    .eval_at(x);
  return q;
}

namespace detail {

/// Gradient and Hessian of L in u at fixed x via one nested-dual sweep.
inline void lagrangian_grad_hess(const System& sys, std::span<const double> x,
                                 std::span<const double> u, Eigen::VectorXd& grad,
                                 Eigen::MatrixXd& hess) {
  using D2 = Dual<Dual<double>>;
  const int k = sys.k();
  std::vector<D2> xd(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) xd[i] = D2(x[i]);
  std::vector<D2> ud(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    Dual<double> inner = seeded(u[static_cast<std::size_t>(i)], static_cast<std::size_t>(i),
                                static_cast<std::size_t>(k));
    ud[static_cast<std::size_t>(i)] =
        seeded(inner, static_cast<std::size_t>(i), static_cast<std::size_t>(k));
  }
  D2 L = sub_lagrangian<D2>(sys, xd, ud);
  grad.resize(k);
  hess.resize(k, k);
  for (int i = 0; i < k; ++i) {
    grad(i) = L.deriv(static_cast<std::size_t>(i)).a;
    for (int j = 0; j < k; ++j)
      hess(i, j) = L.deriv(static_cast<std::size_t>(i)).deriv(static_cast<std::size_t>(j));
  }
}

}  // namespace detail

/// Legendre transform: p_hat = dL/du at (x, u).
inline Eigen::VectorXd legendre(const System& sys, std::span<const double> x,
                                std::span<const double> u) {
  if (sys.metric.quadratic())
    return quadratic_Q(sys, x) * Eigen::Map<const Eigen::VectorXd>(u.data(), sys.k());
  if (is_zero(u))
    throw DomainError("Legendre transform undefined at u = 0 for non-quadratic metrics");
  using D1 = Dual<double>;
  std::vector<D1> xd(x.begin(), x.end());
  std::vector<D1> ud(static_cast<std::size_t>(sys.k()));
  for (int i = 0; i < sys.k(); ++i)
    ud[static_cast<std::size_t>(i)] = seeded(u[static_cast<std::size_t>(i)],
                                             static_cast<std::size_t>(i),
                                             static_cast<std::size_t>(sys.k()));
  D1 L = sub_lagrangian<D1>(sys, xd, ud);
  Eigen::VectorXd p(sys.k());
  for (int i = 0; i < sys.k(); ++i) p(i) = L.deriv(static_cast<std::size_t>(i));
  return p;
}

struct LegendreInverseOptions {
  int max_iters = 50;
  double tol = 1e-12;
};

/// Inverse Legendre transform by damped Newton iteration on the strongly
/// convex sub-Lagrangian, warm-started from the Hessian at the momentum
/// direction (exact for quadratic metrics).
inline Eigen::VectorXd legendre_inverse(const System& sys, std::span<const double> x,
                                        const Eigen::VectorXd& p_hat,
                                        const LegendreInverseOptions& opt = {}) {
  if (sys.metric.quadratic()) {
    Eigen::MatrixXd q = quadratic_Q(sys, x);
    return q.ldlt().solve(p_hat);
  }
  const double pnorm = p_hat.norm();
  if (pnorm == 0.0)
    throw DomainError("inverse Legendre transform undefined at p = 0 for non-quadratic metrics");

  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  Eigen::VectorXd dir = p_hat / pnorm;
  detail::lagrangian_grad_hess(sys, x, std::span<const double>(dir.data(), dir.size()),
                               grad, hess);
  Eigen::VectorXd u = hess.ldlt().solve(p_hat);
  if (!u.allFinite() || is_zero(std::span<const double>(u.data(), u.size()))) u = p_hat;

  double res_norm = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opt.max_iters; ++it) {
    detail::lagrangian_grad_hess(sys, x, std::span<const double>(u.data(), u.size()),
                                 grad, hess);
    Eigen::VectorXd r = grad - p_hat;
    res_norm = r.norm();
    if (res_norm <= opt.tol) return u;
    Eigen::VectorXd step = hess.ldlt().solve(-r);
    // backtrack on the residual norm
    double s = 1.0;
    for (int bt = 0; bt < 30; ++bt) {
      Eigen::VectorXd cand = u + s * step;
      if (!is_zero(std::span<const double>(cand.data(), cand.size()))) {
        try {
          Eigen::VectorXd gc;
          Eigen::MatrixXd hc;
          detail::lagrangian_grad_hess(
              sys, x, std::span<const double>(cand.data(), cand.size()), gc, hc);
          if ((gc - p_hat).norm() <= (1.0 - 1e-4 * s) * res_norm) {
            u = cand;
            break;
          }
        } catch (const DomainError&) {
          // step left the metric's domain; shrink
        }
      }
      s *= 0.5;
      if (bt == 29) u = u + s * step;
    }
  }
  detail::lagrangian_grad_hess(sys, x, std::span<const double>(u.data(), u.size()), grad,
                               hess);
  if ((grad - p_hat).norm() <= opt.tol) return u;
  throw NoConvergenceError("Newton iteration for the inverse Legendre transform stalled",
                           (grad - p_hat).norm());
}

/// Dual norm F*(x, p_hat) = sup over F(u)=1 of <p_hat, u>.
inline double dual_metric(const System& sys, std::span<const double> x,
                          const Eigen::VectorXd& p_hat) {
  if (sys.metric.quadratic()) {
    Eigen::MatrixXd q = quadratic_Q(sys, x);
    return std::sqrt(std::max(0.0, p_hat.dot(q.ldlt().solve(p_hat))));
  }
  if (p_hat.norm() == 0.0) return 0.0;
  Eigen::VectorXd u = legendre_inverse(sys, x, p_hat);
  const double f = fiber_norm(sys, x, std::span<const double>(u.data(), u.size()));
  return p_hat.dot(u) / f;
}

// ---- axiom validation ----------------------------------------------------

struct ValidationReport {
  int samples = 0;
  double max_homogeneity_violation = 0.0;  // relative to F
  double min_hessian_eigenvalue = 0.0;     // Hessian of F^2 in u
  double min_value = 0.0;                  // most negative F^2 seen
  int domain_errors = 0;
  bool homogeneity_pass = false;
  bool hessian_pass = false;
  bool nonneg_pass = false;

  bool pass() const { return homogeneity_pass && hessian_pass && nonneg_pass; }
};

/// Samples the metric axioms: absolute homogeneity, positive definiteness
/// of the fiber Hessian of F^2, and non-negativity. Failures are report
/// entries, not exceptions.
inline ValidationReport validate(const System& sys, int samples,
                                 unsigned rng_seed = 12345u, double box_halfwidth = 1.0) {
  ValidationReport rep;
  rep.samples = samples;
  rep.min_hessian_eigenvalue = std::numeric_limits<double>::infinity();
  rep.min_value = std::numeric_limits<double>::infinity();

  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> ubox(-box_halfwidth, box_halfwidth);
  std::uniform_real_distribution<double> usphere(-1.0, 1.0);
  std::uniform_real_distribution<double> uscale(0.1, 2.0);
  std::uniform_real_distribution<double> ulambda(0.2, 3.0);

  const int n = sys.n();
  const int k = sys.k();
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;

  for (int s = 0; s < samples; ++s) {
    std::vector<double> x(static_cast<std::size_t>(n));
    for (double& xi : x) xi = ubox(rng);
    Eigen::VectorXd u(k);
    do {
      for (int i = 0; i < k; ++i) u(i) = usphere(rng);
    } while (u.norm() < 1e-3);
    u *= uscale(rng) / u.norm();
    double lambda = ulambda(rng) * (rng() % 2 == 0 ? 1.0 : -1.0);

    try {
      std::span<const double> ux(u.data(), static_cast<std::size_t>(k));
      const double f2 = 2.0 * sub_lagrangian<double>(sys, x, ux);
      rep.min_value = std::min(rep.min_value, f2);
      if (f2 >= 0.0) {
        const double f = std::sqrt(f2);
        Eigen::VectorXd lu = lambda * u;
        const double f2l =
            2.0 * sub_lagrangian<double>(sys, x, std::span<const double>(lu.data(), k));
        if (f2l >= 0.0) {
          const double viol = std::fabs(std::sqrt(f2l) - std::fabs(lambda) * f) /
                              std::max(1e-300, std::fabs(lambda) * f);
          rep.max_homogeneity_violation = std::max(rep.max_homogeneity_violation, viol);
        } else {
          rep.min_value = std::min(rep.min_value, f2l);
        }
      }
      detail::lagrangian_grad_hess(sys, x, ux, grad, hess);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(2.0 * hess);
      rep.min_hessian_eigenvalue =
          std::min(rep.min_hessian_eigenvalue, eig.eigenvalues().minCoeff());
    } catch (const DomainError&) {
      ++rep.domain_errors;
    }
  }
  rep.homogeneity_pass = rep.max_homogeneity_violation <= 1e-9;
  rep.hessian_pass = rep.min_hessian_eigenvalue > 0.0;
  rep.nonneg_pass = rep.min_value >= -1e-12 && rep.domain_errors == 0;
  return rep;
}

}  // namespace subfins
