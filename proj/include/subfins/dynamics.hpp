#pragma once

#include <functional>

#include "subfins/extended.hpp"
#include "subfins/trajectory.hpp"

namespace subfins {

/// Pullback of a cotangent momentum to frame-dual coordinates:
/// p_hat_i = <p, X_i(x)>. No rank check; flow entry points validate once.
inline Eigen::VectorXd fiber_momentum(const System& sys, std::span<const double> x,
                                      const Eigen::VectorXd& p) {
  Eigen::MatrixXd X = to_eigen(frame_matrix_generic<double>(sys, x));
  return X.transpose() * p;
}

/// Gradient of the sub-Lagrangian in x at fixed fiber vector u.
inline Eigen::VectorXd lagrangian_x_gradient(const System& sys, std::span<const double> x,
                                             const Eigen::VectorXd& u) {
  const int n = sys.n();
  if (sys.metric_x_independent) return Eigen::VectorXd::Zero(n);
  using D1 = Dual<double>;
  std::vector<D1> xd(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    xd[static_cast<std::size_t>(i)] = seeded(x[static_cast<std::size_t>(i)],
                                             static_cast<std::size_t>(i),
                                             static_cast<std::size_t>(n));
  std::vector<D1> ud(u.data(), u.data() + u.size());
  D1 L = sub_lagrangian<D1>(sys, xd, ud);
  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i) g(i) = L.deriv(static_cast<std::size_t>(i));
  return g;
}

/// Sub-Hamiltonian eta(x, p) = (F*)^2 / 2 of the pulled-back momentum,
/// computed through the Legendre correspondence: eta = <p_hat, u*> - L(x, u*).
/// Quadratic metrics reduce to the closed form p_hat^T Q^{-1} p_hat / 2.
inline double eta(const System& sys, std::span<const double> x, const Eigen::VectorXd& p) {
  Eigen::VectorXd p_hat = fiber_momentum(sys, x, p);
  if (!sys.metric.quadratic() && p_hat.norm() == 0.0) return 0.0;
  Eigen::VectorXd u = legendre_inverse(sys, x, p_hat);
  return p_hat.dot(u) - sub_lagrangian<double>(sys, x, std::span<const double>(u.data(), u.size()));
}

/// Anchor map E(p) = sum_i u*_i X_i(x) with u* the inverse Legendre image of
/// the pulled-back momentum; its kernel is the annihilator of D.
inline Eigen::VectorXd anchor_E(const System& sys, std::span<const double> x,
                                const Eigen::VectorXd& p) {
  Eigen::MatrixXd X = to_eigen(frame_matrix_generic<double>(sys, x));
  Eigen::VectorXd p_hat = X.transpose() * p;
  if (sys.metric.quadratic() && p_hat.norm() == 0.0)
    return Eigen::VectorXd::Zero(sys.n());
  Eigen::VectorXd u = legendre_inverse(sys, x, p_hat);
  return X * u;
}

/// The sub-Hamiltonian vector field: xdot = d(eta)/dp, pdot = -d(eta)/dx.
/// Derivatives are assembled from dual-number frame Jacobians and the
/// envelope identity d(eta)/dx = <u*, d(p_hat)/dx> - dL/dx(x, u*), so xdot
/// coincides with the anchor map exactly.
inline void hamiltonian_vector_field(const System& sys, std::span<const double> x,
                                     const Eigen::VectorXd& p, Eigen::VectorXd& xdot,
                                     Eigen::VectorXd& pdot) {
  Eigen::MatrixXd X;
  std::vector<Eigen::MatrixXd> jac;
  frame_and_jacobians(sys, x, X, jac);
  Eigen::VectorXd p_hat = X.transpose() * p;
  Eigen::VectorXd u;
  if (sys.metric.quadratic() && p_hat.norm() == 0.0) {
    u = Eigen::VectorXd::Zero(sys.k());
  } else {
    u = legendre_inverse(sys, x, p_hat);
  }
  xdot = X * u;
  pdot = lagrangian_x_gradient(sys, x, u);
  for (int i = 0; i < sys.k(); ++i)
    pdot -= u(i) * (jac[static_cast<std::size_t>(i)].transpose() * p);
}

// ---- flow integration ----------------------------------------------------

struct FlowOptions {
  enum class Integrator { RK4, RK45 };
  Integrator integrator = Integrator::RK4;
  double dt = 1e-3;               // fixed step (RK4) / initial step (RK45)
  double rel_tol = 1e-9;          // RK45 error control
  double conservation_tol = 1e-8;
};

namespace detail {

template <class F>
Eigen::VectorXd rk4_step(F&& f, const Eigen::VectorXd& z, double h) {
  Eigen::VectorXd k1 = f(z);
  Eigen::VectorXd k2 = f(z + 0.5 * h * k1);
  Eigen::VectorXd k3 = f(z + 0.5 * h * k2);
  Eigen::VectorXd k4 = f(z + h * k3);
  return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Dormand-Prince 5(4) embedded pair; returns the 5th order solution and a
/// scaled error estimate.
template <class F>
Eigen::VectorXd dopri5_step(F&& f, const Eigen::VectorXd& z, double h, double& err,
                            double rel_tol) {
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  Eigen::VectorXd k1 = f(z);
  Eigen::VectorXd k2 = f(z + h * (a21 * k1));
  Eigen::VectorXd k3 = f(z + h * (a31 * k1 + a32 * k2));
  Eigen::VectorXd k4 = f(z + h * (a41 * k1 + a42 * k2 + a43 * k3));
  Eigen::VectorXd k5 = f(z + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
  Eigen::VectorXd k6 = f(z + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
  Eigen::VectorXd z5 = z + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  Eigen::VectorXd k7 = f(z5);
  Eigen::VectorXd ev = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  double scale = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double s = rel_tol * std::max(1.0, std::max(std::fabs(z(i)), std::fabs(z5(i))));
    scale = std::max(scale, std::fabs(ev(i)) / s);
  }
  err = scale;
  return z5;
}

}  // namespace detail

/// Integrates the sub-Hamiltonian flow from (x0, p0) over [0, T], filling
/// the control, eta, speed and horizontality channels. The eta drift beyond
/// options.conservation_tol sets a flag rather than aborting.
inline Trajectory flow(const System& sys, const ExtremalState& state0, double T,
                       const FlowOptions& options = {}) {
  const int n = sys.n();
  if (T <= 0.0) throw Error("Invalid", "flow requires T > 0");
  // one-time regularity check at the launch point
  (void)frame_matrix(sys, std::span<const double>(state0.x.data(), static_cast<std::size_t>(n)));

  auto rhs = [&](const Eigen::VectorXd& z) {
    Eigen::VectorXd xd, pd;
    std::span<const double> x(z.data(), static_cast<std::size_t>(n));
    hamiltonian_vector_field(sys, x, z.segment(n, n), xd, pd);
    Eigen::VectorXd out(2 * n);
    out << xd, pd;
    return out;
  };

  Eigen::VectorXd z(2 * n);
  z << state0.x, state0.p;
  std::vector<double> times{0.0};
  std::vector<Eigen::VectorXd> states{z};

  if (options.integrator == FlowOptions::Integrator::RK4) {
    const long long steps = std::max(1LL, std::llround(T / options.dt));
    const double h = T / static_cast<double>(steps);
    for (long long s = 0; s < steps; ++s) {
      z = detail::rk4_step(rhs, z, h);
      times.push_back(static_cast<double>(s + 1) * h);
      states.push_back(z);
    }
  } else {
    double t = 0.0;
    double h = std::min(options.dt, T);
    while (t < T) {
      h = std::min(h, T - t);
      if (h < 1e-14 * std::max(1.0, T))
        throw StepFailureError("adaptive step size underflow");
      double err = 0.0;
      Eigen::VectorXd cand = detail::dopri5_step(rhs, z, h, err, options.rel_tol);
      if (err <= 1.0) {
        t += h;
        z = cand;
        times.push_back(t);
        states.push_back(z);
      }
      const double grow = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
      h *= std::clamp(grow, 0.2, 5.0);
    }
  }

  Trajectory traj;
  const int m = static_cast<int>(times.size());
  traj.times = Eigen::Map<const Eigen::VectorXd>(times.data(), m);
  traj.xs.resize(m, n);
  traj.ps.resize(m, n);
  traj.us.resize(m, sys.k());
  traj.eta.resize(m);
  traj.speed.resize(m);
  traj.horiz_residual.resize(m);
  for (int s = 0; s < m; ++s) {
    traj.xs.row(s) = states[static_cast<std::size_t>(s)].head(n).transpose();
    traj.ps.row(s) = states[static_cast<std::size_t>(s)].tail(n).transpose();
  }
  for (int s = 0; s < m; ++s) {
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = traj.xs(s, i);
    Eigen::MatrixXd X = to_eigen(frame_matrix_generic<double>(sys, std::span<const double>(x)));
    Eigen::MatrixXd g = taming_matrix(sys, std::span<const double>(x));
    Eigen::VectorXd p = traj.ps.row(s).transpose();
    Eigen::VectorXd p_hat = X.transpose() * p;
    Eigen::VectorXd u;
    if (sys.metric.quadratic() && p_hat.norm() == 0.0) u = Eigen::VectorXd::Zero(sys.k());
    else u = legendre_inverse(sys, std::span<const double>(x), p_hat);
    traj.us.row(s) = u.transpose();
    const double L = sub_lagrangian<double>(sys, std::span<const double>(x),
                                            std::span<const double>(u.data(), u.size()));
    traj.eta(s) = p_hat.dot(u) - L;
    traj.speed(s) = std::sqrt(std::max(0.0, 2.0 * L));
    // horizontality of the *numerical* curve: grid tangent vs the frame span
    Eigen::VectorXd xdot = grid_derivative(traj.times, traj.xs, s);
    Eigen::MatrixXd M = X.transpose() * g * X;
    Eigen::VectorXd uls = M.ldlt().solve(X.transpose() * g * xdot);
    Eigen::VectorXd r = xdot - X * uls;
    traj.horiz_residual(s) = std::sqrt(std::max(0.0, r.dot(g * r)));
  }
  const double eta0 = traj.eta(0);
  traj.conservation_violated =
      (traj.eta.array() - eta0).abs().maxCoeff() > options.conservation_tol;
  return traj;
}

/// Horizontal rollout xdot = sum_i u_i(t) X_i(x) for a given control signal;
/// momentum and eta channels are zero since no extremal lift is involved.
inline Trajectory rollout_controls(
    const System& sys, const Eigen::VectorXd& x0,
    const std::function<Eigen::VectorXd(double)>& controls, double T, double dt = 1e-3) {
  const int n = sys.n();
  const int k = sys.k();
  const long long steps = std::max(1LL, std::llround(T / dt));
  const double h = T / static_cast<double>(steps);
  auto rhs = [&](double t, const Eigen::VectorXd& x) {
    Eigen::MatrixXd X = to_eigen(
        frame_matrix_generic<double>(sys, std::span<const double>(x.data(), static_cast<std::size_t>(n))));
    return Eigen::VectorXd(X * controls(t));
  };
  std::vector<Eigen::VectorXd> xs{x0};
  Eigen::VectorXd x = x0;
  for (long long s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) * h;
    Eigen::VectorXd k1 = rhs(t, x);
    Eigen::VectorXd k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
    Eigen::VectorXd k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
    Eigen::VectorXd k4 = rhs(t + h, x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    xs.push_back(x);
  }
  Trajectory traj;
  const int m = static_cast<int>(xs.size());
  traj.times.resize(m);
  traj.xs.resize(m, n);
  traj.ps = Eigen::MatrixXd::Zero(m, n);
  traj.us.resize(m, k);
  traj.eta = Eigen::VectorXd::Zero(m);
  traj.speed.resize(m);
  traj.horiz_residual.resize(m);
  for (int s = 0; s < m; ++s) {
    traj.times(s) = static_cast<double>(s) * h;
    traj.xs.row(s) = xs[static_cast<std::size_t>(s)].transpose();
    traj.us.row(s) = controls(traj.times(s)).transpose();
  }
  for (int s = 0; s < m; ++s) {
    std::vector<double> xv(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) xv[static_cast<std::size_t>(i)] = traj.xs(s, i);
    Eigen::VectorXd u = traj.us.row(s).transpose();
    traj.speed(s) = fiber_norm(sys, xv, std::span<const double>(u.data(), u.size()));
    Eigen::MatrixXd X = to_eigen(frame_matrix_generic<double>(sys, std::span<const double>(xv)));
    Eigen::MatrixXd g = taming_matrix(sys, std::span<const double>(xv));
    Eigen::VectorXd xdot = grid_derivative(traj.times, traj.xs, s);
    Eigen::MatrixXd M = X.transpose() * g * X;
    Eigen::VectorXd uls = M.ldlt().solve(X.transpose() * g * xdot);
    Eigen::VectorXd r = xdot - X * uls;
    traj.horiz_residual(s) = std::sqrt(std::max(0.0, r.dot(g * r)));
  }
  return traj;
}

// ---- geodesic invariance ---------------------------------------------------

struct InvarianceResult {
  double max_residual = 0.0;         // max over t of g-dist(v(t), D)
  Eigen::VectorXd times;
  Eigen::MatrixXd xs;                // base curve samples
  Eigen::MatrixXd vs;                // velocity samples
  Eigen::VectorXd residuals;
};

/// Integrates the Berwald geodesic equation vdot = -G(x, v) of the extended
/// metric and reports the g-distance of v(t) to the distribution. A tilted
/// initial velocity simply reports its (positive) residual.
inline InvarianceResult geodesic_invariance_check(const System& sys,
                                                  const Eigen::VectorXd& x0,
                                                  const Eigen::VectorXd& v0, double T,
                                                  double dt = 1e-3,
                                                  const FtildeSpec& ftilde = {}) {
  const int n = sys.n();
  ExtendedMetric em = extend_metric(sys, ftilde);
  auto rhs = [&](const Eigen::VectorXd& z) {
    std::span<const double> x(z.data(), static_cast<std::size_t>(n));
    std::vector<double> v(z.data() + n, z.data() + 2 * n);
    Eigen::VectorXd G = barthel_spray(em, x, std::span<const double>(v));
    Eigen::VectorXd out(2 * n);
    out << z.segment(n, n), -G;
    return out;
  };
  const long long steps = std::max(1LL, std::llround(T / dt));
  const double h = T / static_cast<double>(steps);
  Eigen::VectorXd z(2 * n);
  z << x0, v0;
  InvarianceResult res;
  res.times.resize(steps + 1);
  res.xs.resize(steps + 1, n);
  res.vs.resize(steps + 1, n);
  res.residuals.resize(steps + 1);
  for (long long s = 0; s <= steps; ++s) {
    res.times(s) = static_cast<double>(s) * h;
    res.xs.row(s) = z.head(n).transpose();
    res.vs.row(s) = z.segment(n, n).transpose();
    std::vector<double> xv(z.data(), z.data() + n);
    Eigen::VectorXd u, perp;
    em.fiber_split(std::span<const double>(xv), z.segment(n, n), u, perp);
    Eigen::MatrixXd g = taming_matrix(sys, std::span<const double>(xv));
    res.residuals(s) = std::sqrt(std::max(0.0, perp.dot(g * perp)));
    if (s < steps) z = detail::rk4_step(rhs, z, h);
  }
  res.max_residual = res.residuals.maxCoeff();
  return res;
}

}  // namespace subfins
