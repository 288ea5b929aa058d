#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>

#include "subfins/types.hpp"

namespace subfins {

constexpr double kRankTol = 1e-10;  // relative singular-value cutoff

/// Frame matrix at x with columns X_i(x); validates numerical rank k.
inline Eigen::MatrixXd frame_matrix(const System& sys, std::span<const double> x,
                                    double rank_tol = kRankTol) {
  MatT<double> m = frame_matrix_generic<double>(sys, x);
  Eigen::MatrixXd e = to_eigen(m);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(sv.size() - 1) < rank_tol * sv(0))
    throw RegularityError("frame is rank deficient at the evaluation point");
  return e;
}

inline Eigen::MatrixXd taming_matrix(const System& sys, std::span<const double> x) {
  return to_eigen(taming_matrix_generic<double>(sys, x));
}

/// Frame columns and their Jacobians d X_i / d x by one dual-number sweep.
inline void frame_and_jacobians(const System& sys, std::span<const double> x,
                                Eigen::MatrixXd& frame,
                                std::vector<Eigen::MatrixXd>& jac) {
  const int n = sys.n();
  const int k = sys.k();
  using D1 = Dual<double>;
  std::vector<D1> xd(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    xd[static_cast<std::size_t>(i)] = seeded(x[static_cast<std::size_t>(i)],
                                             static_cast<std::size_t>(i),
                                             static_cast<std::size_t>(n));
  frame.resize(n, k);
  jac.assign(static_cast<std::size_t>(k), Eigen::MatrixXd::Zero(n, n));
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < n; ++i) {
      D1 c = sys.frame.columns[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]
                 .eval<D1>(xd);
      frame(i, j) = c.a;
      for (int m = 0; m < n; ++m)
        jac[static_cast<std::size_t>(j)](i, m) = c.deriv(static_cast<std::size_t>(m));
    }
  }
}

/// Lie bracket [X_i, X_j](x) via exact dual-number differentiation of the
/// frame component expressions.
inline Eigen::VectorXd lie_bracket(const System& sys, int i, int j,
                                   std::span<const double> x) {
  Eigen::MatrixXd frame;
  std::vector<Eigen::MatrixXd> jac;
  frame_and_jacobians(sys, x, frame, jac);
  return jac[static_cast<std::size_t>(j)] * frame.col(i) -
         jac[static_cast<std::size_t>(i)] * frame.col(j);
}

// ---- iterated brackets --------------------------------------------------

using VectorField = std::vector<ScalarExpr>;  // n components over the chart

inline VectorField frame_field(const System& sys, int i) {
  return sys.frame.columns[static_cast<std::size_t>(i)];
}

/// Symbolic Lie bracket of two expression vector fields:
/// [a, b]^m = sum_l a^l d_l b^m - b^l d_l a^m. Exact (no finite differences)
/// and composable, which is what iterated bracket words need.
inline VectorField lie_bracket_field(const System& sys, const VectorField& a,
                                     const VectorField& b) {
  const int n = sys.n();
  VectorField out(static_cast<std::size_t>(n));
  for (int m = 0; m < n; ++m) {
    detail::ExprBuilder builder(sys.chart.coordinate_names);
    int acc = builder.constant(0.0);
    for (int l = 0; l < n; ++l) {
      ScalarExpr dbm = b[static_cast<std::size_t>(m)].derivative(l);
      ScalarExpr dam = a[static_cast<std::size_t>(m)].derivative(l);
      int t1 = builder.mul(builder.import(a[static_cast<std::size_t>(l)].nodes(),
                                          static_cast<int>(a[l].nodes().size()) - 1),
                           builder.import(dbm.nodes(), static_cast<int>(dbm.nodes().size()) - 1));
      int t2 = builder.mul(builder.import(b[static_cast<std::size_t>(l)].nodes(),
                                          static_cast<int>(b[l].nodes().size()) - 1),
                           builder.import(dam.nodes(), static_cast<int>(dam.nodes().size()) - 1));
      acc = builder.add(acc, builder.sub(t1, t2));
    }
    out[static_cast<std::size_t>(m)] = builder.finish(acc);
  }
  return out;
}

inline Eigen::VectorXd eval_field(const VectorField& f, std::span<const double> x) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) v(static_cast<Eigen::Index>(i)) = f[i].eval_at(x);
  return v;
}

struct BracketStepResult {
  std::optional<int> step;  // smallest bracket length spanning the tangent space
  int achieved_rank = 0;    // rank reached at max_depth when not generating
};

/// Smallest s <= max_depth such that bracket words of length <= s span the
/// tangent space at x. Words are built symbolically and evaluated exactly.
inline BracketStepResult bracket_generating_step(const System& sys,
                                                 std::span<const double> x, int max_depth,
                                                 double rank_tol = kRankTol) {
  const int n = sys.n();
  std::vector<VectorField> current;
  std::vector<Eigen::VectorXd> span_vectors;
  for (int i = 0; i < sys.k(); ++i) {
    current.push_back(frame_field(sys, i));
    span_vectors.push_back(eval_field(current.back(), x));
  }
  auto rank_of = [&]() {
    Eigen::MatrixXd m(n, static_cast<Eigen::Index>(span_vectors.size()));
    for (std::size_t c = 0; c < span_vectors.size(); ++c) m.col(static_cast<Eigen::Index>(c)) = span_vectors[c];
    return numerical_rank(m, rank_tol);
  };
  int rank = rank_of();
  if (rank == n) return {1, rank};
  for (int depth = 2; depth <= max_depth; ++depth) {
    std::vector<VectorField> next;
    for (int i = 0; i < sys.k(); ++i)
      for (const VectorField& w : current) {
        next.push_back(lie_bracket_field(sys, frame_field(sys, i), w));
        span_vectors.push_back(eval_field(next.back(), x));
      }
    rank = rank_of();
    if (rank == n) return {depth, rank};
    current = std::move(next);
  }
  return {std::nullopt, rank};
}

// ---- projections ---------------------------------------------------------

/// Pointwise tangent/cotangent projection operators induced by the taming
/// metric. P and Pperp act on tangent vectors; Pstar and Pstar_c act on
/// covectors (components as column vectors): Pstar a = a o Pperp lands in
/// the annihilator of D, Pstar_c a = a o P in the annihilator of Dperp.
struct ProjectionSplit {
  Eigen::MatrixXd P;        // tangent projection onto D
  Eigen::MatrixXd Pperp;    // tangent projection onto D^perp
  Eigen::MatrixXd Pstar;    // covector projection onto D^0
  Eigen::MatrixXd Pstar_c;  // covector projection onto (D^perp)^0
};

inline ProjectionSplit projection_split(const System& sys, std::span<const double> x) {
  const int n = sys.n();
  Eigen::MatrixXd X = frame_matrix(sys, x);
  Eigen::MatrixXd g = taming_matrix(sys, x);
  Eigen::MatrixXd M = X.transpose() * g * X;
  ProjectionSplit out;
  out.P = X * M.ldlt().solve(X.transpose() * g);
  out.Pperp = Eigen::MatrixXd::Identity(n, n) - out.P;
  out.Pstar = out.Pperp.transpose();
  out.Pstar_c = out.P.transpose();
  return out;
}

/// g-orthonormal basis of the orthogonal complement D^perp at x, built by
/// pivoted Gram-Schmidt of the canonical basis against the frame.
inline std::vector<Eigen::VectorXd> orthogonal_complement_frame(
    const System& sys, std::span<const double> x) {
  const int n = sys.n();
  const int k = sys.k();
  Eigen::MatrixXd g = taming_matrix(sys, x);
  ProjectionSplit proj = projection_split(sys, x);
  std::vector<Eigen::VectorXd> residuals;
  for (int j = 0; j < n; ++j)
    residuals.push_back(proj.Pperp * Eigen::VectorXd::Unit(n, j));
  std::vector<Eigen::VectorXd> basis;
  for (int pick = 0; pick < n - k; ++pick) {
    int best = -1;
    double best_norm = 0.0;
    for (int j = 0; j < n; ++j) {
      const double norm2 = residuals[static_cast<std::size_t>(j)].dot(
          g * residuals[static_cast<std::size_t>(j)]);
      if (norm2 > best_norm) {
        best_norm = norm2;
        best = j;
      }
    }
    if (best < 0 || best_norm < 1e-24)
      throw RegularityError("complement construction degenerated");
    Eigen::VectorXd w = residuals[static_cast<std::size_t>(best)] / std::sqrt(best_norm);
    basis.push_back(w);
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd& r = residuals[static_cast<std::size_t>(j)];
      r -= w * (w.dot(g * r));
    }
  }
  return basis;
}

}  // namespace subfins
