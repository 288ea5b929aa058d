#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "subfins/expr.hpp"
#include "subfins/linalg.hpp"

namespace subfins {

/// A single coordinate chart. Periodic coordinates are plain reals during
/// evaluation; only endpoint comparisons treat them modulo 2*pi.
struct Chart {
  std::shared_ptr<const std::vector<std::string>> coordinate_names;
  std::vector<bool> periodic;

  int n() const { return static_cast<int>(coordinate_names->size()); }
};

/// Local frame spanning the distribution: k vector fields, each given by
/// n component expressions over the chart coordinates.
struct Frame {
  std::vector<std::vector<ScalarExpr>> columns;  // [k][n]

  int k() const { return static_cast<int>(columns.size()); }
};

/// Auxiliary Riemannian metric used for orthogonal complements and
/// projections; defaults to the identity.
struct TamingMetric {
  std::vector<std::vector<ScalarExpr>> g;  // [n][n], symmetric
};

/// Fiber norm on the distribution, one of three families. `F2` denotes the
/// squared norm; the quadratic family stores it as a symmetric matrix of
/// expressions in the chart coordinates.
struct SubFinslerMetric {
  enum class Kind { Quadratic, CurvatureWeighted, Custom };

  Kind kind = Kind::Quadratic;
  std::vector<std::vector<ScalarExpr>> Q;  // [k][k] for Quadratic
  double alpha = 3.0;                      // CurvatureWeighted family parameter
  ScalarExpr F2;                           // Custom: expression in (x, u)

  bool quadratic() const { return kind == Kind::Quadratic; }
};

/// The complete geometric problem instance: chart, frame, taming metric and
/// sub-Finsler metric. Immutable after construction; all operations over a
/// System are pure functions.
struct System {
  std::string name;
  Chart chart;
  Frame frame;
  TamingMetric taming;
  SubFinslerMetric metric;
  std::shared_ptr<const std::vector<std::string>> fiber_names;   // u1..uk
  std::shared_ptr<const std::vector<std::string>> metric_vars;   // coords ++ fibers
  bool taming_is_identity = false;
  bool metric_x_independent = false;

  int n() const { return chart.n(); }
  int k() const { return frame.k(); }
};

inline double wrap_angle(double d) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  d = std::fmod(d, two_pi);
  if (d > std::numbers::pi) d -= two_pi;
  if (d <= -std::numbers::pi) d += two_pi;
  return d;
}

/// Difference x - y with periodic coordinates wrapped to the nearest
/// representative.
inline Eigen::VectorXd chart_difference(const System& sys, const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y) {
  Eigen::VectorXd d = x - y;
  for (int i = 0; i < sys.n(); ++i)
    if (sys.chart.periodic[static_cast<std::size_t>(i)]) d(i) = wrap_angle(d(i));
  return d;
}

namespace detail {

inline bool expr_is_constant(const ScalarExpr& e, double v) {
  return e.nodes().size() == 1 && e.nodes()[0].op == ScalarExpr::Op::Const &&
         e.nodes()[0].value == v;
}

inline bool expr_is_constant(const ScalarExpr& e) {
  for (const auto& n : e.nodes())
    if (n.op == ScalarExpr::Op::Var) return false;
  return true;
}

}  // namespace detail

/// Frame matrix with columns X_i(x), evaluated on an arbitrary scalar type.
template <class T>
MatT<T> frame_matrix_generic(const System& sys, std::span<const T> x) {
  MatT<T> m(sys.n(), sys.k());
  for (int j = 0; j < sys.k(); ++j) {
    const auto& col = sys.frame.columns[static_cast<std::size_t>(j)];
    for (int i = 0; i < sys.n(); ++i) m(i, j) = col[static_cast<std::size_t>(i)].template eval<T>(x);
  }
  return m;
}

template <class T>
MatT<T> taming_matrix_generic(const System& sys, std::span<const T> x) {
  MatT<T> g(sys.n(), sys.n());
  if (sys.taming_is_identity) {
    for (int i = 0; i < sys.n(); ++i)
      for (int j = 0; j < sys.n(); ++j) g(i, j) = T(i == j ? 1.0 : 0.0);
    return g;
  }
  for (int i = 0; i < sys.n(); ++i)
    for (int j = 0; j < sys.n(); ++j)
      g(i, j) = sys.taming.g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                    .template eval<T>(x);
  return g;
}

/// Builds a System from parts, deriving fiber variable names (u1..uk) and
/// the cached structure flags.
System assemble_system(std::string name, Chart chart, Frame frame,
                       std::optional<TamingMetric> taming, SubFinslerMetric metric);

inline System assemble_system(std::string name, Chart chart, Frame frame,
                              std::optional<TamingMetric> taming,
                              SubFinslerMetric metric) {
  System sys;
  sys.name = std::move(name);
  sys.chart = std::move(chart);
  sys.frame = std::move(frame);
  sys.metric = std::move(metric);

  auto fibers = std::make_shared<std::vector<std::string>>();
  auto metric_vars = std::make_shared<std::vector<std::string>>(*sys.chart.coordinate_names);
  for (int i = 1; i <= sys.frame.k(); ++i) {
    fibers->push_back("u" + std::to_string(i));
    metric_vars->push_back(fibers->back());
  }
  sys.fiber_names = fibers;
  sys.metric_vars = metric_vars;

  if (taming) {
    sys.taming = std::move(*taming);
    sys.taming_is_identity = true;
    for (int i = 0; i < sys.n() && sys.taming_is_identity; ++i)
      for (int j = 0; j < sys.n(); ++j)
        if (!detail::expr_is_constant(sys.taming.g[i][j], i == j ? 1.0 : 0.0)) {
          sys.taming_is_identity = false;
          break;
        }
  } else {
    sys.taming_is_identity = true;
    sys.taming.g.assign(static_cast<std::size_t>(sys.n()),
                        std::vector<ScalarExpr>(static_cast<std::size_t>(sys.n())));
    for (int i = 0; i < sys.n(); ++i)
      for (int j = 0; j < sys.n(); ++j)
        sys.taming.g[i][j] = constant_expr(i == j ? 1.0 : 0.0, sys.chart.coordinate_names);
  }

  sys.metric_x_independent = true;
  if (sys.metric.kind == SubFinslerMetric::Kind::Quadratic) {
    for (const auto& row : sys.metric.Q)
      for (const auto& e : row)
        if (!detail::expr_is_constant(e)) sys.metric_x_independent = false;
  } else if (sys.metric.kind == SubFinslerMetric::Kind::Custom) {
    for (int i = 0; i < sys.n(); ++i)
      if (sys.metric.F2.uses(i)) sys.metric_x_independent = false;
  }
  return sys;
}

}  // namespace subfins
