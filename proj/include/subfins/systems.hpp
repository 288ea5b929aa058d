#pragma once

#include <string>
#include <vector>

#include "subfins/types.hpp"

namespace subfins {

namespace detail {

inline Chart make_chart(std::vector<std::string> names, std::vector<bool> periodic) {
  Chart c;
  c.coordinate_names = std::make_shared<const std::vector<std::string>>(std::move(names));
  c.periodic = std::move(periodic);
  return c;
}

inline Frame make_frame(const Chart& chart,
                        const std::vector<std::vector<std::string>>& columns) {
  Frame f;
  for (const auto& col : columns) {
    std::vector<ScalarExpr> c;
    for (const auto& src : col) c.push_back(parse(src, chart.coordinate_names));
    f.columns.push_back(std::move(c));
  }
  return f;
}

inline SubFinslerMetric identity_quadratic(const Chart& chart, int k) {
  SubFinslerMetric m;
  m.kind = SubFinslerMetric::Kind::Quadratic;
  m.Q.assign(static_cast<std::size_t>(k), std::vector<ScalarExpr>(static_cast<std::size_t>(k)));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      m.Q[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          constant_expr(i == j ? 1.0 : 0.0, chart.coordinate_names);
  return m;
}

}  // namespace detail

/// Catalog entries for the CLI `systems` listing.
struct CatalogEntry {
  std::string name;
  int n;
  int k;
  std::string metrics;
  std::string description;
};

inline std::vector<CatalogEntry> system_catalog() {
  return {
      {"euclidean(n)", -1, -1, "quadratic",
       "full distribution on R^n with the identity frame"},
      {"heisenberg", 3, 2, "quadratic",
       "contact frame X1 = dx - (y/2) dz, X2 = dy + (x/2) dz"},
      {"martinet", 3, 2, "quadratic",
       "X1 = dx, X2 = dy + (x^2/2) dz; abnormal line along the y-axis"},
      {"unicycle", 4, 2, "quadratic | curvature_weighted",
       "rolling wheel (phi, x1, x2, psi); phi and psi periodic"},
      {"unicycle_reduced", 3, 2, "quadratic | curvature_weighted",
       "unicycle without the rolling angle psi"},
  };
}

/// Builds a built-in System. `metric_choice` selects between the default
/// quadratic metric and the curvature-weighted family where applicable:
/// "" | "quadratic" | "curvature_weighted" | "curvature_weighted(<alpha>)".
inline System make_system(const std::string& name, const std::string& metric_choice = "") {
  using detail::identity_quadratic;
  using detail::make_chart;
  using detail::make_frame;

  auto curvature_metric = [&](double alpha) {
    SubFinslerMetric m;
    m.kind = SubFinslerMetric::Kind::CurvatureWeighted;
    m.alpha = alpha;
    return m;
  };
  auto pick_metric = [&](const Chart& chart, int k) {
    if (metric_choice.empty() || metric_choice == "quadratic")
      return identity_quadratic(chart, k);
    if (metric_choice.rfind("curvature_weighted", 0) == 0) {
      if (k != 2)
        throw ConfigError("curvature_weighted metric requires a rank-2 frame");
      double alpha = 3.0;
      auto open = metric_choice.find('(');
      if (open != std::string::npos) {
        auto close = metric_choice.find(')', open);
        if (close == std::string::npos)
          throw ConfigError("malformed metric choice '" + metric_choice + "'");
        alpha = std::stod(metric_choice.substr(open + 1, close - open - 1));
      }
      return curvature_metric(alpha);
    }
    throw ConfigError("unknown metric choice '" + metric_choice + "'");
  };

  if (name.rfind("euclidean", 0) == 0) {
    int n = 3;
    auto open = name.find('(');
    if (open != std::string::npos) {
      auto close = name.find(')', open);
      if (close == std::string::npos) throw UnknownSystemError(name);
      try {
        n = std::stoi(name.substr(open + 1, close - open - 1));
      } catch (const std::exception&) {
        throw UnknownSystemError(name);
      }
    } else if (name != "euclidean") {
      throw UnknownSystemError(name);
    }
    if (n < 1) throw UnknownSystemError(name);
    std::vector<std::string> coords;
    for (int i = 1; i <= n; ++i) coords.push_back("x" + std::to_string(i));
    Chart chart = make_chart(coords, std::vector<bool>(static_cast<std::size_t>(n), false));
    std::vector<std::vector<std::string>> cols(static_cast<std::size_t>(n),
                                               std::vector<std::string>(static_cast<std::size_t>(n), "0"));
    for (int i = 0; i < n; ++i) cols[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = "1";
    Frame frame = make_frame(chart, cols);
    return assemble_system("euclidean(" + std::to_string(n) + ")", chart, frame, std::nullopt,
                           pick_metric(chart, n));
  }
  if (name == "heisenberg") {
    Chart chart = make_chart({"x", "y", "z"}, {false, false, false});
    Frame frame = make_frame(chart, {{"1", "0", "-y/2"}, {"0", "1", "x/2"}});
    return assemble_system(name, chart, frame, std::nullopt, pick_metric(chart, 2));
  }
  if (name == "martinet") {
    Chart chart = make_chart({"x", "y", "z"}, {false, false, false});
    Frame frame = make_frame(chart, {{"1", "0", "0"}, {"0", "1", "x^2/2"}});
    return assemble_system(name, chart, frame, std::nullopt, pick_metric(chart, 2));
  }
  if (name == "unicycle") {
    Chart chart = make_chart({"phi", "x1", "x2", "psi"}, {true, false, false, true});
    Frame frame = make_frame(chart, {{"0", "cos(phi)", "sin(phi)", "1"}, {"1", "0", "0", "0"}});
    return assemble_system(name, chart, frame, std::nullopt, pick_metric(chart, 2));
  }
  if (name == "unicycle_reduced") {
    Chart chart = make_chart({"phi", "x1", "x2"}, {true, false, false});
    Frame frame = make_frame(chart, {{"0", "cos(phi)", "sin(phi)"}, {"1", "0", "0"}});
    return assemble_system(name, chart, frame, std::nullopt, pick_metric(chart, 2));
  }
  throw UnknownSystemError(name);
}

}  // namespace subfins
