#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "subfins/errors.hpp"

namespace subfins {

struct ExtremalState {
  Eigen::VectorXd x;
  Eigen::VectorXd p;
};

/// Time-sampled cotangent curve with controls and diagnostic channels.
/// Rows of the matrices correspond to sample times.
struct Trajectory {
  Eigen::VectorXd times;
  Eigen::MatrixXd xs;   // samples x n
  Eigen::MatrixXd ps;   // samples x n
  Eigen::MatrixXd us;   // samples x k
  Eigen::VectorXd eta;
  Eigen::VectorXd speed;           // F(sigma-dot)
  Eigen::VectorXd horiz_residual;  // g-distance of xdot to the distribution
  bool conservation_violated = false;

  int samples() const { return static_cast<int>(times.size()); }
  int n() const { return static_cast<int>(xs.cols()); }
  int k() const { return static_cast<int>(us.cols()); }

  Eigen::VectorXd x(int i) const { return xs.row(i).transpose(); }
  Eigen::VectorXd p(int i) const { return ps.row(i).transpose(); }
  Eigen::VectorXd u(int i) const { return us.row(i).transpose(); }

  double duration() const { return times(times.size() - 1) - times(0); }
};

namespace detail {

inline void append_number(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  line += buf;
}

}  // namespace detail

/// Writes the documented trajectory CSV schema:
/// t, x1..xn, p1..pn, u1..uk, eta, F_speed, horiz_residual.
inline void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
  std::string header = "t";
  for (int i = 1; i <= traj.n(); ++i) header += ",x" + std::to_string(i);
  for (int i = 1; i <= traj.n(); ++i) header += ",p" + std::to_string(i);
  for (int i = 1; i <= traj.k(); ++i) header += ",u" + std::to_string(i);
  header += ",eta,F_speed,horiz_residual";
  os << header << "\n";
  for (int s = 0; s < traj.samples(); ++s) {
    std::string line;
    detail::append_number(line, traj.times(s));
    for (int i = 0; i < traj.n(); ++i) { line += ','; detail::append_number(line, traj.xs(s, i)); }
    for (int i = 0; i < traj.n(); ++i) { line += ','; detail::append_number(line, traj.ps(s, i)); }
    for (int i = 0; i < traj.k(); ++i) { line += ','; detail::append_number(line, traj.us(s, i)); }
    line += ','; detail::append_number(line, traj.eta(s));
    line += ','; detail::append_number(line, traj.speed(s));
    line += ','; detail::append_number(line, traj.horiz_residual(s));
    os << line << "\n";
  }
}

inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open '" + path + "' for writing");
  write_trajectory_csv(traj, f);
}

inline Trajectory read_trajectory_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw ConfigError("empty trajectory CSV");
  int n = 0, k = 0;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ',')) {
      if (col.size() > 1 && col[0] == 'x') ++n;
      if (col.size() > 1 && col[0] == 'u') ++k;
    }
  }
  if (n == 0) throw ConfigError("trajectory CSV header lacks coordinate columns");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    const std::size_t expected = static_cast<std::size_t>(1 + 2 * n + k + 3);
    if (row.size() != expected)
      throw ConfigError("trajectory CSV row has wrong column count");
    rows.push_back(std::move(row));
  }
  Trajectory t;
  const int m = static_cast<int>(rows.size());
  t.times.resize(m);
  t.xs.resize(m, n);
  t.ps.resize(m, n);
  t.us.resize(m, k);
  t.eta.resize(m);
  t.speed.resize(m);
  t.horiz_residual.resize(m);
  for (int s = 0; s < m; ++s) {
    const auto& r = rows[static_cast<std::size_t>(s)];
    int c = 0;
    t.times(s) = r[c++];
    for (int i = 0; i < n; ++i) t.xs(s, i) = r[c++];
    for (int i = 0; i < n; ++i) t.ps(s, i) = r[c++];
    for (int i = 0; i < k; ++i) t.us(s, i) = r[c++];
    t.eta(s) = r[c++];
    t.speed(s) = r[c++];
    t.horiz_residual(s) = r[c++];
  }
  return t;
}

inline Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open '" + path + "' for reading");
  return read_trajectory_csv(f);
}

/// Fornberg finite-difference weights for the m-th derivative at z over the
/// given nodes; works on arbitrary (non-uniform) grids.
inline Eigen::VectorXd fornberg_weights(double z, const Eigen::VectorXd& nodes, int m) {
  const int nd = static_cast<int>(nodes.size());
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(nd, m + 1);
  c(0, 0) = 1.0;
  double c1 = 1.0;
  double c4 = nodes(0) - z;
  for (int i = 1; i < nd; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes(i) - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = nodes(i) - nodes(j);
      c2 *= c3;
      if (j == i - 1) {
        for (int s = mn; s >= 1; --s)
          c(i, s) = c1 * (s * c(i - 1, s - 1) - c5 * c(i - 1, s)) / c2;
        c(i, 0) = -c1 * c5 * c(i - 1, 0) / c2;
      }
      for (int s = mn; s >= 1; --s)
        c(j, s) = (c4 * c(j, s) - s * c(j, s - 1)) / c3;
      c(j, 0) = c4 * c(j, 0) / c3;
    }
    c1 = c2;
  }
  return c.col(m);
}

/// d/dt of a sampled matrix-valued curve (rows = samples) at sample i,
/// using a five-point Fornberg stencil (4th order on uniform grids).
inline Eigen::VectorXd grid_derivative(const Eigen::VectorXd& times,
                                       const Eigen::MatrixXd& values, int i) {
  const int m = static_cast<int>(times.size());
  const int width = std::min(5, m);
  int lo = std::clamp(i - width / 2, 0, m - width);
  Eigen::VectorXd nodes = times.segment(lo, width);
  Eigen::VectorXd w = fornberg_weights(times(i), nodes, 1);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(values.cols());
  for (int s = 0; s < width; ++s) d += w(s) * values.row(lo + s).transpose();
  return d;
}

}  // namespace subfins
