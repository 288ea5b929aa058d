#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "subfins/expr.hpp"

using namespace subfins;

namespace {

double eval1(const ScalarExpr& e, double x) {
  std::vector<double> v{x};
  return e.eval<double>(v);
}

}  // namespace

TEST_CASE("parse and evaluate basics") {
  auto e = parse("cos(phi)", {"phi"});
  CHECK(eval1(e, 0.0) == 1.0);

  auto q = parse("x^2/2", {"x"});
  CHECK(eval1(q, 2.0) == 2.0);

  auto mixed = parse("3*x + sin(x)*exp(2*x) - sqrt(x + 1)", {"x"});
  const double x = 0.7;
  CHECK_THAT(eval1(mixed, x),
             Catch::Matchers::WithinAbs(
                 3 * x + std::sin(x) * std::exp(2 * x) - std::sqrt(x + 1), 1e-14));
}

TEST_CASE("syntax errors carry position") {
  try {
    parse("cos(", {"phi"});
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& err) {
    CHECK(err.offset() == 4);
  }
  CHECK_THROWS_AS(parse("1 +", std::vector<std::string>{}), SyntaxError);
  CHECK_THROWS_AS(parse("(x", {"x"}), SyntaxError);
  CHECK_THROWS_AS(parse("x )", {"x"}), SyntaxError);
  CHECK_THROWS_AS(parse("foo(x)", {"x"}), SyntaxError);
  CHECK_THROWS_AS(parse("1.2.3", std::vector<std::string>{}), SyntaxError);
  CHECK_THROWS_AS(parse("y", {"x"}), UnknownVariableError);
}

TEST_CASE("operator precedence and associativity") {
  CHECK(eval1(parse("-x^2", {"x"}), 2.0) == -4.0);
  CHECK(eval1(parse("2*-3", std::vector<std::string>{}), 0.0) == -6.0);
  CHECK(eval1(parse("2^3^2", std::vector<std::string>{}), 0.0) == 512.0);
  CHECK(eval1(parse("x^-2", {"x"}), 2.0) == 0.25);
  CHECK(eval1(parse("6 - 2 - 1", std::vector<std::string>{}), 0.0) == 3.0);
  CHECK(eval1(parse("12/3/2", std::vector<std::string>{}), 0.0) == 2.0);
  CHECK(eval1(parse("1 + 2*3", std::vector<std::string>{}), 0.0) == 7.0);
}

TEST_CASE("eval_with_derivatives matches hand values") {
  auto sq = parse("x^2", {"x"});
  auto [v, d] = eval_with_derivatives(sq, {{"x", 3.0}}, {"x"});
  CHECK(v == 9.0);
  CHECK(d[0] == 6.0);

  auto prod = parse("x*y", {"x", "y"});
  auto [pv, pd] = eval_with_derivatives(prod, {{"x", 2.0}, {"y", 5.0}}, {"y"});
  CHECK(pv == 10.0);
  CHECK(pd[0] == 2.0);
}

TEST_CASE("dual derivatives match central differences on a fixed expression") {
  auto e = parse("sin(x)*exp(y)", {"x", "y"});
  const double x = 1.0, y = 0.0, h = 1e-6;
  auto [v, d] = eval_with_derivatives(e, {{"x", x}, {"y", y}}, {"x", "y"});
  const double fdx =
      (eval(e, {{"x", x + h}, {"y", y}}) - eval(e, {{"x", x - h}, {"y", y}})) / (2 * h);
  const double fdy =
      (eval(e, {{"x", x}, {"y", y + h}}) - eval(e, {{"x", x}, {"y", y - h}})) / (2 * h);
  CHECK_THAT(d[0], Catch::Matchers::WithinAbs(fdx, 1e-8));
  CHECK_THAT(d[1], Catch::Matchers::WithinAbs(fdy, 1e-8));
  CHECK_THAT(v, Catch::Matchers::WithinAbs(std::sin(1.0), 1e-15));
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(eval1(parse("log(x)", {"x"}), -1.0), DomainError);
  CHECK_THROWS_AS(eval1(parse("1/x", {"x"}), 0.0), DomainError);
  CHECK_THROWS_AS(eval1(parse("x^0.5", {"x"}), -2.0), DomainError);
  CHECK_THROWS_AS(eval1(parse("sqrt(x)", {"x"}), -1.0), DomainError);
  // integer exponents on negative bases are fine
  CHECK(eval1(parse("x^3", {"x"}), -2.0) == -8.0);
  CHECK(eval1(parse("x^-2", {"x"}), -2.0) == 0.25);
}

TEST_CASE("symbolic derivative agrees with dual evaluation") {
  auto e = parse("sin(x*y) + x^3/(1 + y^2)", {"x", "y"});
  auto dx = e.derivative(0);
  auto dy = e.derivative(1);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double x = dist(rng), y = dist(rng);
    auto [v, d] = eval_with_derivatives(e, {{"x", x}, {"y", y}}, {"x", "y"});
    (void)v;
    CHECK_THAT(eval(dx, {{"x", x}, {"y", y}}), Catch::Matchers::WithinAbs(d[0], 1e-12));
    CHECK_THAT(eval(dy, {{"x", x}, {"y", y}}), Catch::Matchers::WithinAbs(d[1], 1e-12));
  }
}

// ---- randomized property tests -------------------------------------------

namespace {

struct RandomExprGen {
  std::mt19937_64 rng;
  std::vector<std::string> vars{"x", "y", "z"};

  explicit RandomExprGen(unsigned seed) : rng(seed) {}

  std::string gen(int depth) {
    std::uniform_int_distribution<int> leaf(0, 3);
    if (depth <= 0) {
      if (leaf(rng) == 0) {
        std::uniform_real_distribution<double> c(0.1, 3.0);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", c(rng));
        return buf;
      }
      std::uniform_int_distribution<std::size_t> pick(0, vars.size() - 1);
      return vars[pick(rng)];
    }
    std::uniform_int_distribution<int> op(0, 11);
    const std::string a = gen(depth - 1);
    switch (op(rng)) {
      case 0: return "(" + a + " + " + gen(depth - 1) + ")";
      case 1: return "(" + a + " - " + gen(depth - 1) + ")";
      case 2: return "(" + a + ")*(" + gen(depth - 1) + ")";
      case 3: return "(" + a + ")/(" + gen(depth - 1) + ")";
      case 4: return "sin(" + a + ")";
      case 5: return "cos(" + a + ")";
      case 6: return "exp(" + a + ")";
      case 7: return "log(" + a + ")";
      case 8: return "sqrt(" + a + ")";
      case 9: return "abs(" + a + ")";
      case 10: return "-(" + a + ")";
      default: {
        std::uniform_int_distribution<int> e(2, 3);
        return "(" + a + ")^" + std::to_string(e(rng));
      }
    }
  }
};

bool smooth_at(const ScalarExpr& e, const std::vector<double>& pt) {
  // Rejects samples where a third-difference probe suggests the central
  // difference oracle itself would be inaccurate (poles, kinks).
  const double h = 1e-3;
  for (std::size_t i = 0; i < pt.size(); ++i) {
    double f[5];
    for (int s = -2; s <= 2; ++s) {
      std::vector<double> q = pt;
      q[i] += s * h;
      f[s + 2] = e.eval<double>(q);
      if (!std::isfinite(f[s + 2]) || std::fabs(f[s + 2]) > 1e4) return false;
    }
    const double d3 = (f[4] - 2 * f[3] + 2 * f[1] - f[0]) / (2 * h * h * h);
    if (std::fabs(d3) > 1e5) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("AD matches central differences on 1000 random expressions") {
  RandomExprGen gen(20250809);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  std::uniform_int_distribution<int> depth_dist(1, 4);

  int accepted = 0;
  int attempts = 0;
  while (accepted < 1000 && attempts < 40000) {
    ++attempts;
    ScalarExpr e;
    try {
      e = parse(gen.gen(depth_dist(gen.rng)), gen.vars);
    } catch (const Error&) {
      continue;
    }
    std::vector<double> pt{coord(gen.rng), coord(gen.rng), coord(gen.rng)};
    std::vector<Dual<double>> duals;
    double value = 0.0;
    try {
      if (!smooth_at(e, pt)) continue;
      value = e.eval<double>(pt);
      duals.clear();
      for (std::size_t i = 0; i < pt.size(); ++i) duals.push_back(seeded(pt[i], i, pt.size()));
      Dual<double> r = e.eval<Dual<double>>(duals);
      const double h = 1e-6;
      for (std::size_t i = 0; i < pt.size(); ++i) {
        std::vector<double> lo = pt, hi = pt;
        lo[i] -= h;
        hi[i] += h;
        const double fd = (e.eval<double>(hi) - e.eval<double>(lo)) / (2 * h);
        REQUIRE_THAT(r.deriv(i),
                     Catch::Matchers::WithinAbs(fd, 1e-6 * (1.0 + std::fabs(value))));
      }
    } catch (const DomainError&) {
      continue;
    }
    ++accepted;
  }
  REQUIRE(accepted == 1000);
}

TEST_CASE("parse-print-parse is the identity on the AST") {
  RandomExprGen gen(987654);
  std::uniform_int_distribution<int> depth_dist(1, 4);
  int checked = 0;
  int attempts = 0;
  while (checked < 400 && attempts < 4000) {
    ++attempts;
    ScalarExpr e;
    try {
      e = parse(gen.gen(depth_dist(gen.rng)), gen.vars);
    } catch (const Error&) {
      continue;
    }
    ScalarExpr reparsed = parse(e.to_string(), gen.vars);
    REQUIRE(e == reparsed);
    ++checked;
  }
  REQUIRE(checked == 400);

  // derivative output (which folds aggressively) must round-trip too
  auto e = parse("sin(x*y)*exp(x) - y/(1 + x^2)", {"x", "y"});
  auto d = e.derivative(0);
  CHECK(d == parse(d.to_string(), {"x", "y"}));
}
