#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "subfins/dual.hpp"
#include "subfins/errors.hpp"

namespace subfins {

/// Immutable scalar expression over a fixed list of variable names.
/// Nodes are stored flattened with children at lower indices, so evaluation
/// is a single forward sweep. Copies share storage; evaluation is pure.
class ScalarExpr {
 public:
  enum class Op : std::uint8_t {
    Const, Var, Add, Sub, Mul, Div, Pow, Neg,
    Sin, Cos, Tan, Exp, Log, Sqrt, Abs
  };

  struct Node {
    Op op;
    double value = 0.0;  // Op::Const payload
    std::int32_t a = -1;  // child index, or variable index for Op::Var
    std::int32_t b = -1;  // second child for binary ops
  };

  ScalarExpr() = default;
  ScalarExpr(std::shared_ptr<const std::vector<Node>> nodes,
             std::shared_ptr<const std::vector<std::string>> vars)
      : nodes_(std::move(nodes)), vars_(std::move(vars)) {}

  bool empty() const { return !nodes_ || nodes_->empty(); }
  const std::vector<Node>& nodes() const { return *nodes_; }
  const std::vector<std::string>& variables() const { return *vars_; }
  std::shared_ptr<const std::vector<std::string>> variables_ptr() const { return vars_; }

  template <class T>
  T eval(std::span<const T> values) const;

  double eval_at(std::span<const double> values) const { return eval<double>(values); }

  /// Exact partial derivative as a new expression, with light constant
  /// folding to keep iterated derivatives (Lie bracket words) small.
  ScalarExpr derivative(int var) const;

  bool uses(int var) const;
  std::string to_string() const;

  friend bool operator==(const ScalarExpr& x, const ScalarExpr& y) {
    if (x.empty() || y.empty()) return x.empty() == y.empty();
    return equal_rec(x.nodes(), static_cast<int>(x.nodes().size()) - 1,
                     y.nodes(), static_cast<int>(y.nodes().size()) - 1);
  }

 private:
  static bool equal_rec(const std::vector<Node>& xs, int i,
                        const std::vector<Node>& ys, int j);
  std::string print_rec(int idx, int parent_prec) const;

  std::shared_ptr<const std::vector<Node>> nodes_;
  std::shared_ptr<const std::vector<std::string>> vars_;
};

ScalarExpr parse(std::string_view source, std::vector<std::string> variables);
ScalarExpr parse(std::string_view source,
                 std::shared_ptr<const std::vector<std::string>> variables);

/// Convenience constant expression (used for default taming metrics).
ScalarExpr constant_expr(double value,
                         std::shared_ptr<const std::vector<std::string>> vars);

template <class T>
T ScalarExpr::eval(std::span<const T> values) const {
  if (empty()) return T(0.0);
  const auto& ns = *nodes_;
  std::vector<T> s(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const Node& n = ns[i];
    switch (n.op) {
      case Op::Const: s[i] = T(n.value); break;
      case Op::Var:   s[i] = values[static_cast<std::size_t>(n.a)]; break;
      case Op::Add:   s[i] = s[n.a] + s[n.b]; break;
      case Op::Sub:   s[i] = s[n.a] - s[n.b]; break;
      case Op::Mul:   s[i] = s[n.a] * s[n.b]; break;
      case Op::Div:   s[i] = checked_div(s[n.a], s[n.b]); break;
      case Op::Pow:   s[i] = pow(s[n.a], s[n.b]); break;
      case Op::Neg:   s[i] = -s[n.a]; break;
      case Op::Sin:   s[i] = sin(s[n.a]); break;
      case Op::Cos:   s[i] = cos(s[n.a]); break;
      case Op::Tan:   s[i] = tan(s[n.a]); break;
      case Op::Exp:   s[i] = exp(s[n.a]); break;
      case Op::Log:   s[i] = log(s[n.a]); break;
      case Op::Sqrt:  s[i] = sqrt(s[n.a]); break;
      case Op::Abs:   s[i] = abs(s[n.a]); break;
    }
  }
  return s.back();
}

namespace detail {

/// Bottom-up builder with constant folding; used by parse() and derivative().
class ExprBuilder {
 public:
  using Op = ScalarExpr::Op;
  using Node = ScalarExpr::Node;

  explicit ExprBuilder(std::shared_ptr<const std::vector<std::string>> vars)
      : vars_(std::move(vars)) {}

  int constant(double v) {
    nodes_.push_back({Op::Const, v, -1, -1});
    return last();
  }
  int var(int idx) {
    nodes_.push_back({Op::Var, 0.0, idx, -1});
    return last();
  }

  bool is_const(int i, double v) const {
    return nodes_[i].op == Op::Const && nodes_[i].value == v;
  }
  bool is_const(int i) const { return nodes_[i].op == Op::Const; }
  double const_value(int i) const { return nodes_[i].value; }

  int add(int x, int y) {
    if (is_const(x) && is_const(y)) return constant(const_value(x) + const_value(y));
    if (is_const(x, 0.0)) return y;
    if (is_const(y, 0.0)) return x;
    return node(Op::Add, x, y);
  }
  int sub(int x, int y) {
    if (is_const(x) && is_const(y)) return constant(const_value(x) - const_value(y));
    if (is_const(y, 0.0)) return x;
    if (is_const(x, 0.0)) return neg(y);
    return node(Op::Sub, x, y);
  }
  int mul(int x, int y) {
    if (is_const(x) && is_const(y)) return constant(const_value(x) * const_value(y));
    if (is_const(x, 0.0) || is_const(y, 0.0)) return constant(0.0);
    if (is_const(x, 1.0)) return y;
    if (is_const(y, 1.0)) return x;
    return node(Op::Mul, x, y);
  }
  int div(int x, int y) {
    if (is_const(x, 0.0) && !is_const(y, 0.0)) return constant(0.0);
    if (is_const(y, 1.0)) return x;
    return node(Op::Div, x, y);
  }
  int pown(int x, int y) {
    if (is_const(y, 1.0)) return x;
    return node(Op::Pow, x, y);
  }
  int neg(int x) {
    if (is_const(x)) return constant(-const_value(x));
    if (nodes_[x].op == Op::Neg) return nodes_[x].a;
    return node(Op::Neg, x, -1);
  }
  int unary(Op op, int x) { return node(op, x, -1); }
  int node(Op op, int a, int b) {
    nodes_.push_back({op, 0.0, a, b});
    return last();
  }

  /// Copies a subtree from another expression into this builder.
  int import(const std::vector<Node>& src, int idx) {
    auto key = std::pair<const void*, int>(&src, idx);
    auto it = import_memo_.find(key);
    if (it != import_memo_.end()) return it->second;
    const Node& n = src[idx];
    int r;
    switch (n.op) {
      case Op::Const: r = constant(n.value); break;
      case Op::Var:   r = var(n.a); break;
      case Op::Neg:   r = neg(import(src, n.a)); break;
      case Op::Add:   r = add(import(src, n.a), import(src, n.b)); break;
      case Op::Sub:   r = sub(import(src, n.a), import(src, n.b)); break;
      case Op::Mul:   r = mul(import(src, n.a), import(src, n.b)); break;
      case Op::Div:   r = div(import(src, n.a), import(src, n.b)); break;
      case Op::Pow:   r = pown(import(src, n.a), import(src, n.b)); break;
      default:        r = unary(n.op, import(src, n.a)); break;
    }
    import_memo_[key] = r;
    return r;
  }

  ScalarExpr finish(int root) {
    // Keep only nodes reachable from the root: the evaluation sweep visits
    // every stored node, so an orphaned subtree (e.g. log(x) left over from
    // differentiating) must not be able to raise spurious domain errors.
    std::vector<Node> out;
    std::vector<int> remap(nodes_.size(), -1);
    compact(root, remap, out);
    return ScalarExpr(std::make_shared<const std::vector<Node>>(std::move(out)),
                      vars_);
  }

 private:
  int compact(int idx, std::vector<int>& remap, std::vector<Node>& out) const {
    if (remap[idx] >= 0) return remap[idx];
    Node n = nodes_[static_cast<std::size_t>(idx)];
    if (n.op != Op::Const && n.op != Op::Var) {
      n.a = compact(n.a, remap, out);
      if (n.b >= 0) n.b = compact(n.b, remap, out);
    }
    out.push_back(n);
    remap[idx] = static_cast<int>(out.size()) - 1;
    return remap[idx];
  }

  int last() const { return static_cast<int>(nodes_.size()) - 1; }
  std::vector<Node> nodes_;
  std::map<std::pair<const void*, int>, int> import_memo_;
  std::shared_ptr<const std::vector<std::string>> vars_;
};

}  // namespace detail

inline bool ScalarExpr::equal_rec(const std::vector<Node>& xs, int i,
                                  const std::vector<Node>& ys, int j) {
  const Node& x = xs[i];
  const Node& y = ys[j];
  if (x.op != y.op) return false;
  switch (x.op) {
    case Op::Const: return x.value == y.value;
    case Op::Var:   return x.a == y.a;
    default: break;
  }
  if (!equal_rec(xs, x.a, ys, y.a)) return false;
  if (x.b >= 0 || y.b >= 0) {
    if (x.b < 0 || y.b < 0) return false;
    return equal_rec(xs, x.b, ys, y.b);
  }
  return true;
}

inline bool ScalarExpr::uses(int var) const {
  for (const Node& n : *nodes_)
    if (n.op == Op::Var && n.a == var) return true;
  return false;
}

inline ScalarExpr ScalarExpr::derivative(int var) const {
  detail::ExprBuilder b(vars_);
  const auto& ns = *nodes_;
  std::vector<int> val(ns.size(), -1);   // imported copy of each node
  std::vector<int> der(ns.size(), -1);   // derivative of each node
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const Node& n = ns[i];
    switch (n.op) {
      case Op::Const:
        val[i] = b.constant(n.value);
        der[i] = b.constant(0.0);
        break;
      case Op::Var:
        val[i] = b.var(n.a);
        der[i] = b.constant(n.a == var ? 1.0 : 0.0);
        break;
      case Op::Add:
        val[i] = b.add(val[n.a], val[n.b]);
        der[i] = b.add(der[n.a], der[n.b]);
        break;
      case Op::Sub:
        val[i] = b.sub(val[n.a], val[n.b]);
        der[i] = b.sub(der[n.a], der[n.b]);
        break;
      case Op::Mul:
        val[i] = b.mul(val[n.a], val[n.b]);
        der[i] = b.add(b.mul(der[n.a], val[n.b]), b.mul(val[n.a], der[n.b]));
        break;
      case Op::Div:
        val[i] = b.div(val[n.a], val[n.b]);
        der[i] = b.div(b.sub(b.mul(der[n.a], val[n.b]), b.mul(val[n.a], der[n.b])),
                       b.mul(val[n.b], val[n.b]));
        break;
      case Op::Pow:
        val[i] = b.pown(val[n.a], val[n.b]);
        if (b.is_const(val[n.b])) {
          const double e = b.const_value(val[n.b]);
          der[i] = b.mul(b.mul(b.constant(e), b.pown(val[n.a], b.constant(e - 1.0))),
                         der[n.a]);
        } else {
          // d(a^b) = a^b (b' log a + b a'/a)
          der[i] = b.mul(val[i],
                         b.add(b.mul(der[n.b], b.unary(Op::Log, val[n.a])),
                               b.div(b.mul(val[n.b], der[n.a]), val[n.a])));
        }
        break;
      case Op::Neg:
        val[i] = b.neg(val[n.a]);
        der[i] = b.neg(der[n.a]);
        break;
      case Op::Sin:
        val[i] = b.unary(Op::Sin, val[n.a]);
        der[i] = b.mul(b.unary(Op::Cos, val[n.a]), der[n.a]);
        break;
      case Op::Cos:
        val[i] = b.unary(Op::Cos, val[n.a]);
        der[i] = b.neg(b.mul(b.unary(Op::Sin, val[n.a]), der[n.a]));
        break;
      case Op::Tan: {
        val[i] = b.unary(Op::Tan, val[n.a]);
        int c = b.unary(Op::Cos, val[n.a]);
        der[i] = b.div(der[n.a], b.mul(c, c));
        break;
      }
      case Op::Exp:
        val[i] = b.unary(Op::Exp, val[n.a]);
        der[i] = b.mul(val[i], der[n.a]);
        break;
      case Op::Log:
        val[i] = b.unary(Op::Log, val[n.a]);
        der[i] = b.div(der[n.a], val[n.a]);
        break;
      case Op::Sqrt:
        val[i] = b.unary(Op::Sqrt, val[n.a]);
        der[i] = b.div(der[n.a], b.mul(b.constant(2.0), val[i]));
        break;
      case Op::Abs:
        val[i] = b.unary(Op::Abs, val[n.a]);
        der[i] = b.div(b.mul(val[n.a], der[n.a]), val[i]);
        break;
    }
  }
  return b.finish(der.back());
}

// ---- printing ----------------------------------------------------------

namespace detail {

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Printed precedence levels: Add/Sub 1, Mul/Div 2, unary minus 3, Pow 4,
// atoms 5. Parenthesization reproduces the exact parse tree.
inline int op_prec(ScalarExpr::Op op, double value) {
  using Op = ScalarExpr::Op;
  switch (op) {
    case Op::Add: case Op::Sub: return 1;
    case Op::Mul: case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    case Op::Const: return value < 0.0 ? 3 : 5;
    default: return 5;
  }
}

}  // namespace detail

inline std::string ScalarExpr::print_rec(int idx, int min_prec) const {
  const Node& n = (*nodes_)[idx];
  const int prec = detail::op_prec(n.op, n.value);
  std::string s;
  switch (n.op) {
    case Op::Const: s = detail::format_number(n.value); break;
    case Op::Var:   s = (*vars_)[static_cast<std::size_t>(n.a)]; break;
    case Op::Add:   s = print_rec(n.a, 1) + " + " + print_rec(n.b, 2); break;
    case Op::Sub:   s = print_rec(n.a, 1) + " - " + print_rec(n.b, 2); break;
    case Op::Mul:   s = print_rec(n.a, 2) + "*" + print_rec(n.b, 3); break;
    case Op::Div:   s = print_rec(n.a, 2) + "/" + print_rec(n.b, 3); break;
    case Op::Neg:   s = "-" + print_rec(n.a, 3); break;
    case Op::Pow:   s = print_rec(n.a, 5) + "^" + print_rec(n.b, 3); break;
    case Op::Sin:   s = "sin(" + print_rec(n.a, 0) + ")"; break;
    case Op::Cos:   s = "cos(" + print_rec(n.a, 0) + ")"; break;
    case Op::Tan:   s = "tan(" + print_rec(n.a, 0) + ")"; break;
    case Op::Exp:   s = "exp(" + print_rec(n.a, 0) + ")"; break;
    case Op::Log:   s = "log(" + print_rec(n.a, 0) + ")"; break;
    case Op::Sqrt:  s = "sqrt(" + print_rec(n.a, 0) + ")"; break;
    case Op::Abs:   s = "abs(" + print_rec(n.a, 0) + ")"; break;
  }
  if (prec < min_prec) return "(" + s + ")";
  return s;
}

inline std::string ScalarExpr::to_string() const {
  if (empty()) return "0";
  return print_rec(static_cast<int>(nodes_->size()) - 1, 0);
}

// ---- parsing -----------------------------------------------------------

namespace detail {

class Parser {
 public:
  Parser(std::string_view src,
         std::shared_ptr<const std::vector<std::string>> vars)
      : src_(src), vars_(std::move(vars)), builder_(vars_) {}

  ScalarExpr run() {
    int root = expression();
    skip_ws();
    if (pos_ != src_.size()) fail(pos_, "end of input");
    return builder_.finish(root);
  }

 private:
  [[noreturn]] void fail(std::size_t offset, const std::string& expected) {
    throw SyntaxError(offset, expected,
                      "syntax error at offset " + std::to_string(offset) +
                          ": expected " + expected);
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int expression() {
    int lhs = term();
    for (;;) {
      if (eat('+')) lhs = builder_.add(lhs, term());
      else if (eat('-')) lhs = builder_.sub(lhs, term());
      else return lhs;
    }
  }

  int term() {
    int lhs = factor();
    for (;;) {
      if (eat('*')) lhs = builder_.mul(lhs, factor());
      else if (eat('/')) lhs = builder_.div(lhs, factor());
      else return lhs;
    }
  }

  int factor() {
    if (eat('-')) return builder_.neg(factor());
    return power();
  }

  int power() {
    int base = atom();
    if (eat('^')) return builder_.pown(base, factor());
    return base;
  }

  int atom() {
    skip_ws();
    if (pos_ >= src_.size()) fail(pos_, "expression");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      int e = expression();
      if (!eat(')')) fail(pos_, "')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail(pos_, "expression");
  }

  int number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
      ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t probe = pos_ + 1;
      if (probe < src_.size() && (src_[probe] == '+' || src_[probe] == '-')) ++probe;
      if (probe < src_.size() && std::isdigit(static_cast<unsigned char>(src_[probe]))) {
        pos_ = probe;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      }
    }
    const std::string text(src_.substr(start, pos_ - start));
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size()) fail(start, "number");
      return builder_.constant(v);
    } catch (const SyntaxError&) {
      throw;
    } catch (const std::exception&) {
      fail(start, "number");
    }
  }

  int identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    const std::string name(src_.substr(start, pos_ - start));
    using Op = ScalarExpr::Op;
    static const std::map<std::string, Op> kFunctions = {
        {"sin", Op::Sin}, {"cos", Op::Cos}, {"tan", Op::Tan}, {"exp", Op::Exp},
        {"log", Op::Log}, {"sqrt", Op::Sqrt}, {"abs", Op::Abs}};
    auto fn = kFunctions.find(name);
    if (fn != kFunctions.end()) {
      if (!eat('(')) fail(pos_, "'('");
      int arg = expression();
      if (!eat(')')) fail(pos_, "')'");
      return builder_.unary(fn->second, arg);
    }
    if (pos_ < src_.size() && src_[pos_] == '(')
      fail(start, "function name (sin, cos, tan, exp, log, sqrt, abs)");
    for (std::size_t i = 0; i < vars_->size(); ++i)
      if ((*vars_)[i] == name) return builder_.var(static_cast<int>(i));
    throw UnknownVariableError(name);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::shared_ptr<const std::vector<std::string>> vars_;
  ExprBuilder builder_;
};

}  // namespace detail

inline ScalarExpr parse(std::string_view source,
                        std::shared_ptr<const std::vector<std::string>> variables) {
  return detail::Parser(source, std::move(variables)).run();
}

inline ScalarExpr parse(std::string_view source, std::vector<std::string> variables) {
  return parse(source,
               std::make_shared<const std::vector<std::string>>(std::move(variables)));
}

inline ScalarExpr constant_expr(
    double value, std::shared_ptr<const std::vector<std::string>> vars) {
  detail::ExprBuilder b(vars);
  return b.finish(b.constant(value));
}

/// Map-based evaluation helper mirroring the library's documented interface;
/// numeric kernels use the positional eval() directly.
inline std::pair<double, std::vector<double>> eval_with_derivatives(
    const ScalarExpr& expr, const std::map<std::string, double>& bindings,
    const std::vector<std::string>& seeds) {
  const auto& vars = expr.variables();
  std::vector<Dual<double>> values(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) {
    auto it = bindings.find(vars[i]);
    if (it == bindings.end()) throw UnknownVariableError(vars[i]);
    values[i] = Dual<double>(it->second);
  }
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    bool found = false;
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (vars[i] == seeds[s]) {
        values[i].d.assign(seeds.size(), 0.0);
        values[i].d[s] = 1.0;
        found = true;
        break;
      }
    }
    if (!found) throw UnknownVariableError(seeds[s]);
  }
  Dual<double> r = expr.eval<Dual<double>>(values);
  std::vector<double> partials(seeds.size(), 0.0);
  for (std::size_t s = 0; s < seeds.size() && s < r.d.size(); ++s) partials[s] = r.d[s];
  return {r.a, partials};
}

inline double eval(const ScalarExpr& expr,
                   const std::map<std::string, double>& bindings) {
  const auto& vars = expr.variables();
  std::vector<double> values(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) {
    auto it = bindings.find(vars[i]);
    if (it == bindings.end()) throw UnknownVariableError(vars[i]);
    values[i] = it->second;
  }
  return expr.eval<double>(values);
}

}  // namespace subfins
