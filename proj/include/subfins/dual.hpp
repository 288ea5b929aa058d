#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "subfins/errors.hpp"

namespace subfins {

// Checked scalar math. These mirror <cmath> but turn invalid inputs into
// DomainError instead of NaN, so expression evaluation fails loudly. The
// same names resolve for double and for Dual<T> below, which lets all
// numeric kernels be written once, generic in the scalar type.
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double tan(double x) { return std::tan(x); }
inline double exp(double x) { return std::exp(x); }
inline double abs(double x) { return std::fabs(x); }

inline double log(double x) {
  if (x <= 0.0) throw DomainError("log of non-positive value");
  return std::log(x);
}

inline double sqrt(double x) {
  if (x < 0.0) throw DomainError("sqrt of negative value");
  return std::sqrt(x);
}

namespace detail {

inline bool integral_exponent(double e, long long& n) {
  if (std::fabs(e) > 1e15) return false;
  const double r = std::nearbyint(e);
  if (r != e) return false;
  n = static_cast<long long>(r);
  return true;
}

}  // namespace detail

inline double checked_div(double x, double y) {
  if (y == 0.0) throw DomainError("division by zero");
  return x / y;
}

/// Integer power by repeated multiplication; valid for any base sign.
template <class T>
T powi(const T& x, long long n);

inline double pow(double x, double e) {
  long long n = 0;
  if (detail::integral_exponent(e, n)) {
    if (x == 0.0 && n < 0) throw DomainError("zero raised to negative power");
    return powi(x, n);
  }
  if (x < 0.0) throw DomainError("fractional power of negative base");
  if (x == 0.0 && e <= 0.0) throw DomainError("zero raised to non-positive power");
  return std::pow(x, e);
}

/// Forward-mode dual number with a dynamic vector of derivative slots.
/// An empty slot vector means "all partials zero", which keeps constants
/// cheap inside expression evaluation. Nesting Dual<Dual<double>> yields
/// exact second derivatives, and so on for higher orders.
template <class T>
struct Dual {
  T a{};              // value
  std::vector<T> d;   // partials; empty == zero

  Dual() = default;
  Dual(double v) : a(v) {}  // NOLINT: implicit by design, mirrors scalar promotion
  Dual(T v, std::vector<T> der) : a(std::move(v)), d(std::move(der)) {}

  std::size_t nd() const { return d.size(); }
  T deriv(std::size_t i) const { return i < d.size() ? d[i] : T(0.0); }
};

inline double scalar_value(double x) { return x; }
template <class T>
double scalar_value(const Dual<T>& x) {
  return scalar_value(x.a);
}

template <class T>
Dual<T> seeded(T value, std::size_t slot, std::size_t nslots) {
  Dual<T> r;
  r.a = std::move(value);
  r.d.assign(nslots, T(0.0));
  r.d[slot] = T(1.0);
  return r;
}

namespace detail {

template <class T>
void resize_union(std::vector<T>& out, const std::vector<T>& x,
                  const std::vector<T>& y) {
  out.assign(std::max(x.size(), y.size()), T(0.0));
}

}  // namespace detail

template <class T>
Dual<T> operator+(const Dual<T>& x, const Dual<T>& y) {
  Dual<T> r;
  r.a = x.a + y.a;
  detail::resize_union(r.d, x.d, y.d);
  for (std::size_t i = 0; i < x.d.size(); ++i) r.d[i] = r.d[i] + x.d[i];
  for (std::size_t i = 0; i < y.d.size(); ++i) r.d[i] = r.d[i] + y.d[i];
  return r;
}

template <class T>
Dual<T> operator-(const Dual<T>& x, const Dual<T>& y) {
  Dual<T> r;
  r.a = x.a - y.a;
  detail::resize_union(r.d, x.d, y.d);
  for (std::size_t i = 0; i < x.d.size(); ++i) r.d[i] = r.d[i] + x.d[i];
  for (std::size_t i = 0; i < y.d.size(); ++i) r.d[i] = r.d[i] - y.d[i];
  return r;
}

template <class T>
Dual<T> operator-(const Dual<T>& x) {
  Dual<T> r;
  r.a = -x.a;
  r.d.reserve(x.d.size());
  for (const T& v : x.d) r.d.push_back(-v);
  return r;
}

template <class T>
Dual<T> operator*(const Dual<T>& x, const Dual<T>& y) {
  Dual<T> r;
  r.a = x.a * y.a;
  detail::resize_union(r.d, x.d, y.d);
  for (std::size_t i = 0; i < x.d.size(); ++i) r.d[i] = r.d[i] + x.d[i] * y.a;
  for (std::size_t i = 0; i < y.d.size(); ++i) r.d[i] = r.d[i] + x.a * y.d[i];
  return r;
}

template <class T>
Dual<T> operator/(const Dual<T>& x, const Dual<T>& y) {
  if (scalar_value(y) == 0.0) throw DomainError("division by zero");
  Dual<T> r;
  r.a = x.a / y.a;
  detail::resize_union(r.d, x.d, y.d);
  const T inv = T(1.0) / y.a;
  const T q = r.a * inv;  // x / y^2
  for (std::size_t i = 0; i < x.d.size(); ++i) r.d[i] = r.d[i] + x.d[i] * inv;
  for (std::size_t i = 0; i < y.d.size(); ++i) r.d[i] = r.d[i] - q * y.d[i];
  return r;
}

// double mixes; promotion keeps nested levels uniform
template <class T> Dual<T> operator+(const Dual<T>& x, double c) { return x + Dual<T>(c); }
template <class T> Dual<T> operator+(double c, const Dual<T>& x) { return Dual<T>(c) + x; }
template <class T> Dual<T> operator-(const Dual<T>& x, double c) { return x - Dual<T>(c); }
template <class T> Dual<T> operator-(double c, const Dual<T>& x) { return Dual<T>(c) - x; }
template <class T> Dual<T> operator*(const Dual<T>& x, double c) { return x * Dual<T>(c); }
template <class T> Dual<T> operator*(double c, const Dual<T>& x) { return Dual<T>(c) * x; }
template <class T> Dual<T> operator/(const Dual<T>& x, double c) { return x / Dual<T>(c); }
template <class T> Dual<T> operator/(double c, const Dual<T>& x) { return Dual<T>(c) / x; }

template <class T>
Dual<T> checked_div(const Dual<T>& x, const Dual<T>& y) { return x / y; }

template <class T> bool operator<(const Dual<T>& x, const Dual<T>& y) { return scalar_value(x) < scalar_value(y); }
template <class T> bool operator>(const Dual<T>& x, const Dual<T>& y) { return scalar_value(x) > scalar_value(y); }

namespace detail {

/// Chain rule for a unary function: value f(x.a), slope f'(x.a).
template <class T>
Dual<T> chain(const Dual<T>& x, T value, const T& slope) {
  Dual<T> r;
  r.a = std::move(value);
  r.d.reserve(x.d.size());
  for (const T& v : x.d) r.d.push_back(slope * v);
  return r;
}

}  // namespace detail

template <class T>
Dual<T> sin(const Dual<T>& x) {
  return detail::chain(x, sin(x.a), cos(x.a));
}

template <class T>
Dual<T> cos(const Dual<T>& x) {
  return detail::chain(x, cos(x.a), -sin(x.a));
}

template <class T>
Dual<T> tan(const Dual<T>& x) {
  T t = tan(x.a);
  return detail::chain(x, t, T(1.0) + t * t);
}

template <class T>
Dual<T> exp(const Dual<T>& x) {
  T e = exp(x.a);
  return detail::chain(x, e, e);
}

template <class T>
Dual<T> log(const Dual<T>& x) {
  if (scalar_value(x) <= 0.0) throw DomainError("log of non-positive value");
  return detail::chain(x, log(x.a), T(1.0) / x.a);
}

template <class T>
Dual<T> sqrt(const Dual<T>& x) {
  const double v = scalar_value(x);
  if (v < 0.0) throw DomainError("sqrt of negative value");
  if (v == 0.0 && !x.d.empty()) throw DomainError("sqrt not differentiable at 0");
  T s = sqrt(x.a);
  return detail::chain(x, s, T(0.5) / s);
}

template <class T>
Dual<T> abs(const Dual<T>& x) {
  const double v = scalar_value(x);
  const double sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
  Dual<T> r;
  r.a = v >= 0.0 ? x.a : -x.a;
  r.d.reserve(x.d.size());
  for (const T& e : x.d) r.d.push_back(T(sign) * e);
  return r;
}

template <class T>
T powi(const T& x, long long n) {
  if (n == 0) return T(1.0);
  if (n < 0) return T(1.0) / powi(x, -n);
  T r = x;
  T acc(1.0);
  long long m = n;
  while (m > 1) {
    if (m & 1) acc = acc * r;
    r = r * r;
    m >>= 1;
  }
  return acc * r;
}

/// General power. Non-integer exponents require a positive base; a negative
/// base with fractional exponent is a DomainError rather than a silent NaN.
template <class T>
Dual<T> pow(const Dual<T>& x, const Dual<T>& y) {
  const double b = scalar_value(x);
  const double e = scalar_value(y);
  long long n = 0;
  if (y.d.empty() && detail::integral_exponent(e, n)) {
    if (b == 0.0 && n < 0) throw DomainError("zero raised to negative power");
    return powi(x, n);
  }
  if (b < 0.0) throw DomainError("fractional power of negative base");
  if (b == 0.0) {
    if (e <= 0.0) throw DomainError("zero raised to non-positive power");
    if (!x.d.empty() && e < 1.0)
      throw DomainError("power not differentiable at 0");
    Dual<T> r;
    r.a = T(0.0);
    if (e == 1.0) r.d = x.d;
    else r.d.assign(std::max(x.d.size(), y.d.size()), T(0.0));
    return r;
  }
  return exp(y * log(x));
}

template <class T> Dual<T> pow(const Dual<T>& x, double e) { return pow(x, Dual<T>(e)); }

}  // namespace subfins
