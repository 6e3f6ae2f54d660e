#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <type_traits>

namespace bodykit {

/// Forward-mode dual number carrying N directional derivatives at once.
///
/// A gradient over P parameters is assembled in ceil(P / N) passes, each
/// seeding N unit tangents ("chunked" forward mode).
template <std::size_t N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)

  static constexpr std::size_t width = N;
};

template <class T>
struct is_dual : std::false_type {};
template <std::size_t N>
struct is_dual<Dual<N>> : std::true_type {};
template <class T>
inline constexpr bool is_dual_v = is_dual<T>::value;

inline constexpr double value_of(double x) { return x; }
template <std::size_t N>
constexpr double value_of(const Dual<N>& x) { return x.v; }

template <std::size_t N>
constexpr Dual<N> operator-(const Dual<N>& a) {
  Dual<N> r(-a.v);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = -a.d[i];
  return r;
}

template <std::size_t N>
constexpr Dual<N> operator+(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v + b.v);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}
template <std::size_t N>
constexpr Dual<N> operator+(const Dual<N>& a, double b) {
  Dual<N> r = a;
  r.v += b;
  return r;
}
template <std::size_t N>
constexpr Dual<N> operator+(double a, const Dual<N>& b) { return b + a; }

template <std::size_t N>
constexpr Dual<N> operator-(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v - b.v);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}
template <std::size_t N>
constexpr Dual<N> operator-(const Dual<N>& a, double b) {
  Dual<N> r = a;
  r.v -= b;
  return r;
}
template <std::size_t N>
constexpr Dual<N> operator-(double a, const Dual<N>& b) {
  Dual<N> r(a - b.v);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = -b.d[i];
  return r;
}

template <std::size_t N>
constexpr Dual<N> operator*(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v * b.v);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}
template <std::size_t N>
constexpr Dual<N> operator*(const Dual<N>& a, double b) {
  Dual<N> r(a.v * b);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = a.d[i] * b;
  return r;
}
template <std::size_t N>
constexpr Dual<N> operator*(double a, const Dual<N>& b) { return b * a; }

template <std::size_t N>
constexpr Dual<N> operator/(const Dual<N>& a, const Dual<N>& b) {
  const double inv = 1.0 / b.v;
  const double q = a.v * inv;
  Dual<N> r(q);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = (a.d[i] - q * b.d[i]) * inv;
  return r;
}
template <std::size_t N>
constexpr Dual<N> operator/(const Dual<N>& a, double b) {
  Dual<N> r(a.v / b);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = a.d[i] / b;
  return r;
}
template <std::size_t N>
constexpr Dual<N> operator/(double a, const Dual<N>& b) {
  const double q = a / b.v;
  Dual<N> r(q);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = -q * b.d[i] / b.v;
  return r;
}

template <std::size_t N>
constexpr Dual<N>& operator+=(Dual<N>& a, const Dual<N>& b) {
  a.v += b.v;
  for (std::size_t i = 0; i < N; ++i) a.d[i] += b.d[i];
  return a;
}
template <std::size_t N>
constexpr Dual<N>& operator+=(Dual<N>& a, double b) {
  a.v += b;
  return a;
}
template <std::size_t N>
constexpr Dual<N>& operator-=(Dual<N>& a, const Dual<N>& b) {
  a.v -= b.v;
  for (std::size_t i = 0; i < N; ++i) a.d[i] -= b.d[i];
  return a;
}
template <std::size_t N>
constexpr Dual<N>& operator*=(Dual<N>& a, const Dual<N>& b) {
  a = a * b;
  return a;
}
template <std::size_t N>
constexpr Dual<N>& operator*=(Dual<N>& a, double b) {
  a.v *= b;
  for (std::size_t i = 0; i < N; ++i) a.d[i] *= b;
  return a;
}

// Comparisons look at the primal value only.
template <std::size_t N>
constexpr bool operator<(const Dual<N>& a, const Dual<N>& b) { return a.v < b.v; }
template <std::size_t N>
constexpr bool operator<(const Dual<N>& a, double b) { return a.v < b; }
template <std::size_t N>
constexpr bool operator<(double a, const Dual<N>& b) { return a < b.v; }
template <std::size_t N>
constexpr bool operator>(const Dual<N>& a, const Dual<N>& b) { return a.v > b.v; }
template <std::size_t N>
constexpr bool operator>(const Dual<N>& a, double b) { return a.v > b; }
template <std::size_t N>
constexpr bool operator>(double a, const Dual<N>& b) { return a > b.v; }
template <std::size_t N>
constexpr bool operator<=(const Dual<N>& a, double b) { return a.v <= b; }
template <std::size_t N>
constexpr bool operator>=(const Dual<N>& a, double b) { return a.v >= b; }

template <std::size_t N>
Dual<N> sin(const Dual<N>& a) {
  const double c = std::cos(a.v);
  Dual<N> r(std::sin(a.v));
  for (std::size_t i = 0; i < N; ++i) r.d[i] = c * a.d[i];
  return r;
}
template <std::size_t N>
Dual<N> cos(const Dual<N>& a) {
  const double s = -std::sin(a.v);
  Dual<N> r(std::cos(a.v));
  for (std::size_t i = 0; i < N; ++i) r.d[i] = s * a.d[i];
  return r;
}
template <std::size_t N>
Dual<N> sqrt(const Dual<N>& a) {
  const double root = std::sqrt(a.v);
  const double k = root > 0.0 ? 0.5 / root : 0.0;
  Dual<N> r(root);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = k * a.d[i];
  return r;
}
// sign(0) = 0, so |x| has a zero subgradient at the kink.
template <std::size_t N>
Dual<N> abs(const Dual<N>& a) {
  if (a.v > 0.0) return a;
  if (a.v < 0.0) return -a;
  return Dual<N>(0.0);
}

template <std::size_t N>
bool isfinite(const Dual<N>& a) {
  if (!std::isfinite(a.v)) return false;
  for (double x : a.d)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace bodykit
