#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>

#include "bodykit/dual.hpp"

namespace bodykit {

template <class T>
struct Vec3 {
  T x{}, y{}, z{};

  constexpr T& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr const T& operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  template <class U>
  static constexpr Vec3 from(const Vec3<U>& o) {
    return {T(o.x), T(o.y), T(o.z)};
  }
};

template <class T>
struct Vec2 {
  T x{}, y{};
};

using Vec3d = Vec3<double>;
using Vec2d = Vec2<double>;

template <class A, class B>
constexpr auto operator+(const Vec3<A>& a, const Vec3<B>& b) {
  return Vec3<decltype(a.x + b.x)>{a.x + b.x, a.y + b.y, a.z + b.z};
}
template <class A, class B>
constexpr auto operator-(const Vec3<A>& a, const Vec3<B>& b) {
  return Vec3<decltype(a.x - b.x)>{a.x - b.x, a.y - b.y, a.z - b.z};
}
template <class T>
constexpr Vec3<T> operator-(const Vec3<T>& a) {
  return {-a.x, -a.y, -a.z};
}
template <class S, class T>
constexpr auto operator*(const S& s, const Vec3<T>& v) -> Vec3<decltype(s * v.x)> {
  return {s * v.x, s * v.y, s * v.z};
}
template <class A, class B>
constexpr Vec3<A>& operator+=(Vec3<A>& a, const Vec3<B>& b) {
  a.x += b.x;
  a.y += b.y;
  a.z += b.z;
  return a;
}
template <class T>
constexpr bool operator==(const Vec3<T>& a, const Vec3<T>& b) {
  return a.x == b.x && a.y == b.y && a.z == b.z;
}

template <class T>
constexpr T dot(const Vec3<T>& a, const Vec3<T>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
template <class T>
constexpr Vec3<T> cross(const Vec3<T>& a, const Vec3<T>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3d& a) { return std::sqrt(dot(a, a)); }

/// Row-major 3x3 matrix.
template <class T>
struct Mat3 {
  std::array<T, 9> m{};

  constexpr T& operator()(int r, int c) { return m[static_cast<std::size_t>(r * 3 + c)]; }
  constexpr const T& operator()(int r, int c) const {
    return m[static_cast<std::size_t>(r * 3 + c)];
  }

  static constexpr Mat3 identity() {
    Mat3 r;
    r.m = {T(1.0), T(0.0), T(0.0), T(0.0), T(1.0), T(0.0), T(0.0), T(0.0), T(1.0)};
    return r;
  }
};

using Mat3d = Mat3<double>;

template <class T>
constexpr Mat3<T> operator*(const Mat3<T>& a, const Mat3<T>& b) {
  Mat3<T> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
  return r;
}
template <class A, class B>
constexpr auto operator*(const Mat3<A>& a, const Vec3<B>& v) {
  using R = decltype(a(0, 0) * v.x);
  return Vec3<R>{a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z,
                 a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
                 a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
}
template <class T>
constexpr Mat3<T> transpose(const Mat3<T>& a) {
  Mat3<T> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = a(j, i);
  return r;
}

/// Rigid placement x -> R x + t; the 3x4 top of a homogeneous 4x4.
template <class T>
struct Rigid {
  Mat3<T> rotation = Mat3<T>::identity();
  Vec3<T> translation{};

  constexpr Vec3<T> apply(const Vec3<T>& p) const { return rotation * p + translation; }
};

template <class T>
constexpr Rigid<T> operator*(const Rigid<T>& a, const Rigid<T>& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

using Rigidd = Rigid<double>;
using Matrix4 = std::array<double, 16>;

inline Matrix4 to_matrix4(const Rigidd& r) {
  Matrix4 h{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) h[static_cast<std::size_t>(i * 4 + j)] = r.rotation(i, j);
    h[static_cast<std::size_t>(i * 4 + 3)] = r.translation[i];
  }
  h[15] = 1.0;
  return h;
}

enum class Axis : std::uint8_t { X = 0, Y = 1, Z = 2 };

inline char axis_char(Axis a) { return static_cast<char>('X' + static_cast<int>(a)); }

/// Right-handed rotation by `angle` radians about a principal axis.
template <class T>
Mat3<T> axis_rotation(Axis axis, const T& angle) {
  using std::cos;
  using std::sin;
  const T c = cos(angle);
  const T s = sin(angle);
  const T one(1.0), zero(0.0);
  Mat3<T> r;
  switch (axis) {
    case Axis::X:
      r.m = {one, zero, zero, zero, c, -s, zero, s, c};
      break;
    case Axis::Y:
      r.m = {c, zero, s, zero, one, zero, -s, zero, c};
      break;
    case Axis::Z:
      r.m = {c, -s, zero, s, c, zero, zero, zero, one};
      break;
  }
  return r;
}

/// Rodrigues' formula. Small angles fall back to the first-order expansion.
Mat3d axis_angle_to_matrix(const Vec3d& aa);

/// Inverse of the exponential map; returns the axis-angle with angle in [0, pi].
Vec3d matrix_to_axis_angle(const Mat3d& r);

/// Intrinsic Euler composition R = R_a0(e0) * R_a1(e1) * R_a2(e2).
Mat3d euler_to_matrix(const std::array<Axis, 3>& order, const Vec3d& angles);

/// Decomposes R into intrinsic Euler angles for three distinct axes. At gimbal
/// lock the third angle is fixed to 0.
Vec3d matrix_to_euler(const std::array<Axis, 3>& order, const Mat3d& r);

double frobenius_distance(const Mat3d& a, const Mat3d& b);

}  // namespace bodykit
