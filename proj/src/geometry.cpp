#include "bodykit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bodykit {

Mat3d axis_angle_to_matrix(const Vec3d& aa) {
  const double angle = norm(aa);
  Mat3d k;
  k.m = {0.0, -aa.z, aa.y, aa.z, 0.0, -aa.x, -aa.y, aa.x, 0.0};
  Mat3d r = Mat3d::identity();
  if (angle < 1e-12) {
    for (std::size_t i = 0; i < 9; ++i) r.m[i] += k.m[i];
    return r;
  }
  const double a = std::sin(angle) / angle;
  const double b = (1.0 - std::cos(angle)) / (angle * angle);
  const Mat3d k2 = k * k;
  for (std::size_t i = 0; i < 9; ++i) r.m[i] += a * k.m[i] + b * k2.m[i];
  return r;
}

Vec3d matrix_to_axis_angle(const Mat3d& r) {
  const double trace = r(0, 0) + r(1, 1) + r(2, 2);
  const double cos_angle = std::clamp((trace - 1.0) * 0.5, -1.0, 1.0);
  const Vec3d skew{r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)};
  const double sin2 = norm(skew);  // 2 sin(angle)
  const double angle = std::atan2(sin2 * 0.5, cos_angle);
  if (cos_angle >= 0.0) return sin2 > 1e-6 ? (angle / sin2) * skew : 0.5 * skew;

  // Past a quarter turn the skew part loses precision; take the axis from the
  // symmetric part instead, (R + R^T) / 2 = cos I + (1 - cos) n n^T.
  double outer[3][3];
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      outer[a][b] = (0.5 * (r(a, b) + r(b, a)) - (a == b ? cos_angle : 0.0)) / (1.0 - cos_angle);
  int col = 0;
  for (int i = 1; i < 3; ++i)
    if (outer[i][i] > outer[col][col]) col = i;
  Vec3d n{outer[0][col], outer[1][col], outer[2][col]};
  n = (1.0 / norm(n)) * n;
  // Resolve the sign with the skew part, which is 2 sin(angle) n.
  if (dot(n, skew) < 0.0) n = -n;
  return angle * n;
}

Mat3d euler_to_matrix(const std::array<Axis, 3>& order, const Vec3d& angles) {
  return axis_rotation(order[0], angles.x) * axis_rotation(order[1], angles.y) *
         axis_rotation(order[2], angles.z);
}

Vec3d matrix_to_euler(const std::array<Axis, 3>& order, const Mat3d& r) {
  const int i = static_cast<int>(order[0]);
  const int j = static_cast<int>(order[1]);
  const int k = static_cast<int>(order[2]);
  // +1 for cyclic orders (XYZ, YZX, ZXY).
  const double e = ((j - i + 3) % 3 == 1) ? 1.0 : -1.0;

  const double cos_mid = std::hypot(r(i, i), r(i, j));
  const double mid = std::atan2(e * r(i, k), cos_mid);
  double last = 0.0;
  if (cos_mid > 1e-12) last = std::atan2(-e * r(i, j), r(i, i));

  // The first angle absorbs whatever remains, which keeps the round trip
  // well conditioned near gimbal lock.
  const Mat3d rest = r * transpose(axis_rotation(order[2], last)) *
                     transpose(axis_rotation(order[1], mid));
  const double first = std::atan2(e * rest(k, j), rest(j, j));
  return {first, mid, last};
}

double frobenius_distance(const Mat3d& a, const Mat3d& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < 9; ++i) s += (a.m[i] - b.m[i]) * (a.m[i] - b.m[i]);
  return std::sqrt(s);
}

}  // namespace bodykit
