#pragma once

// Independent oracles and small hand-built models shared by the test suites.
// Nothing here calls the library's rotation or kinematics code.

#include <array>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "bodykit/body_model.hpp"
#include "bodykit/toy_model.hpp"

namespace support {

using namespace bodykit;

using M3 = std::array<std::array<double, 3>, 3>;
using H4 = std::array<std::array<double, 4>, 4>;

inline M3 mul(const M3& a, const M3& b) {
  M3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

inline M3 eye3() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

inline M3 rx(double a) { return {{{1, 0, 0}, {0, std::cos(a), -std::sin(a)}, {0, std::sin(a), std::cos(a)}}}; }
inline M3 ry(double a) { return {{{std::cos(a), 0, std::sin(a)}, {0, 1, 0}, {-std::sin(a), 0, std::cos(a)}}}; }
inline M3 rz(double a) { return {{{std::cos(a), -std::sin(a), 0}, {std::sin(a), std::cos(a), 0}, {0, 0, 1}}}; }

inline M3 r_axis(Axis axis, double a) {
  switch (axis) {
    case Axis::X: return rx(a);
    case Axis::Y: return ry(a);
    default: return rz(a);
  }
}

inline double max_diff(const M3& a, const Mat3d& b) {
  double d = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d = std::max(d, std::abs(a[i][j] - b(i, j)));
  return d;
}

inline Mat3d to_mat(const M3& a) {
  Mat3d r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = a[i][j];
  return r;
}

// exp of the skew matrix of w by power series, after halving w until it is
// small and squaring back up; the bare series loses orthogonality for the
// large steps an LM solver can try.
inline M3 expm_taylor(const Vec3d& w) {
  int halvings = 0;
  double n2 = w.x * w.x + w.y * w.y + w.z * w.z;
  Vec3d u = w;
  while (n2 > 0.25) {
    u = {u.x / 2, u.y / 2, u.z / 2};
    n2 /= 4;
    ++halvings;
  }
  const M3 k = {{{0, -u.z, u.y}, {u.z, 0, -u.x}, {-u.y, u.x, 0}}};
  M3 sum = eye3(), term = eye3();
  for (int n = 1; n < 30; ++n) {
    term = mul(term, k);
    for (auto& row : term)
      for (auto& v : row) v /= n;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) sum[i][j] += term[i][j];
  }
  for (int h = 0; h < halvings; ++h) sum = mul(sum, sum);
  return sum;
}

inline H4 hmul(const H4& a, const H4& b) {
  H4 r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

inline H4 homog(const M3& r, const Vec3d& t) {
  H4 h{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) h[i][j] = r[i][j];
    h[i][3] = t[i];
  }
  h[3][3] = 1.0;
  return h;
}

inline Vec3d happly(const H4& h, const Vec3d& p) {
  return {h[0][0] * p.x + h[0][1] * p.y + h[0][2] * p.z + h[0][3],
          h[1][0] * p.x + h[1][1] * p.y + h[1][2] * p.z + h[1][3],
          h[2][0] * p.x + h[2][1] * p.y + h[2][2] * p.z + h[2][3]};
}

inline double dist(const Vec3d& a, const Vec3d& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

// Model whose first J vertices sit on the joints (rigidly bound, and used as
// the rest-joint regressor), followed by `extra` vertices with explicit
// weights. Every vertex is also a keypoint. The root gets three unbounded
// XYZ axes; `axes[j]` sets the others with (-pi, pi) limits.
struct Extra {
  Vec3d position;
  std::vector<std::pair<std::uint32_t, double>> weights;
};

inline ModelData make_data(const std::vector<int>& parents, const std::vector<Vec3d>& joints,
                           const std::vector<std::vector<Axis>>& axes, const std::vector<Extra>& extra = {}) {
  ModelData d;
  d.name = "hand-built";
  const std::size_t J = parents.size();
  d.parents = parents;
  for (std::size_t j = 0; j < J; ++j) {
    d.joint_names.push_back("j" + std::to_string(j));
    DofSpec s;
    s.joint_id = j;
    s.axes = j == 0 ? std::vector<Axis>{Axis::X, Axis::Y, Axis::Z} : axes[j];
    for (std::size_t a = 0; a < s.axes.size(); ++a)
      s.limits.push_back(j == 0 ? AngleLimit{} : AngleLimit{-std::numbers::pi, std::numbers::pi});
    d.dofs.push_back(s);
  }
  d.skin_weights.num_cols = J;
  for (std::size_t j = 0; j < J; ++j) {
    d.template_skin.push_back(joints[j]);
    const std::pair<std::uint32_t, double> w[] = {{static_cast<std::uint32_t>(j), 1.0}};
    d.skin_weights.push_row(w);
  }
  for (const auto& e : extra) {
    d.template_skin.push_back(e.position);
    d.skin_weights.push_row(e.weights);
  }
  const std::size_t V = d.template_skin.size();
  d.shape_dim = 1;
  d.shape_dirs.assign(V * 3, 0.0);
  for (std::size_t v = 0; v < V; ++v) d.shape_dirs[(v * 3 + 0) * 1] = 0.01 * static_cast<double>(v + 1);
  d.rest_joint_regressor.num_cols = V;
  for (std::size_t j = 0; j < J; ++j) {
    const std::pair<std::uint32_t, double> w[] = {{static_cast<std::uint32_t>(j), 1.0}};
    d.rest_joint_regressor.push_row(w);
  }
  d.keypoint_regressor.num_cols = V;
  for (std::size_t v = 0; v < V; ++v) {
    const std::pair<std::uint32_t, double> w[] = {{static_cast<std::uint32_t>(v), 1.0}};
    d.keypoint_regressor.push_row(w);
  }
  if (V >= 3) d.skin_faces.push_back({0, 1, 2});
  return d;
}

// Three joints up +Y with unit bones; the middle and end joints hinge about X.
// Vertex 3 is an end effector one unit past the last joint.
inline BodyModel unit_chain() {
  return BodyModel(make_data({-1, 0, 1}, {{0, 0, 0}, {0, 1, 0}, {0, 2, 0}}, {{}, {Axis::X}, {Axis::X}},
                             {{{0, 3, 0}, {{2, 1.0}}}}));
}

inline std::vector<double> random_pose(const BodyModel& model, UniformSource& rng, double fraction = 0.8) {
  std::vector<double> theta(model.pose_dim());
  const auto& lim = model.flat_limits();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double lo = std::isinf(lim[i].lo) ? -std::numbers::pi : fraction * lim[i].lo;
    const double hi = std::isinf(lim[i].hi) ? std::numbers::pi : fraction * lim[i].hi;
    theta[i] = rng.uniform(lo, hi);
  }
  return theta;
}

inline Vec3d random_unit(UniformSource& rng) {
  for (;;) {
    const Vec3d v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double n = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
    if (n > 0.1 && n <= 1.0) return {v.x / n, v.y / n, v.z / n};
  }
}

// Relative gradient error with a floor for components that are ~0 on both
// sides (FD noise there is absolute, not relative).
inline double gradient_rel_error(double a, double b, double floor = 1e-7) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace support
