#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bodykit/geometry.hpp"
#include "bodykit/types.hpp"

namespace bodykit {

/// Pinhole intrinsics, pixels.
struct Intrinsics {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  double width = 1.0, height = 1.0;

  void validate() const;
  bool operator==(const Intrinsics&) const = default;
};

/// Crop-relative extrinsic factorization. t_x, t_y are in-plane offsets in
/// model units; depth comes from the scale through lift_extrinsics.
struct Extrinsics {
  double s = 1.0;
  double tx = 0.0;
  double ty = 0.0;

  bool operator==(const Extrinsics&) const = default;
};

/// t = (t_x, t_y, 2 f_x / (s * crop_size)).
Vec3d lift_extrinsics(const Extrinsics& ext, const Intrinsics& intr, double crop_size);

/// Inverse of the depth relation: the scale that places the subject at depth t_z.
double scale_for_depth(double tz, const Intrinsics& intr, double crop_size);

/// Full-perspective projection of points translated by t. Throws
/// BehindCameraError listing every joint with non-positive depth.
JointSet2D project(const JointSet3D& points, const Intrinsics& intr, const Vec3d& t);

/// Back-projection of a pixel at known camera-frame depth; returns (X, Y).
Vec2d back_project(const Vec2d& pixel, double depth, const Intrinsics& intr);

/// Field-of-view focal length when fov_deg is given (horizontal), otherwise
/// the image diagonal. Principal point at the image center.
Intrinsics default_intrinsics(double width, double height, std::optional<double> fov_deg = std::nullopt);

template <class T>
Vec3<T> lift_extrinsics_t(const T& s, const T& tx, const T& ty, const Intrinsics& intr, double crop_size) {
  return {tx, ty, (2.0 * intr.fx / crop_size) / s};
}

/// Projection without depth checks; the caller guards depth.
template <class T>
Vec2<T> project_point(const Vec3<T>& p, const Intrinsics& intr) {
  return {intr.fx * p.x / p.z + intr.cx, intr.fy * p.y / p.z + intr.cy};
}

}  // namespace bodykit
