#include "bodykit/camera.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "bodykit/errors.hpp"

namespace bodykit {

BehindCameraError::BehindCameraError(std::vector<std::size_t> joints)
    : Error([&] {
        std::string msg = "points behind the camera:";
        for (auto j : joints) msg += " " + std::to_string(j);
        return msg;
      }()),
      joints_(std::move(joints)) {}

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("focal lengths must be positive");
  if (!(width > 0.0) || !(height > 0.0)) throw ConfigError("image dimensions must be positive");
  if (!std::isfinite(cx) || !std::isfinite(cy)) throw ConfigError("principal point must be finite");
}

Vec3d lift_extrinsics(const Extrinsics& ext, const Intrinsics& intr, double crop_size) {
  if (!(ext.s > 0.0)) throw DomainError("extrinsic scale must be positive");
  if (!(crop_size > 0.0)) throw DomainError("crop size must be positive");
  return lift_extrinsics_t<double>(ext.s, ext.tx, ext.ty, intr, crop_size);
}

double scale_for_depth(double tz, const Intrinsics& intr, double crop_size) {
  if (!(tz > 0.0)) throw DomainError("depth must be positive");
  return 2.0 * intr.fx / (tz * crop_size);
}

JointSet2D project(const JointSet3D& points, const Intrinsics& intr, const Vec3d& t) {
  std::vector<std::size_t> behind;
  std::vector<Vec2d> uv(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    const Vec3d p = points.positions[k] + t;
    if (!(p.z > 0.0)) {
      behind.push_back(k);
      continue;
    }
    uv[k] = project_point(p, intr);
  }
  if (!behind.empty()) throw BehindCameraError(std::move(behind));
  return JointSet2D(std::move(uv), points.visibility);
}

Vec2d back_project(const Vec2d& pixel, double depth, const Intrinsics& intr) {
  return {(pixel.x - intr.cx) * depth / intr.fx, (pixel.y - intr.cy) * depth / intr.fy};
}

Intrinsics default_intrinsics(double width, double height, std::optional<double> fov_deg) {
  if (!(width > 0.0) || !(height > 0.0)) throw ConfigError("image dimensions must be positive");
  double f = std::hypot(width, height);
  if (fov_deg) {
    if (!(*fov_deg > 0.0 && *fov_deg < 180.0)) throw ConfigError("field of view must lie in (0, 180) degrees");
    f = 0.5 * width / std::tan(0.5 * *fov_deg * std::numbers::pi / 180.0);
  }
  return {f, f, 0.5 * width, 0.5 * height, width, height};
}

}  // namespace bodykit
