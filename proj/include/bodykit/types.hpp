#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bodykit/geometry.hpp"

namespace bodykit {

/// Constrained pose: radians per DOF, ordered by joint then axis.
struct PoseVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const PoseVector&) const = default;
};

/// Shape-space coefficients (dimensionless).
struct ShapeVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const ShapeVector&) const = default;
};

enum class Layer { Skin, Skeleton };

struct Mesh {
  std::vector<Vec3d> vertices;
  Layer layer = Layer::Skin;
};

/// K 3D keypoints in model units with per-joint visibility weights in [0, 1].
struct JointSet3D {
  std::vector<Vec3d> positions;
  std::vector<double> visibility;

  JointSet3D() = default;
  explicit JointSet3D(std::vector<Vec3d> p)
      : positions(std::move(p)), visibility(positions.size(), 1.0) {}
  JointSet3D(std::vector<Vec3d> p, std::vector<double> vis)
      : positions(std::move(p)), visibility(std::move(vis)) {}

  std::size_t size() const { return positions.size(); }
};

/// K image-plane keypoints in pixels.
struct JointSet2D {
  std::vector<Vec2d> positions;
  std::vector<double> visibility;

  JointSet2D() = default;
  explicit JointSet2D(std::vector<Vec2d> p)
      : positions(std::move(p)), visibility(positions.size(), 1.0) {}
  JointSet2D(std::vector<Vec2d> p, std::vector<double> vis)
      : positions(std::move(p)), visibility(std::move(vis)) {}

  std::size_t size() const { return positions.size(); }
};

}  // namespace bodykit
