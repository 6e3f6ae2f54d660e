#pragma once

#include <span>
#include <vector>

#include "bodykit/body_model.hpp"
#include "bodykit/camera.hpp"
#include "bodykit/types.hpp"

namespace bodykit {

/// Theta = {pose, shape, camera extrinsics}.
struct ParamSet {
  PoseVector theta;
  ShapeVector beta;
  Extrinsics pi;

  static ParamSet zeros(const BodyModel& model);
  bool operator==(const ParamSet&) const = default;
};

/// Flat optimizer vector: [theta (D) | beta (B) | s, t_x, t_y].
struct ParamLayout {
  std::size_t pose_dim = 0;
  std::size_t shape_dim = 0;

  explicit ParamLayout(const BodyModel& model)
      : pose_dim(model.pose_dim()), shape_dim(model.shape_dim()) {}
  ParamLayout(std::size_t d, std::size_t b) : pose_dim(d), shape_dim(b) {}

  std::size_t size() const { return pose_dim + shape_dim + 3; }
  std::size_t beta_offset() const { return pose_dim; }
  std::size_t pi_offset() const { return pose_dim + shape_dim; }

  std::vector<double> flatten(const ParamSet& p) const;
  ParamSet unflatten(std::span<const double> x) const;

  template <class T>
  std::span<const T> theta(std::span<const T> x) const { return x.subspan(0, pose_dim); }
  template <class T>
  std::span<const T> beta(std::span<const T> x) const { return x.subspan(pose_dim, shape_dim); }
};

void check_params(const BodyModel& model, const ParamSet& p);

}  // namespace bodykit
