#pragma once

#include <vector>

#include "bodykit/cascade.hpp"
#include "bodykit/toy_model.hpp"

namespace bodykit {

/// Ranges for random ground-truth parameter sets.
struct SyntheticRanges {
  /// Bounded DOFs are drawn from this fraction of their limit interval.
  double limit_fraction = 0.5;
  /// Half-width for unbounded (root) DOFs, radians.
  double free_angle = 0.5;
  double scale_lo = 0.8, scale_hi = 1.2;
  double plane_offset = 0.3;  // |t_x|, |t_y| bound, model units
};

ParamSet random_params(const BodyModel& model, UniformSource& rng, const SyntheticRanges& ranges = {});

/// Source-side pose of a parameter set in per-joint axis-angle form.
struct AxisAnglePose {
  Vec3d global_orient;
  std::vector<double> body;  // (J - 1) x 3, joints 1..J-1
};

AxisAnglePose to_axis_angle_pose(const BodyModel& model, const PoseVector& pose);

/// Evidence rendered from known parameters. `oracle` also attaches the 3D
/// keypoints and the pose/shape targets.
Evidence render_evidence(const BodyModel& model, const ParamSet& truth, const Intrinsics& intr,
                         bool oracle, double crop_size = kDefaultCropSize);

}  // namespace bodykit
