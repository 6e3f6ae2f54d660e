#include "bodykit/synthetic.hpp"

#include <cmath>

namespace bodykit {

ParamSet random_params(const BodyModel& model, UniformSource& rng, const SyntheticRanges& ranges) {
  ParamSet p = ParamSet::zeros(model);
  const auto& limits = model.flat_limits();
  for (std::size_t i = 0; i < p.theta.size(); ++i) {
    const auto& lim = limits[i];
    const double lo = std::isinf(lim.lo) ? -ranges.free_angle : ranges.limit_fraction * lim.lo;
    const double hi = std::isinf(lim.hi) ? ranges.free_angle : ranges.limit_fraction * lim.hi;
    p.theta.values[i] = rng.uniform(lo, hi);
  }
  for (auto& b : p.beta.values) b = rng.normal();
  p.pi.s = rng.uniform(ranges.scale_lo, ranges.scale_hi);
  p.pi.tx = rng.uniform(-ranges.plane_offset, ranges.plane_offset);
  p.pi.ty = rng.uniform(-ranges.plane_offset, ranges.plane_offset);
  return p;
}

AxisAnglePose to_axis_angle_pose(const BodyModel& model, const PoseVector& pose) {
  const auto rotations = pose_to_rotations(model, pose, false);
  AxisAnglePose out;
  out.global_orient = matrix_to_axis_angle(rotations[0]);
  for (std::size_t j = 1; j < rotations.size(); ++j) {
    const Vec3d aa = matrix_to_axis_angle(rotations[j]);
    out.body.insert(out.body.end(), {aa.x, aa.y, aa.z});
  }
  return out;
}

Evidence render_evidence(const BodyModel& model, const ParamSet& truth, const Intrinsics& intr, bool oracle,
                         double crop_size) {
  Evidence ev;
  ev.intrinsics = intr;
  ev.crop_size = crop_size;
  ev.j2d_hat = reproject(model, truth, intr, crop_size);
  if (oracle) {
    const auto body = kin::pose_body<double>(model, truth.theta.values, truth.beta.values);
    ev.j3d_hat = JointSet3D(body.keypoints);
    ev.theta_hat = truth.theta;
    ev.beta_hat = truth.beta;
  }
  return ev;
}

}  // namespace bodykit
