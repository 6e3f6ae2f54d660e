#pragma once

#include <optional>
#include <vector>

#include "bodykit/body_model.hpp"
#include "bodykit/camera.hpp"
#include "bodykit/kinematics.hpp"
#include "bodykit/objectives.hpp"
#include "bodykit/optim.hpp"
#include "bodykit/params.hpp"

namespace bodykit {

inline constexpr double kDefaultCropSize = 256.0;

/// Image-plane evidence for one sample. 2D keypoints are the minimum signal;
/// the remaining fields switch on extra loss terms when present.
struct Evidence {
  JointSet2D j2d_hat;
  Intrinsics intrinsics;
  double crop_size = kDefaultCropSize;
  std::optional<JointSet3D> j3d_hat;
  std::optional<PoseVector> theta_hat;
  std::optional<ShapeVector> beta_hat;

  double image_extent() const { return std::max(intrinsics.width, intrinsics.height); }
  Supervision supervision() const;
};

struct CascadeSettings {
  std::size_t stages = 6;
  std::size_t steps_per_stage = 50;
  double step_size = 2e-2;
  double tolerance = 1e-12;
  double limit_penalty_weight = 10.0;
  LossWeights weights;
};

struct CascadeStage {
  ParamSet params;
  double objective = 0.0;
  LossBreakdown breakdown;
};

/// Theta_0 .. Theta_L with their objective values.
struct CascadeTrace {
  std::vector<CascadeStage> stages;
  std::optional<double> loss_refine;  // with theta supervision only
  std::optional<double> loss_total;

  std::size_t num_layers() const { return stages.empty() ? 0 : stages.size() - 1; }
};

/// Evidence objective: weighted keypoint/parameter losses on the reprojected
/// model plus the soft joint-limit penalty. Infinite when any keypoint falls
/// behind the camera or the scale is non-positive.
template <class T>
T evidence_objective_t(const BodyModel& model, const Evidence& ev, const ParamLayout& layout,
                       std::span<const T> x, const CascadeSettings& settings) {
  const auto theta = layout.theta(x);
  const auto beta = layout.beta(x);
  const T& s = x[layout.pi_offset()];
  if (!(s > 0.0)) return T(std::numeric_limits<double>::infinity());
  const auto body = kin::pose_body<T>(model, theta, beta);
  const Vec3<T> t = lift_extrinsics_t<T>(s, x[layout.pi_offset() + 1], x[layout.pi_offset() + 2],
                                         ev.intrinsics, ev.crop_size);
  std::vector<Vec2<T>> uv(body.keypoints.size());
  for (std::size_t k = 0; k < uv.size(); ++k) {
    const Vec3<T> p = body.keypoints[k] + t;
    if (!(p.z > 0.0)) return T(std::numeric_limits<double>::infinity());
    uv[k] = project_point(p, ev.intrinsics);
  }
  const auto& w = settings.weights;
  T kp = loss::l1_joints2d<T>(uv, ev.j2d_hat, ev.image_extent());
  if (ev.j3d_hat) kp += loss::l1_joints3d<T>(body.keypoints, *ev.j3d_hat);
  T total = w.kp * kp;
  if (ev.theta_hat) total += w.theta * loss::l1_mean<T>(theta, ev.theta_hat->values);
  if (ev.beta_hat) total += w.beta * loss::l1_mean<T>(beta, ev.beta_hat->values);
  if (settings.limit_penalty_weight > 0.0)
    total += settings.limit_penalty_weight * kin::limit_excess_squared<T>(model, theta);
  return total;
}

double evidence_objective(const BodyModel& model, const Evidence& ev, const ParamSet& params,
                          const CascadeSettings& settings = {});

/// Loss terms of a parameter set against the evidence (no limit penalty).
LossBreakdown evidence_breakdown(const BodyModel& model, const Evidence& ev, const ParamSet& params,
                                 const LossWeights& weights = {});

/// Model keypoints of `params` projected into the evidence camera.
JointSet2D reproject(const BodyModel& model, const ParamSet& params, const Intrinsics& intr, double crop_size);

/// Theta_0: zero pose and shape; scale from the ratio of keypoint bounding-box
/// size to the rest-pose keypoint spread; (t_x, t_y) place the projected root
/// on the box center. Throws InsufficientEvidenceError with < 2 visible joints.
ParamSet coarse_init(const Evidence& ev, const BodyModel& model);

/// `steps` descent iterations on the evidence objective; never increases it.
/// Throws DomainError for steps == 0.
ParamSet refine_stage(const ParamSet& params, const Evidence& ev, const BodyModel& model, std::size_t steps,
                      const CascadeSettings& settings = {});

CascadeTrace run_cascade(const Evidence& ev, const BodyModel& model, const CascadeSettings& settings = {});
/// Same, starting from an explicit Theta_0.
CascadeTrace run_cascade_from(const ParamSet& init, const Evidence& ev, const BodyModel& model,
                              const CascadeSettings& settings = {});

enum class ProbeComponent { Scale, PlaneTranslation };

struct PckPair {
  double at_005 = 0.0;
  double at_010 = 0.0;

  bool operator==(const PckPair&) const = default;
};

/// PCK of Theta_L with one extrinsic component replaced by layer i's value.
PckPair factorization_probe(const CascadeTrace& trace, const Evidence& ev, const BodyModel& model,
                            ProbeComponent component, std::size_t layer);

/// PCK@0.05 and @0.1 of a parameter set against the evidence keypoints,
/// normalized by the evidence bounding box.
PckPair evidence_pck(const BodyModel& model, const Evidence& ev, const ParamSet& params);

}  // namespace bodykit
