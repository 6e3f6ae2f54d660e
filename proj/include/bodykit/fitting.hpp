#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bodykit/body_model.hpp"
#include "bodykit/kinematics.hpp"
#include "bodykit/optim.hpp"
#include "bodykit/params.hpp"

namespace bodykit {

/// Converts an axis-angle rotation into Euler angles in the root joint's
/// declared axis order. Throws ConfigError when the root has fewer than
/// three DOFs.
Vec3d axis_angle_to_euler(const BodyModel& model, const Vec3d& axis_angle);

/// Which parameters a stage may move.
struct StageSelection {
  enum class Pose { None, All, NonRoot, Group, Joints };
  Pose pose = Pose::All;
  std::string group;                // Pose::Group
  std::vector<std::size_t> joints;  // Pose::Joints
  bool beta = true;
  bool extrinsics = false;
  /// Lets this stage move the root even when the global orientation is frozen.
  bool unfreeze_root = false;
};

struct FitStage {
  std::string name;
  StageSelection free;
  std::size_t max_iters = 200;
  double step_size = 1e-2;
  double tolerance = 1e-8;
  double limit_penalty_weight = 10.0;

  StageSettings settings() const { return {max_iters, step_size, tolerance}; }
};

struct FitSchedule {
  std::vector<FitStage> stages;
  /// Freeze the converted source global orientation when one is supplied.
  bool freeze_global = true;

  /// Upper limbs + shape, then all non-root pose + shape, then everything.
  static FitSchedule defaults();
  static FitSchedule from_json(const std::string& text);
  std::string to_json() const;
  void validate() const;
};

/// Flat-vector mask for a stage; the root is excluded when `freeze_root` is
/// set unless the stage unfreezes it.
std::vector<bool> stage_mask(const BodyModel& model, const FitStage& stage, bool freeze_root);

/// Mean squared vertex distance between the posed skin and the target, plus
/// limit_penalty_weight times the squared limit excursions.
double mesh_distance(const BodyModel& model, const ParamSet& params, const Mesh& target,
                     double limit_penalty_weight = 0.0);

template <class T>
T mesh_distance_t(const BodyModel& model, std::span<const T> theta, std::span<const T> beta,
                  std::span<const Vec3d> target, double limit_penalty_weight) {
  const auto body = kin::pose_body<T>(model, theta, beta);
  T acc(0.0);
  for (std::size_t v = 0; v < target.size(); ++v) {
    const auto d = body.skin[v] - target[v];
    acc += d.x * d.x + d.y * d.y + d.z * d.z;
  }
  acc = acc / static_cast<double>(target.size());
  if (limit_penalty_weight > 0.0) acc += limit_penalty_weight * kin::limit_excess_squared<T>(model, theta);
  return acc;
}

/// Posed skin for a parameter set (extrinsics are ignored).
Mesh posed_skin(const BodyModel& model, const ParamSet& params);

struct StageReport {
  std::string name;
  double objective = 0.0;
  std::size_t iterations = 0;
  double pve = 0.0;  // model units
  std::string stop_reason;
};

struct FitResult {
  ParamSet params;
  std::vector<StageReport> stages;
  double pve = 0.0;  // model units, after the final clamp
};

/// Runs the schedule's stages in order, each warm-started from the previous.
/// With `source_global_orient`, the root DOFs are set to its Euler conversion
/// and held fixed (unless a stage unfreezes them or the schedule disables
/// freezing). The result is clamped to the joint limits.
FitResult fit_model_to_mesh(const BodyModel& model, const Mesh& target, const ParamSet& init,
                            const FitSchedule& schedule,
                            const std::optional<Vec3d>& source_global_orient = std::nullopt);

}  // namespace bodykit
