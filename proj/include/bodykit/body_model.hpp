#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bodykit/geometry.hpp"
#include "bodykit/types.hpp"

namespace bodykit {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

struct AngleLimit {
  double lo = -kUnbounded;
  double hi = kUnbounded;

  bool operator==(const AngleLimit&) const = default;
};

/// Degrees of freedom of one joint: 1-3 distinct rotation axes composed in
/// the declared order, each about the already-rotated frame.
struct DofSpec {
  std::size_t joint_id = 0;
  std::vector<Axis> axes;
  std::vector<AngleLimit> limits;

  bool operator==(const DofSpec&) const = default;
};

/// Row-compressed sparse matrix.
struct SparseRows {
  std::size_t num_cols = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> cols;
  std::vector<double> values;

  std::size_t rows() const { return offsets.size() - 1; }
  void push_row(std::span<const std::pair<std::uint32_t, double>> entries);

  static SparseRows from_dense(std::size_t rows, std::size_t cols, std::span<const double> dense);
  std::vector<double> to_dense() const;

  bool operator==(const SparseRows&) const = default;
};

using Face = std::array<std::uint32_t, 3>;

struct SkeletonLayer {
  std::vector<Vec3d> template_vertices;
  std::vector<Face> faces;
  SparseRows weights;  // V_k x J
};

/// Raw model contents. A BodyModel validates and freezes one of these.
struct ModelData {
  std::string name;
  std::string units = "m";
  std::vector<std::string> joint_names;
  std::vector<int> parents;  // -1 marks the root
  std::vector<DofSpec> dofs;
  std::map<std::string, std::vector<std::size_t>> joint_groups;

  std::vector<Vec3d> template_skin;
  std::vector<Face> skin_faces;
  std::size_t shape_dim = 0;
  std::vector<double> shape_dirs;  // (V_s x 3 x B), index (v * 3 + c) * B + b
  SparseRows skin_weights;         // V_s x J

  std::optional<SkeletonLayer> skeleton;

  SparseRows rest_joint_regressor;  // J x V_s
  SparseRows keypoint_regressor;    // K x V_s
  std::size_t keypoint_root = 0;

  // Pose-dependent correctives: accepted by the file format, not evaluated.
  std::vector<double> pose_correctives;
};

/// Immutable, validated parametric body model.
class BodyModel {
 public:
  /// Validates every invariant; throws FormatError naming the first bad field.
  explicit BodyModel(ModelData data);

  const ModelData& data() const { return data_; }
  const std::string& name() const { return data_.name; }

  std::size_t num_joints() const { return data_.parents.size(); }
  std::size_t pose_dim() const { return pose_dim_; }
  std::size_t shape_dim() const { return data_.shape_dim; }
  std::size_t num_skin_vertices() const { return data_.template_skin.size(); }
  std::size_t num_keypoints() const { return data_.keypoint_regressor.rows(); }
  bool has_skeleton() const { return data_.skeleton.has_value(); }
  std::size_t num_skeleton_vertices() const {
    return data_.skeleton ? data_.skeleton->template_vertices.size() : 0;
  }

  /// First pose index belonging to joint j.
  std::size_t dof_offset(std::size_t joint) const { return dof_offsets_[joint]; }
  const std::vector<DofSpec>& dofs() const { return data_.dofs; }
  const std::vector<int>& parents() const { return data_.parents; }

  /// Pose indices of the named joint group; throws ConfigError if unknown.
  std::vector<std::size_t> group_pose_indices(const std::string& group) const;

  /// Rest joints of the zero-shape template.
  const std::vector<Vec3d>& template_rest_joints() const { return template_rest_joints_; }

  /// Per-DOF limits flattened in pose order.
  const std::vector<AngleLimit>& flat_limits() const { return flat_limits_; }

 private:
  ModelData data_;
  std::vector<std::size_t> dof_offsets_;
  std::vector<AngleLimit> flat_limits_;
  std::size_t pose_dim_ = 0;
  std::vector<Vec3d> template_rest_joints_;
};

struct RestShape {
  Mesh rest_skin;
  std::vector<Vec3d> rest_joints;
};

struct FkResult {
  std::vector<Rigidd> global;  // per joint, root to leaf
  std::vector<Vec3d> posed_joints;
  std::vector<Vec3d> rest_joints;

  std::vector<Matrix4> global_matrices() const;
  /// Global transform composed with the inverse rest placement.
  std::vector<Rigidd> bone_transforms() const;
};

RestShape shape_blend(const BodyModel& model, const ShapeVector& beta);

std::vector<Mat3d> pose_to_rotations(const BodyModel& model, const PoseVector& pose,
                                     bool clamp = false);

FkResult forward_kinematics(const BodyModel& model, const PoseVector& pose,
                            const ShapeVector& beta, bool clamp = false);

FkResult forward_kinematics_from_rotations(const BodyModel& model,
                                           std::span<const Mat3d> rotations,
                                           std::span<const Vec3d> rest_joints);

Mesh skin(const BodyModel& model, const FkResult& fk, const Mesh& rest, Layer layer);

Mesh skin_with_bone_transforms(const BodyModel& model, std::span<const Rigidd> bones,
                               const Mesh& rest, Layer layer);

/// Skeleton-layer rest mesh for the given (shaped) rest joints: each bone
/// vertex follows the rest displacement of the joints it is bound to.
Mesh rest_skeleton(const BodyModel& model, std::span<const Vec3d> rest_joints);

JointSet3D regress_keypoints(const BodyModel& model, const Mesh& posed_skin);

PoseVector clamp_pose(const BodyModel& model, const PoseVector& pose);

void check_pose(const BodyModel& model, const PoseVector& pose);
void check_shape(const BodyModel& model, const ShapeVector& beta);

}  // namespace bodykit
