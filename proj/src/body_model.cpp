#include "bodykit/body_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "bodykit/errors.hpp"
#include "bodykit/kinematics.hpp"

namespace bodykit {

namespace {

std::string idx(const std::string& field, std::size_t i) {
  return field + "[" + std::to_string(i) + "]";
}

void check_finite(const std::string& field, std::span<const Vec3d> vs) {
  for (std::size_t i = 0; i < vs.size(); ++i)
    for (int c = 0; c < 3; ++c)
      if (!std::isfinite(vs[i][c])) throw FormatError(idx(field, i), "non-finite coordinate");
}

void check_faces(const std::string& field, std::span<const Face> faces, std::size_t nv) {
  for (std::size_t i = 0; i < faces.size(); ++i)
    for (auto f : faces[i])
      if (f >= nv) throw FormatError(idx(field, i), "vertex index out of range");
}

void check_sparse_shape(const std::string& field, const SparseRows& m, std::size_t rows,
                        std::size_t cols) {
  if (m.offsets.empty() || m.offsets.front() != 0 || m.offsets.back() != m.cols.size() ||
      m.cols.size() != m.values.size())
    throw FormatError(field, "inconsistent sparse storage");
  if (m.rows() != rows)
    throw FormatError(field, "expected " + std::to_string(rows) + " rows, found " +
                                 std::to_string(m.rows()));
  if (m.num_cols != cols)
    throw FormatError(field, "expected " + std::to_string(cols) + " columns, found " +
                                 std::to_string(m.num_cols));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (m.offsets[r + 1] < m.offsets[r]) throw FormatError(idx(field, r), "decreasing offsets");
    for (std::size_t k = m.offsets[r]; k < m.offsets[r + 1]; ++k) {
      if (m.cols[k] >= cols) throw FormatError(idx(field, r), "column index out of range");
      if (!std::isfinite(m.values[k])) throw FormatError(idx(field, r), "non-finite value");
    }
  }
}

void check_partition(const std::string& field, const SparseRows& w) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t k = w.offsets[r]; k < w.offsets[r + 1]; ++k) {
      if (w.values[k] < 0.0) throw FormatError(idx(field, r), "negative skinning weight");
      sum += w.values[k];
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw FormatError(idx(field, r), "weights sum to " + std::to_string(sum) + ", expected 1");
  }
}

}  // namespace

void SparseRows::push_row(std::span<const std::pair<std::uint32_t, double>> entries) {
  for (const auto& [c, v] : entries) {
    cols.push_back(c);
    values.push_back(v);
  }
  offsets.push_back(cols.size());
}

SparseRows SparseRows::from_dense(std::size_t rows, std::size_t ncols,
                                  std::span<const double> dense) {
  if (dense.size() != rows * ncols) throw ShapeError("dense matrix size mismatch");
  SparseRows m;
  m.num_cols = ncols;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < ncols; ++c) {
      const double v = dense[r * ncols + c];
      if (v != 0.0) {
        m.cols.push_back(static_cast<std::uint32_t>(c));
        m.values.push_back(v);
      }
    }
    m.offsets.push_back(m.cols.size());
  }
  return m;
}

std::vector<double> SparseRows::to_dense() const {
  std::vector<double> dense(rows() * num_cols, 0.0);
  for (std::size_t r = 0; r < rows(); ++r)
    for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) dense[r * num_cols + cols[k]] = values[k];
  return dense;
}

BodyModel::BodyModel(ModelData data) : data_(std::move(data)) {
  const auto& d = data_;
  const std::size_t nj = d.parents.size();
  if (nj == 0) throw FormatError("parents", "model has no joints");
  if (!d.joint_names.empty() && d.joint_names.size() != nj)
    throw FormatError("joint_names", "expected one name per joint");

  std::size_t roots = 0;
  for (std::size_t j = 0; j < nj; ++j) {
    const int p = d.parents[j];
    if (p < 0) {
      if (p != -1) throw FormatError(idx("parents", j), "root sentinel must be -1");
      ++roots;
    } else if (static_cast<std::size_t>(p) >= j) {
      throw FormatError(idx("parents", j), "parent index must precede child (topological order)");
    }
  }
  if (roots != 1) throw FormatError("parents", "expected exactly one root, found " + std::to_string(roots));

  if (d.dofs.size() != nj)
    throw FormatError("dofs", "expected " + std::to_string(nj) + " entries, found " +
                                  std::to_string(d.dofs.size()));
  dof_offsets_.resize(nj);
  for (std::size_t j = 0; j < nj; ++j) {
    const DofSpec& s = d.dofs[j];
    const std::string f = idx("dofs", j);
    if (s.joint_id != j) throw FormatError(f + ".joint_id", "does not match position");
    if (s.axes.empty() || s.axes.size() > 3) throw FormatError(f + ".axes", "need 1 to 3 axes");
    std::set<Axis> distinct(s.axes.begin(), s.axes.end());
    if (distinct.size() != s.axes.size()) throw FormatError(f + ".axes", "axes must be distinct");
    if (s.limits.size() != s.axes.size())
      throw FormatError(f + ".limits", "expected one limit per axis");
    for (std::size_t a = 0; a < s.limits.size(); ++a) {
      const auto& l = s.limits[a];
      if (std::isnan(l.lo) || std::isnan(l.hi) || l.lo > l.hi)
        throw FormatError(idx(f + ".limits", a), "need lo <= hi");
    }
    dof_offsets_[j] = pose_dim_;
    pose_dim_ += s.axes.size();
    flat_limits_.insert(flat_limits_.end(), s.limits.begin(), s.limits.end());
  }

  const std::size_t nv = d.template_skin.size();
  if (nv == 0) throw FormatError("template_skin", "no vertices");
  check_finite("template_skin", d.template_skin);
  check_faces("skin_faces", d.skin_faces, nv);
  if (d.shape_dirs.size() != nv * 3 * d.shape_dim)
    throw FormatError("shape_dirs", "expected V_s*3*B = " + std::to_string(nv * 3 * d.shape_dim) +
                                        " values, found " + std::to_string(d.shape_dirs.size()));
  for (std::size_t i = 0; i < d.shape_dirs.size(); ++i)
    if (!std::isfinite(d.shape_dirs[i])) throw FormatError(idx("shape_dirs", i), "non-finite value");

  check_sparse_shape("skin_weights", d.skin_weights, nv, nj);
  check_partition("skin_weights", d.skin_weights);

  if (d.skeleton) {
    const std::size_t nk = d.skeleton->template_vertices.size();
    check_finite("skeleton.template", d.skeleton->template_vertices);
    check_faces("skeleton.faces", d.skeleton->faces, nk);
    check_sparse_shape("skeleton.weights", d.skeleton->weights, nk, nj);
    check_partition("skeleton.weights", d.skeleton->weights);
  }

  check_sparse_shape("rest_joint_regressor", d.rest_joint_regressor, nj, nv);
  if (d.keypoint_regressor.rows() == 0) throw FormatError("keypoint_regressor", "no keypoints");
  check_sparse_shape("keypoint_regressor", d.keypoint_regressor, d.keypoint_regressor.rows(), nv);
  if (d.keypoint_root >= d.keypoint_regressor.rows())
    throw FormatError("keypoint_root", "index out of range");

  for (const auto& [name, joints] : d.joint_groups)
    for (std::size_t j : joints)
      if (j >= nj) throw FormatError("joint_groups." + name, "joint index out of range");

  if (!d.pose_correctives.empty() && d.pose_correctives.size() % (nv * 3) != 0)
    throw FormatError("pose_correctives", "size is not a multiple of V_s*3");

  template_rest_joints_ = kin::regress<double>(d.rest_joint_regressor, d.template_skin);
}

std::vector<std::size_t> BodyModel::group_pose_indices(const std::string& group) const {
  const auto it = data_.joint_groups.find(group);
  if (it == data_.joint_groups.end()) throw ConfigError("unknown joint group '" + group + "'");
  std::vector<std::size_t> out;
  for (std::size_t j : it->second)
    for (std::size_t a = 0; a < data_.dofs[j].axes.size(); ++a) out.push_back(dof_offsets_[j] + a);
  std::sort(out.begin(), out.end());
  return out;
}

void check_pose(const BodyModel& model, const PoseVector& pose) {
  if (pose.size() != model.pose_dim())
    throw ShapeError("pose has " + std::to_string(pose.size()) + " values, model expects " +
                     std::to_string(model.pose_dim()));
}

void check_shape(const BodyModel& model, const ShapeVector& beta) {
  if (beta.size() != model.shape_dim())
    throw ShapeError("shape has " + std::to_string(beta.size()) + " values, model expects " +
                     std::to_string(model.shape_dim()));
}

RestShape shape_blend(const BodyModel& model, const ShapeVector& beta) {
  check_shape(model, beta);
  RestShape out;
  out.rest_skin.layer = Layer::Skin;
  out.rest_skin.vertices = kin::blend_rest_skin<double>(model, beta.values);
  out.rest_joints = kin::regress<double>(model.data().rest_joint_regressor, out.rest_skin.vertices);
  return out;
}

std::vector<Mat3d> pose_to_rotations(const BodyModel& model, const PoseVector& pose, bool clamp) {
  check_pose(model, pose);
  return kin::pose_rotations<double>(model, pose.values, clamp);
}

FkResult forward_kinematics_from_rotations(const BodyModel& model, std::span<const Mat3d> rotations,
                                           std::span<const Vec3d> rest_joints) {
  if (rotations.size() != model.num_joints() || rest_joints.size() != model.num_joints())
    throw ShapeError("expected one rotation and rest joint per model joint");
  FkResult out;
  out.rest_joints.assign(rest_joints.begin(), rest_joints.end());
  out.global = kin::chain<double>(model.parents(), rotations, rest_joints);
  out.posed_joints.reserve(out.global.size());
  for (const auto& g : out.global) out.posed_joints.push_back(g.translation);
  return out;
}

FkResult forward_kinematics(const BodyModel& model, const PoseVector& pose, const ShapeVector& beta,
                            bool clamp) {
  const auto rest = shape_blend(model, beta);
  const auto rotations = pose_to_rotations(model, pose, clamp);
  return forward_kinematics_from_rotations(model, rotations, rest.rest_joints);
}

std::vector<Matrix4> FkResult::global_matrices() const {
  std::vector<Matrix4> out;
  out.reserve(global.size());
  for (const auto& g : global) out.push_back(to_matrix4(g));
  return out;
}

std::vector<Rigidd> FkResult::bone_transforms() const {
  return kin::bone_transforms<double>(global, rest_joints);
}

Mesh skin_with_bone_transforms(const BodyModel& model, std::span<const Rigidd> bones, const Mesh& rest,
                               Layer layer) {
  if (bones.size() != model.num_joints()) throw ShapeError("expected one transform per joint");
  const SparseRows* weights = &model.data().skin_weights;
  if (layer == Layer::Skeleton) {
    if (!model.has_skeleton()) throw MissingLayerError("model '" + model.name() + "' has no skeleton layer");
    weights = &model.data().skeleton->weights;
  }
  if (rest.vertices.size() != weights->rows())
    throw ShapeError("rest mesh has " + std::to_string(rest.vertices.size()) +
                     " vertices, layer expects " + std::to_string(weights->rows()));
  return Mesh{kin::blend_skin<double>(*weights, bones, rest.vertices), layer};
}

Mesh skin(const BodyModel& model, const FkResult& fk, const Mesh& rest, Layer layer) {
  const auto bones = fk.bone_transforms();
  return skin_with_bone_transforms(model, bones, rest, layer);
}

Mesh rest_skeleton(const BodyModel& model, std::span<const Vec3d> rest_joints) {
  if (!model.has_skeleton()) throw MissingLayerError("model '" + model.name() + "' has no skeleton layer");
  if (rest_joints.size() != model.num_joints()) throw ShapeError("expected one rest joint per model joint");
  const auto& layer = *model.data().skeleton;
  const auto& base = model.template_rest_joints();
  Mesh out{layer.template_vertices, Layer::Skeleton};
  for (std::size_t v = 0; v < out.vertices.size(); ++v) {
    Vec3d shift{};
    for (std::size_t k = layer.weights.offsets[v]; k < layer.weights.offsets[v + 1]; ++k) {
      const auto j = layer.weights.cols[k];
      shift += layer.weights.values[k] * (rest_joints[j] - base[j]);
    }
    out.vertices[v] += shift;
  }
  return out;
}

JointSet3D regress_keypoints(const BodyModel& model, const Mesh& posed_skin) {
  if (posed_skin.layer != Layer::Skin) throw ShapeError("keypoints regress from the skin layer");
  if (posed_skin.vertices.size() != model.num_skin_vertices())
    throw ShapeError("skin mesh vertex count mismatch");
  return JointSet3D(kin::regress<double>(model.data().keypoint_regressor, posed_skin.vertices));
}

PoseVector clamp_pose(const BodyModel& model, const PoseVector& pose) {
  check_pose(model, pose);
  PoseVector out = pose;
  const auto& limits = model.flat_limits();
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = std::clamp(out.values[i], limits[i].lo, limits[i].hi);
  return out;
}

}  // namespace bodykit
