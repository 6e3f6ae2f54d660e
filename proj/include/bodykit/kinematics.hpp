#pragma once

// Scalar-generic kinematics kernels. Instantiated with double for evaluation
// and with Dual<N> for forward-mode gradients; both paths run the same
// operations in the same order, so their primal values agree bitwise.

#include <span>
#include <vector>

#include "bodykit/body_model.hpp"
#include "bodykit/geometry.hpp"

namespace bodykit::kin {

template <class T>
std::vector<Vec3<T>> blend_rest_skin(const BodyModel& model, std::span<const T> beta) {
  const auto& d = model.data();
  const std::size_t nb = d.shape_dim;
  std::vector<Vec3<T>> out(d.template_skin.size());
  for (std::size_t v = 0; v < out.size(); ++v) {
    for (int c = 0; c < 3; ++c) {
      T acc = T(d.template_skin[v][c]);
      const double* dirs = d.shape_dirs.data() + (v * 3 + static_cast<std::size_t>(c)) * nb;
      for (std::size_t b = 0; b < nb; ++b) {
        if (dirs[b] != 0.0) acc += dirs[b] * beta[b];
      }
      out[v][c] = acc;
    }
  }
  return out;
}

template <class T>
std::vector<Vec3<T>> regress(const SparseRows& rows, std::span<const Vec3<T>> vertices) {
  std::vector<Vec3<T>> out(rows.rows());
  for (std::size_t r = 0; r < out.size(); ++r) {
    Vec3<T> acc{T(0.0), T(0.0), T(0.0)};
    for (std::size_t k = rows.offsets[r]; k < rows.offsets[r + 1]; ++k)
      acc += rows.values[k] * vertices[rows.cols[k]];
    out[r] = acc;
  }
  return out;
}

template <class T>
std::vector<Mat3<T>> pose_rotations(const BodyModel& model, std::span<const T> pose, bool clamp) {
  std::vector<Mat3<T>> out(model.num_joints());
  for (std::size_t j = 0; j < out.size(); ++j) {
    const DofSpec& spec = model.dofs()[j];
    const std::size_t base = model.dof_offset(j);
    Mat3<T> r;
    for (std::size_t a = 0; a < spec.axes.size(); ++a) {
      T angle = pose[base + a];
      if (clamp) {
        if (angle < spec.limits[a].lo) angle = T(spec.limits[a].lo);
        if (angle > spec.limits[a].hi) angle = T(spec.limits[a].hi);
      }
      const Mat3<T> step = axis_rotation(spec.axes[a], angle);
      r = (a == 0) ? step : r * step;
    }
    out[j] = r;
  }
  return out;
}

/// Root-to-leaf composition; relies on parents[j] < j. Composes the
/// rest-relative bone maps A_j = A_parent * (x -> R_j (x - rest_j) + rest_j)
/// and reads G_j off them, so identity rotations give G_j = [I, rest_j]
/// exactly.
template <class T>
std::vector<Rigid<T>> chain(std::span<const int> parents, std::span<const Mat3<T>> rotations,
                            std::span<const Vec3<T>> rest_joints) {
  std::vector<Rigid<T>> bone(parents.size());
  std::vector<Rigid<T>> global(parents.size());
  for (std::size_t j = 0; j < parents.size(); ++j) {
    const Rigid<T> local{rotations[j], rest_joints[j] - rotations[j] * rest_joints[j]};
    const int p = parents[j];
    bone[j] = p < 0 ? local : bone[static_cast<std::size_t>(p)] * local;
    global[j] = Rigid<T>{bone[j].rotation, bone[j].apply(rest_joints[j])};
  }
  return global;
}

/// A_j = G_j * [I, -rest_j]: maps a rest-pose point to its posed location.
template <class T>
std::vector<Rigid<T>> bone_transforms(std::span<const Rigid<T>> global,
                                      std::span<const Vec3<T>> rest_joints) {
  std::vector<Rigid<T>> out(global.size());
  for (std::size_t j = 0; j < global.size(); ++j) {
    out[j].rotation = global[j].rotation;
    out[j].translation = global[j].translation - global[j].rotation * rest_joints[j];
  }
  return out;
}

/// Linear blend skinning in displacement form: v + sum_j w_j (A_j v - v).
/// Identity bones reproduce the rest vertex exactly and a single unit weight
/// is exactly rigid.
template <class T>
std::vector<Vec3<T>> blend_skin(const SparseRows& weights, std::span<const Rigid<T>> bones,
                                std::span<const Vec3<T>> rest) {
  std::vector<Vec3<T>> out(rest.size());
  for (std::size_t v = 0; v < rest.size(); ++v) {
    const std::size_t begin = weights.offsets[v];
    const std::size_t end = weights.offsets[v + 1];
    if (end - begin == 1 && weights.values[begin] == 1.0) {
      out[v] = bones[weights.cols[begin]].apply(rest[v]);
      continue;
    }
    Vec3<T> disp{T(0.0), T(0.0), T(0.0)};
    for (std::size_t k = begin; k < end; ++k) {
      const Vec3<T> moved = bones[weights.cols[k]].apply(rest[v]);
      disp += weights.values[k] * (moved - rest[v]);
    }
    out[v] = rest[v] + disp;
  }
  return out;
}

template <class T>
struct PosedBody {
  std::vector<Vec3<T>> skin;
  std::vector<Vec3<T>> rest_joints;
  std::vector<Vec3<T>> joints;
  std::vector<Vec3<T>> keypoints;
};

/// shape blend -> rotations -> FK -> skin -> keypoint regression.
template <class T>
PosedBody<T> pose_body(const BodyModel& model, std::span<const T> theta, std::span<const T> beta,
                       bool clamp = false) {
  PosedBody<T> out;
  const auto rest_skin = blend_rest_skin<T>(model, beta);
  out.rest_joints = regress<T>(model.data().rest_joint_regressor, rest_skin);
  const auto rotations = pose_rotations<T>(model, theta, clamp);
  const auto global = chain<T>(model.parents(), rotations, out.rest_joints);
  const auto bones = bone_transforms<T>(global, out.rest_joints);
  out.skin = blend_skin<T>(model.data().skin_weights, bones, rest_skin);
  out.joints.resize(global.size());
  for (std::size_t j = 0; j < global.size(); ++j) out.joints[j] = global[j].translation;
  out.keypoints = regress<T>(model.data().keypoint_regressor, out.skin);
  return out;
}

/// Soft joint-limit penalty: sum of squared excursions beyond the limits.
template <class T>
T limit_excess_squared(const BodyModel& model, std::span<const T> theta) {
  T acc(0.0);
  const auto& limits = model.flat_limits();
  for (std::size_t i = 0; i < limits.size(); ++i) {
    if (theta[i] < limits[i].lo) {
      const T e = limits[i].lo - theta[i];
      acc += e * e;
    } else if (theta[i] > limits[i].hi) {
      const T e = theta[i] - limits[i].hi;
      acc += e * e;
    }
  }
  return acc;
}

}  // namespace bodykit::kin
