#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bodykit/geometry.hpp"
#include "bodykit/params.hpp"
#include "bodykit/types.hpp"

namespace bodykit {

/// Loss coefficients; defaults are the published training values.
struct LossWeights {
  double kp = 0.05;
  double beta = 0.0005;
  double theta = 0.001;
  double refine = 0.1;

  void validate() const;
};

/// Ground truth available for one sample. There is deliberately no camera
/// field: extrinsics are only ever supervised through 2D keypoints.
struct Supervision {
  std::optional<PoseVector> theta_hat;
  std::optional<ShapeVector> beta_hat;
  std::optional<JointSet3D> j3d_hat;
  std::optional<JointSet2D> j2d_hat;
  /// 2D residuals are divided by this (max image side) before the L1.
  double image_extent = 1.0;

  bool empty() const { return !theta_hat && !beta_hat && !j3d_hat && !j2d_hat; }
};

/// Quantities derived from a ParamSet that the losses compare.
struct Prediction {
  PoseVector theta;
  ShapeVector beta;
  JointSet3D j3d;
  std::optional<JointSet2D> j2d;
};

struct LossBreakdown {
  double kp = 0.0;
  double beta = 0.0;
  double theta = 0.0;
  double total = 0.0;
  // Which supervision fields contributed.
  bool used_j3d = false, used_j2d = false, used_beta = false, used_theta = false;
};

/// Visibility-weighted mean absolute error over (joints x coords); 2D pixel
/// residuals are normalized by `image_extent`. Either pair may be absent.
double loss_kp(const JointSet3D* j3d, const JointSet3D* j3d_hat, const JointSet2D* j2d,
               const JointSet2D* j2d_hat, double image_extent);

struct ParamLosses {
  double theta = 0.0;
  double beta = 0.0;
};

/// Elementwise mean absolute differences.
ParamLosses loss_params(const PoseVector& theta, const PoseVector& theta_hat, const ShapeVector& beta,
                        const ShapeVector& beta_hat);

/// lambda_kp * L_kp + lambda_beta * L_beta + lambda_theta * L_theta; missing
/// supervision contributes 0.
LossBreakdown loss_skel(const Prediction& pred, const Supervision& sup, const LossWeights& w);

/// Sum over stages of the mean absolute pose error. Throws DomainError when empty.
double loss_refine(std::span<const PoseVector> stage_thetas, const PoseVector& theta_hat);

/// L_dec + L_enc + lambda_ref * L_refine.
double loss_total(double enc, double dec, double refine, const LossWeights& w);

namespace loss {

template <class T>
T l1_mean(std::span<const T> pred, std::span<const double> target) {
  T acc(0.0);
  if (pred.empty()) return acc;
  using std::abs;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += abs(pred[i] - target[i]);
  return acc / static_cast<double>(pred.size());
}

template <class T>
T l1_joints3d(std::span<const Vec3<T>> pred, const JointSet3D& target) {
  using std::abs;
  T acc(0.0);
  double weight = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double w = target.visibility[k];
    if (w == 0.0) continue;
    const auto& g = target.positions[k];
    acc += w * (abs(pred[k].x - g.x) + abs(pred[k].y - g.y) + abs(pred[k].z - g.z));
    weight += 3.0 * w;
  }
  return weight > 0.0 ? acc / weight : T(0.0);
}

template <class T>
T l1_joints2d(std::span<const Vec2<T>> pred, const JointSet2D& target, double extent) {
  using std::abs;
  T acc(0.0);
  double weight = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double w = target.visibility[k];
    if (w == 0.0) continue;
    const auto& g = target.positions[k];
    acc += w * (abs((pred[k].x - g.x) / extent) + abs((pred[k].y - g.y) / extent));
    weight += 2.0 * w;
  }
  return weight > 0.0 ? acc / weight : T(0.0);
}

}  // namespace loss

}  // namespace bodykit
