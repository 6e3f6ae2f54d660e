#include "bodykit/objectives.hpp"

#include <cmath>

#include "bodykit/errors.hpp"

namespace bodykit {

void LossWeights::validate() const {
  for (double w : {kp, beta, theta, refine})
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be finite and non-negative");
}

double loss_kp(const JointSet3D* j3d, const JointSet3D* j3d_hat, const JointSet2D* j2d,
               const JointSet2D* j2d_hat, double image_extent) {
  double total = 0.0;
  if (j3d && j3d_hat) {
    if (j3d->size() != j3d_hat->size()) throw ShapeError("3D keypoint counts differ");
    total += loss::l1_joints3d<double>(j3d->positions, *j3d_hat);
  }
  if (j2d && j2d_hat) {
    if (j2d->size() != j2d_hat->size()) throw ShapeError("2D keypoint counts differ");
    if (!(image_extent > 0.0)) throw DomainError("image extent must be positive");
    total += loss::l1_joints2d<double>(j2d->positions, *j2d_hat, image_extent);
  }
  return total;
}

ParamLosses loss_params(const PoseVector& theta, const PoseVector& theta_hat, const ShapeVector& beta,
                        const ShapeVector& beta_hat) {
  if (theta.size() != theta_hat.size()) throw ShapeError("pose dimensions differ");
  if (beta.size() != beta_hat.size()) throw ShapeError("shape dimensions differ");
  return {loss::l1_mean<double>(theta.values, theta_hat.values),
          loss::l1_mean<double>(beta.values, beta_hat.values)};
}

LossBreakdown loss_skel(const Prediction& pred, const Supervision& sup, const LossWeights& w) {
  LossBreakdown out;
  const JointSet2D* j2d = pred.j2d ? &*pred.j2d : nullptr;
  const JointSet2D* j2d_hat = sup.j2d_hat ? &*sup.j2d_hat : nullptr;
  const JointSet3D* j3d_hat = sup.j3d_hat ? &*sup.j3d_hat : nullptr;
  out.used_j3d = j3d_hat != nullptr;
  out.used_j2d = j2d && j2d_hat;
  out.kp = loss_kp(&pred.j3d, j3d_hat, j2d, j2d_hat, sup.image_extent);
  if (sup.theta_hat) {
    if (pred.theta.size() != sup.theta_hat->size()) throw ShapeError("pose dimensions differ");
    out.theta = loss::l1_mean<double>(pred.theta.values, sup.theta_hat->values);
    out.used_theta = true;
  }
  if (sup.beta_hat) {
    if (pred.beta.size() != sup.beta_hat->size()) throw ShapeError("shape dimensions differ");
    out.beta = loss::l1_mean<double>(pred.beta.values, sup.beta_hat->values);
    out.used_beta = true;
  }
  out.total = w.kp * out.kp + w.beta * out.beta + w.theta * out.theta;
  return out;
}

double loss_refine(std::span<const PoseVector> stage_thetas, const PoseVector& theta_hat) {
  if (stage_thetas.empty()) throw DomainError("refinement loss needs at least one stage");
  double total = 0.0;
  for (const auto& theta : stage_thetas) {
    if (theta.size() != theta_hat.size()) throw ShapeError("pose dimensions differ");
    total += loss::l1_mean<double>(theta.values, theta_hat.values);
  }
  return total;
}

double loss_total(double enc, double dec, double refine, const LossWeights& w) {
  return dec + enc + w.refine * refine;
}

}  // namespace bodykit
