#include "bodykit/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bodykit/errors.hpp"
#include "bodykit/metrics.hpp"

namespace bodykit {

namespace {

void check_evidence(const BodyModel& model, const Evidence& ev) {
  ev.intrinsics.validate();
  if (!(ev.crop_size > 0.0)) throw DomainError("crop size must be positive");
  if (ev.j2d_hat.size() != model.num_keypoints()) throw ShapeError("evidence keypoint count does not match the model");
  if (ev.j2d_hat.visibility.size() != ev.j2d_hat.size()) throw ShapeError("evidence visibility length mismatch");
  if (ev.j3d_hat && ev.j3d_hat->size() != model.num_keypoints())
    throw ShapeError("3D evidence keypoint count does not match the model");
  if (ev.theta_hat) check_pose(model, *ev.theta_hat);
  if (ev.beta_hat) check_shape(model, *ev.beta_hat);
}

std::vector<bool> full_mask(const ParamLayout& layout) { return std::vector<bool>(layout.size(), true); }

}  // namespace

Supervision Evidence::supervision() const {
  Supervision s;
  s.j2d_hat = j2d_hat;
  s.j3d_hat = j3d_hat;
  s.theta_hat = theta_hat;
  s.beta_hat = beta_hat;
  s.image_extent = image_extent();
  return s;
}

double evidence_objective(const BodyModel& model, const Evidence& ev, const ParamSet& params,
                          const CascadeSettings& settings) {
  check_evidence(model, ev);
  check_params(model, params);
  const ParamLayout layout(model);
  const auto x = layout.flatten(params);
  return evidence_objective_t<double>(model, ev, layout, x, settings);
}

JointSet2D reproject(const BodyModel& model, const ParamSet& params, const Intrinsics& intr, double crop_size) {
  check_params(model, params);
  const auto body = kin::pose_body<double>(model, params.theta.values, params.beta.values);
  const Vec3d t = lift_extrinsics(params.pi, intr, crop_size);
  return project(JointSet3D(body.keypoints), intr, t);
}

LossBreakdown evidence_breakdown(const BodyModel& model, const Evidence& ev, const ParamSet& params,
                                 const LossWeights& weights) {
  check_evidence(model, ev);
  Prediction pred;
  pred.theta = params.theta;
  pred.beta = params.beta;
  const auto body = kin::pose_body<double>(model, params.theta.values, params.beta.values);
  pred.j3d = JointSet3D(body.keypoints);
  pred.j2d = reproject(model, params, ev.intrinsics, ev.crop_size);
  return loss_skel(pred, ev.supervision(), weights);
}

ParamSet coarse_init(const Evidence& ev, const BodyModel& model) {
  check_evidence(model, ev);
  std::size_t visible = 0;
  for (double v : ev.j2d_hat.visibility) visible += v > 0.0 ? 1 : 0;
  if (visible < 2) throw InsufficientEvidenceError("coarse initialization needs at least 2 visible keypoints");

  double lo_u = std::numeric_limits<double>::infinity(), lo_v = lo_u, hi_u = -lo_u, hi_v = -lo_u;
  double lo_x = lo_u, lo_y = lo_u, hi_x = -lo_u, hi_y = -lo_u;
  const ParamSet zero = ParamSet::zeros(model);
  const auto rest = kin::pose_body<double>(model, zero.theta.values, zero.beta.values);
  for (std::size_t k = 0; k < ev.j2d_hat.size(); ++k) {
    if (!(ev.j2d_hat.visibility[k] > 0.0)) continue;
    const auto& p = ev.j2d_hat.positions[k];
    lo_u = std::min(lo_u, p.x), hi_u = std::max(hi_u, p.x);
    lo_v = std::min(lo_v, p.y), hi_v = std::max(hi_v, p.y);
    const auto& q = rest.keypoints[k];
    lo_x = std::min(lo_x, q.x), hi_x = std::max(hi_x, q.x);
    lo_y = std::min(lo_y, q.y), hi_y = std::max(hi_y, q.y);
  }
  const double box_px = std::max(hi_u - lo_u, hi_v - lo_v);
  const double spread = std::max(hi_x - lo_x, hi_y - lo_y);
  if (!(box_px > 0.0) || !(spread > 0.0))
    throw InsufficientEvidenceError("visible keypoints span a degenerate bounding box");

  const Intrinsics& k = ev.intrinsics;
  const double tz = k.fx * spread / box_px;
  ParamSet out = zero;
  out.pi.s = scale_for_depth(tz, k, ev.crop_size);
  const Vec3d root = rest.keypoints[model.data().keypoint_root];
  const double depth = root.z + tz;
  out.pi.tx = (0.5 * (lo_u + hi_u) - k.cx) * depth / k.fx - root.x;
  out.pi.ty = (0.5 * (lo_v + hi_v) - k.cy) * depth / k.fy - root.y;
  return out;
}

ParamSet refine_stage(const ParamSet& params, const Evidence& ev, const BodyModel& model, std::size_t steps,
                      const CascadeSettings& settings) {
  if (steps == 0) throw DomainError("refinement stage needs at least one step");
  check_evidence(model, ev);
  check_params(model, params);
  const ParamLayout layout(model);
  const auto objective = make_objective([&](auto x) {
    using T = typename decltype(x)::value_type;
    return evidence_objective_t<T>(model, ev, layout, x, settings);
  });
  // The L1 terms leave the iterate sitting next to kinks where a full Adam
  // step keeps overshooting. When minimize gives up early, spend the rest of
  // the budget from the same point with a smaller nominal step.
  std::vector<double> x = layout.flatten(params);
  std::size_t remaining = steps;
  double step = settings.step_size;
  while (remaining > 0 && step >= settings.step_size * 1e-6) {
    const StageSettings stage{remaining, step, settings.tolerance};
    auto r = minimize(objective, std::move(x), stage, full_mask(layout));
    x = std::move(r.x);
    remaining -= std::min(remaining, std::max<std::size_t>(r.iterations, 1));
    if (r.stop_reason.rfind("step rejected", 0) != 0) break;
    step *= 0.1;
  }
  return layout.unflatten(x);
}

CascadeTrace run_cascade_from(const ParamSet& init, const Evidence& ev, const BodyModel& model,
                              const CascadeSettings& settings) {
  if (settings.stages < 1) throw DomainError("cascade needs at least one stage");
  settings.weights.validate();
  CascadeTrace trace;
  auto record = [&](ParamSet p) {
    CascadeStage st;
    st.objective = evidence_objective(model, ev, p, settings);
    st.breakdown = evidence_breakdown(model, ev, p, settings.weights);
    st.params = std::move(p);
    trace.stages.push_back(std::move(st));
  };
  record(init);
  for (std::size_t i = 1; i <= settings.stages; ++i)
    record(refine_stage(trace.stages.back().params, ev, model, settings.steps_per_stage, settings));

  if (ev.theta_hat) {
    std::vector<PoseVector> thetas;
    for (std::size_t i = 1; i < trace.stages.size(); ++i) thetas.push_back(trace.stages[i].params.theta);
    trace.loss_refine = loss_refine(thetas, *ev.theta_hat);
    trace.loss_total = loss_total(trace.stages.front().breakdown.total, trace.stages.back().breakdown.total,
                                  *trace.loss_refine, settings.weights);
  }
  return trace;
}

CascadeTrace run_cascade(const Evidence& ev, const BodyModel& model, const CascadeSettings& settings) {
  return run_cascade_from(coarse_init(ev, model), ev, model, settings);
}

PckPair evidence_pck(const BodyModel& model, const Evidence& ev, const ParamSet& params) {
  const auto pred = reproject(model, params, ev.intrinsics, ev.crop_size);
  const double normalizer = bbox_max_side(ev.j2d_hat);
  return {pck(pred, ev.j2d_hat, 0.05, normalizer), pck(pred, ev.j2d_hat, 0.1, normalizer)};
}

PckPair factorization_probe(const CascadeTrace& trace, const Evidence& ev, const BodyModel& model,
                            ProbeComponent component, std::size_t layer) {
  if (trace.stages.empty()) throw DomainError("empty cascade trace");
  if (layer > trace.num_layers())
    throw DomainError("probe layer " + std::to_string(layer) + " outside 0.." + std::to_string(trace.num_layers()));
  ParamSet hybrid = trace.stages.back().params;
  const Extrinsics& probed = trace.stages[layer].params.pi;
  if (component == ProbeComponent::Scale) {
    hybrid.pi.s = probed.s;
  } else {
    hybrid.pi.tx = probed.tx;
    hybrid.pi.ty = probed.ty;
  }
  return evidence_pck(model, ev, hybrid);
}

}  // namespace bodykit
