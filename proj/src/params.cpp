#include "bodykit/params.hpp"

#include <cmath>

#include "bodykit/errors.hpp"

namespace bodykit {

ParamSet ParamSet::zeros(const BodyModel& model) {
  ParamSet p;
  p.theta.values.assign(model.pose_dim(), 0.0);
  p.beta.values.assign(model.shape_dim(), 0.0);
  return p;
}

std::vector<double> ParamLayout::flatten(const ParamSet& p) const {
  if (p.theta.size() != pose_dim || p.beta.size() != shape_dim)
    throw ShapeError("parameter set does not match layout");
  std::vector<double> x;
  x.reserve(size());
  x.insert(x.end(), p.theta.values.begin(), p.theta.values.end());
  x.insert(x.end(), p.beta.values.begin(), p.beta.values.end());
  x.push_back(p.pi.s);
  x.push_back(p.pi.tx);
  x.push_back(p.pi.ty);
  return x;
}

ParamSet ParamLayout::unflatten(std::span<const double> x) const {
  if (x.size() != size()) throw ShapeError("flat parameter vector does not match layout");
  ParamSet p;
  p.theta.values.assign(x.begin(), x.begin() + static_cast<long>(pose_dim));
  p.beta.values.assign(x.begin() + static_cast<long>(pose_dim),
                       x.begin() + static_cast<long>(pose_dim + shape_dim));
  p.pi = {x[pi_offset()], x[pi_offset() + 1], x[pi_offset() + 2]};
  return p;
}

void check_params(const BodyModel& model, const ParamSet& p) {
  check_pose(model, p.theta);
  check_shape(model, p.beta);
  for (double v : p.theta.values)
    if (!std::isfinite(v)) throw DomainError("pose contains a non-finite value");
  for (double v : p.beta.values)
    if (!std::isfinite(v)) throw DomainError("shape contains a non-finite value");
}

}  // namespace bodykit
