#include "bodykit/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bodykit/errors.hpp"

namespace bodykit {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEpsilon = 1e-12;
constexpr int kMaxHalvings = 10;

double checked(double v) {
  if (!std::isfinite(v)) throw EvaluationError("objective is not finite");
  return v;
}

}  // namespace

GradientResult gradient(const Objective& objective, std::span<const double> x, GradientMode mode,
                        std::span<const std::size_t> active) {
  std::vector<std::size_t> all;
  if (active.empty()) {
    all.resize(x.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    active = all;
  }
  GradientResult out;
  out.gradient.assign(x.size(), 0.0);

  if (mode == GradientMode::CentralFD) {
    out.value = checked(objective(x));
    std::vector<double> probe(x.begin(), x.end());
    for (std::size_t i : active) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
      probe[i] = x[i] + h;
      const double up = checked(objective(probe));
      probe[i] = x[i] - h;
      const double down = checked(objective(probe));
      probe[i] = x[i];
      out.gradient[i] = (up - down) / (2.0 * h);
    }
    return out;
  }

  std::vector<GradScalar> dx(x.begin(), x.end());
  if (active.empty()) {
    out.value = checked(objective(x));
    return out;
  }
  for (std::size_t start = 0; start < active.size(); start += kGradientChunk) {
    const std::size_t count = std::min(kGradientChunk, active.size() - start);
    for (std::size_t c = 0; c < count; ++c) dx[active[start + c]].d[c] = 1.0;
    const GradScalar f = objective(std::span<const GradScalar>(dx));
    if (!isfinite(f)) throw EvaluationError("objective or its derivative is not finite");
    out.value = f.v;
    for (std::size_t c = 0; c < count; ++c) {
      out.gradient[active[start + c]] = f.d[c];
      dx[active[start + c]].d[c] = 0.0;
    }
  }
  return out;
}

MinimizeResult minimize(const Objective& objective, std::vector<double> init, const StageSettings& settings,
                        const std::vector<bool>& mask) {
  if (mask.size() != init.size()) throw ShapeError("stage mask does not match parameter count");
  if (settings.max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (!(settings.step_size > 0.0) || !(settings.tolerance > 0.0))
    throw ConfigError("step size and tolerance must be positive");

  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) active.push_back(i);

  MinimizeResult out;
  out.x = std::move(init);
  const double f0 = objective(std::span<const double>(out.x));
  if (!std::isfinite(f0)) throw EvaluationError("objective is not finite at the initial parameters");
  out.trace.push_back(f0);
  if (active.empty()) {
    out.stop_reason = "empty mask";
    return out;
  }

  double f = f0;
  auto g = gradient(objective, out.x, GradientMode::ForwardAD, active).gradient;
  std::vector<double> m(active.size(), 0.0), v(active.size(), 0.0);
  std::vector<double> candidate = out.x;
  double step = settings.step_size;
  std::size_t t = 0;

  while (out.iterations < settings.max_iters) {
    const bool stationary = std::all_of(active.begin(), active.end(), [&](std::size_t i) { return g[i] == 0.0; });
    if (stationary) {
      out.stop_reason = "zero gradient";
      return out;
    }
    ++out.iterations;
    ++t;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
    std::vector<double> direction(active.size());
    for (std::size_t a = 0; a < active.size(); ++a) {
      const double gi = g[active[a]];
      m[a] = kBeta1 * m[a] + (1.0 - kBeta1) * gi;
      v[a] = kBeta2 * v[a] + (1.0 - kBeta2) * gi * gi;
      direction[a] = (m[a] / c1) / (std::sqrt(v[a] / c2) + kEpsilon);
    }

    bool accepted = false;
    double f_new = f;
    for (int halvings = 0; halvings <= kMaxHalvings; ++halvings) {
      for (std::size_t a = 0; a < active.size(); ++a) candidate[active[a]] = out.x[active[a]] - step * direction[a];
      f_new = objective(std::span<const double>(candidate));
      if (std::isfinite(f_new) && f_new <= f) {
        accepted = true;
        break;
      }
      if (halvings < kMaxHalvings) step *= 0.5;
    }
    if (!accepted) {
      out.stop_reason = "step rejected after " + std::to_string(kMaxHalvings) + " halvings";
      return out;
    }

    const double decrease = (f - f_new) / std::max(std::abs(f), 1e-300);
    for (std::size_t i : active) out.x[i] = candidate[i];
    f = f_new;
    out.trace.push_back(f);
    if (f == 0.0 || decrease < settings.tolerance) {
      out.stop_reason = "relative decrease below tolerance";
      return out;
    }
    // Recover toward the nominal step after a successful move.
    step = std::min(settings.step_size, step * 2.0);
    g = gradient(objective, out.x, GradientMode::ForwardAD, active).gradient;
  }
  out.stop_reason = "max_iters";
  return out;
}

}  // namespace bodykit
