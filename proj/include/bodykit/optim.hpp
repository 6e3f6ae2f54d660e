#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bodykit/dual.hpp"

namespace bodykit {

inline constexpr std::size_t kGradientChunk = 8;
using GradScalar = Dual<kGradientChunk>;

/// Scalar objective over a flat parameter vector, evaluable on plain doubles
/// and on dual numbers.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual double operator()(std::span<const double> x) const = 0;
  virtual GradScalar operator()(std::span<const GradScalar> x) const = 0;
};

/// Wraps a generic callable `f(std::span<const T>) -> T`.
template <class F>
class FunctionObjective final : public Objective {
 public:
  explicit FunctionObjective(F f) : f_(std::move(f)) {}
  double operator()(std::span<const double> x) const override { return f_(x); }
  GradScalar operator()(std::span<const GradScalar> x) const override { return f_(x); }

 private:
  F f_;
};

template <class F>
FunctionObjective<F> make_objective(F f) {
  return FunctionObjective<F>(std::move(f));
}

enum class GradientMode { ForwardAD, CentralFD };

struct GradientResult {
  double value = 0.0;
  std::vector<double> gradient;  // zero outside `active`
};

/// Gradient of `objective` at x. Only the indices in `active` are
/// differentiated (all indices when empty). Central differences use the step
/// 1e-6 * max(1, |x_i|). Throws EvaluationError on a non-finite objective.
GradientResult gradient(const Objective& objective, std::span<const double> x,
                        GradientMode mode = GradientMode::ForwardAD,
                        std::span<const std::size_t> active = {});

/// One optimization stage.
struct StageSettings {
  std::size_t max_iters = 200;
  double step_size = 1e-2;
  double tolerance = 1e-8;  // relative objective decrease that ends the stage
};

struct MinimizeResult {
  std::vector<double> x;
  std::vector<double> trace;  // objective at init, then after each accepted step
  std::size_t iterations = 0;
  std::string stop_reason;
};

/// Adam-style first-order descent restricted to `mask` (true = free).
///
/// A step that raises the objective (or makes it non-finite) is rejected and
/// the step size halved; after 10 consecutive halvings the stage stops. The
/// returned trace is therefore non-increasing, and entries outside the mask
/// are bitwise unchanged. Throws EvaluationError if the objective is
/// non-finite at init.
MinimizeResult minimize(const Objective& objective, std::vector<double> init, const StageSettings& settings,
                        const std::vector<bool>& mask);

}  // namespace bodykit
