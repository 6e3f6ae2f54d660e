#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "bodykit/body_model.hpp"

namespace bodykit {

/// Dimensions of a synthetic model.
struct ToyModelSpec {
  std::size_t joints = 12;
  std::size_t pose_dim = 24;
  std::size_t skin_vertices = 480;
  std::size_t skeleton_vertices = 720;  // 0 omits the skeleton layer
  std::size_t shape_dim = 6;
  std::size_t keypoints = 12;

  /// "default" or "skel-like" (46 pose DOFs, 10 shape components, 6890 skin
  /// and 24752 skeleton vertices).
  static ToyModelSpec preset(const std::string& name);
};

/// Deterministic synthetic body model. The root always carries three
/// unbounded DOFs; every other joint carries 1-3 bounded ones. Each vertex is
/// weighted to at most four nearby bones. Throws ConfigError on an
/// inconsistent spec.
BodyModel gen_toy_model(std::uint64_t seed, const ToyModelSpec& spec = {});

/// Same geometry with an unbounded XYZ ball joint everywhere (an
/// axis-angle-posed source model in conversion tests).
BodyModel ball_joint_variant(const BodyModel& model, const std::string& name = "");

/// Same model with each joint's axis order shuffled (limits follow their axes).
BodyModel permute_dof_order(const BodyModel& model, std::uint64_t seed);

/// Random draws built directly on mt19937_64 bits, whose sequence is fixed by
/// the standard (the <random> distributions are implementation-defined).
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed) : engine_(seed) {}

  /// [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Box-Muller standard normal.
  double normal();
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bodykit
