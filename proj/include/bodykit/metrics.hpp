#pragma once

#include <cstddef>

#include "bodykit/geometry.hpp"
#include "bodykit/types.hpp"

namespace bodykit {

/// x -> scale * R x + t with R a proper rotation.
struct SimilarityTransform {
  double scale = 1.0;
  Mat3d rotation = Mat3d::identity();
  Vec3d translation{};

  Vec3d apply(const Vec3d& p) const { return scale * (rotation * p) + translation; }
};

inline constexpr double kMetersToMillimeters = 1000.0;

/// Mean per-joint Euclidean distance in millimeters (inputs in meters). With
/// root_align the `root` joint is subtracted from both sets first.
double mpjpe(const JointSet3D& pred, const JointSet3D& gt, bool root_align = true, std::size_t root = 0);

struct ProcrustesResult {
  SimilarityTransform transform;
  JointSet3D aligned;
};

/// Least-squares similarity alignment of pred onto gt (Umeyama). Throws
/// RankDeficiencyError for fewer than 3 joints or collinear ground truth.
ProcrustesResult procrustes_align(const JointSet3D& pred, const JointSet3D& gt);

double pa_mpjpe(const JointSet3D& pred, const JointSet3D& gt);

/// Mean per-vertex Euclidean distance in millimeters.
double pve(const Mesh& pred, const Mesh& gt);

/// Fraction of visible ground-truth joints whose pixel error is at most
/// threshold * normalizer (inclusive). Throws UndefinedMetricError when no
/// joint is visible.
double pck(const JointSet2D& pred, const JointSet2D& gt, double threshold, double normalizer);

/// Larger side of the bounding box of the visible joints, pixels.
double bbox_max_side(const JointSet2D& joints);

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  std::size_t size() const { return end - begin; }
  bool operator==(const IndexRange&) const = default;
};

/// Frames kept after dropping the first and last quarter:
/// [ceil(N/4), N - ceil(N/4)). Throws EmptySubsetError for N < 4.
IndexRange subset_middle_half(std::size_t frame_count);

/// Sum of squared residuals |T(p_i) - g_i|^2.
double squared_residual(const JointSet3D& pred, const JointSet3D& gt, const SimilarityTransform& t);

}  // namespace bodykit
