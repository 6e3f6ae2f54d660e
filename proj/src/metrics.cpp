#include "bodykit/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "bodykit/errors.hpp"

namespace bodykit {

namespace {

void check_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + " counts differ: " + std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace

double mpjpe(const JointSet3D& pred, const JointSet3D& gt, bool root_align, std::size_t root) {
  check_same(pred.size(), gt.size(), "joint");
  if (pred.size() == 0) throw UndefinedMetricError("MPJPE of an empty joint set");
  if (root_align && root >= pred.size()) throw ShapeError("root joint index out of range");
  const Vec3d pr = root_align ? pred.positions[root] : Vec3d{};
  const Vec3d gr = root_align ? gt.positions[root] : Vec3d{};
  double total = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k)
    total += norm((pred.positions[k] - pr) - (gt.positions[k] - gr));
  return kMetersToMillimeters * total / static_cast<double>(pred.size());
}

ProcrustesResult procrustes_align(const JointSet3D& pred, const JointSet3D& gt) {
  check_same(pred.size(), gt.size(), "joint");
  const std::size_t n = pred.size();
  if (n < 3) throw RankDeficiencyError("Procrustes alignment needs at least 3 joints");

  Eigen::Matrix3Xd p(3, n), g(3, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    p.col(c) << pred.positions[i].x, pred.positions[i].y, pred.positions[i].z;
    g.col(c) << gt.positions[i].x, gt.positions[i].y, gt.positions[i].z;
  }
  const Eigen::Vector3d mp = p.rowwise().mean();
  const Eigen::Vector3d mg = g.rowwise().mean();
  const Eigen::Matrix3Xd pc = p.colwise() - mp;
  const Eigen::Matrix3Xd gc = g.colwise() - mg;

  // Collinear ground truth leaves the rotation about that line undetermined.
  Eigen::JacobiSVD<Eigen::Matrix3Xd> gsvd(gc);
  const auto gs = gsvd.singularValues();
  if (gs(0) <= 0.0 || gs(1) <= 1e-10 * gs(0)) throw RankDeficiencyError("ground-truth joints are collinear");
  const double var_p = pc.squaredNorm();
  if (var_p <= std::numeric_limits<double>::min()) throw RankDeficiencyError("predicted joints coincide");

  const Eigen::Matrix3d cov = gc * pc.transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Eigen::Matrix3d r = svd.matrixU() * d * svd.matrixV().transpose();
  const double scale = (svd.singularValues().asDiagonal() * d).trace() / var_p;
  const Eigen::Vector3d t = mg - scale * r * mp;

  ProcrustesResult out;
  out.transform.scale = scale;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out.transform.rotation(i, j) = r(i, j);
    out.transform.translation[i] = t(i);
  }
  out.aligned.positions.resize(n);
  out.aligned.visibility = pred.visibility;
  for (std::size_t i = 0; i < n; ++i) out.aligned.positions[i] = out.transform.apply(pred.positions[i]);
  return out;
}

double pa_mpjpe(const JointSet3D& pred, const JointSet3D& gt) {
  const auto aligned = procrustes_align(pred, gt);
  return mpjpe(aligned.aligned, gt, false);
}

double pve(const Mesh& pred, const Mesh& gt) {
  if (pred.layer != gt.layer) throw ShapeError("meshes belong to different layers");
  check_same(pred.vertices.size(), gt.vertices.size(), "vertex");
  if (pred.vertices.empty()) throw UndefinedMetricError("PVE of an empty mesh");
  double total = 0.0;
  for (std::size_t v = 0; v < pred.vertices.size(); ++v) total += norm(pred.vertices[v] - gt.vertices[v]);
  return kMetersToMillimeters * total / static_cast<double>(pred.vertices.size());
}

double pck(const JointSet2D& pred, const JointSet2D& gt, double threshold, double normalizer) {
  check_same(pred.size(), gt.size(), "joint");
  if (!(threshold > 0.0)) throw DomainError("PCK threshold must be positive");
  if (!(normalizer > 0.0)) throw DomainError("PCK normalizer must be positive");
  const double radius = threshold * normalizer;
  std::size_t visible = 0, hits = 0;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    if (!(gt.visibility[k] > 0.0)) continue;
    ++visible;
    const double du = pred.positions[k].x - gt.positions[k].x;
    const double dv = pred.positions[k].y - gt.positions[k].y;
    if (std::hypot(du, dv) <= radius) ++hits;
  }
  if (visible == 0) throw UndefinedMetricError("PCK undefined without visible joints");
  return static_cast<double>(hits) / static_cast<double>(visible);
}

double bbox_max_side(const JointSet2D& joints) {
  double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
  double hi_x = -lo_x, hi_y = -lo_x;
  bool any = false;
  for (std::size_t k = 0; k < joints.size(); ++k) {
    if (!(joints.visibility[k] > 0.0)) continue;
    any = true;
    lo_x = std::min(lo_x, joints.positions[k].x);
    hi_x = std::max(hi_x, joints.positions[k].x);
    lo_y = std::min(lo_y, joints.positions[k].y);
    hi_y = std::max(hi_y, joints.positions[k].y);
  }
  if (!any) throw UndefinedMetricError("bounding box of an empty joint set");
  return std::max(hi_x - lo_x, hi_y - lo_y);
}

IndexRange subset_middle_half(std::size_t frame_count) {
  if (frame_count < 4) throw EmptySubsetError("need at least 4 frames, got " + std::to_string(frame_count));
  const std::size_t quarter = (frame_count + 3) / 4;
  return {quarter, frame_count - quarter};
}

double squared_residual(const JointSet3D& pred, const JointSet3D& gt, const SimilarityTransform& t) {
  check_same(pred.size(), gt.size(), "joint");
  double total = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const Vec3d r = t.apply(pred.positions[k]) - gt.positions[k];
    total += dot(r, r);
  }
  return total;
}

}  // namespace bodykit
