#include "bodykit/toy_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include "bodykit/errors.hpp"

namespace bodykit {

double UniformSource::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

ToyModelSpec ToyModelSpec::preset(const std::string& name) {
  if (name == "default") return {};
  if (name == "skel-like") return {24, 46, 6890, 24752, 10, 24};
  throw ConfigError("unknown model preset '" + name + "' (expected default or skel-like)");
}

namespace {

struct Frame {
  Vec3d u, w;  // orthonormal pair perpendicular to a direction
};

Frame perpendicular_frame(const Vec3d& dir) {
  const Vec3d helper = std::abs(dir.x) < 0.9 ? Vec3d{1.0, 0.0, 0.0} : Vec3d{0.0, 1.0, 0.0};
  Vec3d u = cross(dir, helper);
  u = (1.0 / norm(u)) * u;
  return {u, cross(dir, u)};
}

double segment_distance(const Vec3d& p, const Vec3d& a, const Vec3d& b) {
  const Vec3d ab = b - a;
  const double len2 = dot(ab, ab);
  const double t = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
  return norm(p - (a + t * ab));
}

std::array<Axis, 3> shuffled_axes(UniformSource& rng) {
  std::array<Axis, 3> axes{Axis::X, Axis::Y, Axis::Z};
  for (std::size_t i = 2; i > 0; --i) std::swap(axes[i], axes[rng.index(i + 1)]);
  return axes;
}

void validate_spec(const ToyModelSpec& s) {
  if (s.joints == 0 || s.pose_dim == 0 || s.skin_vertices == 0 || s.keypoints == 0)
    throw ConfigError("toy model dimensions must be positive");
  if (s.pose_dim < 3 + (s.joints - 1) || s.pose_dim > 3 * s.joints)
    throw ConfigError("pose_dim " + std::to_string(s.pose_dim) + " cannot be allocated over " +
                      std::to_string(s.joints) + " joints (need 3 + (J-1) <= D <= 3J)");
  if (s.skin_vertices < 4 * s.joints)
    throw ConfigError("skin_vertices must be at least 4 per joint");
}

}  // namespace

BodyModel gen_toy_model(std::uint64_t seed, const ToyModelSpec& spec) {
  validate_spec(spec);
  UniformSource rng(seed);
  const std::size_t nj = spec.joints;

  ModelData d;
  d.name = "toy-" + std::to_string(seed);
  d.parents.assign(nj, -1);
  std::vector<Vec3d> joints(nj);
  std::vector<std::size_t> depth(nj, 0);
  for (std::size_t j = 1; j < nj; ++j) {
    const std::size_t p = rng.uniform() < 0.6 ? j - 1 : rng.index(j);
    d.parents[j] = static_cast<int>(p);
    depth[j] = depth[p] + 1;
    Vec3d dir{rng.normal(), rng.normal(), rng.normal()};
    dir = (1.0 / norm(dir)) * dir;
    joints[j] = joints[p] + rng.uniform(0.12, 0.3) * dir;
  }
  for (std::size_t j = 0; j < nj; ++j) d.joint_names.push_back("joint" + std::to_string(j));

  // Bone segment of joint j: toward its first child, or a short extension for leaves.
  std::vector<Vec3d> bone_end(nj);
  for (std::size_t j = 0; j < nj; ++j) {
    const auto child = std::find(d.parents.begin(), d.parents.end(), static_cast<int>(j));
    if (child != d.parents.end()) {
      bone_end[j] = joints[static_cast<std::size_t>(child - d.parents.begin())];
    } else {
      const Vec3d from = joints[static_cast<std::size_t>(d.parents[j])];
      const Vec3d dir = joints[j] - from;
      bone_end[j] = joints[j] + (0.1 / norm(dir)) * dir;
    }
  }

  // DOF allocation: root gets three unbounded axes, everyone else 1-3 bounded.
  std::vector<std::size_t> counts(nj, 1);
  counts[0] = 3;
  std::size_t extra = spec.pose_dim - 3 - (nj - 1);
  while (extra > 0) {
    const std::size_t j = 1 + rng.index(nj - 1);
    if (counts[j] < 3) {
      ++counts[j];
      --extra;
    }
  }
  for (std::size_t j = 0; j < nj; ++j) {
    DofSpec s;
    s.joint_id = j;
    const auto axes = shuffled_axes(rng);
    for (std::size_t a = 0; a < counts[j]; ++a) {
      s.axes.push_back(axes[a]);
      if (j == 0)
        s.limits.push_back({});
      else
        s.limits.push_back({-rng.uniform(0.6, 1.6), rng.uniform(0.6, 1.6)});
    }
    d.dofs.push_back(std::move(s));
  }
  for (std::size_t j = 1; j < nj; ++j)
    if (depth[j] >= 2) d.joint_groups["upper_limb"].push_back(j);
  if (!d.joint_groups.count("upper_limb")) d.joint_groups["upper_limb"].push_back(nj - 1);

  // Skin vertices: a four-point ring on each joint, the rest scattered along bones.
  const std::size_t nv = spec.skin_vertices;
  std::vector<double> radius(nj);
  for (auto& r : radius) r = rng.uniform(0.04, 0.07);
  d.template_skin.resize(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    const std::size_t j = v % nj;
    const std::size_t m = v / nj;
    Vec3d dir = bone_end[j] - joints[j];
    const double len = norm(dir);
    dir = (1.0 / len) * dir;
    const Frame f = perpendicular_frame(dir);
    double t = 0.0, angle = 0.0, r = radius[j];
    if (m < 4) {
      angle = 0.5 * std::numbers::pi * static_cast<double>(m);
    } else {
      t = rng.uniform(0.1, 0.9);
      angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      r *= rng.uniform(0.8, 1.2);
    }
    d.template_skin[v] = joints[j] + (t * len) * dir + (r * std::cos(angle)) * f.u + (r * std::sin(angle)) * f.w;
  }

  auto nearest_weights = [&](const Vec3d& p) {
    std::vector<std::pair<double, std::uint32_t>> dist(nj);
    for (std::size_t j = 0; j < nj; ++j)
      dist[j] = {segment_distance(p, joints[j], bone_end[j]), static_cast<std::uint32_t>(j)};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(std::min<std::size_t>(4, nj)), dist.end());
    dist.resize(std::min<std::size_t>(4, nj));
    constexpr double sigma = 0.05;
    const double d0 = dist.front().first;
    std::vector<std::pair<std::uint32_t, double>> w;
    double total = 0.0;
    for (const auto& [dj, j] : dist) {
      const double x = std::exp(-(dj * dj - d0 * d0) / (2.0 * sigma * sigma));
      if (x < 1e-3) continue;
      w.push_back({j, x});
      total += x;
    }
    for (auto& e : w) e.second /= total;
    std::sort(w.begin(), w.end());
    return w;
  };

  d.skin_weights.num_cols = nj;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> vertex_weights(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    vertex_weights[v] = nearest_weights(d.template_skin[v]);
    d.skin_weights.push_row(vertex_weights[v]);
  }
  for (std::size_t v = 0; v + 2 * nj < nv; ++v)
    d.skin_faces.push_back({static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(v + nj),
                            static_cast<std::uint32_t>(v + 2 * nj)});

  // Shape space: per-joint offsets carried by the skinning weights plus small
  // per-vertex detail.
  d.shape_dim = spec.shape_dim;
  d.shape_dirs.assign(nv * 3 * spec.shape_dim, 0.0);
  for (std::size_t b = 0; b < spec.shape_dim; ++b) {
    std::vector<Vec3d> offset(nj);
    for (auto& o : offset) o = {0.02 * rng.normal(), 0.02 * rng.normal(), 0.02 * rng.normal()};
    for (std::size_t v = 0; v < nv; ++v) {
      Vec3d dv{};
      for (const auto& [j, w] : vertex_weights[v]) dv += w * offset[j];
      for (int c = 0; c < 3; ++c)
        d.shape_dirs[(v * 3 + static_cast<std::size_t>(c)) * spec.shape_dim + b] = dv[c] + 0.002 * rng.normal();
    }
  }

  // Rest joints: centroid of the joint's ring.
  d.rest_joint_regressor.num_cols = nv;
  for (std::size_t j = 0; j < nj; ++j) {
    std::vector<std::pair<std::uint32_t, double>> row;
    for (std::size_t m = 0; m < 4; ++m) row.push_back({static_cast<std::uint32_t>(j + m * nj), 0.25});
    d.rest_joint_regressor.push_row(row);
  }
  d.keypoint_regressor.num_cols = nv;
  for (std::size_t k = 0; k < spec.keypoints; ++k) {
    std::vector<std::pair<std::uint32_t, double>> row;
    if (k < nj) {
      for (std::size_t m = 0; m < 4; ++m) row.push_back({static_cast<std::uint32_t>(k + m * nj), 0.25});
    } else {
      const auto a = static_cast<std::uint32_t>(rng.index(nv));
      auto b = static_cast<std::uint32_t>(rng.index(nv));
      if (b == a) b = (a + 1) % static_cast<std::uint32_t>(nv);
      const double wa = rng.uniform(0.2, 0.8);
      row = {{std::min(a, b), a < b ? wa : 1.0 - wa}, {std::max(a, b), a < b ? 1.0 - wa : wa}};
    }
    d.keypoint_regressor.push_row(row);
  }
  d.keypoint_root = 0;

  if (spec.skeleton_vertices > 0) {
    SkeletonLayer layer;
    layer.weights.num_cols = nj;
    const std::size_t nk = spec.skeleton_vertices;
    layer.template_vertices.resize(nk);
    for (std::size_t v = 0; v < nk; ++v) {
      const std::size_t j = v % nj;
      Vec3d dir = bone_end[j] - joints[j];
      const double len = norm(dir);
      dir = (1.0 / len) * dir;
      const Frame f = perpendicular_frame(dir);
      const double t = rng.uniform(0.05, 0.95);
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double r = 0.012;
      layer.template_vertices[v] =
          joints[j] + (t * len) * dir + (r * std::cos(angle)) * f.u + (r * std::sin(angle)) * f.w;
      const std::pair<std::uint32_t, double> rigid{static_cast<std::uint32_t>(j), 1.0};
      layer.weights.push_row(std::span(&rigid, 1));
    }
    for (std::size_t v = 0; v + 2 * nj < nk; ++v)
      layer.faces.push_back({static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(v + nj),
                             static_cast<std::uint32_t>(v + 2 * nj)});
    d.skeleton = std::move(layer);
  }
  return BodyModel(std::move(d));
}

BodyModel ball_joint_variant(const BodyModel& model, const std::string& name) {
  ModelData d = model.data();
  d.name = name.empty() ? d.name + "-ball" : name;
  for (auto& s : d.dofs) {
    s.axes = {Axis::X, Axis::Y, Axis::Z};
    s.limits.assign(3, AngleLimit{});
  }
  return BodyModel(std::move(d));
}

BodyModel permute_dof_order(const BodyModel& model, std::uint64_t seed) {
  UniformSource rng(seed);
  ModelData d = model.data();
  for (auto& s : d.dofs) {
    std::vector<std::size_t> perm(s.axes.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
    DofSpec out = s;
    for (std::size_t a = 0; a < perm.size(); ++a) {
      out.axes[a] = s.axes[perm[a]];
      out.limits[a] = s.limits[perm[a]];
    }
    s = std::move(out);
  }
  d.name += "-permuted";
  return BodyModel(std::move(d));
}

}  // namespace bodykit
