#include "bodykit/model_io.hpp"

#include <charconv>
#include <cmath>
#include <json.hpp>

#include "bodykit/codec.hpp"
#include "bodykit/errors.hpp"

namespace bodykit {

namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "BODYKIT-MODEL";

std::vector<double> flatten(std::span<const Vec3d> vs) {
  std::vector<double> out;
  out.reserve(vs.size() * 3);
  for (const auto& v : vs) {
    out.push_back(v.x);
    out.push_back(v.y);
    out.push_back(v.z);
  }
  return out;
}

std::vector<Vec3d> unflatten(const std::vector<double>& xs) {
  std::vector<Vec3d> out(xs.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {xs[3 * i], xs[3 * i + 1], xs[3 * i + 2]};
  return out;
}

std::vector<std::uint32_t> flatten_faces(std::span<const Face> fs) {
  std::vector<std::uint32_t> out;
  for (const auto& f : fs) out.insert(out.end(), f.begin(), f.end());
  return out;
}

std::vector<Face> unflatten_faces(const std::vector<std::uint32_t>& xs) {
  std::vector<Face> out(xs.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {xs[3 * i], xs[3 * i + 1], xs[3 * i + 2]};
  return out;
}

json limit_bound(double x) { return std::isinf(x) ? json(nullptr) : json(x); }

double parse_bound(const json& j, double fallback) {
  return j.is_null() ? fallback : j.get<double>();
}

struct Writer {
  json table = json::array();
  std::string payload;

  void f64(const std::string& name, std::span<const double> xs) {
    table.push_back({{"name", name}, {"dtype", "f64"}, {"count", xs.size()}});
    codec::append_f64(payload, xs);
  }
  void u32(const std::string& name, std::span<const std::uint32_t> xs) {
    table.push_back({{"name", name}, {"dtype", "u32"}, {"count", xs.size()}});
    codec::append_u32(payload, xs);
  }
  void sparse(const std::string& name, const SparseRows& m) {
    std::vector<std::uint32_t> rows;
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t k = m.offsets[r]; k < m.offsets[r + 1]; ++k)
        rows.push_back(static_cast<std::uint32_t>(r));
    u32(name + ".rows", rows);
    u32(name + ".cols", m.cols);
    f64(name + ".values", m.values);
  }
};

struct Reader {
  std::map<std::string, std::vector<double>> f64;
  std::map<std::string, std::vector<std::uint32_t>> u32;

  bool has(const std::string& n) const { return f64.count(n) || u32.count(n); }

  const std::vector<double>& get_f64(const std::string& n) const {
    auto it = f64.find(n);
    if (it == f64.end()) throw FormatError("arrays." + n, "missing f64 array");
    return it->second;
  }
  const std::vector<std::uint32_t>& get_u32(const std::string& n) const {
    auto it = u32.find(n);
    if (it == u32.end()) throw FormatError("arrays." + n, "missing u32 array");
    return it->second;
  }

  SparseRows sparse(const std::string& n, std::size_t rows, std::size_t cols) const {
    const auto& r = get_u32(n + ".rows");
    const auto& c = get_u32(n + ".cols");
    const auto& v = get_f64(n + ".values");
    if (r.size() != c.size() || r.size() != v.size())
      throw FormatError(n, "triplet arrays differ in length");
    SparseRows m;
    m.num_cols = cols;
    std::size_t k = 0;
    for (std::size_t row = 0; row < rows; ++row) {
      while (k < r.size() && r[k] == row) {
        m.cols.push_back(c[k]);
        m.values.push_back(v[k]);
        ++k;
      }
      m.offsets.push_back(m.cols.size());
    }
    if (k != r.size()) throw FormatError(n + ".rows", "row indices unsorted or out of range");
    return m;
  }
};

std::size_t dim(const json& dims, const char* key) {
  if (!dims.contains(key) || !dims[key].is_number_unsigned())
    throw FormatError(std::string("dims.") + key, "missing or not a non-negative integer");
  return dims[key].get<std::size_t>();
}

}  // namespace

std::string serialize_model(const BodyModel& model) {
  const ModelData& d = model.data();
  json header;
  header["format"] = "bodykit-model";
  header["version"] = kModelFormatVersion;
  header["name"] = d.name;
  header["units"] = d.units;
  header["euler_convention"] = "intrinsic";
  header["dims"] = {{"joints", model.num_joints()},        {"pose", model.pose_dim()},
                    {"shape", model.shape_dim()},          {"skin_vertices", model.num_skin_vertices()},
                    {"skeleton_vertices", model.num_skeleton_vertices()},
                    {"keypoints", model.num_keypoints()}};
  json joints = json::array();
  for (std::size_t j = 0; j < model.num_joints(); ++j) {
    const DofSpec& s = d.dofs[j];
    std::string axes;
    json limits = json::array();
    for (std::size_t a = 0; a < s.axes.size(); ++a) {
      axes.push_back(axis_char(s.axes[a]));
      limits.push_back({limit_bound(s.limits[a].lo), limit_bound(s.limits[a].hi)});
    }
    joints.push_back({{"name", d.joint_names.empty() ? "joint" + std::to_string(j) : d.joint_names[j]},
                      {"parent", d.parents[j]},
                      {"axes", axes},
                      {"limits", limits}});
  }
  header["joints"] = joints;
  header["joint_groups"] = d.joint_groups;
  header["keypoint_root"] = d.keypoint_root;

  Writer w;
  w.f64("template_skin", flatten(d.template_skin));
  w.u32("skin_faces", flatten_faces(d.skin_faces));
  w.f64("shape_dirs", d.shape_dirs);
  w.sparse("skin_weights", d.skin_weights);
  if (d.skeleton) {
    w.f64("skeleton_template", flatten(d.skeleton->template_vertices));
    w.u32("skeleton_faces", flatten_faces(d.skeleton->faces));
    w.sparse("skeleton_weights", d.skeleton->weights);
  }
  w.f64("rest_joint_regressor", d.rest_joint_regressor.to_dense());
  w.f64("keypoint_regressor", d.keypoint_regressor.to_dense());
  if (!d.pose_correctives.empty()) w.f64("pose_correctives", d.pose_correctives);
  header["arrays"] = w.table;

  const std::string text = header.dump();
  std::string out;
  out.append(kMagic);
  out.append(" ");
  out.append(std::to_string(kModelFormatVersion));
  out.append("\n");
  out.append(std::to_string(text.size()));
  out.append("\n");
  out.append(text);
  out.append(w.payload);
  return out;
}

BodyModel deserialize_model(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos || bytes.substr(0, kMagic.size()) != kMagic)
    throw FormatError("magic", "not a bodykit model file");
  int version = 0;
  const auto vtext = bytes.substr(kMagic.size() + 1, nl - kMagic.size() - 1);
  std::from_chars(vtext.data(), vtext.data() + vtext.size(), version);
  if (version != kModelFormatVersion)
    throw FormatError("version", "expected " + std::to_string(kModelFormatVersion) + ", found " +
                                     std::string(vtext));
  const auto nl2 = bytes.find('\n', nl + 1);
  if (nl2 == std::string_view::npos) throw FormatError("header", "missing header length");
  std::size_t header_len = 0;
  const auto ltext = bytes.substr(nl + 1, nl2 - nl - 1);
  const auto [ptr, ec] = std::from_chars(ltext.data(), ltext.data() + ltext.size(), header_len);
  if (ec != std::errc() || nl2 + 1 + header_len > bytes.size())
    throw FormatError("header", "bad header length");

  json header;
  try {
    header = json::parse(bytes.substr(nl2 + 1, header_len));
  } catch (const json::exception& e) {
    throw FormatError("header", e.what());
  }

  ModelData d;
  try {
    const auto& dims = header.at("dims");
    const std::size_t nj = dim(dims, "joints");
    const std::size_t np = dim(dims, "pose");
    const std::size_t nb = dim(dims, "shape");
    const std::size_t nv = dim(dims, "skin_vertices");
    const std::size_t nk = dim(dims, "skeleton_vertices");
    const std::size_t nkp = dim(dims, "keypoints");
    if (header.value("euler_convention", "intrinsic") != "intrinsic")
      throw FormatError("euler_convention", "only intrinsic composition is supported");

    d.name = header.at("name").get<std::string>();
    d.units = header.value("units", "m");
    const auto& joints = header.at("joints");
    if (joints.size() != nj) throw FormatError("joints", "count disagrees with dims.joints");
    std::size_t pose_dim = 0;
    for (std::size_t j = 0; j < nj; ++j) {
      const auto& jj = joints[j];
      const std::string field = "joints[" + std::to_string(j) + "]";
      d.joint_names.push_back(jj.at("name").get<std::string>());
      d.parents.push_back(jj.at("parent").get<int>());
      DofSpec s;
      s.joint_id = j;
      for (char c : jj.at("axes").get<std::string>()) {
        if (c < 'X' || c > 'Z') throw FormatError(field + ".axes", "axis must be X, Y or Z");
        s.axes.push_back(static_cast<Axis>(c - 'X'));
      }
      for (const auto& l : jj.at("limits")) {
        if (!l.is_array() || l.size() != 2) throw FormatError(field + ".limits", "expected [lo, hi]");
        s.limits.push_back({parse_bound(l[0], -kUnbounded), parse_bound(l[1], kUnbounded)});
      }
      pose_dim += s.axes.size();
      d.dofs.push_back(std::move(s));
    }
    if (pose_dim != np) throw FormatError("dims.pose", "sum of joint axes is " + std::to_string(pose_dim));
    if (header.contains("joint_groups"))
      d.joint_groups = header["joint_groups"].get<std::map<std::string, std::vector<std::size_t>>>();
    d.keypoint_root = header.value("keypoint_root", std::size_t{0});

    Reader r;
    std::size_t pos = nl2 + 1 + header_len;
    for (const auto& entry : header.at("arrays")) {
      const auto name = entry.at("name").get<std::string>();
      const auto dtype = entry.at("dtype").get<std::string>();
      const auto count = entry.at("count").get<std::size_t>();
      try {
        if (dtype == "f64")
          r.f64[name] = codec::read_f64(bytes, pos, count);
        else if (dtype == "u32")
          r.u32[name] = codec::read_u32(bytes, pos, count);
        else
          throw FormatError("arrays." + name, "unknown dtype '" + dtype + "'");
      } catch (const FormatError& e) {
        if (!e.field().empty()) throw;
        throw FormatError("arrays." + name, e.what());
      }
    }
    if (pos != bytes.size()) throw FormatError("arrays", "trailing bytes after last array");

    const auto& tmpl = r.get_f64("template_skin");
    if (tmpl.size() != nv * 3) throw FormatError("arrays.template_skin", "expected V_s*3 values");
    d.template_skin = unflatten(tmpl);
    d.skin_faces = unflatten_faces(r.get_u32("skin_faces"));
    d.shape_dim = nb;
    d.shape_dirs = r.get_f64("shape_dirs");
    d.skin_weights = r.sparse("skin_weights", nv, nj);
    if (nk > 0) {
      SkeletonLayer layer;
      const auto& st = r.get_f64("skeleton_template");
      if (st.size() != nk * 3) throw FormatError("arrays.skeleton_template", "expected V_k*3 values");
      layer.template_vertices = unflatten(st);
      layer.faces = unflatten_faces(r.get_u32("skeleton_faces"));
      layer.weights = r.sparse("skeleton_weights", nk, nj);
      d.skeleton = std::move(layer);
    }
    const auto& jr = r.get_f64("rest_joint_regressor");
    if (jr.size() != nj * nv) throw FormatError("arrays.rest_joint_regressor", "expected J*V_s values");
    d.rest_joint_regressor = SparseRows::from_dense(nj, nv, jr);
    const auto& kr = r.get_f64("keypoint_regressor");
    if (kr.size() != nkp * nv) throw FormatError("arrays.keypoint_regressor", "expected K*V_s values");
    d.keypoint_regressor = SparseRows::from_dense(nkp, nv, kr);
    if (r.has("pose_correctives")) d.pose_correctives = r.get_f64("pose_correctives");
  } catch (const json::exception& e) {
    throw FormatError("header", e.what());
  }
  return BodyModel(std::move(d));
}

BodyModel load_model(const std::string& path) { return deserialize_model(codec::read_file(path)); }

void save_model(const BodyModel& model, const std::string& path) {
  codec::write_file_atomic(path, serialize_model(model));
}

std::string model_checksum(const BodyModel& model) { return codec::sha256_hex(serialize_model(model)); }

std::string template_checksum(const BodyModel& model) {
  std::string raw;
  codec::append_f64(raw, flatten(model.data().template_skin));
  return codec::sha256_hex(raw);
}

}  // namespace bodykit
