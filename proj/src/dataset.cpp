#include "bodykit/dataset.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "bodykit/codec.hpp"
#include "bodykit/errors.hpp"
#include "bodykit/metrics.hpp"
#include "bodykit/model_io.hpp"

namespace bodykit {

using nlohmann::json;

namespace {

constexpr const char* kSchemaName = "bodykit-dataset";

const char* convention_name(PoseConvention c) {
  return c == PoseConvention::AxisAngle ? "axis-angle" : "model-dofs";
}

PoseConvention parse_convention(const std::string& s) {
  if (s == "axis-angle") return PoseConvention::AxisAngle;
  if (s == "model-dofs") return PoseConvention::ModelDofs;
  throw FormatError("source_pose_convention", "unknown convention '" + s + "'");
}

// Field access with a dotted path for diagnostics.
struct Fields {
  const json& j;
  std::string path;

  const json& at(const std::string& key) const {
    auto it = j.find(key);
    if (it == j.end()) throw FormatError(path + "." + key, "missing");
    return *it;
  }
  bool has(const std::string& key) const { return j.contains(key) && !j.at(key).is_null(); }

  std::string str(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_string()) throw FormatError(path + "." + key, "expected a string");
    return v.get<std::string>();
  }
  double num(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number()) throw FormatError(path + "." + key, "expected a number");
    return v.get<double>();
  }
  std::uint64_t count(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number_unsigned()) throw FormatError(path + "." + key, "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  std::vector<double> f64(const std::string& key, std::optional<std::size_t> expected = std::nullopt) const {
    const json& v = at(key);
    if (!v.is_string()) throw FormatError(path + "." + key, "expected a base64 string");
    std::vector<double> out;
    try {
      out = codec::decode_f64(v.get<std::string>());
    } catch (const FormatError& e) {
      throw FormatError(path + "." + key, e.what());
    }
    if (expected && out.size() != *expected)
      throw FormatError(path + "." + key,
                        "expected " + std::to_string(*expected) + " values, found " + std::to_string(out.size()));
    return out;
  }
  Fields sub(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_object()) throw FormatError(path + "." + key, "expected an object");
    return {v, path + "." + key};
  }
};

json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["schema"] = kSchemaName;
  j["version"] = m.schema_version;
  j["source_model"] = m.source_model;
  j["target_model"] = m.target_model;
  j["source_pose_convention"] = convention_name(m.source_convention);
  j["sample_count"] = m.sample_count;
  j["sequences"] = json::object();
  for (const auto& [name, frames] : m.sequences) j["sequences"][name] = frames;
  return j;
}

DatasetManifest manifest_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("header", "expected an object");
  const Fields f{j, "header"};
  if (!j.contains("schema") || j["schema"] != kSchemaName) throw FormatError("header.schema", "not a bodykit dataset");
  DatasetManifest m;
  const json& version = f.at("version");
  if (!version.is_number_integer() || version.get<int>() != kDatasetSchemaVersion)
    throw FormatError("header.version", "incompatible schema version: expected " +
                                            std::to_string(kDatasetSchemaVersion) + ", found " + version.dump());
  m.source_model = f.str("source_model");
  m.target_model = f.str("target_model");
  m.source_convention = parse_convention(f.str("source_pose_convention"));
  m.sample_count = f.count("sample_count");
  const Fields seq = f.sub("sequences");
  for (auto it = seq.j.begin(); it != seq.j.end(); ++it) m.sequences[it.key()] = seq.count(it.key());
  return m;
}

std::string b64(std::span<const double> v) { return codec::encode_f64(v); }

json record_to_json(const SampleRecord& r) {
  json j;
  j["sample_id"] = r.sample_id;
  j["image"] = {r.image_width, r.image_height};
  j["sequence"] = r.sequence_id;
  j["frame"] = r.frame;
  j["camera"] = r.camera_id;
  if (r.intrinsics) {
    const auto& k = *r.intrinsics;
    j["intrinsics"] = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
  }
  if (r.source) {
    const auto& s = *r.source;
    const double go[3] = {s.global_orient.x, s.global_orient.y, s.global_orient.z};
    j["source"] = {{"model", s.model}, {"pose", b64(s.pose)}, {"shape", b64(s.shape)}, {"global_orient", b64(go)}};
  }
  if (r.target) {
    const auto& t = *r.target;
    const double pi[3] = {t.pi.s, t.pi.tx, t.pi.ty};
    j["target"] = {{"theta", b64(t.theta.values)}, {"beta", b64(t.beta.values)}, {"pi", b64(pi)}};
  }
  if (r.fit_pve) j["fit_pve"] = std::isfinite(*r.fit_pve) ? json(*r.fit_pve) : json(nullptr);
  if (r.j2d) {
    std::vector<double> flat;
    for (const auto& p : r.j2d->positions) flat.insert(flat.end(), {p.x, p.y});
    j["j2d"] = {{"positions", b64(flat)}, {"visibility", b64(r.j2d->visibility)}};
  }
  return j;
}

SampleRecord record_from_json(const json& j, std::size_t index) {
  if (!j.is_object()) throw FormatError("record " + std::to_string(index), "expected an object");
  SampleRecord r;
  {
    const Fields f{j, "record " + std::to_string(index)};
    r.sample_id = f.str("sample_id");
  }
  const Fields f{j, r.sample_id};
  const json& image = f.at("image");
  if (!image.is_array() || image.size() != 2 || !image[0].is_number() || !image[1].is_number())
    throw FormatError(r.sample_id + ".image", "expected [width, height]");
  r.image_width = image[0].get<double>();
  r.image_height = image[1].get<double>();
  r.sequence_id = f.str("sequence");
  r.frame = f.count("frame");
  {
    const json& cam = f.at("camera");
    if (!cam.is_number_integer()) throw FormatError(r.sample_id + ".camera", "expected an integer");
    r.camera_id = cam.get<int>();
  }
  if (f.has("intrinsics")) {
    const Fields k = f.sub("intrinsics");
    r.intrinsics = Intrinsics{k.num("fx"), k.num("fy"), k.num("cx"), k.num("cy"), k.num("width"), k.num("height")};
  }
  if (f.has("source")) {
    const Fields s = f.sub("source");
    SourceParams p;
    p.model = s.str("model");
    p.pose = s.f64("pose");
    p.shape = s.f64("shape");
    const auto go = s.f64("global_orient", 3);
    p.global_orient = {go[0], go[1], go[2]};
    r.source = std::move(p);
  }
  if (f.has("target")) {
    const Fields t = f.sub("target");
    ParamSet p;
    p.theta.values = t.f64("theta");
    p.beta.values = t.f64("beta");
    const auto pi = t.f64("pi", 3);
    p.pi = {pi[0], pi[1], pi[2]};
    r.target = std::move(p);
  }
  if (j.contains("fit_pve")) {
    const json& v = j["fit_pve"];
    if (v.is_null()) r.fit_pve = std::numeric_limits<double>::quiet_NaN();
    else if (v.is_number()) r.fit_pve = v.get<double>();
    else throw FormatError(r.sample_id + ".fit_pve", "expected a number or null");
  }
  if (f.has("j2d")) {
    const Fields k = f.sub("j2d");
    const auto flat = k.f64("positions");
    if (flat.size() % 2 != 0) throw FormatError(r.sample_id + ".j2d.positions", "odd number of coordinates");
    const auto vis = k.f64("visibility", flat.size() / 2);
    std::vector<Vec2d> pts(flat.size() / 2);
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {flat[2 * i], flat[2 * i + 1]};
    r.j2d = JointSet2D(std::move(pts), vis);
  }
  return r;
}

bool same_double(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

bool same_doubles(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same_double(a[i], b[i])) return false;
  return true;
}

}  // namespace

bool operator==(const SampleRecord& a, const SampleRecord& b) {
  auto vec2 = [](const std::optional<JointSet2D>& j) {
    std::vector<double> out;
    if (j)
      for (const auto& p : j->positions) out.insert(out.end(), {p.x, p.y});
    return out;
  };
  if (a.sample_id != b.sample_id || a.sequence_id != b.sequence_id || a.frame != b.frame ||
      a.camera_id != b.camera_id || !same_double(a.image_width, b.image_width) ||
      !same_double(a.image_height, b.image_height))
    return false;
  if (a.intrinsics != b.intrinsics || a.source.has_value() != b.source.has_value() ||
      a.target.has_value() != b.target.has_value() || a.fit_pve.has_value() != b.fit_pve.has_value() ||
      a.j2d.has_value() != b.j2d.has_value())
    return false;
  if (a.source) {
    const auto& s = *a.source;
    const auto& t = *b.source;
    const double ga[3] = {s.global_orient.x, s.global_orient.y, s.global_orient.z};
    const double gb[3] = {t.global_orient.x, t.global_orient.y, t.global_orient.z};
    if (s.model != t.model || !same_doubles(s.pose, t.pose) || !same_doubles(s.shape, t.shape) ||
        !same_doubles(ga, gb))
      return false;
  }
  if (a.target) {
    const auto& s = *a.target;
    const auto& t = *b.target;
    const double pa[3] = {s.pi.s, s.pi.tx, s.pi.ty};
    const double pb[3] = {t.pi.s, t.pi.tx, t.pi.ty};
    if (!same_doubles(s.theta.values, t.theta.values) || !same_doubles(s.beta.values, t.beta.values) ||
        !same_doubles(pa, pb))
      return false;
  }
  if (a.fit_pve && !(same_double(*a.fit_pve, *b.fit_pve) || (std::isnan(*a.fit_pve) && std::isnan(*b.fit_pve))))
    return false;
  if (a.j2d && (!same_doubles(vec2(a.j2d), vec2(b.j2d)) || !same_doubles(a.j2d->visibility, b.j2d->visibility)))
    return false;
  return true;
}

DatasetReader::DatasetReader(const std::string& path) : in_(path, std::ios::binary) {
  if (!in_) throw Error("cannot open dataset '" + path + "'");
  std::string line;
  if (!std::getline(in_, line)) throw FormatError("header", "empty dataset file");
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError("header", std::string("malformed header: ") + e.what());
  }
  manifest_ = manifest_from_json(j);
}

bool DatasetReader::next(SampleRecord& record) {
  auto truncated = [&](const std::string& detail) {
    const std::string last = last_id_.empty() ? "none" : "'" + last_id_ + "'";
    return FormatError("records", "truncated after " + std::to_string(read_) + " of " +
                                      std::to_string(manifest_.sample_count) + " records (" + detail +
                                      "); last complete sample_id: " + last);
  };
  std::string line;
  if (!std::getline(in_, line)) {
    if (read_ != manifest_.sample_count) throw truncated("file ends early");
    return false;
  }
  // Every record line ends with a newline; a missing one means a cut file.
  if (in_.eof()) throw truncated("unterminated final line");
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception&) {
    throw truncated("unparseable line");
  }
  record = record_from_json(j, read_);
  ++read_;
  last_id_ = record.sample_id;
  return true;
}

void validate_dataset(const Dataset& ds) {
  const auto& m = ds.manifest;
  if (m.sample_count != ds.records.size())
    throw FormatError("header.sample_count", "declares " + std::to_string(m.sample_count) + " samples, found " +
                                                 std::to_string(ds.records.size()));
  std::set<std::string> seen;
  for (const auto& r : ds.records) {
    const std::string& id = r.sample_id;
    if (id.empty()) throw FormatError("sample_id", "empty sample id");
    if (!seen.insert(id).second) throw FormatError(id + ".sample_id", "duplicate sample id");
    if (!(r.image_width > 0.0) || !(r.image_height > 0.0)) throw FormatError(id + ".image", "dimensions must be positive");
    if (r.intrinsics) {
      try {
        r.intrinsics->validate();
      } catch (const Error& e) {
        throw FormatError(id + ".intrinsics", e.what());
      }
    }
    if (!r.sequence_id.empty()) {
      auto it = m.sequences.find(r.sequence_id);
      if (it == m.sequences.end())
        throw FormatError(id + ".sequence", "sequence '" + r.sequence_id + "' missing from the header");
      if (r.frame >= it->second)
        throw FormatError(id + ".frame", "frame " + std::to_string(r.frame) + " outside sequence of " +
                                             std::to_string(it->second) + " frames");
    }
    if (r.source && m.source_convention == PoseConvention::AxisAngle && r.source->pose.size() % 3 != 0)
      throw FormatError(id + ".source.pose", "axis-angle pose length must be a multiple of 3");
  }
}

Dataset load_dataset(const std::string& path) {
  DatasetReader reader(path);
  Dataset ds;
  ds.manifest = reader.manifest();
  ds.base_dir = std::filesystem::path(path).parent_path();
  SampleRecord r;
  while (reader.next(r)) ds.records.push_back(std::move(r));
  validate_dataset(ds);
  return ds;
}

std::string serialize_dataset(const Dataset& ds) {
  std::string out = manifest_to_json(ds.manifest).dump() + "\n";
  for (const auto& r : ds.records) out += record_to_json(r).dump() + "\n";
  return out;
}

void save_dataset(const std::string& path, const Dataset& ds) {
  validate_dataset(ds);
  codec::write_file_atomic(path, serialize_dataset(ds));
}

std::filesystem::path resolve_model_path(const Dataset& ds, const std::string& ref) {
  const std::filesystem::path p(ref);
  return p.is_absolute() ? p : ds.base_dir / p;
}

Mesh source_mesh(const BodyModel& source, PoseConvention convention, const SourceParams& params) {
  const ShapeVector beta{params.shape};
  check_shape(source, beta);
  if (convention == PoseConvention::ModelDofs) {
    const PoseVector pose{params.pose};
    check_pose(source, pose);
    const auto fk = forward_kinematics(source, pose, beta);
    return skin(source, fk, shape_blend(source, beta).rest_skin, Layer::Skin);
  }
  const std::size_t joints = source.num_joints();
  if (params.pose.size() != 3 * (joints - 1))
    throw ShapeError("axis-angle pose has " + std::to_string(params.pose.size()) + " values, expected " +
                     std::to_string(3 * (joints - 1)));
  std::vector<Mat3d> rotations(joints);
  rotations[0] = axis_angle_to_matrix(params.global_orient);
  for (std::size_t j = 1; j < joints; ++j) {
    const double* a = &params.pose[3 * (j - 1)];
    rotations[j] = axis_angle_to_matrix(Vec3d{a[0], a[1], a[2]});
  }
  const RestShape rest = shape_blend(source, beta);
  const auto fk = forward_kinematics_from_rotations(source, rotations, rest.rest_joints);
  return skin(source, fk, rest.rest_skin, Layer::Skin);
}

namespace {

Vec3d source_global_orient(const BodyModel& source, PoseConvention convention, const SourceParams& params) {
  if (convention == PoseConvention::AxisAngle) return params.global_orient;
  return matrix_to_axis_angle(pose_to_rotations(source, PoseVector{params.pose})[0]);
}

struct Outcome {
  SampleRecord record;
  SampleReport report;
};

Outcome convert_one(const SampleRecord& in, const BodyModel& source, const BodyModel& target,
                    PoseConvention convention, const FitSchedule& schedule, const ConvertOptions& options) {
  Outcome out{in, {}};
  out.report.sample_id = in.sample_id;
  try {
    if (!in.source) throw FormatError(in.sample_id + ".source", "missing source parameters");
    const Mesh mesh = source_mesh(source, convention, *in.source);
    ParamSet init = ParamSet::zeros(target);
    if (options.init_from_record && in.target) {
      check_params(target, *in.target);
      init = *in.target;
      // Already converted against this very mesh: a new descent run would
      // keep shaving PVE, so pass the record through unchanged.
      if (!options.refit_converted && in.fit_pve) {
        const double current = pve(posed_skin(target, init), mesh) / kMetersToMillimeters;
        if (std::abs(current - *in.fit_pve) <= 1e-12 * std::max(1.0, std::abs(current))) {
          out.report.pve = *in.fit_pve;
          out.report.accepted = std::isfinite(*in.fit_pve) && *in.fit_pve <= options.reject_pve;
          if (!out.report.accepted) out.report.error = "final PVE above the quarantine threshold";
          return out;
        }
      }
    }
    const auto fit =
        fit_model_to_mesh(target, mesh, init, schedule, source_global_orient(source, convention, *in.source));
    out.record.target = fit.params;
    out.record.fit_pve = fit.pve;
    out.report.pve = fit.pve;
    out.report.stages = fit.stages;
    out.report.accepted = std::isfinite(fit.pve) && fit.pve <= options.reject_pve;
    if (!out.report.accepted) out.report.error = "final PVE above the quarantine threshold";
  } catch (const std::exception& e) {
    out.report.accepted = false;
    out.report.error = e.what();
  }
  return out;
}

}  // namespace

ConvertResult convert_dataset(const Dataset& ds, const BodyModel& source, const BodyModel& target,
                              const FitSchedule& schedule, const ConvertOptions& options) {
  if (source.num_skin_vertices() != target.num_skin_vertices())
    throw IncompatibleModelsError("source has " + std::to_string(source.num_skin_vertices()) +
                                  " skin vertices, target has " + std::to_string(target.num_skin_vertices()));
  if (options.workers < 1) throw ConfigError("workers must be at least 1");
  if (!(options.reject_pve > 0.0)) throw ConfigError("reject threshold must be positive");
  schedule.validate();

  const std::size_t n = ds.records.size();
  std::vector<Outcome> outcomes(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++)
      outcomes[i] = convert_one(ds.records[i], source, target, ds.manifest.source_convention, schedule, options);
  };
  const std::size_t threads = std::min(options.workers, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }

  ConvertResult result;
  result.converted.manifest = ds.manifest;
  result.converted.base_dir = ds.base_dir;
  result.rejects = result.converted;
  for (auto& o : outcomes) {
    (o.report.accepted ? result.converted : result.rejects).records.push_back(std::move(o.record));
    result.reports.push_back(std::move(o.report));
  }
  result.converted.sync_count();
  result.rejects.sync_count();
  return result;
}

ConvertResult convert_dataset(const Dataset& ds, const FitSchedule& schedule, const ConvertOptions& options) {
  auto load = [&](const std::string& ref, const char* field) {
    if (ref.empty()) throw FormatError(std::string("header.") + field, "no model reference");
    const auto path = resolve_model_path(ds, ref);
    if (!std::filesystem::exists(path))
      throw FormatError(std::string("header.") + field, "model file '" + path.string() + "' does not exist");
    return load_model(path.string());
  };
  const BodyModel source = load(ds.manifest.source_model, "source_model");
  const BodyModel target = load(ds.manifest.target_model, "target_model");
  return convert_dataset(ds, source, target, schedule, options);
}

std::string serialize_reports(const std::vector<SampleReport>& reports) {
  std::string out;
  for (const auto& r : reports) {
    json j;
    j["sample_id"] = r.sample_id;
    j["status"] = r.accepted ? "accepted" : "rejected";
    j["pve_model_units"] = r.pve && std::isfinite(*r.pve) ? json(*r.pve) : json(nullptr);
    if (!r.error.empty()) j["error"] = r.error;
    j["stages"] = json::array();
    for (const auto& s : r.stages)
      j["stages"].push_back({{"name", s.name},
                             {"objective", std::isfinite(s.objective) ? json(s.objective) : json(nullptr)},
                             {"iterations", s.iterations},
                             {"pve_model_units", std::isfinite(s.pve) ? json(s.pve) : json(nullptr)},
                             {"stop_reason", s.stop_reason}});
    out += j.dump() + "\n";
  }
  return out;
}

SubsetResult build_hard_subset(const Dataset& ds, int camera_id) {
  SubsetResult out;
  out.dataset.manifest = ds.manifest;
  out.dataset.base_dir = ds.base_dir;

  std::map<std::string, std::size_t> frames;
  std::vector<std::string> order;
  for (const auto& r : ds.records) {
    if (r.camera_id != camera_id) continue;
    auto [it, inserted] = frames.try_emplace(r.sequence_id, 0);
    if (inserted) order.push_back(r.sequence_id);
    it->second = std::max(it->second, r.frame + 1);
  }
  std::map<std::string, IndexRange> keep;
  for (const auto& seq : order) {
    auto declared = ds.manifest.sequences.find(seq);
    const std::size_t n = declared != ds.manifest.sequences.end() ? declared->second : frames[seq];
    if (n < 4) {
      out.warnings.push_back("sequence '" + seq + "' has " + std::to_string(n) + " frames; skipped");
      continue;
    }
    keep[seq] = subset_middle_half(n);
  }
  for (const auto& r : ds.records) {
    if (r.camera_id != camera_id) continue;
    auto it = keep.find(r.sequence_id);
    if (it != keep.end() && r.frame >= it->second.begin && r.frame < it->second.end) out.dataset.records.push_back(r);
  }
  out.dataset.sync_count();
  return out;
}

}  // namespace bodykit
