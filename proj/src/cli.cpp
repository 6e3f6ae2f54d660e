#include "bodykit/cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "bodykit/cascade.hpp"
#include "bodykit/codec.hpp"
#include "bodykit/dataset.hpp"
#include "bodykit/errors.hpp"
#include "bodykit/fitting.hpp"
#include "bodykit/metrics.hpp"
#include "bodykit/model_io.hpp"
#include "bodykit/synthetic.hpp"
#include "bodykit/toy_model.hpp"

namespace bodykit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Input/output path checks run before any work starts.
void require_input(const std::string& path, const std::string& flag) {
  if (!fs::is_regular_file(path)) throw ConfigError(flag + ": no such file '" + path + "'");
}

void require_output(const std::string& path, const std::string& flag) {
  if (path.empty()) throw ConfigError(flag + ": empty path");
  const fs::path dir = fs::path(path).parent_path();
  if (!dir.empty() && !fs::is_directory(dir)) throw ConfigError(flag + ": directory '" + dir.string() + "' does not exist");
}

// Relative model paths that do not exist locally are looked up along
// BODYKIT_MODEL_PATH (colon separated).
std::string resolve_model_arg(const std::string& path) {
  if (fs::is_regular_file(path) || fs::path(path).is_absolute()) return path;
  if (const char* env = std::getenv("BODYKIT_MODEL_PATH")) {
    std::stringstream dirs(env);
    std::string dir;
    while (std::getline(dirs, dir, ':')) {
      if (dir.empty()) continue;
      const fs::path candidate = fs::path(dir) / path;
      if (fs::is_regular_file(candidate)) return candidate.string();
    }
  }
  return path;
}

BodyModel load_model_arg(const std::string& path) {
  const std::string resolved = resolve_model_arg(path);
  require_input(resolved, "--model");
  return load_model(resolved);
}

json read_json(const std::string& path, const std::string& flag) {
  require_input(path, flag);
  try {
    return json::parse(codec::read_file(path));
  } catch (const json::exception& e) {
    throw FormatError(flag, std::string("malformed JSON: ") + e.what());
  }
}

void write_json(const std::string& path, const json& j) { codec::write_file_atomic(path, j.dump(2) + "\n"); }

json params_to_json(const ParamSet& p) {
  return {{"theta", p.theta.values}, {"beta", p.beta.values}, {"pi", {{"s", p.pi.s}, {"tx", p.pi.tx}, {"ty", p.pi.ty}}}};
}

std::vector<double> number_array(const json& j, const std::string& field) {
  if (!j.is_array()) throw FormatError(field, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw FormatError(field, "expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

ParamSet params_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("theta") || !j.contains("beta"))
    throw FormatError(where, "expected an object with theta, beta and pi");
  ParamSet p;
  p.theta.values = number_array(j["theta"], where + ".theta");
  p.beta.values = number_array(j["beta"], where + ".beta");
  if (j.contains("pi")) {
    const json& pi = j["pi"];
    if (!pi.is_object()) throw FormatError(where + ".pi", "expected {s, tx, ty}");
    for (const char* key : {"s", "tx", "ty"})
      if (!pi.contains(key) || !pi[key].is_number()) throw FormatError(where + ".pi." + key, "expected a number");
    p.pi = {pi["s"].get<double>(), pi["tx"].get<double>(), pi["ty"].get<double>()};
  }
  return p;
}

ParamSet load_params(const std::string& path, const BodyModel& model, const std::string& flag) {
  ParamSet p = params_from_json(read_json(path, flag), flag);
  try {
    check_params(model, p);
  } catch (const Error& e) {
    throw FormatError(flag, e.what());
  }
  return p;
}

json mesh_to_json(const Mesh& m) {
  json v = json::array();
  for (const auto& p : m.vertices) v.push_back({p.x, p.y, p.z});
  return {{"layer", m.layer == Layer::Skin ? "skin" : "skeleton"}, {"vertices", std::move(v)}};
}

Mesh mesh_from_json(const json& j, const std::string& flag) {
  if (!j.is_object() || !j.contains("vertices") || !j["vertices"].is_array())
    throw FormatError(flag, "expected an object with a vertices array");
  Mesh m;
  m.layer = j.value("layer", std::string("skin")) == "skeleton" ? Layer::Skeleton : Layer::Skin;
  for (const auto& v : j["vertices"]) {
    const auto xyz = number_array(v, flag + ".vertices");
    if (xyz.size() != 3) throw FormatError(flag + ".vertices", "expected [x, y, z] triples");
    m.vertices.push_back({xyz[0], xyz[1], xyz[2]});
  }
  return m;
}

struct IntrinsicFlags {
  double width = 640.0;
  double height = 480.0;
  std::optional<double> focal;
  std::optional<double> fov;
  std::optional<double> cx, cy;
  double crop_size = kDefaultCropSize;

  void add_to(CLI::App* app) {
    app->add_option("--image-width", width, "Image width, px")->check(CLI::PositiveNumber);
    app->add_option("--image-height", height, "Image height, px")->check(CLI::PositiveNumber);
    app->add_option("--focal", focal, "Focal length, px (fx = fy)")->check(CLI::PositiveNumber);
    app->add_option("--fov", fov, "Horizontal field of view, degrees");
    app->add_option("--cx", cx, "Principal point x, px");
    app->add_option("--cy", cy, "Principal point y, px");
    app->add_option("--crop-size", crop_size, "Crop size the scale refers to, px")->check(CLI::PositiveNumber);
  }

  // Record intrinsics win over flags, flags over the heuristic default.
  Intrinsics resolve(const std::optional<Intrinsics>& record, double w, double h) const {
    if (record) return *record;
    Intrinsics k = default_intrinsics(w, h, focal ? std::nullopt : fov);
    if (focal) k.fx = k.fy = *focal;
    if (cx) k.cx = *cx;
    if (cy) k.cy = *cy;
    k.validate();
    return k;
  }
  Intrinsics resolve() const { return resolve(std::nullopt, width, height); }
};

template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& fn) {
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(n, 1));
  if (threads == 1) {
    work();
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
}

class Progress {
 public:
  Progress(std::string label, std::size_t total) : label_(std::move(label)), total_(total) {}
  void tick() {
    std::lock_guard lock(mutex_);
    ++done_;
    if (done_ == total_ || done_ % 10 == 0) std::cerr << "[" << label_ << "] " << done_ << "/" << total_ << "\n";
  }

 private:
  std::string label_;
  std::size_t total_;
  std::size_t done_ = 0;
  std::mutex mutex_;
};

std::string fixed(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string relative_to(const fs::path& target, const fs::path& from_file) {
  const fs::path base = fs::absolute(from_file).parent_path();
  return fs::absolute(target).lexically_normal().lexically_relative(base.lexically_normal()).generic_string();
}

// Model references in a dataset written to `out` must still resolve.
void rebase_models(Dataset& ds, const std::string& out) {
  auto rebase = [&](std::string& ref) {
    if (ref.empty() || fs::path(ref).is_absolute()) return;
    ref = relative_to(resolve_model_path(ds, ref), out);
  };
  rebase(ds.manifest.source_model);
  rebase(ds.manifest.target_model);
  ds.base_dir = fs::path(out).parent_path();
}

Dataset load_dataset_arg(const std::string& path, const std::string& flag) {
  require_input(path, flag);
  return load_dataset(path);
}

// ---- gen-model ------------------------------------------------------------

struct GenModelArgs {
  std::uint64_t seed = 0;
  std::string spec = "default";
  std::optional<std::size_t> joints, pose_dim, skin_vertices, skeleton_vertices, shape_dim, keypoints;
  std::string out;
};

int cmd_gen_model(const GenModelArgs& a) {
  require_output(a.out, "--out");
  ToyModelSpec spec = ToyModelSpec::preset(a.spec);
  if (a.joints) spec.joints = *a.joints;
  if (a.pose_dim) spec.pose_dim = *a.pose_dim;
  if (a.skin_vertices) spec.skin_vertices = *a.skin_vertices;
  if (a.skeleton_vertices) spec.skeleton_vertices = *a.skeleton_vertices;
  if (a.shape_dim) spec.shape_dim = *a.shape_dim;
  if (a.keypoints) spec.keypoints = *a.keypoints;
  const BodyModel model = gen_toy_model(a.seed, spec);
  save_model(model, a.out);
  std::cout << "checksum " << model_checksum(model) << "\n"
            << "joints " << model.num_joints() << " pose_dim " << model.pose_dim() << " shape_dim "
            << model.shape_dim() << " skin_vertices " << model.num_skin_vertices() << " skeleton_vertices "
            << model.num_skeleton_vertices() << " keypoints " << model.num_keypoints() << "\n";
  return kOk;
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  std::string model, out, source_model;
  std::uint64_t seed = 0;
  std::size_t sequences = 1, frames = 8, cameras = 1;
  bool no_intrinsics = false;
  IntrinsicFlags intr;
};

int cmd_synth(const SynthArgs& a) {
  const BodyModel target = load_model_arg(a.model);
  require_output(a.out, "--out");
  require_output(a.source_model, "--source-model");
  const BodyModel source = ball_joint_variant(target, target.data().name + "-source");
  save_model(source, a.source_model);

  Dataset ds;
  ds.manifest.source_model = relative_to(a.source_model, a.out);
  ds.manifest.target_model = relative_to(resolve_model_arg(a.model), a.out);
  const Intrinsics k = a.intr.resolve();
  std::size_t index = 0;
  for (std::size_t s = 0; s < a.sequences; ++s) {
    const std::string seq = "seq" + std::to_string(s);
    ds.manifest.sequences[seq] = a.frames;
    for (std::size_t f = 0; f < a.frames; ++f) {
      UniformSource rng(a.seed * 1000003ULL + s * 100003ULL + f);
      const ParamSet truth = random_params(target, rng);
      const AxisAnglePose aa = to_axis_angle_pose(target, truth.theta);
      for (std::size_t c = 0; c < a.cameras; ++c) {
        ParamSet view = truth;
        view.pi.tx += 0.1 * static_cast<double>(c);
        SampleRecord r;
        r.sample_id = seq + "_c" + std::to_string(c) + "_f" + std::to_string(f);
        r.image_width = k.width;
        r.image_height = k.height;
        if (!a.no_intrinsics) r.intrinsics = k;
        r.source = SourceParams{source.data().name, aa.body, truth.beta.values, aa.global_orient};
        r.target = view;
        r.j2d = reproject(target, view, k, a.intr.crop_size);
        r.sequence_id = seq;
        r.frame = f;
        r.camera_id = static_cast<int>(c);
        ds.records.push_back(std::move(r));
        ++index;
      }
    }
  }
  ds.sync_count();
  save_dataset(a.out, ds);
  std::cout << "samples " << index << "\n";
  return kOk;
}

// ---- pose / project -------------------------------------------------------

struct PoseArgs {
  std::string model, params, out, layer = "skin";
};

int cmd_pose(const PoseArgs& a) {
  const BodyModel model = load_model_arg(a.model);
  require_output(a.out, "--out");
  const ParamSet p = load_params(a.params, model, "--params");
  const FkResult fk = forward_kinematics(model, p.theta, p.beta);
  Mesh mesh;
  if (a.layer == "skeleton") {
    if (!model.has_skeleton()) throw MissingLayerError("model has no skeleton layer");
    mesh = skin(model, fk, rest_skeleton(model, fk.rest_joints), Layer::Skeleton);
  } else {
    mesh = skin(model, fk, shape_blend(model, p.beta).rest_skin, Layer::Skin);
  }
  write_json(a.out, mesh_to_json(mesh));
  std::cout << "vertices " << mesh.vertices.size() << "\n";
  return kOk;
}

struct ProjectArgs {
  std::string model, params, out;
  IntrinsicFlags intr;
};

int cmd_project(const ProjectArgs& a) {
  const BodyModel model = load_model_arg(a.model);
  require_output(a.out, "--out");
  const ParamSet p = load_params(a.params, model, "--params");
  const Intrinsics k = a.intr.resolve();
  const JointSet2D uv = reproject(model, p, k, a.intr.crop_size);
  const Vec3d t = lift_extrinsics(p.pi, k, a.intr.crop_size);
  json pts = json::array();
  for (const auto& q : uv.positions) pts.push_back({q.x, q.y});
  write_json(a.out, {{"intrinsics", {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
                                      {"width", k.width}, {"height", k.height}}},
                     {"crop_size", a.intr.crop_size},
                     {"translation", {t.x, t.y, t.z}},
                     {"keypoints_px", std::move(pts)}});
  std::cout << "keypoints " << uv.size() << " depth_model_units " << t.z << "\n";
  return kOk;
}

// ---- fit ------------------------------------------------------------------

struct FitArgs {
  std::string model, target_mesh, out, schedule, init = "zero", init_params, freeze_global = "on", report;
  std::vector<double> global_orient;
};

FitSchedule load_schedule(const std::string& path) {
  if (path.empty()) return FitSchedule::defaults();
  require_input(path, "--schedule");
  FitSchedule s = FitSchedule::from_json(codec::read_file(path));
  s.validate();
  return s;
}

json stage_reports_json(const std::vector<StageReport>& stages) {
  json out = json::array();
  for (const auto& s : stages)
    out.push_back({{"name", s.name},
                   {"objective", s.objective},
                   {"iterations", s.iterations},
                   {"pve_model_units", s.pve},
                   {"stop_reason", s.stop_reason}});
  return out;
}

int cmd_fit(const FitArgs& a) {
  const BodyModel model = load_model_arg(a.model);
  require_input(a.target_mesh, "--target-mesh");
  require_output(a.out, "--out");
  if (!a.report.empty()) require_output(a.report, "--report");
  FitSchedule schedule = load_schedule(a.schedule);
  schedule.freeze_global = a.freeze_global == "on";
  if (a.init == "provided" && a.init_params.empty()) throw ConfigError("--init provided needs --init-params");
  const Mesh target = mesh_from_json(read_json(a.target_mesh, "--target-mesh"), "--target-mesh");
  const ParamSet init = a.init == "provided" ? load_params(a.init_params, model, "--init-params") : ParamSet::zeros(model);

  std::optional<Vec3d> orient;
  if (!a.global_orient.empty()) {
    orient = Vec3d{a.global_orient[0], a.global_orient[1], a.global_orient[2]};
  } else if (schedule.freeze_global) {
    orient = matrix_to_axis_angle(pose_to_rotations(model, init.theta)[0]);
  }
  const FitResult r = fit_model_to_mesh(model, target, init, schedule, orient);
  write_json(a.out, params_to_json(r.params));
  if (!a.report.empty())
    write_json(a.report, {{"pve_model_units", r.pve}, {"stages", stage_reports_json(r.stages)}});
  for (const auto& s : r.stages)
    std::cout << "stage " << s.name << " iterations " << s.iterations << " objective " << s.objective
              << " pve_model_units " << s.pve << "\n";
  std::cout << "pve_model_units " << r.pve << "\n";
  return kOk;
}

// ---- convert --------------------------------------------------------------

struct ConvertArgs {
  std::string manifest, schedule, out, rejects, report, init = "zero";
  std::size_t workers = 1;
  double reject_pve = 1e-2;
};

int cmd_convert(const ConvertArgs& a) {
  Dataset ds = load_dataset_arg(a.manifest, "--manifest");
  require_output(a.out, "--out");
  const std::string rejects_path = a.rejects.empty() ? a.out + ".rejects.jsonl" : a.rejects;
  require_output(rejects_path, "--rejects");
  if (!a.report.empty()) require_output(a.report, "--report");
  const FitSchedule schedule = load_schedule(a.schedule);
  ConvertOptions options;
  options.workers = a.workers;
  options.init_from_record = a.init == "provided";
  options.reject_pve = a.reject_pve;
  std::cerr << "[convert] " << ds.records.size() << " samples, " << a.workers << " worker(s)\n";
  ConvertResult r = convert_dataset(ds, schedule, options);

  rebase_models(r.converted, a.out);
  rebase_models(r.rejects, rejects_path);
  save_dataset(a.out, r.converted);
  save_dataset(rejects_path, r.rejects);
  if (!a.report.empty()) codec::write_file_atomic(a.report, serialize_reports(r.reports));
  std::cout << "converted " << r.converted.records.size() << " rejected " << r.rejects.records.size() << "\n";
  for (const auto& rep : r.reports)
    if (!rep.accepted) std::cout << "reject " << rep.sample_id << ": " << rep.error << "\n";
  return r.rejects.records.empty() ? kOk : kPartial;
}

// ---- refine / probe -------------------------------------------------------

struct RefineArgs {
  std::string model, evidence, out, trace, supervision = "none", sample;
  std::size_t stages = 6, steps = 50, workers = 1;
  double step_size = CascadeSettings{}.step_size;
  IntrinsicFlags intr;
};

Evidence evidence_for(const BodyModel& model, const SampleRecord& r, const IntrinsicFlags& flags, bool full) {
  if (!r.j2d) throw FormatError(r.sample_id + ".j2d", "missing 2D keypoints");
  Evidence ev;
  ev.j2d_hat = *r.j2d;
  ev.intrinsics = flags.resolve(r.intrinsics, r.image_width, r.image_height);
  ev.crop_size = flags.crop_size;
  if (full) {
    if (!r.target) throw FormatError(r.sample_id + ".target", "full supervision needs target parameters");
    check_params(model, *r.target);
    const auto body = kin::pose_body<double>(model, r.target->theta.values, r.target->beta.values);
    ev.j3d_hat = JointSet3D(body.keypoints);
    ev.theta_hat = r.target->theta;
    ev.beta_hat = r.target->beta;
  }
  return ev;
}

json breakdown_json(const LossBreakdown& b) {
  return {{"kp", b.kp}, {"beta", b.beta}, {"theta", b.theta}, {"total", b.total}};
}

json trace_json(const std::string& id, const Evidence& ev, const CascadeTrace& t) {
  json stages = json::array();
  for (std::size_t i = 0; i < t.stages.size(); ++i) {
    json s = params_to_json(t.stages[i].params);
    s["layer"] = i;
    s["objective"] = t.stages[i].objective;
    s["loss"] = breakdown_json(t.stages[i].breakdown);
    stages.push_back(std::move(s));
  }
  const auto& k = ev.intrinsics;
  json j = {{"sample_id", id},
            {"layers", t.num_layers()},
            {"intrinsics", {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}}},
            {"crop_size", ev.crop_size},
            {"stages", std::move(stages)}};
  if (t.loss_refine) j["loss_refine"] = *t.loss_refine;
  if (t.loss_total) j["loss_total"] = *t.loss_total;
  return j;
}

std::vector<const SampleRecord*> select_records(const Dataset& ds, const std::string& sample) {
  std::vector<const SampleRecord*> out;
  for (const auto& r : ds.records)
    if (sample.empty() || r.sample_id == sample) out.push_back(&r);
  if (!sample.empty() && out.empty()) throw ConfigError("--sample: no record '" + sample + "'");
  return out;
}

int cmd_refine(const RefineArgs& a) {
  const BodyModel model = load_model_arg(a.model);
  Dataset ds = load_dataset_arg(a.evidence, "--evidence");
  require_output(a.out, "--out");
  if (!a.trace.empty()) require_output(a.trace, "--emit-trace");
  CascadeSettings settings;
  settings.stages = a.stages;
  settings.steps_per_stage = a.steps;
  settings.step_size = a.step_size;
  const bool full = a.supervision == "full";

  const auto records = select_records(ds, a.sample);
  std::vector<Evidence> evidence;
  for (const auto* r : records) evidence.push_back(evidence_for(model, *r, a.intr, full));

  std::vector<std::optional<CascadeTrace>> traces(records.size());
  std::vector<std::string> errors(records.size());
  Progress progress("refine", records.size());
  parallel_for(records.size(), a.workers, [&](std::size_t i) {
    try {
      traces[i] = run_cascade(evidence[i], model, settings);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
    progress.tick();
  });

  Dataset out;
  out.manifest = ds.manifest;
  out.base_dir = ds.base_dir;
  std::string trace_text;
  double pck_sum = 0.0;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!traces[i]) {
      ++failed;
      std::cout << "failed " << records[i]->sample_id << ": " << errors[i] << "\n";
      continue;
    }
    SampleRecord r = *records[i];
    r.target = traces[i]->stages.back().params;
    r.fit_pve.reset();
    out.records.push_back(std::move(r));
    trace_text += trace_json(records[i]->sample_id, evidence[i], *traces[i]).dump() + "\n";
    pck_sum += evidence_pck(model, evidence[i], traces[i]->stages.back().params).at_005;
  }
  out.sync_count();
  rebase_models(out, a.out);
  save_dataset(a.out, out);
  if (!a.trace.empty()) codec::write_file_atomic(a.trace, trace_text);
  const std::size_t ok = records.size() - failed;
  std::cout << "refined " << ok << " failed " << failed << " stages " << a.stages << " mean_pck@0.05[fraction] "
            << fixed(ok ? pck_sum / static_cast<double>(ok) : std::nan("")) << "\n";
  return failed == 0 ? kOk : kPartial;
}

struct ProbeArgs {
  std::string model, evidence, trace, out, sample;
};

CascadeTrace trace_from_json(const json& j, const BodyModel& model, const std::string& where) {
  if (!j.is_object() || !j.contains("stages") || !j["stages"].is_array())
    throw FormatError(where, "expected a trace record with stages");
  CascadeTrace t;
  for (std::size_t i = 0; i < j["stages"].size(); ++i) {
    const json& s = j["stages"][i];
    CascadeStage st;
    st.params = params_from_json(s, where + ".stages[" + std::to_string(i) + "]");
    check_params(model, st.params);
    if (!s.contains("objective") || !s["objective"].is_number())
      throw FormatError(where + ".stages[" + std::to_string(i) + "].objective", "expected a number");
    st.objective = s["objective"].get<double>();
    t.stages.push_back(std::move(st));
  }
  if (t.stages.size() < 2) throw FormatError(where + ".stages", "a trace needs at least two stages");
  return t;
}

int cmd_probe(const ProbeArgs& a) {
  const BodyModel model = load_model_arg(a.model);
  const Dataset ds = load_dataset_arg(a.evidence, "--evidence");
  require_input(a.trace, "--trace");
  require_output(a.out, "--out");
  std::map<std::string, const SampleRecord*> by_id;
  for (const auto& r : ds.records) by_id[r.sample_id] = &r;

  std::string table = "sample_id\tlayer\tplane_pck@0.05[fraction]\tplane_pck@0.1[fraction]\tscale_pck@0.05[fraction]"
                      "\tscale_pck@0.1[fraction]\n";
  std::istringstream lines(codec::read_file(a.trace));
  std::string line;
  std::size_t n = 0, rows = 0;
  while (std::getline(lines, line)) {
    ++n;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw FormatError("--trace line " + std::to_string(n), "malformed JSON");
    }
    const std::string id = j.value("sample_id", std::string());
    if (!a.sample.empty() && id != a.sample) continue;
    auto rec = by_id.find(id);
    if (rec == by_id.end()) throw FormatError("--trace line " + std::to_string(n), "unknown sample '" + id + "'");
    const CascadeTrace trace = trace_from_json(j, model, id);
    Evidence ev;
    ev.j2d_hat = *rec->second->j2d;
    const json& k = j.at("intrinsics");
    ev.intrinsics = {k.at("fx"), k.at("fy"), k.at("cx"), k.at("cy"), k.at("width"), k.at("height")};
    ev.crop_size = j.at("crop_size").get<double>();
    for (std::size_t i = 0; i <= trace.num_layers(); ++i) {
      const PckPair plane = factorization_probe(trace, ev, model, ProbeComponent::PlaneTranslation, i);
      const PckPair scale = factorization_probe(trace, ev, model, ProbeComponent::Scale, i);
      table += id + "\t" + std::to_string(i) + "\t" + fixed(plane.at_005) + "\t" + fixed(plane.at_010) + "\t" +
               fixed(scale.at_005) + "\t" + fixed(scale.at_010) + "\n";
      ++rows;
    }
  }
  if (rows == 0) throw ConfigError("--trace: no matching trace records");
  codec::write_file_atomic(a.out, table);
  std::cout << table;
  return kOk;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string model, pred, gt, out;
  IntrinsicFlags intr;
};

struct EvalRow {
  double mpjpe, pa_mpjpe, pve, pck05, pck10;
};

EvalRow evaluate(const BodyModel& model, const SampleRecord& gt, const ParamSet& pred, const ParamSet& truth,
                 const IntrinsicFlags& flags) {
  const double nan = std::nan("");
  EvalRow row{nan, nan, nan, nan, nan};
  const auto pb = kin::pose_body<double>(model, pred.theta.values, pred.beta.values);
  const auto gb = kin::pose_body<double>(model, truth.theta.values, truth.beta.values);
  const JointSet3D pj(pb.keypoints), gj(gb.keypoints);
  row.mpjpe = mpjpe(pj, gj, true, model.data().keypoint_root);
  try {
    row.pa_mpjpe = pa_mpjpe(pj, gj);
  } catch (const RankDeficiencyError&) {
  }
  row.pve = pve(Mesh{pb.skin, Layer::Skin}, Mesh{gb.skin, Layer::Skin});
  const Intrinsics k = flags.resolve(gt.intrinsics, gt.image_width, gt.image_height);
  try {
    const JointSet2D g2 = gt.j2d ? *gt.j2d : reproject(model, truth, k, flags.crop_size);
    const JointSet2D p2 = reproject(model, pred, k, flags.crop_size);
    const double norm = bbox_max_side(g2);
    row.pck05 = pck(p2, g2, 0.05, norm);
    row.pck10 = pck(p2, g2, 0.1, norm);
  } catch (const BehindCameraError&) {
  } catch (const UndefinedMetricError&) {
  }
  return row;
}

int cmd_eval(const EvalArgs& a) {
  const BodyModel model = load_model_arg(a.model);
  const Dataset pred = load_dataset_arg(a.pred, "--pred");
  const Dataset gt = load_dataset_arg(a.gt, "--gt");
  require_output(a.out, "--out");
  std::map<std::string, const SampleRecord*> by_id;
  for (const auto& r : pred.records) by_id[r.sample_id] = &r;

  std::string table = "sample_id\tmpjpe[mm]\tpa_mpjpe[mm]\tpve[mm]\tpck@0.05[fraction]\tpck@0.1[fraction]\n";
  double sums[5] = {0, 0, 0, 0, 0};
  std::size_t counts[5] = {0, 0, 0, 0, 0};
  for (const auto& g : gt.records) {
    auto it = by_id.find(g.sample_id);
    if (it == by_id.end()) throw FormatError("--pred", "no prediction for sample '" + g.sample_id + "'");
    if (!g.target) throw FormatError("--gt", g.sample_id + ".target missing");
    if (!it->second->target) throw FormatError("--pred", g.sample_id + ".target missing");
    check_params(model, *g.target);
    check_params(model, *it->second->target);
    const EvalRow row = evaluate(model, g, *it->second->target, *g.target, a.intr);
    const double vals[5] = {row.mpjpe, row.pa_mpjpe, row.pve, row.pck05, row.pck10};
    table += g.sample_id;
    for (int c = 0; c < 5; ++c) {
      table += "\t" + fixed(vals[c]);
      if (std::isfinite(vals[c])) sums[c] += vals[c], ++counts[c];
    }
    table += "\n";
  }
  std::string mean = "mean";
  for (int c = 0; c < 5; ++c) mean += "\t" + fixed(counts[c] ? sums[c] / static_cast<double>(counts[c]) : std::nan(""));
  table += mean + "\n";
  codec::write_file_atomic(a.out, table);
  std::cout << "samples " << gt.records.size() << "\n"
            << "sample_id\tmpjpe[mm]\tpa_mpjpe[mm]\tpve[mm]\tpck@0.05[fraction]\tpck@0.1[fraction]\n"
            << mean << "\n";
  return kOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const ShapeError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
      dynamic_cast<const IncompatibleModelsError*>(&e) || dynamic_cast<const MissingLayerError*>(&e))
    return kValidation;
  return kRuntime;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"bodykit: constrained body models, fitting, refinement and evaluation"};
  app.require_subcommand(1);

  GenModelArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-model", "Write a deterministic synthetic body model");
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--spec", gen.spec, "Dimension preset")->check(CLI::IsMember({"default", "skel-like"}))->capture_default_str();
  gen_cmd->add_option("--joints", gen.joints, "Joint count");
  gen_cmd->add_option("--pose-dim", gen.pose_dim, "Pose DOF count");
  gen_cmd->add_option("--skin-vertices", gen.skin_vertices, "Skin vertex count");
  gen_cmd->add_option("--skeleton-vertices", gen.skeleton_vertices, "Skeleton vertex count (0 drops the layer)");
  gen_cmd->add_option("--shape-dim", gen.shape_dim, "Shape component count");
  gen_cmd->add_option("--keypoints", gen.keypoints, "Keypoint count");
  gen_cmd->add_option("--out", gen.out, "Output model file")->required();

  SynthArgs syn;
  auto* syn_cmd = app.add_subcommand("synth", "Write a synthetic dataset (source params, targets, 2D keypoints)");
  syn_cmd->add_option("--model", syn.model, "Target model file")->required();
  syn_cmd->add_option("--out", syn.out, "Output dataset")->required();
  syn_cmd->add_option("--source-model", syn.source_model, "Where to write the axis-angle source model")->required();
  syn_cmd->add_option("--seed", syn.seed, "Seed")->capture_default_str();
  syn_cmd->add_option("--sequences", syn.sequences, "Sequence count")->check(CLI::PositiveNumber)->capture_default_str();
  syn_cmd->add_option("--frames", syn.frames, "Frames per sequence")->check(CLI::PositiveNumber)->capture_default_str();
  syn_cmd->add_option("--cameras", syn.cameras, "Cameras per frame")->check(CLI::PositiveNumber)->capture_default_str();
  syn_cmd->add_flag("--no-intrinsics", syn.no_intrinsics, "Leave intrinsics out of the records");
  syn.intr.add_to(syn_cmd);

  PoseArgs pose;
  auto* pose_cmd = app.add_subcommand("pose", "Pose a model and write the mesh");
  pose_cmd->add_option("--model", pose.model, "Model file")->required();
  pose_cmd->add_option("--params", pose.params, "Parameter file")->required();
  pose_cmd->add_option("--out", pose.out, "Output mesh")->required();
  pose_cmd->add_option("--layer", pose.layer, "Mesh layer")->check(CLI::IsMember({"skin", "skeleton"}))->capture_default_str();

  ProjectArgs proj;
  auto* proj_cmd = app.add_subcommand("project", "Project model keypoints into the image");
  proj_cmd->add_option("--model", proj.model, "Model file")->required();
  proj_cmd->add_option("--params", proj.params, "Parameter file")->required();
  proj_cmd->add_option("--out", proj.out, "Output keypoint file")->required();
  proj.intr.add_to(proj_cmd);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a target mesh");
  fit_cmd->add_option("--model", fit.model, "Model file")->required();
  fit_cmd->add_option("--target-mesh", fit.target_mesh, "Target mesh file")->required();
  fit_cmd->add_option("--out", fit.out, "Output parameter file")->required();
  fit_cmd->add_option("--schedule", fit.schedule, "Fit schedule file (defaults to the 3-stage schedule)");
  fit_cmd->add_option("--init", fit.init, "Initialization")->check(CLI::IsMember({"zero", "provided"}))->capture_default_str();
  fit_cmd->add_option("--init-params", fit.init_params, "Initial parameters for --init provided");
  fit_cmd->add_option("--freeze-global", fit.freeze_global, "Hold the global orientation fixed")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  fit_cmd->add_option("--global-orient", fit.global_orient, "Source global orientation, axis-angle")->expected(3)->delimiter(',');
  fit_cmd->add_option("--report", fit.report, "Per-stage report file");

  ConvertArgs conv;
  auto* conv_cmd = app.add_subcommand("convert", "Convert a dataset's source parameters to the target model");
  conv_cmd->add_option("--manifest", conv.manifest, "Input dataset")->required();
  conv_cmd->add_option("--out", conv.out, "Converted dataset")->required();
  conv_cmd->add_option("--schedule", conv.schedule, "Fit schedule file");
  conv_cmd->add_option("--workers", conv.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  conv_cmd->add_option("--rejects", conv.rejects, "Quarantine file (default: <out>.rejects.jsonl)");
  conv_cmd->add_option("--report", conv.report, "Per-sample fit reports");
  conv_cmd->add_option("--init", conv.init, "Initialization")->check(CLI::IsMember({"zero", "provided"}))->capture_default_str();
  conv_cmd->add_option("--reject-pve", conv.reject_pve, "Quarantine threshold, model units")->check(CLI::PositiveNumber)->capture_default_str();

  RefineArgs ref;
  auto* ref_cmd = app.add_subcommand("refine", "Run the coarse-to-fine refinement cascade on 2D evidence");
  ref_cmd->add_option("--model", ref.model, "Model file")->required();
  ref_cmd->add_option("--evidence", ref.evidence, "Dataset with 2D keypoints")->required();
  ref_cmd->add_option("--out", ref.out, "Dataset with refined parameters")->required();
  ref_cmd->add_option("--stages", ref.stages, "Refinement stages L")->check(CLI::PositiveNumber)->capture_default_str();
  ref_cmd->add_option("--steps-per-stage", ref.steps, "Descent steps per stage")->check(CLI::PositiveNumber)->capture_default_str();
  ref_cmd->add_option("--step-size", ref.step_size, "Nominal step")->check(CLI::PositiveNumber)->capture_default_str();
  ref_cmd->add_option("--emit-trace", ref.trace, "Per-sample trace file");
  ref_cmd->add_option("--supervision", ref.supervision, "Extra evidence taken from the record targets")
      ->check(CLI::IsMember({"none", "full"}))
      ->capture_default_str();
  ref_cmd->add_option("--workers", ref.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  ref_cmd->add_option("--sample", ref.sample, "Only this sample");
  ref.intr.add_to(ref_cmd);

  ProbeArgs probe;
  auto* probe_cmd = app.add_subcommand("probe", "Layer-wise extrinsic factorization probe over a trace");
  probe_cmd->add_option("--model", probe.model, "Model file")->required();
  probe_cmd->add_option("--evidence", probe.evidence, "Dataset the trace was computed on")->required();
  probe_cmd->add_option("--trace", probe.trace, "Trace file from refine --emit-trace")->required();
  probe_cmd->add_option("--out", probe.out, "Output table")->required();
  probe_cmd->add_option("--sample", probe.sample, "Only this sample");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
  eval_cmd->add_option("--model", ev.model, "Model file")->required();
  eval_cmd->add_option("--pred", ev.pred, "Predicted dataset")->required();
  eval_cmd->add_option("--gt", ev.gt, "Ground-truth dataset")->required();
  eval_cmd->add_option("--out", ev.out, "Report table")->required();
  ev.intr.add_to(eval_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    if (!args.empty()) app.name(fs::path(args.front()).filename().string());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*gen_cmd) return cmd_gen_model(gen);
    if (*syn_cmd) return cmd_synth(syn);
    if (*pose_cmd) return cmd_pose(pose);
    if (*proj_cmd) return cmd_project(proj);
    if (*fit_cmd) return cmd_fit(fit);
    if (*conv_cmd) return cmd_convert(conv);
    if (*ref_cmd) return cmd_refine(ref);
    if (*probe_cmd) return cmd_probe(probe);
    if (*eval_cmd) return cmd_eval(ev);
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    std::cerr << "error: " << e.what() << "\n";
    if (code == kValidation) {
      for (auto* sub : app.get_subcommands()) std::cerr << sub->help();
    }
    return code;
  }
  return kValidation;
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace bodykit::cli
