#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "bodykit/codec.hpp"
#include "bodykit/dataset.hpp"
#include "bodykit/errors.hpp"
#include "bodykit/synthetic.hpp"
#include "bodykit/toy_model.hpp"

using namespace bodykit;
namespace fs = std::filesystem;

namespace {

const BodyModel& target_model() {
  static const BodyModel model = gen_toy_model(42);
  return model;
}

const BodyModel& source_model() {
  static const BodyModel model = ball_joint_variant(target_model(), "ball");
  return model;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Sequences "a" (frames) and "b" (3 frames), two cameras each.
Dataset make_dataset(std::size_t frames, std::uint64_t seed = 1) {
  Dataset ds;
  ds.manifest.source_model = "source.bkm";
  ds.manifest.target_model = "target.bkm";
  ds.manifest.sequences = {{"a", frames}, {"b", 3}};
  UniformSource rng(seed);
  for (const auto& [seq, n] : ds.manifest.sequences) {
    for (int cam = 0; cam < 2; ++cam) {
      for (std::size_t f = 0; f < n; ++f) {
        SampleRecord r;
        r.sample_id = seq + "_c" + std::to_string(cam) + "_f" + std::to_string(f);
        r.image_width = 640;
        r.image_height = 480;
        r.sequence_id = seq;
        r.frame = f;
        r.camera_id = cam;
        const ParamSet truth = random_params(target_model(), rng);
        const AxisAnglePose aa = to_axis_angle_pose(target_model(), truth.theta);
        r.source = SourceParams{"source.bkm", aa.body, truth.beta.values, aa.global_orient};
        ds.records.push_back(std::move(r));
      }
    }
  }
  ds.sync_count();
  return ds;
}

std::string field_of(const fs::path& path) {
  try {
    DatasetReader reader(path.string());
    SampleRecord r;
    while (reader.next(r)) {
    }
  } catch (const FormatError& e) {
    return e.field();
  }
  return "<accepted>";
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t nl; (nl = text.find('\n', start)) != std::string::npos; start = nl + 1)
    out.push_back(text.substr(start, nl - start));
  return out;
}

}  // namespace

TEST_CASE("round trip through disk is bitwise") {
  TempDir dir("bodykit_dataset_rt");
  Dataset ds = make_dataset(5);
  UniformSource rng(2);
  ds.records[0].intrinsics = default_intrinsics(640, 480, 55.0);
  ds.records[1].target = random_params(target_model(), rng);
  ds.records[1].fit_pve = 1.0 / 3.0;
  ds.records[2].j2d = JointSet2D({{0.1, 0.2}, {-1e-300, 5e300}}, {1.0, 0.0});
  ds.records[3].source->pose[0] = -0.0;
  const auto path = dir.path / "ds.jsonl";
  save_dataset(path.string(), ds);
  const Dataset back = load_dataset(path.string());
  CHECK(back.manifest == ds.manifest);
  REQUIRE(back.records.size() == ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) CHECK(back.records[i] == ds.records[i]);
  CHECK(std::signbit(back.records[3].source->pose[0]));
  CHECK(serialize_dataset(back) == serialize_dataset(ds));
  CHECK(back.base_dir == dir.path);
  CHECK(resolve_model_path(back, "m.bkm") == dir.path / "m.bkm");
  CHECK(resolve_model_path(back, "/abs/m.bkm") == fs::path("/abs/m.bkm"));
}

TEST_CASE("format errors name the header, sample and field") {
  TempDir dir("bodykit_dataset_err");
  const std::string text = serialize_dataset(make_dataset(4));
  const auto lines = lines_of(text);
  auto write = [&](const std::string& name, const std::string& contents) {
    const auto p = dir.path / name;
    std::ofstream(p, std::ios::binary) << contents;
    return p;
  };

  std::string bumped = text;
  const auto at = bumped.find("\"version\":1");
  REQUIRE(at != std::string::npos);
  bumped.replace(at, 11, "\"version\":2");
  CHECK(field_of(write("v2.jsonl", bumped)) == "header.version");

  // cut halfway through the third record
  const std::size_t cut = lines[0].size() + 1 + lines[1].size() + 1 + lines[2].size() + 1 + lines[3].size() / 2;
  try {
    DatasetReader reader(write("cut.jsonl", text.substr(0, cut)).string());
    SampleRecord r;
    while (reader.next(r)) {
    }
    FAIL("truncated file accepted");
  } catch (const FormatError& e) {
    CHECK(e.field() == "records");
    CHECK(std::string(e.what()).find("a_c0_f1") != std::string::npos);
  }

  // whole records missing
  std::string fewer = lines[0] + "\n" + lines[1] + "\n";
  CHECK(field_of(write("few.jsonl", fewer)) == "records");

  std::string bad_b64 = text;
  const auto shape_at = bad_b64.find("\"shape\":\"");
  REQUIRE(shape_at != std::string::npos);
  bad_b64.replace(shape_at + 9, 4, "!!!!");
  CHECK(field_of(write("b64.jsonl", bad_b64)) == "a_c0_f0.source.shape");

  CHECK(field_of(write("schema.jsonl", "{\"schema\":\"other\"}\n")) == "header.schema");
  CHECK_THROWS_AS(load_dataset((dir.path / "missing.jsonl").string()), Error);
}

TEST_CASE("dataset validation") {
  Dataset ds = make_dataset(4);
  CHECK_NOTHROW(validate_dataset(ds));

  Dataset dup = ds;
  dup.records[1].sample_id = dup.records[0].sample_id;
  CHECK_THROWS_AS(validate_dataset(dup), FormatError);

  Dataset count = ds;
  count.manifest.sample_count += 1;
  CHECK_THROWS_AS(validate_dataset(count), FormatError);

  Dataset frame = ds;
  frame.records[0].frame = 99;
  CHECK_THROWS_AS(validate_dataset(frame), FormatError);

  Dataset image = ds;
  image.records[0].image_height = 0;
  CHECK_THROWS_AS(validate_dataset(image), FormatError);
}

TEST_CASE("conversion is order-preserving, parallel-invariant and idempotent") {
  Dataset ds = make_dataset(2, 7);
  ds.records.resize(6);
  ds.manifest.sequences = {{"a", 2}, {"b", 3}};
  ds.records[4].source->pose.pop_back();  // malformed: becomes a reject
  ds.sync_count();
  const FitSchedule schedule = FitSchedule::defaults();
  const ConvertResult one = convert_dataset(ds, source_model(), target_model(), schedule);
  ConvertOptions two_workers;
  two_workers.workers = 3;
  const ConvertResult many = convert_dataset(ds, source_model(), target_model(), schedule, two_workers);
  CHECK(serialize_dataset(one.converted) == serialize_dataset(many.converted));
  CHECK(serialize_reports(one.reports) == serialize_reports(many.reports));

  REQUIRE(one.reports.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(one.reports[i].sample_id == ds.records[i].sample_id);
  CHECK_FALSE(one.reports[4].accepted);
  CHECK_FALSE(one.reports[4].error.empty());
  REQUIRE(one.rejects.records.size() == 1);
  CHECK(one.rejects.records[0].sample_id == ds.records[4].sample_id);
  CHECK(one.converted.manifest.sample_count == one.converted.records.size());
  for (const auto& r : one.converted.records) {
    REQUIRE(r.fit_pve.has_value());
    CHECK(*r.fit_pve < 1e-3);
  }

  ConvertOptions again;
  again.init_from_record = true;
  const ConvertResult twice = convert_dataset(one.converted, source_model(), target_model(), schedule, again);
  CHECK(serialize_dataset(twice.converted) == serialize_dataset(one.converted));
}

TEST_CASE("a tight threshold quarantines everything") {
  Dataset ds = make_dataset(2, 8);
  ds.records.resize(2);
  ds.manifest.sequences = {{"a", 2}};
  ds.sync_count();
  ConvertOptions strict;
  strict.reject_pve = 1e-300;
  FitSchedule quick = FitSchedule::defaults();
  for (auto& st : quick.stages) st.max_iters = 2;
  const auto r = convert_dataset(ds, source_model(), target_model(), quick, strict);
  CHECK(r.converted.records.empty());
  CHECK(r.rejects.records.size() == 2);
}

TEST_CASE("models must share the skin topology") {
  const BodyModel other = gen_toy_model(1, [] {
    ToyModelSpec s;
    s.skin_vertices = 500;
    return s;
  }());
  CHECK_THROWS_AS(convert_dataset(make_dataset(4), other, target_model(), FitSchedule::defaults()),
                  IncompatibleModelsError);
}

TEST_CASE("source mesh conventions agree") {
  UniformSource rng(9);
  const ParamSet truth = random_params(target_model(), rng);
  const AxisAnglePose aa = to_axis_angle_pose(target_model(), truth.theta);
  const Mesh from_aa = source_mesh(source_model(), PoseConvention::AxisAngle,
                                   SourceParams{"", aa.body, truth.beta.values, aa.global_orient});
  const Mesh from_dofs =
      source_mesh(target_model(), PoseConvention::ModelDofs, SourceParams{"", truth.theta.values, truth.beta.values, {}});
  REQUIRE(from_aa.vertices.size() == from_dofs.vertices.size());
  double worst = 0.0;
  for (std::size_t v = 0; v < from_aa.vertices.size(); ++v)
    worst = std::max(worst, norm(from_aa.vertices[v] - from_dofs.vertices[v]));
  CHECK(worst < 1e-12);
}

TEST_CASE("hard subset keeps the middle half of each front-camera sequence") {
  const Dataset ds = make_dataset(10);
  const SubsetResult sub = build_hard_subset(ds, 0);
  // sequence a: frames [3, 7) of 10; sequence b (3 frames) is skipped
  REQUIRE(sub.dataset.records.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(sub.dataset.records[i].sequence_id == "a");
    CHECK(sub.dataset.records[i].camera_id == 0);
    CHECK(sub.dataset.records[i].frame == 3 + i);
  }
  CHECK(sub.dataset.manifest.sample_count == 4);
  REQUIRE(sub.warnings.size() == 1);
  CHECK(sub.warnings[0].find("b") != std::string::npos);
}
