#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bodykit/camera.hpp"
#include "bodykit/fitting.hpp"
#include "bodykit/params.hpp"
#include "bodykit/types.hpp"

namespace bodykit {

inline constexpr int kDatasetSchemaVersion = 1;

/// How source poses are stored. AxisAngle: global orientation plus one
/// axis-angle triple per non-root joint. ModelDofs: the source model's own
/// pose vector, root included.
enum class PoseConvention { AxisAngle, ModelDofs };

struct SourceParams {
  std::string model;
  std::vector<double> pose;
  std::vector<double> shape;
  Vec3d global_orient;

  bool operator==(const SourceParams&) const = default;
};

struct SampleRecord {
  std::string sample_id;
  double image_width = 0.0, image_height = 0.0;
  std::optional<Intrinsics> intrinsics;
  std::optional<SourceParams> source;
  std::optional<ParamSet> target;
  std::optional<double> fit_pve;  // model units
  std::optional<JointSet2D> j2d;
  std::string sequence_id;
  std::size_t frame = 0;
  int camera_id = 0;
};

bool operator==(const SampleRecord& a, const SampleRecord& b);

struct DatasetManifest {
  int schema_version = kDatasetSchemaVersion;
  /// Model file paths, relative to the dataset file unless absolute.
  std::string source_model;
  std::string target_model;
  PoseConvention source_convention = PoseConvention::AxisAngle;
  std::size_t sample_count = 0;
  /// Frames per sequence.
  std::map<std::string, std::size_t> sequences;

  bool operator==(const DatasetManifest&) const = default;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<SampleRecord> records;
  /// Directory that relative model references resolve against.
  std::filesystem::path base_dir;

  /// Recomputes sample_count from the records.
  void sync_count() { manifest.sample_count = records.size(); }
};

/// Streaming reader: one header line, then one record per line.
class DatasetReader {
 public:
  explicit DatasetReader(const std::string& path);

  const DatasetManifest& manifest() const { return manifest_; }
  /// False at a clean end of file. Throws FormatError naming the sample and
  /// field on a malformed record, and the last complete sample on truncation.
  bool next(SampleRecord& record);

 private:
  std::ifstream in_;
  DatasetManifest manifest_;
  std::size_t read_ = 0;
  std::string last_id_;
};

/// Validates counts, id uniqueness and per-record shapes.
void validate_dataset(const Dataset& dataset);

Dataset load_dataset(const std::string& path);
std::string serialize_dataset(const Dataset& dataset);
/// Atomic (temp file, then rename).
void save_dataset(const std::string& path, const Dataset& dataset);

std::filesystem::path resolve_model_path(const Dataset& dataset, const std::string& ref);

struct ConvertOptions {
  std::size_t workers = 1;
  /// Start each fit from the record's stored target parameters when present.
  bool init_from_record = false;
  /// With init_from_record, refit records whose stored parameters still
  /// reproduce their stored PVE instead of passing them through.
  bool refit_converted = false;
  /// Quarantine threshold on final PVE, model units (10x the fit tolerance).
  double reject_pve = 1e-2;
};

struct SampleReport {
  std::string sample_id;
  bool accepted = false;
  std::optional<double> pve;
  std::string error;
  std::vector<StageReport> stages;
};

struct ConvertResult {
  Dataset converted;
  Dataset rejects;
  std::vector<SampleReport> reports;
};

/// Poses each record's source parameters through the source model and fits
/// the target model to the resulting skin with the global orientation frozen.
/// Output order follows input order for any worker count.
ConvertResult convert_dataset(const Dataset& dataset, const BodyModel& source, const BodyModel& target,
                              const FitSchedule& schedule, const ConvertOptions& options = {});
/// Same, loading both models from the manifest references.
ConvertResult convert_dataset(const Dataset& dataset, const FitSchedule& schedule,
                              const ConvertOptions& options = {});

/// Source skin for one record.
Mesh source_mesh(const BodyModel& source, PoseConvention convention, const SourceParams& params);

std::string serialize_reports(const std::vector<SampleReport>& reports);

struct SubsetResult {
  Dataset dataset;
  std::vector<std::string> warnings;
};

/// Records of one camera, restricted to the middle half of every sequence.
/// Sequences shorter than 4 frames are skipped with a warning.
SubsetResult build_hard_subset(const Dataset& dataset, int camera_id);

}  // namespace bodykit
