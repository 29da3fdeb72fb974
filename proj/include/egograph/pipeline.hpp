#pragma once

// End-to-end run driven by a JSON config: flow -> descriptor -> reduce ->
// spectrum -> classify -> evaluate. Every stage persists its outputs under
// the work directory and is skipped on a rerun when they already exist.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "egograph/errors.hpp"
#include "egograph/figures.hpp"
#include "egograph/flow_field.hpp"
#include "egograph/graph_spectrum.hpp"
#include "egograph/mbo_classifier.hpp"
#include "egograph/motion_descriptor.hpp"
#include "egograph/reduction.hpp"

namespace egograph::pipeline {

/// Failure inside a pipeline stage, tagged with the stage and the file involved.
class StageError : public Error {
public:
  StageError(std::string stage, std::filesystem::path file, const std::string& what);
  const std::string& stage() const noexcept { return stage_; }
  const std::filesystem::path& file() const noexcept { return file_; }

private:
  std::string stage_;
  std::filesystem::path file_;
};

struct VideoSource {
  enum class Kind { Frames, Flo, Synthetic };

  std::string id;
  Kind kind = Kind::Frames;
  std::filesystem::path dir;  // frames or .flo directory
  /// Frames and Flo: optional cap on frames (resp. fields) used.
  /// Synthetic: number of flow fields generated.
  std::optional<int> count;
  double fps = 30.0;
  std::optional<int> label;  // class of every segment of this video

  // Synthetic only. Field i gets noise seeded with noise_seed + i.
  flow::SynthPattern pattern = flow::synth::Translate{};
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
  int width = flow::kCanonicalWidth;
  int height = flow::kCanonicalHeight;
};

struct Config {
  enum class EvalMode { All, HeldOut };

  std::filesystem::path work_dir;
  std::vector<std::string> class_names;
  std::optional<std::filesystem::path> truth_labels;
  std::vector<int> eval_classes;
  EvalMode evaluation_mode = EvalMode::All;
  std::vector<VideoSource> videos;

  flow::FlowParams flow;
  int frame_width = flow::kCanonicalWidth;
  int frame_height = flow::kCanonicalHeight;

  int dx = 64, dy = 64;
  std::optional<int> dt;           // frames per segment
  std::optional<double> delta_t;   // seconds per segment, dt = round(delta_t * fps)

  reduction::NmfOptions nmf;
  std::optional<std::filesystem::path> basis_in;
  int window = 1;

  graph::NystromOptions spectrum;
  std::optional<Eigen::Index> batch_size;

  mbo::MboParams mbo;
  double fidelity_fraction = 0.1;
  std::uint64_t fidelity_seed = 0;
  std::optional<std::filesystem::path> fidelity_file;

  std::vector<Rgb> palette = default_palette();
  int plot_height = 20;

  int classes() const { return static_cast<int>(class_names.size()); }
  /// dt for a video at `fps`.
  int segment_frames(double fps) const;
};

/// Relative paths are resolved against `base_dir`. Throws ParseError or
/// ParameterError on malformed or inconsistent fields.
Config parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
Config load_config(const std::filesystem::path& path);

struct StageReport {
  std::string stage;
  bool skipped = false;
};

struct RunSummary {
  std::vector<StageReport> stages;
  std::vector<std::string> warnings;
};

/// Sorted regular files in `dir` with the given extension.
std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir, const std::string& extension);

/// Lock file held for the lifetime of the object; a second holder on the
/// same directory fails with IoError.
class RunLock {
public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

private:
  std::filesystem::path path_;
};

RunSummary run_pipeline(const Config& config, bool force = false);
RunSummary run_pipeline(const std::filesystem::path& config_path, bool force = false);

}  // namespace egograph::pipeline
