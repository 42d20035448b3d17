#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hyspec/autoencoder.hpp"
#include "hyspec/forest.hpp"
#include "hyspec/mae.hpp"
#include "hyspec/split.hpp"
#include "hyspec/synthetic.hpp"

// End-to-end experiment driver. Every command reads its inputs from and writes
// its outputs under one run directory:
//
//   scene.bin, scene.json, ground_truth.json     generate
//   splits/split_NN.json                         split
//   features.csv                                 features
//   models/split_NN/{mae,ae}.ckpt (+ .json, _loss.csv)   pretrain
//   predictions/split_NN/<model>.csv             classify
//   metrics/split_NN/<model>.json                evaluate
//   report.json                                  report
//   manifest.json                                updated by every command
namespace hyspec::pipeline {

namespace fs = std::filesystem;

struct PipelineConfig {
  std::uint64_t seed = 0;
  fs::path out = "hyspec_run";
  fs::path scene;         // empty: <out>/scene, produced by generate
  fs::path ground_truth;  // empty: <out>/ground_truth.json
  fs::path split_file;    // empty: every split under <out>/splits
  fs::path model_dir;     // empty: <out>/models/<split>

  SyntheticSceneConfig synthetic = {.polygons = 30};  // seed taken from `seed`
  double grouping_radius_m = 0.5;
  split::Proportions proportions;
  std::size_t splits = 2;
  std::size_t min_hamming = 2;
  std::size_t patch_size = 64;
  std::size_t patch_stride = 64;
  mae::MAEConfig mae = {.epochs = 8};
  mae::AEConfig ae = {.epochs = 8};
  std::size_t max_pretrain_pixels = 0;  // 0: every eligible pixel
  std::size_t knn_k = 5;
  clf::ForestConfig forest;

  // Throws ConfigError naming every violated field.
  void validate() const;
  // Stable JSON snapshot; parse_config(to_json()) round-trips.
  std::string to_json() const;
  // Seeds handed to each stage, all derived from `seed`.
  std::uint64_t stage_seed(const std::string& stage, std::size_t index = 0) const;

  fs::path scene_path() const;
  fs::path ground_truth_path() const;
};

// Unknown keys and wrongly typed values are reported together in one ConfigError.
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const fs::path& path);

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"generate", "split",    "features", "pretrain",
                                                 "classify", "evaluate", "report"};
  return names;
}

// Table rows in report order.
inline const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names = {"KNN", "AE+KNN", "MAE+KNN", "RF", "AE+RF", "MAE+RF"};
  return names;
}

// "AE+KNN" -> "ae_knn"
std::string model_file_stem(const std::string& model);

struct StageResult {
  std::string stage;
  bool cached = false;
  double seconds = 0.0;
  std::vector<fs::path> outputs;  // relative to the run directory
};

// Runs one command. Skips the work when the manifest records the same input
// key and every recorded output still has its recorded hash. Throws
// DependencyError when an upstream artifact is missing.
StageResult run_stage(const std::string& stage, const PipelineConfig& config);

StageResult cmd_generate(const PipelineConfig& config);
StageResult cmd_split(const PipelineConfig& config);
StageResult cmd_features(const PipelineConfig& config);
StageResult cmd_pretrain(const PipelineConfig& config);
StageResult cmd_classify(const PipelineConfig& config);
StageResult cmd_evaluate(const PipelineConfig& config);
StageResult cmd_report(const PipelineConfig& config);

std::vector<StageResult> run_all(const PipelineConfig& config);

struct ReplayResult {
  fs::path out;
  std::size_t compared = 0;
  std::vector<std::string> mismatches;  // relative paths whose hash differs

  bool identical() const noexcept { return mismatches.empty(); }
};

// Re-executes the stages recorded in `manifest` into `out` (must not be the
// original run directory) using only the manifest's config snapshot, then
// compares every recorded output hash.
ReplayResult replay(const fs::path& manifest, const fs::path& out);

// Hex FNV-1a of a file's bytes.
std::string file_hash(const fs::path& path);

std::string toolkit_version();

}  // namespace hyspec::pipeline
