#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "hyspec/matrix.hpp"
#include "hyspec/scene.hpp"

namespace hyspec {

struct SyntheticSceneConfig {
  std::uint64_t seed = 0;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t bands = 310;
  int materials = 5;
  int polygons = 12;
  int class_budget = 32;
  double gsd_m = 1.0;
  double first_um = 0.4;
  double last_um = 2.5;
  double noise_sigma = 0.01;
  double brightness_jitter = 0.15;  // per-pixel factor drawn from [1 - j, 1 + j]
  std::size_t min_side = 3;
  std::size_t max_side = 0;  // 0 -> max(min_side, min(height, width) / 4)
  int max_retries = 500;     // placement attempts per polygon
};

struct SyntheticScene {
  HyperspectralScene scene;
  GroundTruth ground_truth;
  std::vector<std::vector<double>> endmembers;  // one spectrum per material
};

// Smooth reflectance spectrum in [0, 1]: a baseline plus 3-6 Gaussian bumps
// with widths in [0.05, 0.4] um.
std::vector<double> random_endmember(std::mt19937_64& rng, const SpectralAxis& axis);

// Deterministic in `config`. Throws ConfigError on invalid arguments and
// GenerationError when the polygons cannot be packed without overlap.
SyntheticScene generate_synthetic_scene(const SyntheticSceneConfig& config);

// Pixel-level benchmark for representation learning: labeled spectra with a
// long-tailed class distribution, a disjoint labeled test set, and a large
// unlabeled pool drawn from the same materials plus background clutter.
struct SpectralBenchmarkConfig {
  std::uint64_t seed = 0;
  int materials = 5;
  std::size_t bands = 100;
  double first_um = 0.4;
  double last_um = 2.5;
  std::size_t labeled = 1000;
  std::size_t test = 2000;
  std::size_t unlabeled = 10000;
  double brightness_jitter = 0.5;
  double noise_sigma = 0.05;
  double material_similarity = 0.7;  // blend weight of a shared base spectrum
  double variant_spread = 0.03;      // amplitude of per-site shape variations
  int variants_per_material = 4;     // sites; train and test draw from disjoint halves
  std::vector<double> class_weights;  // empty -> geometric long tail with ratio 0.5
};

struct SpectralBenchmark {
  SpectralAxis axis;
  RowMatrix train;
  std::vector<int> train_labels;
  RowMatrix test;
  std::vector<int> test_labels;
  RowMatrix unlabeled;
};

SpectralBenchmark make_spectral_benchmark(const SpectralBenchmarkConfig& config);

}  // namespace hyspec
