#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hyspec/gabor.hpp"
#include "hyspec/scene.hpp"

namespace hyspec::features {

// value = scale * (sum_i numerator[i] * x_i + numerator_constant)
//               / (sum_i denominator[i] * x_i + denominator_constant) + offset
// where x_i is the reflectance of the band nearest wavelengths_um[i]. A zero
// denominator yields 0. Normalized indices are clamped to [-1, 1].
struct SpectralIndexDef {
  std::string name;
  std::vector<double> wavelengths_um;
  std::vector<double> numerator;
  double numerator_constant = 0.0;
  std::vector<double> denominator;
  double denominator_constant = 0.0;
  double scale = 1.0;
  double offset = 0.0;
  bool normalized = false;

  double evaluate(std::span<const double> reflectance) const;
};

// NDVI, ANVI, CI, NDVI_RE, VgNIR_BI and SAVI, in that order. All wavelengths
// lie inside 0.43-0.86 um.
const std::vector<SpectralIndexDef>& default_indices();

// Band whose center is closest to `wavelength_um`, ties to the lower index.
// Throws DomainError beyond half a band spacing outside the axis.
std::size_t nearest_band(const SpectralAxis& axis, double wavelength_um);

Map band_average(const HyperspectralScene& patch);
Map compute_spectral_index(const HyperspectralScene& patch, const SpectralIndexDef& def);

// `count` indices evenly spaced over 0..band_count-1, endpoints included.
std::vector<std::size_t> uniform_band_indices(std::size_t band_count, std::size_t count = 20);
std::vector<Map> sample_uniform_bands(const HyperspectralScene& patch, std::size_t count = 20);

inline constexpr std::array<const char*, 8> kStatisticNames = {"mean", "std", "q10", "q90",
                                                               "q25",  "q75", "min", "max"};

// Linear interpolation between order statistics of an ascending sequence.
double quantile_sorted(std::span<const double> sorted, double q);

// (mean, population std, q10, q90, q25, q75, min, max).
std::array<double, 8> patch_statistics(std::span<const double> values);
inline std::array<double, 8> patch_statistics(const Map& map) { return patch_statistics(map.data); }

struct FeatureConfig {
  std::size_t patch_size = 64;
  std::size_t sampled_bands = 20;
  std::vector<SpectralIndexDef> indices = default_indices();
  GaborBankConfig gabor;
};

inline constexpr std::size_t kFeatureLength = 400;

class PatchFeatureExtractor {
 public:
  // Throws ConfigError unless the map count times 8 statistics is 400.
  explicit PatchFeatureExtractor(FeatureConfig config = {});

  const FeatureConfig& config() const noexcept { return config_; }
  std::size_t map_count() const noexcept;

  // All maps of a patch in output order: indices, sampled bands, Gabor.
  std::vector<Map> maps(const HyperspectralScene& patch) const;

  // Throws SizeError unless the patch is patch_size x patch_size.
  std::vector<double> extract(const HyperspectralScene& patch) const;

  // "<map>_<statistic>" for each of the 400 values.
  std::vector<std::string> column_names() const;

 private:
  FeatureConfig config_;
};

struct PatchFeatureRow {
  std::string patch_id;
  std::vector<double> values;
};

// CSV: header "patch_id,<400 column names>", then one row per patch. Values
// use the shortest round-trip decimal form.
void write_feature_csv(const std::filesystem::path& path, const PatchFeatureExtractor& extractor,
                       const std::vector<PatchFeatureRow>& rows);

}  // namespace hyspec::features
