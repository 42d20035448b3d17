#include "hyspec/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "hyspec/error.hpp"
#include "hyspec/scene_io.hpp"

namespace hyspec::features {

double SpectralIndexDef::evaluate(std::span<const double> x) const {
  double num = numerator_constant;
  double den = denominator_constant;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += numerator[i] * x[i];
    den += denominator[i] * x[i];
  }
  if (den == 0.0) return 0.0;
  const double v = scale * num / den + offset;
  return normalized ? std::clamp(v, -1.0, 1.0) : v;
}

const std::vector<SpectralIndexDef>& default_indices() {
  constexpr double kNir = 0.86, kRed = 0.66, kRedEdge = 0.71, kGreen = 0.56, kBlue = 0.48;
  static const std::vector<SpectralIndexDef> indices = {
      {"ndvi", {kNir, kRed}, {1, -1}, 0.0, {1, 1}, 0.0, 1.0, 0.0, true},
      {"anvi", {kNir, kBlue}, {1, -1}, 0.0, {1, 1}, 0.0, 1.0, 0.0, true},
      {"ci", {kNir, kRed}, {1, 0}, 0.0, {0, 1}, 0.0, 1.0, -1.0, false},
      {"ndvi_re", {kNir, kRedEdge}, {1, -1}, 0.0, {1, 1}, 0.0, 1.0, 0.0, true},
      {"vgnir_bi", {kGreen, kNir}, {1, -1}, 0.0, {1, 1}, 0.0, 1.0, 0.0, true},
      {"savi", {kNir, kRed}, {1, -1}, 0.0, {1, 1}, 0.5, 1.5, 0.0, false},
  };
  return indices;
}

std::size_t nearest_band(const SpectralAxis& axis, double wavelength_um) {
  const auto& w = axis.wavelengths();
  if (w.empty()) throw DomainError("empty spectral axis");
  const double lo_margin = w.size() > 1 ? 0.5 * (w[1] - w[0]) : 0.0;
  const double hi_margin = w.size() > 1 ? 0.5 * (w[w.size() - 1] - w[w.size() - 2]) : 0.0;
  if (wavelength_um < w.front() - lo_margin || wavelength_um > w.back() + hi_margin) {
    throw DomainError("wavelength " + std::to_string(wavelength_um) + " um outside the sensor domain [" +
                      std::to_string(w.front()) + ", " + std::to_string(w.back()) + "]");
  }
  const auto it = std::lower_bound(w.begin(), w.end(), wavelength_um);
  if (it == w.begin()) return 0;
  if (it == w.end()) return w.size() - 1;
  const auto hi = static_cast<std::size_t>(it - w.begin());
  const std::size_t lo = hi - 1;
  return (wavelength_um - w[lo]) <= (w[hi] - wavelength_um) ? lo : hi;
}

Map band_average(const HyperspectralScene& patch) {
  Map out(patch.height, patch.width);
  const std::size_t b = patch.band_count();
  for (std::size_t r = 0; r < patch.height; ++r) {
    for (std::size_t c = 0; c < patch.width; ++c) {
      const auto px = patch.pixel(r, c);
      double s = 0.0;
      for (float v : px) s += v;
      out.at(r, c) = s / static_cast<double>(b);
    }
  }
  return out;
}

Map compute_spectral_index(const HyperspectralScene& patch, const SpectralIndexDef& def) {
  if (def.numerator.size() != def.wavelengths_um.size() ||
      def.denominator.size() != def.wavelengths_um.size()) {
    throw ConfigError("index '" + def.name + "' coefficient lists do not match its bands");
  }
  std::vector<std::size_t> bands;
  for (double wl : def.wavelengths_um) bands.push_back(nearest_band(patch.axis, wl));
  Map out(patch.height, patch.width);
  std::vector<double> x(bands.size());
  for (std::size_t r = 0; r < patch.height; ++r) {
    for (std::size_t c = 0; c < patch.width; ++c) {
      const auto px = patch.pixel(r, c);
      for (std::size_t i = 0; i < bands.size(); ++i) x[i] = px[bands[i]];
      out.at(r, c) = def.evaluate(x);
    }
  }
  return out;
}

std::vector<std::size_t> uniform_band_indices(std::size_t band_count, std::size_t count) {
  if (count == 0) throw SizeError("need at least one sampled band");
  if (band_count < count) {
    throw SizeError("cannot sample " + std::to_string(count) + " distinct bands from " +
                    std::to_string(band_count));
  }
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = count == 1 ? 0
                        : static_cast<std::size_t>(std::lround(static_cast<double>(i * (band_count - 1)) /
                                                               static_cast<double>(count - 1)));
  }
  return out;
}

std::vector<Map> sample_uniform_bands(const HyperspectralScene& patch, std::size_t count) {
  const auto indices = uniform_band_indices(patch.band_count(), count);
  std::vector<Map> out;
  for (std::size_t b : indices) {
    Map m(patch.height, patch.width);
    for (std::size_t r = 0; r < patch.height; ++r) {
      for (std::size_t c = 0; c < patch.width; ++c) m.at(r, c) = patch.pixel(r, c)[b];
    }
    out.push_back(std::move(m));
  }
  return out;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw SizeError("quantile of an empty sequence");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::array<double, 8> patch_statistics(std::span<const double> values) {
  if (values.empty()) throw SizeError("statistics of an empty map");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  // Summing in sorted order makes the result independent of pixel order.
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  double var = 0.0;
  for (double v : sorted) var += (v - mean) * (v - mean);
  return {mean,
          std::sqrt(var / n),
          quantile_sorted(sorted, 0.10),
          quantile_sorted(sorted, 0.90),
          quantile_sorted(sorted, 0.25),
          quantile_sorted(sorted, 0.75),
          sorted.front(),
          sorted.back()};
}

PatchFeatureExtractor::PatchFeatureExtractor(FeatureConfig config) : config_(std::move(config)) {
  const std::size_t gabor = config_.gabor.relative_frequencies.size() *
                            static_cast<std::size_t>(std::max(config_.gabor.orientations, 0));
  const std::size_t values = (config_.indices.size() + config_.sampled_bands + gabor) * 8;
  if (values != kFeatureLength) {
    throw ConfigError("feature configuration yields " + std::to_string(values) +
                      " values; the descriptor is fixed at 400");
  }
  if (config_.patch_size == 0) throw ConfigError("patch size must be positive");
}

std::size_t PatchFeatureExtractor::map_count() const noexcept { return kFeatureLength / 8; }

std::vector<Map> PatchFeatureExtractor::maps(const HyperspectralScene& patch) const {
  std::vector<Map> out;
  out.reserve(map_count());
  for (const auto& def : config_.indices) out.push_back(compute_spectral_index(patch, def));
  for (auto& m : sample_uniform_bands(patch, config_.sampled_bands)) out.push_back(std::move(m));
  const GaborBank bank = GaborBank::for_gsd(patch.gsd_m, config_.gabor);
  for (auto& m : gabor_responses(band_average(patch), bank)) out.push_back(std::move(m));
  return out;
}

std::vector<double> PatchFeatureExtractor::extract(const HyperspectralScene& patch) const {
  if (patch.height != config_.patch_size || patch.width != config_.patch_size) {
    throw SizeError("patch is " + std::to_string(patch.height) + "x" + std::to_string(patch.width) +
                    ", expected " + std::to_string(config_.patch_size) + "x" +
                    std::to_string(config_.patch_size));
  }
  if (patch.cube.size() != patch.height * patch.width * patch.band_count()) {
    throw SizeError("patch cube size does not match its dimensions");
  }
  std::vector<double> out;
  out.reserve(kFeatureLength);
  for (const Map& m : maps(patch)) {
    const auto stats = patch_statistics(m);
    out.insert(out.end(), stats.begin(), stats.end());
  }
  return out;
}

std::vector<std::string> PatchFeatureExtractor::column_names() const {
  std::vector<std::string> maps;
  for (const auto& def : config_.indices) maps.push_back(def.name);
  for (std::size_t i = 0; i < config_.sampled_bands; ++i) {
    maps.push_back((i < 10 ? "band0" : "band") + std::to_string(i));
  }
  for (std::size_t f = 0; f < config_.gabor.relative_frequencies.size(); ++f) {
    for (int o = 0; o < config_.gabor.orientations; ++o) {
      maps.push_back("gabor_f" + std::to_string(f) + "_o" + std::to_string(o));
    }
  }
  std::vector<std::string> out;
  for (const auto& m : maps) {
    for (const char* s : kStatisticNames) out.push_back(m + "_" + s);
  }
  return out;
}

void write_feature_csv(const std::filesystem::path& path, const PatchFeatureExtractor& extractor,
                       const std::vector<PatchFeatureRow>& rows) {
  std::string text = "patch_id";
  for (const auto& name : extractor.column_names()) text += "," + name;
  text += "\n";
  char buf[64];
  for (const auto& row : rows) {
    if (row.values.size() != kFeatureLength) throw SizeError("feature row must hold 400 values");
    text += row.patch_id;
    for (double v : row.values) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      text += ',';
      text.append(buf, res.ptr);
    }
    text += "\n";
  }
  write_file_atomic(path, text);
}

}  // namespace hyspec::features
