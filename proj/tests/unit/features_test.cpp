#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "hyspec/error.hpp"
#include "hyspec/features.hpp"
#include "hyspec/gabor.hpp"
#include "hyspec/synthetic.hpp"
#include "test_support.hpp"

namespace hyspec::features {
namespace {

HyperspectralScene constant_patch(std::size_t size, const SpectralAxis& axis, float value) {
  HyperspectralScene s;
  s.height = size;
  s.width = size;
  s.axis = axis;
  s.cube.assign(size * size * axis.band_count(), value);
  return s;
}

void set_band(HyperspectralScene& s, std::size_t band, float value) {
  for (std::size_t p = 0; p < s.pixel_count(); ++p) s.cube[p * s.band_count() + band] = value;
}

// Direct 2-D spatial convolution with the full complex kernel.
Map direct_gabor(const Map& img, const GaborFilter& f, double gsd) {
  const long radius = gabor_radius(f, gsd);
  Map out(img.height, img.width);
  for (std::size_t r = 0; r < img.height; ++r) {
    for (std::size_t c = 0; c < img.width; ++c) {
      std::complex<double> acc = 0.0;
      for (long dy = -radius; dy <= radius; ++dy) {
        for (long dx = -radius; dx <= radius; ++dx) {
          const double v = img.at(reflect_index(static_cast<long>(r) - dy, img.height),
                                  reflect_index(static_cast<long>(c) - dx, img.width));
          acc += v * gabor_kernel(f, gsd, dx, dy);
        }
      }
      out.at(r, c) = std::abs(acc);
    }
  }
  return out;
}

Map grating(std::size_t n, double cycles_per_px, double theta) {
  Map m(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double t = static_cast<double>(c) * std::cos(theta) + static_cast<double>(r) * std::sin(theta);
      m.at(r, c) = 1.0 + std::cos(2.0 * std::numbers::pi * cycles_per_px * t);
    }
  }
  return m;
}

double mean_of(const Map& m) {
  double s = 0.0;
  for (double v : m.data) s += v;
  return s / static_cast<double>(m.data.size());
}

TEST(NearestBand, ExamplesAndTies) {
  const SpectralAxis axis({0.4, 0.5, 0.6});
  EXPECT_EQ(nearest_band(axis, 0.5), 1u);
  EXPECT_EQ(nearest_band(axis, 0.45), 0u);
  EXPECT_EQ(nearest_band(axis, 0.56), 2u);
  EXPECT_EQ(nearest_band(axis, 0.64), 2u);
  EXPECT_THROW(nearest_band(SpectralAxis::linear(0.4, 2.5, 310), 2.6), DomainError);
  EXPECT_THROW(nearest_band(axis, 0.3), DomainError);
}

TEST(SpectralIndex, NdviAndSaviExamples) {
  const SpectralAxis axis = SpectralAxis::linear(0.43, 0.86, 103);
  HyperspectralScene p = constant_patch(4, axis, 0.1f);
  set_band(p, nearest_band(axis, 0.86), 0.5f);
  const Map ndvi = compute_spectral_index(p, default_indices()[0]);
  for (double v : ndvi.data) EXPECT_NEAR(v, 0.4 / 0.6, 1e-6);

  HyperspectralScene flat = constant_patch(4, axis, 0.3f);
  for (double v : compute_spectral_index(flat, default_indices()[0]).data) EXPECT_DOUBLE_EQ(v, 0.0);

  HyperspectralScene s = constant_patch(4, axis, 0.2f);
  set_band(s, nearest_band(axis, 0.86), 0.4f);
  const Map savi = compute_spectral_index(s, default_indices()[5]);
  EXPECT_EQ(default_indices()[5].name, "savi");
  for (double v : savi.data) EXPECT_NEAR(v, 1.5 * 0.2 / 1.1, 1e-6);
}

TEST(SpectralIndex, ZeroDenominatorIsZeroAndNormalizedClamped) {
  const SpectralAxis axis = SpectralAxis::linear(0.43, 0.86, 103);
  const HyperspectralScene zero = constant_patch(4, axis, 0.0f);
  for (const auto& def : default_indices()) {
    if (def.name == "ci" || def.name == "savi") continue;
    for (double v : compute_spectral_index(zero, def).data) EXPECT_EQ(v, 0.0) << def.name;
  }
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(2);
  for (int i = 0; i < 1000; ++i) {
    x = {u(rng), u(rng)};
    for (const auto& def : default_indices()) {
      if (!def.normalized) continue;
      const double v = def.evaluate(x);
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(SpectralIndex, UnresolvableBandThrows) {
  const SpectralAxis swir = SpectralAxis::linear(1.0, 2.5, 50);
  const HyperspectralScene p = constant_patch(4, swir, 0.2f);
  EXPECT_THROW(compute_spectral_index(p, default_indices()[0]), DomainError);
}

TEST(UniformBands, Spacing) {
  std::vector<std::size_t> all(20);
  std::iota(all.begin(), all.end(), std::size_t{0});
  EXPECT_EQ(uniform_band_indices(20), all);
  const auto b39 = uniform_band_indices(39);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(b39[i], 2 * i);
  const auto b310 = uniform_band_indices(310);
  EXPECT_EQ(b310.front(), 0u);
  EXPECT_EQ(b310.back(), 309u);
  EXPECT_TRUE(std::is_sorted(b310.begin(), b310.end()));
  EXPECT_EQ(std::adjacent_find(b310.begin(), b310.end()), b310.end());
  EXPECT_THROW(uniform_band_indices(19), SizeError);
}

TEST(Statistics, ExamplesAndSortOracle) {
  const std::vector<double> three(50, 3.0);
  const auto s = patch_statistics(three);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(s[i], i == 1 ? 0.0 : 3.0);
  const std::vector<double> bits = {0, 1, 0, 1};
  const auto b = patch_statistics(bits);
  EXPECT_DOUBLE_EQ(b[0], 0.5);
  EXPECT_DOUBLE_EQ(b[1], 0.5);
  EXPECT_DOUBLE_EQ(b[6], 0.0);
  EXPECT_DOUBLE_EQ(b[7], 1.0);

  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(64 * 64);
  for (double& x : v) x = g(rng);
  const auto st = patch_statistics(v);
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  EXPECT_NEAR(st[0], mean, 1e-12);
  EXPECT_NEAR(st[1], std::sqrt(var), 1e-12);
  EXPECT_DOUBLE_EQ(st[2], q(0.1));
  EXPECT_DOUBLE_EQ(st[3], q(0.9));
  EXPECT_DOUBLE_EQ(st[4], q(0.25));
  EXPECT_DOUBLE_EQ(st[5], q(0.75));
  EXPECT_DOUBLE_EQ(st[6], sorted.front());
  EXPECT_DOUBLE_EQ(st[7], sorted.back());
  std::shuffle(v.begin(), v.end(), rng);
  const auto shuffled = patch_statistics(v);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(shuffled[i], st[i], 1e-12);
}

TEST(Gabor, BankShape) {
  const GaborBank bank = GaborBank::for_gsd(1.0);
  ASSERT_EQ(bank.size(), 24u);
  for (const auto& f : bank.filters()) {
    EXPECT_GT(f.frequency_per_m, 0.0);
    EXPECT_LT(f.frequency_per_m, 0.5);
  }
  EXPECT_NEAR(bank.filters().back().frequency_per_m / bank.filters().front().frequency_per_m, 10.0, 1e-9);
  EXPECT_THROW(GaborBank({{0.6, 0.0, 1.0}}, 1.0), DomainError);
}

TEST(Gabor, ReflectIndex) {
  EXPECT_EQ(reflect_index(-1, 4), 0u);
  EXPECT_EQ(reflect_index(-2, 4), 1u);
  EXPECT_EQ(reflect_index(4, 4), 3u);
  EXPECT_EQ(reflect_index(5, 4), 2u);
  EXPECT_EQ(reflect_index(2, 4), 2u);
}

TEST(Gabor, ConstantImageGivesDcGain) {
  const GaborBank bank = GaborBank::for_gsd(1.0);
  Map img(32, 32, 2.0);
  for (const auto& f : bank.filters()) {
    std::complex<double> dc = 0.0;
    const long r = gabor_radius(f, 1.0);
    for (long dy = -r; dy <= r; ++dy) {
      for (long dx = -r; dx <= r; ++dx) dc += gabor_kernel(f, 1.0, dx, dy);
    }
    const Map out = gabor_magnitude(img, f, 1.0);
    for (double v : out.data) EXPECT_NEAR(v, 2.0 * std::abs(dc), 1e-9);
  }
}

TEST(Gabor, MatchesDirectConvolution) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Map img(24, 24);
  for (double& v : img.data) v = u(rng);
  const GaborBank bank = GaborBank::for_gsd(1.0);
  for (const auto& f : bank.filters()) {
    const Map a = gabor_magnitude(img, f, 1.0);
    const Map b = direct_gabor(img, f, 1.0);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      EXPECT_LE(std::abs(a.data[i] - b.data[i]), 1e-6 * std::max(1e-12, std::abs(b.data[i])));
    }
  }
}

TEST(Gabor, GratingSelectsMatchingFilter) {
  const GaborBank bank = GaborBank::for_gsd(1.0);
  const GaborFilter target = bank.filters()[3 * 6 + 1];  // top frequency, 30 degrees
  for (double turn : {0.0, std::numbers::pi / 2.0}) {
    const double theta = target.orientation_rad + turn;
    const Map img = grating(40, target.frequency_per_m, theta);
    std::size_t best = 0;
    double best_mean = -1.0;
    for (std::size_t i = 0; i < bank.size(); ++i) {
      const double m = mean_of(direct_gabor(img, bank.filters()[i], 1.0));
      if (m > best_mean) {
        best_mean = m;
        best = i;
      }
    }
    const double got = bank.filters()[best].orientation_rad;
    const double want = std::fmod(theta, std::numbers::pi);
    EXPECT_NEAR(got, want, 1e-9);
    EXPECT_DOUBLE_EQ(bank.filters()[best].frequency_per_m, target.frequency_per_m);
  }
}

TEST(PatchFeature, LengthAndNames) {
  const PatchFeatureExtractor ex;
  EXPECT_EQ(ex.map_count(), 50u);
  const auto names = ex.column_names();
  ASSERT_EQ(names.size(), 400u);
  EXPECT_EQ(names.front(), "ndvi_mean");
  EXPECT_EQ(names.back(), "gabor_f3_o5_max");
  for (std::size_t bands : {103u, 310u}) {
    SyntheticSceneConfig c;
    c.bands = bands;
    c.first_um = bands == 103 ? 0.43 : 0.4;
    c.last_um = bands == 103 ? 0.86 : 2.5;
    const auto s = generate_synthetic_scene(c);
    const auto f = ex.extract(s.scene);
    ASSERT_EQ(f.size(), 400u);
    for (double v : f) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(PatchFeature, RejectsBadShapesAndConfigs) {
  const PatchFeatureExtractor ex;
  const HyperspectralScene small = constant_patch(32, SpectralAxis::linear(0.4, 2.5, 30), 0.2f);
  EXPECT_THROW(ex.extract(small), SizeError);
  FeatureConfig c;
  c.sampled_bands = 19;
  EXPECT_THROW(PatchFeatureExtractor{c}, ConfigError);
}

TEST(PatchFeature, ZeroPatchHasZeroSpectralBlocks) {
  const PatchFeatureExtractor ex;
  const HyperspectralScene zero = constant_patch(64, SpectralAxis::linear(0.4, 2.5, 310), 0.0f);
  const auto f = ex.extract(zero);
  // ci and savi carry an offset or constant and are not zero at zero reflectance
  const auto names = ex.column_names();
  for (std::size_t i = 0; i < 26 * 8; ++i) {
    if (names[i].rfind("ci_", 0) == 0) continue;
    EXPECT_EQ(f[i], 0.0) << names[i];
  }
}

TEST(PatchFeature, RotationInvariance) {
  SyntheticSceneConfig c;
  c.bands = 40;
  const auto s = generate_synthetic_scene(c);
  HyperspectralScene rot = s.scene;
  const std::size_t n = 64, b = 40;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t col = 0; col < n; ++col) {
      const auto src = s.scene.pixel(n - 1 - r, n - 1 - col);
      std::copy(src.begin(), src.end(), rot.cube.begin() + static_cast<long>((r * n + col) * b));
    }
  }
  const PatchFeatureExtractor ex;
  const auto a = ex.extract(s.scene);
  const auto bb = ex.extract(rot);
  for (std::size_t i = 0; i < 400; ++i) EXPECT_NEAR(a[i], bb[i], 1e-6 * std::max(1.0, std::abs(a[i])));
}

TEST(PatchFeature, SampledBandStatsWithinRange) {
  SyntheticSceneConfig c;
  c.bands = 60;
  const auto s = generate_synthetic_scene(c);
  const auto [lo, hi] = std::minmax_element(s.scene.cube.begin(), s.scene.cube.end());
  const auto f = PatchFeatureExtractor{}.extract(s.scene);
  for (std::size_t i = 6 * 8; i < 26 * 8; ++i) {
    EXPECT_GE(f[i], 0.0);
    if (i % 8 == 1) continue;  // std
    EXPECT_GE(f[i], *lo - 1e-6);
    EXPECT_LE(f[i], *hi + 1e-6);
  }
}

TEST(FeatureCsv, HeaderAndRows) {
  hyspec::testing::TempDir dir("features_csv");
  const PatchFeatureExtractor ex;
  std::vector<PatchFeatureRow> rows = {{"p0", std::vector<double>(400, 0.1)}, {"p1", std::vector<double>(400, 2.5)}};
  write_feature_csv(dir / "f.csv", ex, rows);
  std::ifstream in(dir / "f.csv");
  std::string header, r0, r1, extra;
  std::getline(in, header);
  std::getline(in, r0);
  std::getline(in, r1);
  EXPECT_FALSE(std::getline(in, extra));
  EXPECT_EQ(header.rfind("patch_id,ndvi_mean,ndvi_std", 0), 0u);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 400);
  EXPECT_EQ(r0.rfind("p0,0.1,0.1", 0), 0u);
  rows[0].values.pop_back();
  EXPECT_THROW(write_feature_csv(dir / "g.csv", ex, rows), SizeError);
}

}  // namespace
}  // namespace hyspec::features
