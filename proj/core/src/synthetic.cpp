#include "hyspec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hyspec/error.hpp"

namespace hyspec {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

struct Rect {
  std::size_t r0, c0, r1, c1;  // half-open
};

bool separated(const Rect& a, const Rect& b) {
  // One pixel of background between neighbours.
  return a.r1 + 1 <= b.r0 || b.r1 + 1 <= a.r0 || a.c1 + 1 <= b.c0 || b.c1 + 1 <= a.c0;
}

std::vector<Point> shape_in(const Rect& r, int kind) {
  const double x0 = static_cast<double>(r.c0), y0 = static_cast<double>(r.r0);
  const double x1 = static_cast<double>(r.c1), y1 = static_cast<double>(r.r1);
  const double xm = 0.5 * (x0 + x1), ym = 0.5 * (y0 + y1);
  switch (kind) {
    case 1:  // diamond
      return {{xm, y0}, {x1, ym}, {xm, y1}, {x0, ym}};
    case 2: {  // octagon with corners cut at a third of each side
      const double dx = (x1 - x0) / 3.0, dy = (y1 - y0) / 3.0;
      return {{x0 + dx, y0}, {x1 - dx, y0}, {x1, y0 + dy}, {x1, y1 - dy},
              {x1 - dx, y1}, {x0 + dx, y1}, {x0, y1 - dy}, {x0, y0 + dy}};
    }
    default:
      return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  }
}

}  // namespace

std::vector<double> random_endmember(std::mt19937_64& rng, const SpectralAxis& axis) {
  const auto& w = axis.wavelengths();
  const double lo = w.front(), hi = w.back();
  std::vector<double> spectrum(w.size(), uniform(rng, 0.03, 0.15));
  const int bumps = static_cast<int>(uniform_index(rng, 3, 6));
  for (int i = 0; i < bumps; ++i) {
    const double center = uniform(rng, lo, hi);
    const double width = uniform(rng, 0.05, 0.4);
    const double amplitude = uniform(rng, 0.05, 0.35);
    for (std::size_t b = 0; b < w.size(); ++b) {
      const double z = (w[b] - center) / width;
      spectrum[b] += amplitude * std::exp(-0.5 * z * z);
    }
  }
  for (double& v : spectrum) v = std::clamp(v, 0.0, 1.0);
  return spectrum;
}

SyntheticScene generate_synthetic_scene(const SyntheticSceneConfig& config) {
  if (config.height == 0 || config.width == 0 || config.bands == 0 || config.materials < 1 ||
      config.polygons < 1) {
    throw ConfigError("synthetic scene arguments must be positive");
  }
  if (config.materials > config.class_budget) {
    throw ConfigError("requested materials exceed the class budget");
  }
  if (config.noise_sigma < 0.0 || config.brightness_jitter < 0.0 || config.brightness_jitter >= 1.0) {
    throw ConfigError("noise must be >= 0 and brightness jitter in [0, 1)");
  }

  std::mt19937_64 rng(config.seed);
  SyntheticScene out;
  HyperspectralScene& scene = out.scene;
  scene.height = config.height;
  scene.width = config.width;
  scene.gsd_m = config.gsd_m;
  scene.axis = SpectralAxis::linear(config.first_um, config.last_um, config.bands);
  const std::size_t bands = config.bands;

  for (int m = 0; m < config.materials; ++m) out.endmembers.push_back(random_endmember(rng, scene.axis));
  const std::vector<double> background_a = random_endmember(rng, scene.axis);
  const std::vector<double> background_b = random_endmember(rng, scene.axis);

  // Every material appears at least once when polygons >= materials.
  std::vector<int> material_of(static_cast<std::size_t>(config.polygons));
  for (int i = 0; i < config.polygons; ++i) material_of[i] = 1 + i % config.materials;
  std::shuffle(material_of.begin(), material_of.end(), rng);

  const std::size_t min_side = std::max<std::size_t>(config.min_side, 1);
  const std::size_t max_side =
      config.max_side > 0 ? config.max_side
                          : std::max(min_side, std::min(config.height, config.width) / 4);
  if (min_side > config.height || min_side > config.width) {
    throw GenerationError("minimum polygon side exceeds the scene");
  }

  std::vector<Rect> placed;
  for (int i = 0; i < config.polygons; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < config.max_retries && !ok; ++attempt) {
      const std::size_t h = uniform_index(rng, min_side, std::min(max_side, config.height));
      const std::size_t w = uniform_index(rng, min_side, std::min(max_side, config.width));
      const std::size_t r0 = uniform_index(rng, 0, config.height - h);
      const std::size_t c0 = uniform_index(rng, 0, config.width - w);
      const Rect rect{r0, c0, r0 + h, c0 + w};
      ok = std::all_of(placed.begin(), placed.end(),
                       [&](const Rect& other) { return separated(rect, other); });
      if (ok) placed.push_back(rect);
    }
    if (!ok) {
      throw GenerationError("could not place polygon " + std::to_string(i) + " after " +
                            std::to_string(config.max_retries) + " attempts");
    }
  }

  for (int i = 0; i < config.polygons; ++i) {
    Polygon poly;
    const int kind = static_cast<int>(uniform_index(rng, 0, 2));
    poly.vertices = shape_in(placed[i], kind);
    poly.land_cover = material_of[i];
    poly.land_use = static_cast<int>(uniform_index(rng, 1, 12));
    out.ground_truth.polygons.push_back(std::move(poly));
  }

  const LabelMap labels = rasterize_ground_truth(scene.height, scene.width, out.ground_truth);
  scene.cube.assign(scene.height * scene.width * bands, 0.0f);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t r = 0; r < scene.height; ++r) {
    for (std::size_t c = 0; c < scene.width; ++c) {
      const int label = labels.at(r, c);
      std::span<float> px = scene.pixel(r, c);
      const double brightness =
          uniform(rng, 1.0 - config.brightness_jitter, 1.0 + config.brightness_jitter);
      if (label > 0) {
        const auto& e = out.endmembers[static_cast<std::size_t>(label - 1)];
        for (std::size_t b = 0; b < bands; ++b) {
          const double eps = config.noise_sigma > 0 ? config.noise_sigma * noise(rng) : 0.0;
          px[b] = static_cast<float>(std::max(0.0, e[b] * brightness + eps));
        }
      } else {
        const double mix = uniform(rng, 0.0, 1.0);
        for (std::size_t b = 0; b < bands; ++b) {
          const double base = mix * background_a[b] + (1.0 - mix) * background_b[b];
          const double eps = config.noise_sigma > 0 ? config.noise_sigma * noise(rng) : 0.0;
          px[b] = static_cast<float>(std::max(0.0, base * brightness + eps));
        }
      }
    }
  }
  return out;
}

namespace {

// Integer class counts proportional to `weights`, each at least one, summing to n.
std::vector<std::size_t> allocate(const std::vector<double>& weights, std::size_t n) {
  const std::size_t c = weights.size();
  if (n < c) throw ConfigError("benchmark set smaller than the number of classes");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> counts(c, 1);
  std::size_t left = n - c;
  std::vector<double> exact(c);
  std::size_t used = 0;
  for (std::size_t k = 0; k < c; ++k) {
    exact[k] = static_cast<double>(left) * weights[k] / total;
    const auto whole = static_cast<std::size_t>(std::floor(exact[k]));
    counts[k] += whole;
    used += whole;
  }
  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return exact[a] - std::floor(exact[a]) > exact[b] - std::floor(exact[b]);
  });
  for (std::size_t i = 0; used < left; ++i, ++used) ++counts[order[i % c]];
  return counts;
}

}  // namespace

SpectralBenchmark make_spectral_benchmark(const SpectralBenchmarkConfig& config) {
  if (config.materials < 2 || config.bands < 2 || config.variants_per_material < 2) {
    throw ConfigError("benchmark needs >= 2 materials, bands and variants");
  }
  std::vector<double> weights = config.class_weights;
  if (weights.empty()) {
    for (int k = 0; k < config.materials; ++k) weights.push_back(std::pow(0.5, k));
  }
  if (weights.size() != static_cast<std::size_t>(config.materials)) {
    throw ConfigError("class_weights must have one entry per material");
  }

  std::mt19937_64 rng(config.seed);
  SpectralBenchmark out;
  out.axis = SpectralAxis::linear(config.first_um, config.last_um, config.bands);
  const auto& wl = out.axis.wavelengths();
  const std::size_t bands = config.bands;
  const auto materials = static_cast<std::size_t>(config.materials);
  const auto variants = static_cast<std::size_t>(config.variants_per_material);

  const std::vector<double> base = random_endmember(rng, out.axis);
  // site_spectra[m][v] is material m as observed at site v.
  std::vector<std::vector<std::vector<double>>> site_spectra(materials);
  for (std::size_t m = 0; m < materials; ++m) {
    const std::vector<double> own = random_endmember(rng, out.axis);
    std::vector<double> e(bands);
    for (std::size_t b = 0; b < bands; ++b) {
      e[b] = config.material_similarity * base[b] + (1.0 - config.material_similarity) * own[b];
    }
    for (std::size_t v = 0; v < variants; ++v) {
      std::vector<double> s = e;
      for (int bump = 0; bump < 2; ++bump) {
        const double center = uniform(rng, wl.front(), wl.back());
        const double width = uniform(rng, 0.1, 0.4);
        const double amp = uniform(rng, -config.variant_spread, config.variant_spread);
        for (std::size_t b = 0; b < bands; ++b) {
          const double z = (wl[b] - center) / width;
          s[b] *= 1.0 + amp * std::exp(-0.5 * z * z);
        }
      }
      site_spectra[m].push_back(std::move(s));
    }
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  const auto draw = [&](const std::vector<double>& spectrum, auto row) {
    const double brightness =
        uniform(rng, 1.0 - config.brightness_jitter, 1.0 + config.brightness_jitter);
    for (std::size_t b = 0; b < bands; ++b) {
      row(static_cast<Eigen::Index>(b)) =
          std::max(0.0, spectrum[b] * brightness + config.noise_sigma * noise(rng));
    }
  };

  const std::size_t half = variants / 2;
  const auto fill_labeled = [&](std::size_t n, bool first_half, RowMatrix& x, std::vector<int>& y) {
    const auto counts = allocate(weights, n);
    y.clear();
    for (std::size_t k = 0; k < materials; ++k) y.insert(y.end(), counts[k], static_cast<int>(k + 1));
    std::shuffle(y.begin(), y.end(), rng);
    x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(bands));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t v = first_half ? uniform_index(rng, 0, half - 1)
                                       : uniform_index(rng, half, variants - 1);
      draw(site_spectra[static_cast<std::size_t>(y[i] - 1)][v], x.row(static_cast<Eigen::Index>(i)));
    }
  };
  fill_labeled(config.labeled, true, out.train, out.train_labels);
  fill_labeled(config.test, false, out.test, out.test_labels);

  std::discrete_distribution<std::size_t> pick_class(weights.begin(), weights.end());
  out.unlabeled.resize(static_cast<Eigen::Index>(config.unlabeled), static_cast<Eigen::Index>(bands));
  std::vector<double> mixed(bands);
  for (std::size_t i = 0; i < config.unlabeled; ++i) {
    const auto row = out.unlabeled.row(static_cast<Eigen::Index>(i));
    if (uniform(rng, 0.0, 1.0) < 0.8) {
      const std::size_t m = pick_class(rng);
      draw(site_spectra[m][uniform_index(rng, 0, variants - 1)], row);
    } else {
      // Mixed pixel between two materials.
      const std::size_t a = uniform_index(rng, 0, materials - 1);
      const std::size_t b = uniform_index(rng, 0, materials - 1);
      const double f = uniform(rng, 0.0, 1.0);
      const auto& sa = site_spectra[a][uniform_index(rng, 0, variants - 1)];
      const auto& sb = site_spectra[b][uniform_index(rng, 0, variants - 1)];
      for (std::size_t k = 0; k < bands; ++k) mixed[k] = f * sa[k] + (1.0 - f) * sb[k];
      draw(mixed, row);
    }
  }
  return out;
}

}  // namespace hyspec
