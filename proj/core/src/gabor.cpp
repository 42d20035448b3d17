#include "hyspec/gabor.hpp"

#include <cmath>
#include <numbers>

#include "hyspec/error.hpp"

namespace hyspec::features {

GaborBank::GaborBank(std::vector<GaborFilter> filters, double gsd_m)
    : filters_(std::move(filters)), gsd_m_(gsd_m) {
  if (!(gsd_m_ > 0.0)) throw DomainError("gsd must be positive");
  const double nyquist = 0.5 / gsd_m_;
  for (const auto& f : filters_) {
    if (!(f.frequency_per_m > 0.0 && f.frequency_per_m < nyquist)) {
      throw DomainError("Gabor frequency " + std::to_string(f.frequency_per_m) +
                        " /m outside (0, " + std::to_string(nyquist) + ") for this gsd");
    }
    if (!(f.sigma_m > 0.0)) throw DomainError("Gabor envelope scale must be positive");
  }
}

GaborBank GaborBank::for_gsd(double gsd_m, const GaborBankConfig& config) {
  if (config.relative_frequencies.empty() || config.orientations < 1) {
    throw ConfigError("Gabor bank needs at least one frequency and orientation");
  }
  const double top_relative = config.relative_frequencies.back();
  const double top = config.top_fraction_of_nyquist * 0.5 / gsd_m;
  std::vector<GaborFilter> filters;
  for (double rel : config.relative_frequencies) {
    const double f = top * rel / top_relative;
    for (int o = 0; o < config.orientations; ++o) {
      filters.push_back({f, o * std::numbers::pi / config.orientations, config.sigma_cycles / f});
    }
  }
  return GaborBank(std::move(filters), gsd_m);
}

std::size_t reflect_index(long i, std::size_t n) {
  const long period = 2 * static_cast<long>(n);
  long m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<long>(n)) m = period - 1 - m;
  return static_cast<std::size_t>(m);
}

long gabor_radius(const GaborFilter& filter, double gsd_m) {
  return static_cast<long>(std::ceil(3.0 * filter.sigma_m / gsd_m));
}

namespace {

// One factor of the separable kernel; `direction` is cos or sin of the orientation.
std::vector<std::complex<double>> kernel_1d(const GaborFilter& filter, double gsd_m, double direction) {
  const long radius = gabor_radius(filter, gsd_m);
  const double sigma = filter.sigma_m / gsd_m;
  const double cycles = filter.frequency_per_m * gsd_m;
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sigma);
  std::vector<std::complex<double>> k(static_cast<std::size_t>(2 * radius + 1));
  for (long t = -radius; t <= radius; ++t) {
    const double x = static_cast<double>(t);
    const double envelope = norm * std::exp(-x * x / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(t + radius)] =
        std::polar(envelope, 2.0 * std::numbers::pi * cycles * direction * x);
  }
  return k;
}

}  // namespace

std::complex<double> gabor_kernel(const GaborFilter& filter, double gsd_m, long dx, long dy) {
  const double sigma = filter.sigma_m / gsd_m;
  const double cycles = filter.frequency_per_m * gsd_m;
  const double x = static_cast<double>(dx), y = static_cast<double>(dy);
  const double envelope =
      std::exp(-(x * x + y * y) / (2.0 * sigma * sigma)) / (2.0 * std::numbers::pi * sigma * sigma);
  const double phase = 2.0 * std::numbers::pi * cycles *
                       (x * std::cos(filter.orientation_rad) + y * std::sin(filter.orientation_rad));
  return std::polar(envelope, phase);
}

Map gabor_magnitude(const Map& image, const GaborFilter& filter, double gsd_m) {
  const std::size_t h = image.height, w = image.width;
  const auto kx = kernel_1d(filter, gsd_m, std::cos(filter.orientation_rad));
  const auto ky = kernel_1d(filter, gsd_m, std::sin(filter.orientation_rad));
  const long radius = gabor_radius(filter, gsd_m);

  std::vector<std::complex<double>> rows(h * w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      std::complex<double> acc = 0.0;
      for (long t = -radius; t <= radius; ++t) {
        const std::size_t src = reflect_index(static_cast<long>(c) - t, w);
        acc += image.at(r, src) * kx[static_cast<std::size_t>(t + radius)];
      }
      rows[r * w + c] = acc;
    }
  }
  Map out(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      std::complex<double> acc = 0.0;
      for (long t = -radius; t <= radius; ++t) {
        const std::size_t src = reflect_index(static_cast<long>(r) - t, h);
        acc += rows[src * w + c] * ky[static_cast<std::size_t>(t + radius)];
      }
      out.at(r, c) = std::abs(acc);
    }
  }
  return out;
}

std::vector<Map> gabor_responses(const Map& image, const GaborBank& bank) {
  std::vector<Map> out;
  out.reserve(bank.size());
  for (const auto& f : bank.filters()) out.push_back(gabor_magnitude(image, f, bank.gsd_m()));
  return out;
}

}  // namespace hyspec::features
