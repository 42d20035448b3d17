#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "hyspec/scene.hpp"

namespace hyspec::features {

using Map = Raster<double>;

struct GaborFilter {
  double frequency_per_m = 0.0;
  double orientation_rad = 0.0;
  double sigma_m = 0.0;  // Gaussian envelope scale
};

// Four log-spaced frequencies spanning one decade, the highest placed at
// `top_fraction_of_nyquist` of the sampling limit 1 / (2 gsd); six
// orientations k * pi / 6; envelope sigma = sigma_cycles / frequency.
struct GaborBankConfig {
  std::vector<double> relative_frequencies = {1.0, 2.154, 4.642, 10.0};
  double top_fraction_of_nyquist = 0.8;
  int orientations = 6;
  double sigma_cycles = 0.56;
};

class GaborBank {
 public:
  // Throws DomainError unless every frequency lies in (0, 1 / (2 gsd)).
  GaborBank(std::vector<GaborFilter> filters, double gsd_m);
  static GaborBank for_gsd(double gsd_m, const GaborBankConfig& config = {});

  const std::vector<GaborFilter>& filters() const noexcept { return filters_; }
  std::size_t size() const noexcept { return filters_.size(); }
  double gsd_m() const noexcept { return gsd_m_; }

 private:
  std::vector<GaborFilter> filters_;
  double gsd_m_;
};

// Half-sample symmetric extension: ... b a | a b c d | d c ...
std::size_t reflect_index(long i, std::size_t n);

// Kernel support radius in pixels: ceil(3 sigma / gsd).
long gabor_radius(const GaborFilter& filter, double gsd_m);

// Complex 2-D kernel value at pixel offset (dx along columns, dy along rows),
// normalized so the envelope integrates to one.
std::complex<double> gabor_kernel(const GaborFilter& filter, double gsd_m, long dx, long dy);

// |image * kernel| with same-size output and symmetric boundary extension,
// computed as two 1-D complex passes.
Map gabor_magnitude(const Map& image, const GaborFilter& filter, double gsd_m);

std::vector<Map> gabor_responses(const Map& image, const GaborBank& bank);

}  // namespace hyspec::features
