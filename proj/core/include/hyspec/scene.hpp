#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hyspec {

// Band-center wavelengths in micrometers, strictly ascending, each in (0.3, 3.0).
class SpectralAxis {
 public:
  SpectralAxis() = default;
  explicit SpectralAxis(std::vector<double> wavelengths_um);

  // `count` band centers evenly spaced over [first_um, last_um].
  static SpectralAxis linear(double first_um, double last_um, std::size_t count);

  std::size_t band_count() const noexcept { return wavelengths_.size(); }
  const std::vector<double>& wavelengths() const noexcept { return wavelengths_; }
  double operator[](std::size_t band) const { return wavelengths_.at(band); }

  bool operator==(const SpectralAxis&) const = default;

 private:
  std::vector<double> wavelengths_;
};

// Reflectance cube stored band-interleaved-by-pixel: value(r, c, b) = cube[(r * W + c) * B + b].
struct HyperspectralScene {
  std::size_t height = 0;
  std::size_t width = 0;
  double gsd_m = 1.0;
  SpectralAxis axis;
  std::vector<float> cube;

  std::size_t band_count() const noexcept { return axis.band_count(); }
  std::size_t pixel_count() const noexcept { return height * width; }

  std::span<const float> pixel(std::size_t row, std::size_t col) const {
    const std::size_t b = band_count();
    return {cube.data() + (row * width + col) * b, b};
  }
  std::span<float> pixel(std::size_t row, std::size_t col) {
    const std::size_t b = band_count();
    return {cube.data() + (row * width + col) * b, b};
  }

  // Throws SizeError / DomainError when the invariants (consistent dimensions,
  // finite non-negative reflectance) do not hold.
  void validate() const;

  // Copy of the window [row, row + size) x [col, col + size).
  HyperspectralScene crop(std::size_t row, std::size_t col, std::size_t rows,
                          std::size_t cols) const;
};

struct NomenclatureNode {
  std::string name;
  int parent = -1;  // index into Nomenclature::nodes(); -1 for the root
  int leaf_id = 0;  // 1..c for leaves, 0 for internal nodes
};

// Land-cover tree rooted at "land cover" plus the flat land-use class list.
class Nomenclature {
 public:
  Nomenclature(std::vector<NomenclatureNode> nodes, std::vector<std::string> land_use);

  // 32 leaves split into 16 impermeable and 16 permeable materials, and the
  // 12 land-use classes of the Toulouse ground truth.
  static Nomenclature toulouse();
  // `classes` leaves directly under the root; used for synthetic scenes.
  static Nomenclature flat(int classes);

  int class_count() const noexcept { return class_count_; }
  int land_use_count() const noexcept { return static_cast<int>(land_use_.size()); }
  const std::vector<NomenclatureNode>& nodes() const noexcept { return nodes_; }
  const std::vector<std::string>& land_use() const noexcept { return land_use_; }

  const std::string& leaf_name(int leaf_id) const;
  // Names from the root down to the leaf, root first.
  std::vector<std::string> path(int leaf_id) const;

 private:
  std::vector<NomenclatureNode> nodes_;
  std::vector<std::string> land_use_;
  std::vector<int> leaf_node_;  // leaf id - 1 -> node index
  int class_count_ = 0;
};

struct Point {
  double x = 0.0;  // column axis, pixel units
  double y = 0.0;  // row axis, pixel units
  bool operator==(const Point&) const = default;
};

struct Polygon {
  std::vector<Point> vertices;
  int land_cover = 0;
  int land_use = 0;
  std::optional<int> group;
};

struct GroundTruth {
  std::vector<Polygon> polygons;

  // Checks vertex bounds against a height x width scene, class ids against
  // `class_count` (and `land_use_count` when positive), and that every polygon
  // is simple with at least three vertices.
  void validate(std::size_t height, std::size_t width, int class_count,
                int land_use_count = 0) const;
};

template <typename T>
struct Raster {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<T> data;

  Raster() = default;
  Raster(std::size_t h, std::size_t w, T fill = T{}) : height(h), width(w), data(h * w, fill) {}

  T& at(std::size_t row, std::size_t col) { return data[row * width + col]; }
  const T& at(std::size_t row, std::size_t col) const { return data[row * width + col]; }
  bool operator==(const Raster&) const = default;
};

using LabelMap = Raster<std::int32_t>;  // 0 = unlabeled, otherwise a leaf id
using IndexMap = Raster<std::int32_t>;  // -1 = none

// P[i, k] = pixels of class k + 1 in group i.
class GroupClassMatrix {
 public:
  GroupClassMatrix() = default;
  GroupClassMatrix(std::size_t groups, std::size_t classes);
  GroupClassMatrix(std::size_t groups, std::size_t classes, std::vector<std::int64_t> counts);

  std::size_t groups() const noexcept { return groups_; }
  std::size_t classes() const noexcept { return classes_; }

  std::int64_t& operator()(std::size_t group, std::size_t cls) {
    return counts_[group * classes_ + cls];
  }
  std::int64_t operator()(std::size_t group, std::size_t cls) const {
    return counts_[group * classes_ + cls];
  }
  const std::vector<std::int64_t>& counts() const noexcept { return counts_; }

  std::int64_t row_total(std::size_t group) const;
  std::int64_t class_total(std::size_t cls) const;
  std::int64_t total() const;

  bool operator==(const GroupClassMatrix&) const = default;

 private:
  std::size_t groups_ = 0;
  std::size_t classes_ = 0;
  std::vector<std::int64_t> counts_;
};

// Even-odd test of a point against a closed polygon ring.
bool point_in_polygon(const Point& p, std::span<const Point> ring);

// For each pixel, the index of the polygon whose interior contains the pixel
// center, or -1. Throws AnnotationConflict when a pixel center lies inside two
// polygons of different land-cover classes; same-class overlaps keep the
// lower polygon index.
IndexMap rasterize_polygon_index(std::size_t height, std::size_t width, const GroundTruth& gt);

LabelMap rasterize_ground_truth(std::size_t height, std::size_t width, const GroundTruth& gt);
inline LabelMap rasterize_ground_truth(const HyperspectralScene& scene, const GroundTruth& gt) {
  return rasterize_ground_truth(scene.height, scene.width, gt);
}

// Minimum Euclidean distance between the boundaries of two polygons, 0 when
// they intersect or one contains the other. Pixel units.
double polygon_distance(std::span<const Point> a, std::span<const Point> b);

struct GroupingResult {
  GroundTruth ground_truth;  // copy of the input with group ids filled in
  int group_count = 0;
};

// Connected components of the graph joining polygons whose boundary distance
// is at most radius_m. Group ids are 0..n-1, numbered by the smallest polygon
// index in each component.
GroupingResult group_polygons(const GroundTruth& gt, double radius_m, double gsd_m);

// Group id of the polygon covering each pixel, or -1.
IndexMap group_map(const IndexMap& polygon_index, const GroundTruth& grouped);

// Tally of labeled pixels per (group, class). Pass 0 to infer the dimension
// from the maps. Throws SizeError on mismatched maps or a labeled pixel with
// no group.
GroupClassMatrix class_pixel_counts(const LabelMap& labels, const IndexMap& groups,
                                    std::size_t group_count = 0, std::size_t class_count = 0);

}  // namespace hyspec
