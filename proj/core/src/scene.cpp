#include "hyspec/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "hyspec/error.hpp"

namespace hyspec {

SpectralAxis::SpectralAxis(std::vector<double> wavelengths_um) : wavelengths_(std::move(wavelengths_um)) {
  if (wavelengths_.empty()) throw SizeError("spectral axis needs at least one band");
  for (std::size_t i = 0; i < wavelengths_.size(); ++i) {
    const double w = wavelengths_[i];
    if (!(w > 0.3 && w < 3.0)) {
      std::ostringstream msg;
      msg << "band " << i << " wavelength " << w << " um outside (0.3, 3.0)";
      throw DomainError(msg.str());
    }
    if (i > 0 && !(w > wavelengths_[i - 1])) {
      throw DomainError("spectral axis wavelengths must be strictly ascending");
    }
  }
}

SpectralAxis SpectralAxis::linear(double first_um, double last_um, std::size_t count) {
  if (count == 0) throw SizeError("spectral axis needs at least one band");
  std::vector<double> w(count);
  for (std::size_t i = 0; i < count; ++i) {
    w[i] = count == 1 ? first_um
                      : first_um + (last_um - first_um) * static_cast<double>(i) /
                                       static_cast<double>(count - 1);
  }
  return SpectralAxis(std::move(w));
}

void HyperspectralScene::validate() const {
  if (height == 0 || width == 0 || band_count() == 0) {
    throw SizeError("scene dimensions must be positive");
  }
  if (cube.size() != height * width * band_count()) {
    std::ostringstream msg;
    msg << "cube holds " << cube.size() << " values, expected " << height << "x" << width << "x"
        << band_count();
    throw SizeError(msg.str());
  }
  if (!(gsd_m > 0.0) || !std::isfinite(gsd_m)) throw DomainError("gsd must be positive");
  for (std::size_t i = 0; i < cube.size(); ++i) {
    if (!std::isfinite(cube[i]) || cube[i] < 0.0f) {
      std::ostringstream msg;
      msg << "reflectance at flat index " << i << " is " << cube[i]
          << "; values must be finite and non-negative";
      throw DomainError(msg.str());
    }
  }
}

HyperspectralScene HyperspectralScene::crop(std::size_t row, std::size_t col, std::size_t rows,
                                            std::size_t cols) const {
  if (row + rows > height || col + cols > width) throw SizeError("crop window outside the scene");
  HyperspectralScene out;
  out.height = rows;
  out.width = cols;
  out.gsd_m = gsd_m;
  out.axis = axis;
  const std::size_t b = band_count();
  out.cube.resize(rows * cols * b);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* src = cube.data() + ((row + r) * width + col) * b;
    std::copy(src, src + cols * b, out.cube.data() + r * cols * b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nomenclature

Nomenclature::Nomenclature(std::vector<NomenclatureNode> nodes, std::vector<std::string> land_use)
    : nodes_(std::move(nodes)), land_use_(std::move(land_use)) {
  if (nodes_.empty() || nodes_[0].parent != -1) {
    throw ConfigError("nomenclature node 0 must be the root");
  }
  std::vector<int> children(nodes_.size(), 0);
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    const int p = nodes_[i].parent;
    if (p < 0 || static_cast<std::size_t>(p) >= i) {
      throw ConfigError("nomenclature parents must precede their children");
    }
    ++children[p];
  }
  std::vector<int> leaf_of;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const bool is_leaf = children[i] == 0 && i != 0;
    if (is_leaf != (nodes_[i].leaf_id > 0)) {
      throw ConfigError("node '" + nodes_[i].name + "' leaf flag disagrees with the tree shape");
    }
    if (is_leaf) {
      const auto id = static_cast<std::size_t>(nodes_[i].leaf_id);
      if (leaf_of.size() < id) leaf_of.resize(id, -1);
      if (leaf_of[id - 1] != -1) throw ConfigError("duplicate leaf id");
      leaf_of[id - 1] = static_cast<int>(i);
    }
  }
  if (std::find(leaf_of.begin(), leaf_of.end(), -1) != leaf_of.end()) {
    throw ConfigError("leaf ids must be 1..c without gaps");
  }
  leaf_node_ = std::move(leaf_of);
  class_count_ = static_cast<int>(leaf_node_.size());
}

namespace {

std::vector<std::string> toulouse_land_use() {
  return {"Roads",           "Railways",    "Roofs",          "Parking lots",
          "Building sites",  "Sport facilities", "Lakes / rivers / harbors",
          "Swimming pools",  "Forests",     "Cultivated fields", "Boats",
          "Open areas"};
}

}  // namespace

Nomenclature Nomenclature::toulouse() {
  std::vector<NomenclatureNode> nodes;
  nodes.push_back({"land cover", -1, 0});
  nodes.push_back({"impermeable", 0, 0});
  nodes.push_back({"permeable", 0, 0});
  int leaf = 1;
  for (int group = 0; group < 2; ++group) {
    const std::string prefix = group == 0 ? "impermeable material " : "permeable material ";
    for (int i = 1; i <= 16; ++i) {
      std::string name = prefix + (i < 10 ? "0" : "") + std::to_string(i);
      nodes.push_back({std::move(name), 1 + group, leaf++});
    }
  }
  return Nomenclature(std::move(nodes), toulouse_land_use());
}

Nomenclature Nomenclature::flat(int classes) {
  if (classes < 1) throw ConfigError("nomenclature needs at least one class");
  std::vector<NomenclatureNode> nodes;
  nodes.push_back({"land cover", -1, 0});
  for (int k = 1; k <= classes; ++k) nodes.push_back({"material " + std::to_string(k), 0, k});
  return Nomenclature(std::move(nodes), toulouse_land_use());
}

const std::string& Nomenclature::leaf_name(int leaf_id) const {
  if (leaf_id < 1 || leaf_id > class_count_) throw DomainError("unknown leaf id");
  return nodes_[leaf_node_[leaf_id - 1]].name;
}

std::vector<std::string> Nomenclature::path(int leaf_id) const {
  if (leaf_id < 1 || leaf_id > class_count_) throw DomainError("unknown leaf id");
  std::vector<std::string> out;
  for (int n = leaf_node_[leaf_id - 1]; n != -1; n = nodes_[n].parent) out.push_back(nodes_[n].name);
  std::reverse(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Geometry

namespace {

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool on_segment(const Point& p, const Point& a, const Point& b) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d) {
  const double d1 = cross(c, d, a);
  const double d2 = cross(c, d, b);
  const double d3 = cross(a, b, c);
  const double d4 = cross(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  if (d1 == 0 && on_segment(a, c, d)) return true;
  if (d2 == 0 && on_segment(b, c, d)) return true;
  if (d3 == 0 && on_segment(c, a, b)) return true;
  if (d4 == 0 && on_segment(d, a, b)) return true;
  return false;
}

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x;
  const double ey = a.y + t * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

double segment_distance(const Point& a, const Point& b, const Point& c, const Point& d) {
  if (segments_intersect(a, b, c, d)) return 0.0;
  return std::min({point_segment_distance(a, c, d), point_segment_distance(b, c, d),
                   point_segment_distance(c, a, b), point_segment_distance(d, a, b)});
}

bool is_simple(std::span<const Point> ring) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = ring[i];
    const Point& b = ring[(i + 1) % n];
    if (a == b) return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      // Adjacent edges share a vertex by construction.
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect(a, b, ring[j], ring[(j + 1) % n])) return false;
    }
  }
  return true;
}

struct Box {
  double x0, y0, x1, y1;
};

Box bounding_box(std::span<const Point> ring) {
  Box box{ring[0].x, ring[0].y, ring[0].x, ring[0].y};
  for (const Point& p : ring) {
    box.x0 = std::min(box.x0, p.x);
    box.y0 = std::min(box.y0, p.y);
    box.x1 = std::max(box.x1, p.x);
    box.y1 = std::max(box.y1, p.y);
  }
  return box;
}

}  // namespace

void GroundTruth::validate(std::size_t height, std::size_t width, int class_count,
                           int land_use_count) const {
  for (std::size_t i = 0; i < polygons.size(); ++i) {
    const Polygon& poly = polygons[i];
    const std::string where = "polygon " + std::to_string(i) + ": ";
    if (poly.vertices.size() < 3) throw ConfigError(where + "needs at least 3 vertices");
    if (poly.land_cover < 1 || poly.land_cover > class_count) {
      throw ConfigError(where + "land-cover id " + std::to_string(poly.land_cover) +
                        " is not a leaf class");
    }
    if (land_use_count > 0 && (poly.land_use < 1 || poly.land_use > land_use_count)) {
      throw ConfigError(where + "land-use id " + std::to_string(poly.land_use) + " is invalid");
    }
    for (const Point& p : poly.vertices) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0 || p.y < 0 ||
          p.x > static_cast<double>(width) || p.y > static_cast<double>(height)) {
        throw DomainError(where + "vertex outside the scene bounds");
      }
    }
    if (!is_simple(poly.vertices)) throw ConfigError(where + "is self-intersecting");
  }
}

bool point_in_polygon(const Point& p, std::span<const Point> ring) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = ring[i];
    const Point& b = ring[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

IndexMap rasterize_polygon_index(std::size_t height, std::size_t width, const GroundTruth& gt) {
  IndexMap index(height, width, -1);
  for (std::size_t i = 0; i < gt.polygons.size(); ++i) {
    const auto& ring = gt.polygons[i].vertices;
    if (ring.size() < 3) continue;
    const Box box = bounding_box(ring);
    // Pixel (r, c) has its center at (c + 0.5, r + 0.5).
    const auto lo = [](double v) { return static_cast<long>(std::floor(v - 0.5)); };
    const auto hi = [](double v) { return static_cast<long>(std::ceil(v - 0.5)); };
    const long r0 = std::max(0L, lo(box.y0));
    const long r1 = std::min(static_cast<long>(height) - 1, hi(box.y1));
    const long c0 = std::max(0L, lo(box.x0));
    const long c1 = std::min(static_cast<long>(width) - 1, hi(box.x1));
    for (long r = r0; r <= r1; ++r) {
      for (long c = c0; c <= c1; ++c) {
        const Point center{static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5};
        if (!point_in_polygon(center, ring)) continue;
        std::int32_t& cell = index.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
        if (cell == -1) {
          cell = static_cast<std::int32_t>(i);
        } else if (gt.polygons[cell].land_cover != gt.polygons[i].land_cover) {
          std::ostringstream msg;
          msg << "polygons " << cell << " and " << i << " overlap at pixel (" << r << ", " << c
              << ") with different classes";
          throw AnnotationConflict(msg.str());
        }
      }
    }
  }
  return index;
}

LabelMap rasterize_ground_truth(std::size_t height, std::size_t width, const GroundTruth& gt) {
  const IndexMap index = rasterize_polygon_index(height, width, gt);
  LabelMap labels(height, width, 0);
  for (std::size_t p = 0; p < index.data.size(); ++p) {
    if (index.data[p] >= 0) labels.data[p] = gt.polygons[index.data[p]].land_cover;
  }
  return labels;
}

double polygon_distance(std::span<const Point> a, std::span<const Point> b) {
  if (point_in_polygon(a[0], b) || point_in_polygon(b[0], a)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Point& p0 = a[i];
    const Point& p1 = a[(i + 1) % a.size()];
    for (std::size_t j = 0; j < b.size(); ++j) {
      best = std::min(best, segment_distance(p0, p1, b[j], b[(j + 1) % b.size()]));
      if (best == 0.0) return 0.0;
    }
  }
  return best;
}

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

GroupingResult group_polygons(const GroundTruth& gt, double radius_m, double gsd_m) {
  if (!(radius_m > 0.0)) throw ConfigError("grouping radius must be positive");
  if (!(gsd_m > 0.0)) throw ConfigError("gsd must be positive");
  const double radius_px = radius_m / gsd_m;
  const std::size_t n = gt.polygons.size();

  std::vector<Box> boxes;
  boxes.reserve(n);
  for (const auto& poly : gt.polygons) boxes.push_back(bounding_box(poly.vertices));

  DisjointSets sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // Box gap is a lower bound on the boundary distance.
      const double gx = std::max({0.0, boxes[j].x0 - boxes[i].x1, boxes[i].x0 - boxes[j].x1});
      const double gy = std::max({0.0, boxes[j].y0 - boxes[i].y1, boxes[i].y0 - boxes[j].y1});
      if (std::hypot(gx, gy) > radius_px) continue;
      if (sets.find(i) == sets.find(j)) continue;
      if (polygon_distance(gt.polygons[i].vertices, gt.polygons[j].vertices) <= radius_px) {
        sets.unite(i, j);
      }
    }
  }

  GroupingResult result;
  result.ground_truth = gt;
  std::vector<int> id_of_root(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = sets.find(i);
    if (id_of_root[root] == -1) id_of_root[root] = result.group_count++;
    result.ground_truth.polygons[i].group = id_of_root[root];
  }
  return result;
}

IndexMap group_map(const IndexMap& polygon_index, const GroundTruth& grouped) {
  IndexMap out(polygon_index.height, polygon_index.width, -1);
  for (std::size_t p = 0; p < polygon_index.data.size(); ++p) {
    const int idx = polygon_index.data[p];
    if (idx < 0) continue;
    const auto& group = grouped.polygons.at(static_cast<std::size_t>(idx)).group;
    if (!group) throw ConfigError("polygon " + std::to_string(idx) + " has no group id");
    out.data[p] = *group;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Group x class matrix

GroupClassMatrix::GroupClassMatrix(std::size_t groups, std::size_t classes)
    : groups_(groups), classes_(classes), counts_(groups * classes, 0) {}

GroupClassMatrix::GroupClassMatrix(std::size_t groups, std::size_t classes,
                                   std::vector<std::int64_t> counts)
    : groups_(groups), classes_(classes), counts_(std::move(counts)) {
  if (counts_.size() != groups_ * classes_) throw SizeError("group-class matrix size mismatch");
  for (auto v : counts_) {
    if (v < 0) throw DomainError("group-class counts must be non-negative");
  }
}

std::int64_t GroupClassMatrix::row_total(std::size_t group) const {
  std::int64_t s = 0;
  for (std::size_t k = 0; k < classes_; ++k) s += (*this)(group, k);
  return s;
}

std::int64_t GroupClassMatrix::class_total(std::size_t cls) const {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < groups_; ++i) s += (*this)(i, cls);
  return s;
}

std::int64_t GroupClassMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

GroupClassMatrix class_pixel_counts(const LabelMap& labels, const IndexMap& groups,
                                    std::size_t group_count, std::size_t class_count) {
  if (labels.height != groups.height || labels.width != groups.width) {
    throw SizeError("label and group maps differ in size");
  }
  if (group_count == 0) {
    for (auto g : groups.data) group_count = std::max(group_count, static_cast<std::size_t>(g + 1));
  }
  if (class_count == 0) {
    for (auto k : labels.data) class_count = std::max(class_count, static_cast<std::size_t>(std::max(k, 0)));
  }
  GroupClassMatrix out(group_count, class_count);
  for (std::size_t p = 0; p < labels.data.size(); ++p) {
    const int k = labels.data[p];
    if (k <= 0) continue;
    const int g = groups.data[p];
    if (g < 0) throw SizeError("labeled pixel " + std::to_string(p) + " has no group");
    if (static_cast<std::size_t>(g) >= group_count || static_cast<std::size_t>(k) > class_count) {
      throw SizeError("group or class id exceeds the declared matrix size");
    }
    ++out(static_cast<std::size_t>(g), static_cast<std::size_t>(k - 1));
  }
  return out;
}

}  // namespace hyspec
