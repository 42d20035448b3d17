#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "hyspec/error.hpp"
#include "hyspec/scene.hpp"
#include "hyspec/scene_io.hpp"
#include "hyspec/synthetic.hpp"
#include "test_support.hpp"

namespace hyspec {
namespace {

Polygon rect(double x0, double y0, double x1, double y1, int cls) {
  Polygon p;
  p.vertices = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  p.land_cover = cls;
  p.land_use = 1;
  return p;
}

// Random convex-ish quadrilaterals that may overlap only when they share a class.
GroundTruth random_layout(std::mt19937_64& rng, std::size_t n, double size) {
  std::uniform_real_distribution<double> pos(0.0, size - 6.0);
  std::uniform_real_distribution<double> ext(1.5, 5.5);
  GroundTruth gt;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = pos(rng);
    const double y = pos(rng);
    Polygon p;
    p.vertices = {{x, y + 0.3}, {x + ext(rng), y}, {x + 5.8, y + ext(rng)}, {x + 0.2, y + 5.6}};
    p.land_cover = 2;
    gt.polygons.push_back(p);
  }
  return gt;
}

TEST(SpectralAxis, RejectsDescendingAndOutOfRange) {
  EXPECT_THROW(SpectralAxis({0.5, 0.4}), DomainError);
  EXPECT_THROW(SpectralAxis({0.2, 0.4}), DomainError);
  const SpectralAxis axis = SpectralAxis::linear(0.4, 2.5, 310);
  EXPECT_EQ(axis.band_count(), 310u);
  EXPECT_DOUBLE_EQ(axis[0], 0.4);
  EXPECT_NEAR(axis[309], 2.5, 1e-12);
}

TEST(Nomenclature, ToulouseHasThirtyTwoLeaves) {
  const Nomenclature n = Nomenclature::toulouse();
  EXPECT_EQ(n.class_count(), 32);
  EXPECT_EQ(n.land_use_count(), 12);
  for (int leaf = 1; leaf <= 32; ++leaf) {
    const auto path = n.path(leaf);
    ASSERT_GE(path.size(), 2u);
    EXPECT_EQ(path.front(), "land cover");
    EXPECT_EQ(path.back(), n.leaf_name(leaf));
  }
  EXPECT_EQ(Nomenclature::flat(5).class_count(), 5);
}

TEST(Scene, ValidateCatchesBadCubes) {
  HyperspectralScene s;
  s.height = 2;
  s.width = 2;
  s.axis = SpectralAxis::linear(0.4, 1.0, 3);
  s.cube.assign(12, 0.25f);
  EXPECT_NO_THROW(s.validate());
  s.cube[5] = -0.1f;
  EXPECT_THROW(s.validate(), DomainError);
  s.cube[5] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(s.validate(), DomainError);
  s.cube.resize(11);
  EXPECT_THROW(s.validate(), SizeError);
}

TEST(Rasterize, EmptyListIsUnlabeled) {
  const LabelMap m = rasterize_ground_truth(8, 8, GroundTruth{});
  EXPECT_TRUE(std::all_of(m.data.begin(), m.data.end(), [](int v) { return v == 0; }));
}

TEST(Rasterize, TwoByTwoSquareLabelsFourPixels) {
  GroundTruth gt;
  gt.polygons.push_back(rect(2.0, 3.0, 4.0, 5.0, 3));
  const LabelMap m = rasterize_ground_truth(8, 8, gt);
  EXPECT_EQ(std::count(m.data.begin(), m.data.end(), 3), 4);
  EXPECT_EQ(m.at(3, 2), 3);
  EXPECT_EQ(m.at(4, 3), 3);
  EXPECT_EQ(m.at(5, 3), 0);
}

TEST(Rasterize, MatchesNaiveScan) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    GroundTruth gt = random_layout(rng, 10, 40.0);
    for (std::size_t i = 0; i < gt.polygons.size(); ++i) gt.polygons[i].land_cover = 2;
    const IndexMap idx = rasterize_polygon_index(40, 40, gt);
    const LabelMap labels = rasterize_ground_truth(40, 40, gt);
    for (std::size_t r = 0; r < 40; ++r) {
      for (std::size_t c = 0; c < 40; ++c) {
        const Point center{static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5};
        int first = -1;
        for (std::size_t i = 0; i < gt.polygons.size() && first < 0; ++i) {
          // crossing-number test written out independently
          const auto& v = gt.polygons[i].vertices;
          bool inside = false;
          for (std::size_t a = 0, b = v.size() - 1; a < v.size(); b = a++) {
            if ((v[a].y > center.y) != (v[b].y > center.y) &&
                center.x < (v[b].x - v[a].x) * (center.y - v[a].y) / (v[b].y - v[a].y) + v[a].x) {
              inside = !inside;
            }
          }
          if (inside) first = static_cast<int>(i);
        }
        ASSERT_EQ(idx.at(r, c), first) << r << "," << c;
        ASSERT_EQ(labels.at(r, c), first < 0 ? 0 : 2);
      }
    }
    EXPECT_EQ(rasterize_ground_truth(40, 40, gt), labels);
  }
}

TEST(Rasterize, ConflictingClassesThrow) {
  GroundTruth gt;
  gt.polygons.push_back(rect(0, 0, 4, 4, 1));
  gt.polygons.push_back(rect(2, 2, 6, 6, 2));
  EXPECT_THROW(rasterize_ground_truth(8, 8, gt), AnnotationConflict);
  gt.polygons[1].land_cover = 1;
  const IndexMap idx = rasterize_polygon_index(8, 8, gt);
  EXPECT_EQ(idx.at(3, 3), 0);
}

TEST(GroundTruth, ValidateChecksBoundsAndClasses) {
  GroundTruth gt;
  gt.polygons.push_back(rect(0, 0, 4, 4, 1));
  EXPECT_NO_THROW(gt.validate(8, 8, 5));
  gt.polygons[0].land_cover = 6;
  EXPECT_ANY_THROW(gt.validate(8, 8, 5));
  gt.polygons[0].land_cover = 1;
  gt.polygons[0].vertices[1].x = 9.0;
  EXPECT_ANY_THROW(gt.validate(8, 8, 5));
}

TEST(Grouping, SingleAndDistantPolygons) {
  GroundTruth gt;
  gt.polygons.push_back(rect(0, 0, 2, 2, 1));
  EXPECT_EQ(group_polygons(gt, 1.0, 1.0).group_count, 1);
  gt.polygons.push_back(rect(10, 0, 12, 2, 1));
  EXPECT_EQ(group_polygons(gt, 5.0, 1.0).group_count, 2);
  EXPECT_EQ(group_polygons(gt, 8.0, 1.0).group_count, 1);
  // 8 px apart at 0.5 m per pixel is 4 m
  EXPECT_EQ(group_polygons(gt, 4.0, 0.5).group_count, 1);
  EXPECT_EQ(group_polygons(gt, 3.9, 0.5).group_count, 2);
}

int find_root(std::vector<int>& parent, int i) {
  while (parent[static_cast<std::size_t>(i)] != i) i = parent[static_cast<std::size_t>(i)];
  return i;
}

TEST(Grouping, MatchesUnionFindAndIgnoresOrder) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const GroundTruth gt = random_layout(rng, 20, 80.0);
    const double radius = 3.0;
    std::vector<int> parent(20);
    std::iota(parent.begin(), parent.end(), 0);
    for (int i = 0; i < 20; ++i) {
      for (int j = i + 1; j < 20; ++j) {
        if (polygon_distance(gt.polygons[static_cast<std::size_t>(i)].vertices,
                             gt.polygons[static_cast<std::size_t>(j)].vertices) <= radius) {
          parent[static_cast<std::size_t>(find_root(parent, i))] = find_root(parent, j);
        }
      }
    }
    const GroupingResult g = group_polygons(gt, radius, 1.0);
    std::vector<int> perm(20);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    GroundTruth shuffled;
    for (int i : perm) shuffled.polygons.push_back(gt.polygons[static_cast<std::size_t>(i)]);
    const GroupingResult gs = group_polygons(shuffled, radius, 1.0);
    EXPECT_EQ(gs.group_count, g.group_count);
    for (int i = 0; i < 20; ++i) {
      for (int j = 0; j < 20; ++j) {
        const bool same = find_root(parent, i) == find_root(parent, j);
        EXPECT_EQ(*g.ground_truth.polygons[static_cast<std::size_t>(i)].group ==
                      *g.ground_truth.polygons[static_cast<std::size_t>(j)].group,
                  same);
      }
    }
    for (std::size_t a = 0; a < 20; ++a) {
      for (std::size_t b = 0; b < 20; ++b) {
        const auto pa = static_cast<std::size_t>(perm[a]);
        const auto pb = static_cast<std::size_t>(perm[b]);
        EXPECT_EQ(*gs.ground_truth.polygons[a].group == *gs.ground_truth.polygons[b].group,
                  *g.ground_truth.polygons[pa].group == *g.ground_truth.polygons[pb].group);
      }
    }
  }
}

TEST(PolygonDistance, TouchingAndContainedAreZero) {
  const Polygon a = rect(0, 0, 4, 4, 1);
  const Polygon b = rect(4, 0, 6, 4, 1);
  const Polygon inner = rect(1, 1, 2, 2, 1);
  const Polygon far = rect(7, 0, 9, 4, 1);
  EXPECT_DOUBLE_EQ(polygon_distance(a.vertices, b.vertices), 0.0);
  EXPECT_DOUBLE_EQ(polygon_distance(a.vertices, inner.vertices), 0.0);
  EXPECT_DOUBLE_EQ(polygon_distance(a.vertices, far.vertices), 3.0);
}

TEST(ClassPixelCounts, TrivialCases) {
  LabelMap labels(4, 4, 0);
  IndexMap groups(4, 4, -1);
  const GroupClassMatrix zero = class_pixel_counts(labels, groups, 2, 3);
  EXPECT_EQ(zero.total(), 0);
  for (int i = 0; i < 7; ++i) {
    labels.data[static_cast<std::size_t>(i)] = 1;
    groups.data[static_cast<std::size_t>(i)] = 0;
  }
  const GroupClassMatrix seven = class_pixel_counts(labels, groups);
  EXPECT_EQ(seven.groups(), 1u);
  EXPECT_EQ(seven.classes(), 1u);
  EXPECT_EQ(seven(0, 0), 7);
}

TEST(ClassPixelCounts, MatchesTallyOracle) {
  std::mt19937_64 rng(3);
  LabelMap labels(30, 30, 0);
  IndexMap groups(30, 30, -1);
  std::uniform_int_distribution<int> cls(0, 4);
  std::uniform_int_distribution<int> grp(0, 5);
  std::vector<std::int64_t> oracle(6 * 4);
  for (std::size_t i = 0; i < labels.data.size(); ++i) {
    const int k = cls(rng);
    if (k == 0) continue;
    labels.data[i] = k;
    groups.data[i] = grp(rng);
    ++oracle[static_cast<std::size_t>(groups.data[i]) * 4 + static_cast<std::size_t>(k - 1)];
  }
  const GroupClassMatrix p = class_pixel_counts(labels, groups, 6, 4);
  EXPECT_EQ(p.counts(), oracle);
  std::int64_t labeled = std::count_if(labels.data.begin(), labels.data.end(), [](int v) { return v > 0; });
  EXPECT_EQ(p.total(), labeled);
  groups.data[0] = -1;
  labels.data[0] = 1;
  EXPECT_THROW(class_pixel_counts(labels, groups, 6, 4), SizeError);
}

TEST(Synthetic, ShapeAndDeterminism) {
  SyntheticSceneConfig c;
  const SyntheticScene a = generate_synthetic_scene(c);
  EXPECT_EQ(a.scene.height, 64u);
  EXPECT_EQ(a.scene.width, 64u);
  EXPECT_EQ(a.scene.band_count(), 310u);
  EXPECT_EQ(a.ground_truth.polygons.size(), 12u);
  EXPECT_NO_THROW(a.scene.validate());
  EXPECT_NO_THROW(a.ground_truth.validate(64, 64, c.materials));
  const SyntheticScene b = generate_synthetic_scene(c);
  EXPECT_EQ(a.scene.cube, b.scene.cube);
  EXPECT_NO_THROW(rasterize_ground_truth(a.scene, a.ground_truth));
  c.seed = 1;
  EXPECT_NE(generate_synthetic_scene(c).scene.cube, a.scene.cube);
}

TEST(Synthetic, NoiselessPixelsDifferOnlyByBrightness) {
  SyntheticSceneConfig c;
  c.noise_sigma = 0.0;
  c.bands = 40;
  const SyntheticScene s = generate_synthetic_scene(c);
  const IndexMap idx = rasterize_polygon_index(s.scene.height, s.scene.width, s.ground_truth);
  for (std::size_t poly = 0; poly < s.ground_truth.polygons.size(); ++poly) {
    std::span<const float> ref;
    for (std::size_t r = 0; r < s.scene.height; ++r) {
      for (std::size_t col = 0; col < s.scene.width; ++col) {
        if (idx.at(r, col) != static_cast<int>(poly)) continue;
        const auto px = s.scene.pixel(r, col);
        if (ref.empty()) {
          ref = px;
          continue;
        }
        const double ratio = px[0] / ref[0];
        for (std::size_t b = 0; b < px.size(); ++b) ASSERT_NEAR(px[b], ratio * ref[b], 1e-5);
      }
    }
  }
}

TEST(Synthetic, ImpossiblePackingThrows) {
  SyntheticSceneConfig c;
  c.height = 8;
  c.width = 8;
  c.polygons = 40;
  c.max_retries = 20;
  EXPECT_THROW(generate_synthetic_scene(c), GenerationError);
  c = {};
  c.materials = 40;
  EXPECT_THROW(generate_synthetic_scene(c), ConfigError);
}

TEST(Synthetic, ManySeedsSatisfyInvariants) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SyntheticSceneConfig c;
    c.seed = seed;
    c.bands = 30;
    const SyntheticScene s = generate_synthetic_scene(c);
    EXPECT_NO_THROW(s.scene.validate());
    EXPECT_NO_THROW(rasterize_ground_truth(s.scene, s.ground_truth));
  }
}

TEST(SceneIo, RoundTrip) {
  testing::TempDir dir("scene_io");
  SyntheticSceneConfig c;
  c.bands = 20;
  const SyntheticScene s = generate_synthetic_scene(c);
  write_scene(dir / "scene", s.scene);
  const HyperspectralScene back = read_scene(dir / "scene.json");
  EXPECT_EQ(back.cube, s.scene.cube);
  EXPECT_EQ(back.axis, s.scene.axis);
  EXPECT_EQ(back.height, s.scene.height);
  GroundTruth gt = s.ground_truth;
  gt.polygons[0].group = 3;
  write_ground_truth(dir / "gt.json", gt);
  const GroundTruth g2 = read_ground_truth(dir / "gt.json");
  ASSERT_EQ(g2.polygons.size(), gt.polygons.size());
  EXPECT_EQ(g2.polygons[0].group, 3);
  EXPECT_FALSE(g2.polygons[1].group.has_value());
  EXPECT_EQ(g2.polygons[2].vertices, gt.polygons[2].vertices);
  EXPECT_THROW(read_scene(dir / "missing"), IoError);
}

}  // namespace
}  // namespace hyspec
