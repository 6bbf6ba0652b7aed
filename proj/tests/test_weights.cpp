#include <map>

#include "cellseg/errors.hpp"
#include "cellseg/gtprep.hpp"
#include "cellseg/morphology.hpp"
#include "cellseg/synth.hpp"
#include "cellseg/weights.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cellseg;
using testing::Rng;

namespace {

InstanceMap two_squares() {
  InstanceMap g = InstanceMap::Zero(48, 48);
  g.block(8, 6, 14, 14) = 1;
  g.block(8, 20, 14, 14) = 2;
  g.block(30, 30, 10, 12) = 3;
  return g;
}

}  // namespace

TEST_CASE("phi_beta") {
  CHECK(phi_beta(0.0, 30.0) == 1.0);
  CHECK(phi_beta(30.0, 30.0) == 0.0);
  CHECK(phi_beta(45.0, 30.0) == 0.0);
  CHECK(phi_beta(15.0, 30.0) == 0.5);
}

TEST_CASE("weights match the direct transcription on two squares") {
  const InstanceMap g = two_squares();
  const SemanticMap h = instance_to_semantic(g);
  const W3Params p;
  const WeightMap w = w3_weight_map(g, h, p);
  const auto want = testing::oracle_w3(g, h, skeletonize(g), p.beta, p.nu, p.sigma);
  CHECK(testing::max_relative_error(w, want) <= 1e-9);
}

TEST_CASE("weights match the direct transcription on random scenes") {
  Rng rng(21);
  for (int trial = 0; trial < 8; ++trial) {
    const InstanceMap g = testing::random_instance_map(rng, 40, 44, 5);
    const SemanticMap h = instance_to_semantic(g);
    if (class_counts(h)[kCell] == 0) continue;
    const W3Params p{testing::uniform(rng, 5, 40), testing::uniform(rng, 0.5, 3), testing::uniform(rng, 1, 8)};
    const WeightMap w = w3_weight_map(g, h, p);
    const auto want = testing::oracle_w3(g, h, skeletonize(g), p.beta, p.nu, p.sigma);
    CHECK(testing::max_relative_error(w, want) <= 1e-9);
  }
}

TEST_CASE("case values: far background, touching, bar contour") {
  const InstanceMap g = two_squares();
  const SemanticMap h = instance_to_semantic(g);
  const ClassCounts n = class_counts(h);
  const W3Params p{10.0, 2.0, 5.0};
  const WeightMap w = w3_weight_map(g, h, p);
  const DistanceField d = distance_transform(g > 0);
  for (Index i = 0; i < g.size(); ++i) {
    if (h.data()[i] == kBackground && d.data()[i] >= p.beta) {
      CHECK(w.data()[i] == p.nu / static_cast<double>(n[0]));
    }
    if (h.data()[i] == kTouching) CHECK(w.data()[i] == p.nu / static_cast<double>(n[2]));
  }

  InstanceMap bar = InstanceMap::Zero(5, 12);
  bar.block(2, 1, 1, 10) = 1;
  const SemanticMap hb = instance_to_semantic(bar);
  const WeightMap wb = w3_weight_map(bar, hb, p);
  const double n1 = static_cast<double>(class_counts(hb)[kCell]);
  for (Index c = 1; c < 11; ++c) CHECK(wb(2, c) == doctest::Approx(p.nu / n1 + p.nu).epsilon(1e-15));
}

TEST_CASE("interior pixel inherits its contour weight through the Gaussian") {
  const InstanceMap g = two_squares();
  const SemanticMap h = instance_to_semantic(g);
  const W3Params p;
  const WeightMap w = w3_weight_map(g, h, p);
  const ContourSet cs = extract_contours(g);
  const NearestContourIndex zeta = nearest_contour_map(cs);
  const double base = p.nu / static_cast<double>(class_counts(h)[kCell]);
  for (Index r = 0; r < g.rows(); ++r) {
    for (Index c = 0; c < g.cols(); ++c) {
      if (h(r, c) != kCell || cs.mask(r, c)) continue;
      const Pixel z = zeta.at(r, c);
      const double d2 = double((r - z.row) * (r - z.row) + (c - z.col) * (c - z.col));
      CHECK(w(r, c) == doctest::Approx(base + w(z.row, z.col) * std::exp(-d2 / 25.0)).epsilon(1e-14));
    }
  }
}

TEST_CASE("touching weight dominates when the touching class is smallest") {
  Rng rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    SynthSpec spec;
    spec.rows = spec.cols = 96;
    const InstanceMap g = generate_scene(spec, static_cast<std::uint64_t>(trial)).instances;
    const SemanticMap h = instance_to_semantic(g);
    const ClassCounts n = class_counts(h);
    if (!(n[2] > 0 && n[2] <= n[1] && n[2] <= n[0])) continue;
    const WeightMap w = w3_weight_map(g, h);
    const double touching = 1.0 / static_cast<double>(n[2]);
    CHECK(touching >= 1.0 / static_cast<double>(n[0]));
    CHECK(touching >= 1.0 / static_cast<double>(n[1]));
    CHECK((w > 0.0).all());
  }
}

TEST_CASE("background weight decreases with distance and saturates") {
  const InstanceMap g = two_squares();
  const SemanticMap h = instance_to_semantic(g);
  const W3Params p{12.0, 1.0, 5.0};
  const WeightMap w = w3_weight_map(g, h, p);
  const DistanceField d = distance_transform(g > 0);
  std::vector<std::pair<double, double>> samples;
  for (Index i = 0; i < g.size(); ++i) {
    if (h.data()[i] == kBackground) samples.emplace_back(d.data()[i], w.data()[i]);
  }
  std::sort(samples.begin(), samples.end());
  for (std::size_t i = 1; i < samples.size(); ++i) CHECK(samples[i].second <= samples[i - 1].second);
  const double floor = 1.0 / static_cast<double>(class_counts(h)[kBackground]);
  for (const auto& [dist, weight] : samples) {
    if (dist >= p.beta) CHECK(weight == floor);
    else CHECK(weight > floor);
  }
}

TEST_CASE("interior weights decay along rays sharing a contour pixel") {
  const InstanceMap g = two_squares();
  const SemanticMap h = instance_to_semantic(g);
  const WeightMap w = w3_weight_map(g, h);
  const ContourSet cs = extract_contours(g);
  const NearestContourIndex zeta = nearest_contour_map(cs);
  const auto d2 = squared_distance_transform(cs.mask);
  std::map<std::pair<int, int>, std::vector<std::pair<std::int64_t, double>>> rays;
  for (Index r = 0; r < g.rows(); ++r) {
    for (Index c = 0; c < g.cols(); ++c) {
      if (h(r, c) != kCell || cs.mask(r, c)) continue;
      const Pixel z = zeta.at(r, c);
      rays[{z.row, z.col}].emplace_back(d2(r, c), w(r, c));
    }
  }
  for (auto& [key, ray] : rays) {
    std::sort(ray.begin(), ray.end());
    for (std::size_t i = 1; i < ray.size(); ++i) {
      if (ray[i].first > ray[i - 1].first) CHECK(ray[i].second <= ray[i - 1].second);
    }
  }
}

TEST_CASE("scaling nu scales the map") {
  const InstanceMap g = two_squares();
  const SemanticMap h = instance_to_semantic(g);
  const WeightMap w1 = w3_weight_map(g, h, W3Params{30.0, 1.0, 5.0});
  const WeightMap w3 = w3_weight_map(g, h, W3Params{30.0, 4.0, 5.0});
  CHECK(((w3 - 4.0 * w1).abs() <= 1e-15 * w3.abs()).all());
}

TEST_CASE("weight map preconditions") {
  const InstanceMap g = two_squares();
  const SemanticMap h = instance_to_semantic(g);
  CHECK_THROWS_AS(w3_weight_map(InstanceMap::Zero(4, 4), SemanticMap::Zero(4, 4)), ValidationError);
  CHECK_THROWS_AS(w3_weight_map(g, SemanticMap::Zero(3, 3)), ValidationError);
  CHECK_THROWS_AS(w3_weight_map(g, h, W3Params{-1.0, 1.0, 5.0}), ValidationError);
  CHECK_THROWS_AS(w3_weight_map(g, h, W3Params{30.0, 0.0, 5.0}), ValidationError);
  CHECK_THROWS_AS(w3_weight_map(g, h, W3Params{30.0, 1.0, 0.0}), ValidationError);

  // All-foreground: the background branch is vacuous.
  const InstanceMap full = InstanceMap::Ones(6, 6);
  const WeightMap wf = w3_weight_map(full, instance_to_semantic(full));
  CHECK((wf > 0.0).all());
}

TEST_CASE("balanced weight map") {
  SemanticMap h(2, 2);
  h << 0, 0, 1, 2;
  const WeightMap w = balanced_weight_map(h);
  CHECK(w(0, 0) == 0.5);
  CHECK(w(0, 1) == 0.5);
  CHECK(w(1, 0) == 1.0);
  CHECK(w(1, 1) == 1.0);

  const WeightMap u = balanced_weight_map(SemanticMap::Constant(4, 5, kCell));
  CHECK((u == 1.0 / 20.0).all());

  Rng rng(23);
  SemanticMap r(17, 19);
  for (Index i = 0; i < r.size(); ++i) r.data()[i] = static_cast<std::uint8_t>(testing::uniform_int(rng, 0, 2));
  const WeightMap wr = balanced_weight_map(r);
  for (int l = 0; l < 3; ++l) {
    CHECK((r == l).select(wr, 0.0).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}
