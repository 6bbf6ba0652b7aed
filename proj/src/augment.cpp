#include "cellseg/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "cellseg/gtprep.hpp"
#include "cellseg/morphology.hpp"

namespace cellseg {

std::uint64_t AugmentRng::below(std::uint64_t n) {
  if (n == 0) throw ValidationError("empty integer range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % n;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void AugmentSpec::validate() const {
  if (!(a_min >= -1.0 && a_max <= 1.0 && a_min <= a_max)) {
    throw ValidationError("a range must be an interval inside [-1, 1]");
  }
  if (!(gamma_min > 0.0 && gamma_min <= gamma_max && std::isfinite(gamma_max))) {
    throw ValidationError("gamma range must be a positive interval");
  }
  if (rotate && rotations.empty()) throw ValidationError("rotation enabled with no allowed rotations");
  for (int q : rotations) {
    if (q < 0 || q > 3) throw ValidationError("rotations are quarter turns in 0..3");
  }
  if (!(warp_amplitude >= 0.0 && std::isfinite(warp_amplitude))) {
    throw ValidationError("warp amplitude must be finite and >= 0");
  }
  if (warp_cell < 1) throw ValidationError("warp cell size must be >= 1");
  if (median_window < 1 || median_window % 2 == 0) throw ValidationError("median window must be odd");
  if (k < 1) throw ValidationError("neighbourhood radius k must be >= 1");
  if (recompute_weights) w3.validate();
}

AugmentSpec AugmentSpec::identity() {
  AugmentSpec spec;
  spec.mirror = spec.rotate = spec.warp = spec.gamma = spec.touching = false;
  return spec;
}

void TrainingSample::validate() const {
  validate_gray(image);
  require_same_shape(image, instances, "image vs instance map");
  require_same_shape(image, semantic, "image vs semantic map");
  require_same_shape(image, weights, "image vs weight map");
}

GrayImage normalize_intensity(const GrayImage& x) {
  if (x.size() == 0) return x;
  const double lo = x.minCoeff();
  const double hi = x.maxCoeff();
  if (hi == lo) return GrayImage::Zero(x.rows(), x.cols());
  return (x - lo) / (hi - lo);
}

GrayImage touching_modulation(const GrayImage& x, const SemanticMap& h, double a,
                              int median_window) {
  require_same_shape(x, h, "image vs semantic map");
  if (!(a >= -1.0 && a <= 1.0)) throw ValidationError("modulation factor a must lie in [-1, 1]");
  GrayImage out = x;
  if (a == 0.0 || !(h == kTouching).any()) return out;
  const GrayImage smoothed = median_filter(x, median_window);
  for (Index i = 0; i < x.size(); ++i) {
    if (h.data()[i] != kTouching) continue;
    const double v = (1.0 - a) * x.data()[i] + a * smoothed.data()[i];
    out.data()[i] = std::max(0.0, v);
  }
  return out;
}

namespace {

std::array<double, 4> catmull_rom_weights(double t) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  return {0.5 * (-t3 + 2 * t2 - t), 0.5 * (3 * t3 - 5 * t2 + 2), 0.5 * (-3 * t3 + 4 * t2 + t),
          0.5 * (t3 - t2)};
}

}  // namespace

std::pair<Grid<double>, Grid<double>> random_displacement_field(Index rows, Index cols, int cell,
                                                                double amplitude, AugmentRng& rng) {
  // Nodes cover [-1, n + 1] so every pixel has a full 4x4 support.
  const Index node_rows = (rows + cell - 1) / cell + 4;
  const Index node_cols = (cols + cell - 1) / cell + 4;
  Grid<double> node_dy(node_rows, node_cols);
  Grid<double> node_dx(node_rows, node_cols);
  for (Index i = 0; i < node_dy.size(); ++i) node_dy.data()[i] = rng.uniform(-amplitude, amplitude);
  for (Index i = 0; i < node_dx.size(); ++i) node_dx.data()[i] = rng.uniform(-amplitude, amplitude);

  Grid<double> dy(rows, cols);
  Grid<double> dx(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const double gr = static_cast<double>(r) / cell;
    const Index ir = static_cast<Index>(std::floor(gr));
    const auto wr = catmull_rom_weights(gr - static_cast<double>(ir));
    for (Index c = 0; c < cols; ++c) {
      const double gc = static_cast<double>(c) / cell;
      const Index ic = static_cast<Index>(std::floor(gc));
      const auto wc = catmull_rom_weights(gc - static_cast<double>(ic));
      double sy = 0.0;
      double sx = 0.0;
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
          const double weight = wr[i] * wc[j];
          sy += weight * node_dy(ir + i, ic + j);
          sx += weight * node_dx(ir + i, ic + j);
        }
      }
      dy(r, c) = sy;
      dx(r, c) = sx;
    }
  }
  return {std::move(dy), std::move(dx)};
}

GrayImage warp_bilinear(const GrayImage& x, const Grid<double>& dy, const Grid<double>& dx) {
  GrayImage out(x.rows(), x.cols());
  const double max_r = static_cast<double>(x.rows() - 1);
  const double max_c = static_cast<double>(x.cols() - 1);
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index c = 0; c < x.cols(); ++c) {
      const double sr = std::clamp(r + dy(r, c), 0.0, max_r);
      const double sc = std::clamp(c + dx(r, c), 0.0, max_c);
      const Index r0 = static_cast<Index>(std::floor(sr));
      const Index c0 = static_cast<Index>(std::floor(sc));
      const Index r1 = std::min<Index>(r0 + 1, x.rows() - 1);
      const Index c1 = std::min<Index>(c0 + 1, x.cols() - 1);
      const double fr = sr - static_cast<double>(r0);
      const double fc = sc - static_cast<double>(c0);
      out(r, c) = (1 - fr) * ((1 - fc) * x(r0, c0) + fc * x(r0, c1)) +
                  fr * ((1 - fc) * x(r1, c0) + fc * x(r1, c1));
    }
  }
  return out;
}

TrainingSample sample_augmentation(const TrainingSample& sample, const AugmentSpec& spec,
                                   AugmentRng& rng, AugmentDraw* draw) {
  spec.validate();
  sample.validate();
  TrainingSample out = sample;
  AugmentDraw record;

  const auto geometric = [&](auto&& op) {
    out.image = op(out.image);
    out.instances = op(out.instances);
    out.semantic = op(out.semantic);
    out.weights = op(out.weights);
  };

  if (spec.mirror) {
    const auto bits = rng.below(4);
    record.flip_horizontal = (bits & 1U) != 0;
    record.flip_vertical = (bits & 2U) != 0;
    if (record.flip_horizontal) geometric([](const auto& g) { return flip_horizontal(g); });
    if (record.flip_vertical) geometric([](const auto& g) { return flip_vertical(g); });
  }
  if (spec.rotate) {
    record.quarter_turns = spec.rotations[rng.below(spec.rotations.size())];
    const int turns = record.quarter_turns;
    if (turns != 0) geometric([turns](const auto& g) { return rotate90(g, turns); });
  }
  if (spec.warp) {
    const auto [dy, dx] = random_displacement_field(out.image.rows(), out.image.cols(),
                                                    spec.warp_cell, spec.warp_amplitude, rng);
    record.warped = true;
    out.image = warp_bilinear(out.image, dy, dx);
    out.instances = warp_nearest(out.instances, dy, dx);
    out.semantic = warp_nearest(out.semantic, dy, dx);
    out.weights = warp_nearest(out.weights, dy, dx);
  }
  if (spec.recompute_weights) {
    out.semantic = instance_to_semantic(out.instances, NeighborhoodSpec(spec.k));
    out.weights = w3_weight_map(out.instances, out.semantic, spec.w3);
  }
  if (spec.gamma) {
    record.gamma = rng.uniform(spec.gamma_min, spec.gamma_max);
    if (out.image.size() > 0) {
      const double lo = out.image.minCoeff();
      const double hi = out.image.maxCoeff();
      if (hi > lo) {
        out.image = lo + (hi - lo) * normalize_intensity(out.image).pow(record.gamma);
      }
    }
  }
  if (spec.touching) {
    record.a = rng.uniform(spec.a_min, spec.a_max);
    out.image = touching_modulation(out.image, out.semantic, record.a, spec.median_window);
  }
  if (draw != nullptr) *draw = record;
  return out;
}

TrainingSample sample_augmentation(const TrainingSample& sample, const AugmentSpec& spec,
                                   std::uint64_t index, AugmentDraw* draw) {
  AugmentRng rng(derive_seed(spec.seed, index));
  return sample_augmentation(sample, spec, rng, draw);
}

}  // namespace cellseg
