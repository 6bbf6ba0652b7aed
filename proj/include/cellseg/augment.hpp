#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cellseg/raster.hpp"
#include "cellseg/weights.hpp"

namespace cellseg {

/// Seedable generator with a platform-independent stream: mt19937_64 raw
/// output, uniform reals from the top 53 bits, integers by rejection.
class AugmentRng {
 public:
  explicit AugmentRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 mix of (seed, draw index); the seed of draw `index`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

struct AugmentSpec {
  std::uint64_t seed = 0;

  bool mirror = true;
  bool rotate = true;
  bool warp = true;
  bool gamma = true;
  bool touching = true;

  double a_min = -1.0;
  double a_max = 1.0;
  double gamma_min = 0.7;
  double gamma_max = 1.5;
  std::vector<int> rotations{0, 1, 2, 3};  ///< allowed quarter turns
  double warp_amplitude = 10.0;            ///< max node displacement, pixels
  int warp_cell = 64;                      ///< displacement grid spacing, pixels
  int median_window = 7;

  bool recompute_weights = false;
  int k = 2;
  W3Params w3{};

  void validate() const;
  static AugmentSpec identity();
};

struct TrainingSample {
  GrayImage image;
  InstanceMap instances;
  SemanticMap semantic;
  WeightMap weights;

  void validate() const;
};

/// What a single call to sample_augmentation drew.
struct AugmentDraw {
  bool flip_horizontal = false;
  bool flip_vertical = false;
  int quarter_turns = 0;
  bool warped = false;
  double gamma = 1.0;
  double a = 0.0;
};

/// Min-max rescale to [0, 1]; a constant image maps to zeros.
GrayImage normalize_intensity(const GrayImage& x);

/// Replaces touching pixels by (1 - a) x + a median(x), clamped at 0. Other
/// pixels are copied bit for bit.
GrayImage touching_modulation(const GrayImage& x, const SemanticMap& h, double a,
                              int median_window = 7);

/// Smooth random displacement field (dy, dx) on a `cell`-spaced node grid,
/// upsampled with Catmull-Rom bicubic interpolation.
std::pair<Grid<double>, Grid<double>> random_displacement_field(Index rows, Index cols, int cell,
                                                                double amplitude, AugmentRng& rng);

/// Resamples at (r + dy, c + dx), clamped to the frame. Bilinear.
GrayImage warp_bilinear(const GrayImage& x, const Grid<double>& dy, const Grid<double>& dx);

/// Resamples at the rounded displaced coordinate; never invents values.
template <typename Scalar>
Grid<Scalar> warp_nearest(const Grid<Scalar>& g, const Grid<double>& dy, const Grid<double>& dx) {
  Grid<Scalar> out(g.rows(), g.cols());
  for (Index r = 0; r < g.rows(); ++r) {
    for (Index c = 0; c < g.cols(); ++c) {
      const double sr = std::clamp(r + dy(r, c), 0.0, static_cast<double>(g.rows() - 1));
      const double sc = std::clamp(c + dx(r, c), 0.0, static_cast<double>(g.cols() - 1));
      out(r, c) = g(static_cast<Index>(std::lround(sr)), static_cast<Index>(std::lround(sc)));
    }
  }
  return out;
}

/// One augmentation draw: mirror, rotation, elastic warp (all rasters), gamma
/// (image only), then touching modulation. Draws happen in that order, one per
/// enabled transform.
TrainingSample sample_augmentation(const TrainingSample& sample, const AugmentSpec& spec,
                                   AugmentRng& rng, AugmentDraw* draw = nullptr);

/// Draw number `index` of the stream seeded by `spec.seed`.
TrainingSample sample_augmentation(const TrainingSample& sample, const AugmentSpec& spec,
                                   std::uint64_t index, AugmentDraw* draw = nullptr);

}  // namespace cellseg
