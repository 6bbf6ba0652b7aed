#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cellseg/raster.hpp"

namespace cellseg {

/// Probabilities are clamped below at this value before the logarithm.
inline constexpr double kLogFloor = 1e-12;

struct LossReport {
  double total = 0.0;
  std::vector<double> per_class;
  std::int64_t pixel_count = 0;
};

/// -sum_l sum_p w(p) y_l(p) ln max(z_l(p), kLogFloor), unnormalised.
/// Per-pixel terms are reduced with fixed-order pairwise summation, so the
/// result is bit-reproducible.
LossReport weighted_cross_entropy(const OneHotMap& y, const ProbabilityMap& z, const WeightMap& w);

/// Analytic dL/dz_l(p) = -w(p) y_l(p) / max(z_l(p), kLogFloor).
ProbabilityMap weighted_cross_entropy_gradient(const OneHotMap& y, const ProbabilityMap& z,
                                               const WeightMap& w);

/// Central finite differences of the loss with respect to each z_l(p), with
/// each entry perturbed independently (no renormalisation). Meant for checking
/// externally computed gradients on small inputs.
ProbabilityMap finite_difference_gradient(const OneHotMap& y, const ProbabilityMap& z,
                                          const WeightMap& w, double step = 1e-6);

/// Per-class mean of several probability maps followed by a softmax over classes.
ProbabilityMap combine_probability_maps(std::span<const ProbabilityMap> maps);

/// Pairwise (cascade) sum with a fixed split order.
double pairwise_sum(std::span<const double> values);

}  // namespace cellseg
