#pragma once

#include <algorithm>

#include "cellseg/raster.hpp"

namespace cellseg {

/// Saturation distance, amplitude and Gaussian width of the contour-aware
/// weight map. Distances are in pixels.
struct W3Params {
  double beta = 30.0;
  double nu = 1.0;
  double sigma = 5.0;

  void validate() const;
};

/// Rectified inverse ramp max(0, 1 - u / beta).
inline double phi_beta(double u, double beta) { return std::max(0.0, 1.0 - u / beta); }

/// Triplex weight map.
///
/// - background: nu/n0 + nu * phi_beta(distance to the nearest foreground pixel) / n1
/// - cell contour pixel: nu/n1 + nu * phi_beta(distance to the union of skeletons)
/// - cell interior pixel: nu/n1 + w(nearest contour pixel) * exp(-d^2 / sigma^2),
///   d being the distance to that contour pixel
/// - touching pixel: nu/n2
///
/// Reciprocals of absent classes contribute 0; a map without cell pixels is
/// rejected. `h` must be the semantic map derived from `g`.
WeightMap w3_weight_map(const InstanceMap& g, const SemanticMap& h, const W3Params& params = {});

/// Class-balance baseline: 1 / n_{h(p)}.
WeightMap balanced_weight_map(const SemanticMap& h);

}  // namespace cellseg
