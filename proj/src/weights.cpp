#include "cellseg/weights.hpp"

#include <cmath>

#include "cellseg/gtprep.hpp"
#include "cellseg/morphology.hpp"

namespace cellseg {

void W3Params::validate() const {
  const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(beta)) throw ValidationError("beta must be > 0, got " + std::to_string(beta));
  if (!positive(nu)) throw ValidationError("nu must be > 0, got " + std::to_string(nu));
  if (!positive(sigma)) throw ValidationError("sigma must be > 0, got " + std::to_string(sigma));
}

WeightMap w3_weight_map(const InstanceMap& g, const SemanticMap& h, const W3Params& params) {
  params.validate();
  require_same_shape(g, h, "instance map vs semantic map");
  validate_instance_map(g);
  validate_semantic_map(h);
  if (((g == 0) != (h == kBackground)).any()) {
    throw ValidationError("semantic map background does not match instance map background");
  }
  const ClassCounts counts = class_counts(h);
  if (counts[kCell] == 0) throw ValidationError("weight map needs at least one cell pixel (n1 = 0)");

  const double nu = params.nu;
  const auto reciprocal = [&](int l) {
    return counts[l] > 0 ? nu / static_cast<double>(counts[l]) : 0.0;
  };
  const double base0 = reciprocal(kBackground);
  const double base1 = reciprocal(kCell);
  const double base2 = reciprocal(kTouching);

  const Index rows = g.rows();
  const Index cols = g.cols();
  const ContourSet contours = extract_contours(g);
  const Mask foreground = g != 0;
  const DistanceField to_foreground = distance_transform(foreground);
  const DistanceField to_skeleton = distance_transform(skeletonize(g));
  const Grid<std::int64_t> to_contour_sq = squared_distance_transform(contours.mask);

  WeightMap w = WeightMap::Zero(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      switch (h(r, c)) {
        case kBackground:
          w(r, c) = base0 + phi_beta(to_foreground(r, c), params.beta) * base1;
          break;
        case kTouching:
          w(r, c) = base2;
          break;
        default:
          if (contours.mask(r, c)) w(r, c) = base1 + nu * phi_beta(to_skeleton(r, c), params.beta);
          break;
      }
    }
  }

  // Interior cell pixels reference the final weight of their nearest contour pixel.
  const Mask interior = (h == kCell) && !contours.mask;
  if (!interior.any()) return w;
  const NearestContourIndex nearest = nearest_source_index(contours.mask, to_contour_sq, interior);
  const double inv_sigma_sq = 1.0 / (params.sigma * params.sigma);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      if (!interior(r, c)) continue;
      const Pixel z = nearest.at(r, c);
      const double d2 = static_cast<double>(to_contour_sq(r, c));
      w(r, c) = base1 + w(z.row, z.col) * std::exp(-d2 * inv_sigma_sq);
    }
  }
  return w;
}

WeightMap balanced_weight_map(const SemanticMap& h) {
  const ClassCounts counts = class_counts(h);
  WeightMap w(h.rows(), h.cols());
  for (Index i = 0; i < h.size(); ++i) {
    w.data()[i] = 1.0 / static_cast<double>(counts[h.data()[i]]);
  }
  return w;
}

}  // namespace cellseg
