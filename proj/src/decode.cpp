#include "cellseg/decode.hpp"

#include <unordered_map>

#include "cellseg/morphology.hpp"

namespace cellseg {

namespace {

bool unit_interval(double v) { return v >= 0.0 && v <= 1.0; }

void check_three_class(const ProbabilityMap& z) {
  require_channels(z, kNumClasses);
  validate_probability_map(z);
}

}  // namespace

void ThresholdParams::validate() const {
  if (!unit_interval(gamma1) || !unit_interval(gamma2)) {
    throw ValidationError("gamma1 and gamma2 must lie in [0, 1]");
  }
}

void WatershedParams::validate() const {
  if (!unit_interval(tau0) || !unit_interval(tau1)) {
    throw ValidationError("tau0 and tau1 must lie in [0, 1]");
  }
}

DecodeStrategy parse_strategy(std::string_view name) {
  if (name == "map" || name == "MAP") return DecodeStrategy::Map;
  if (name == "th" || name == "TH") return DecodeStrategy::Threshold;
  if (name == "wt" || name == "WT") return DecodeStrategy::Watershed;
  throw ValidationError("unknown strategy '" + std::string(name) + "' (expected map, th or wt)");
}

std::string to_string(DecodeStrategy strategy) {
  switch (strategy) {
    case DecodeStrategy::Map: return "map";
    case DecodeStrategy::Threshold: return "th";
    case DecodeStrategy::Watershed: return "wt";
  }
  return "unknown";
}

SemanticMap decode_map(const ProbabilityMap& z) {
  check_three_class(z);
  SemanticMap h(z.rows(), z.cols());
  for (Index i = 0; i < h.size(); ++i) {
    const double z0 = z[0].data()[i];
    const double z1 = z[1].data()[i];
    const double z2 = z[2].data()[i];
    if (z2 >= z1 && z2 >= z0) {
      h.data()[i] = kTouching;
    } else if (z1 >= z0) {
      h.data()[i] = kCell;
    } else {
      h.data()[i] = kBackground;
    }
  }
  return h;
}

SemanticMap decode_threshold(const ProbabilityMap& z, const ThresholdParams& params) {
  params.validate();
  check_three_class(z);
  SemanticMap h(z.rows(), z.cols());
  for (Index i = 0; i < h.size(); ++i) {
    if (z[2].data()[i] >= params.gamma2) {
      h.data()[i] = kTouching;
    } else if (z[1].data()[i] >= params.gamma1) {
      h.data()[i] = kCell;
    } else {
      h.data()[i] = kBackground;
    }
  }
  return h;
}

InstanceMap semantic_to_instances(const SemanticMap& hhat) {
  validate_semantic_map(hhat);
  InstanceMap g = connected_components(hhat == kCell, Connectivity::Eight);
  const Mask touching = hhat == kTouching;
  if (!touching.any()) return g;
  if (!(hhat == kCell).any()) {
    throw ValidationError("touching pixels present but no cell pixels to assign them to");
  }
  const ContourSet contours = extract_contours(g);
  const auto d2 = squared_distance_transform(contours.mask);
  const NearestContourIndex nearest = nearest_source_index(contours.mask, d2, touching);
  for (Index r = 0; r < g.rows(); ++r) {
    for (Index c = 0; c < g.cols(); ++c) {
      if (!touching(r, c)) continue;
      const Pixel p = nearest.at(r, c);
      g(r, c) = g(p.row, p.col);
    }
  }
  return g;
}

InstanceMap decode_watershed(const ProbabilityMap& z, const WatershedParams& params) {
  params.validate();
  check_three_class(z);
  const auto& z0 = z[0];
  const auto& z1 = z[1];
  const Mask background_hit = z0 >= params.tau0;
  const Mask cell_hit = z1 >= params.tau1;
  const Mask background_marker = background_hit && !(cell_hit && z1 >= z0);
  const Mask cell_marker = cell_hit && !background_marker;
  if (!background_marker.any() && !cell_marker.any()) {
    throw ValidationError("watershed decoding found no markers; lower tau0/tau1");
  }

  // Background is whatever the background markers or the per-pixel argmax
  // call background; only cell markers flood, and only into the rest.
  const Mask background = background_marker || ((decode_map(z) == kBackground) && !cell_marker);
  const InstanceMap markers = connected_components(cell_marker, Connectivity::Eight);
  if (!cell_marker.any()) return InstanceMap::Zero(z.rows(), z.cols());
  return watershed(z[2] - z1, markers, !background);
}

InstanceMap remove_small_instances(const InstanceMap& g, std::int64_t min_area) {
  if (min_area <= 0) return g;
  std::unordered_map<Label, std::int64_t> area;
  for (Index i = 0; i < g.size(); ++i) {
    if (g.data()[i] != 0) ++area[g.data()[i]];
  }
  InstanceMap out = g;
  for (Index i = 0; i < out.size(); ++i) {
    const Label l = out.data()[i];
    if (l != 0 && area[l] < min_area) out.data()[i] = 0;
  }
  return out;
}

InstanceMap decode(const ProbabilityMap& z, const DecodeOptions& options) {
  if (options.min_instance_area < 0) throw ValidationError("min instance area must be >= 0");
  InstanceMap g;
  switch (options.strategy) {
    case DecodeStrategy::Map:
      g = semantic_to_instances(decode_map(z));
      break;
    case DecodeStrategy::Threshold:
      if (!options.threshold) throw ValidationError("missing thresholds: TH decoding needs gamma1 and gamma2");
      g = semantic_to_instances(decode_threshold(z, *options.threshold));
      break;
    case DecodeStrategy::Watershed:
      g = decode_watershed(z, options.watershed);
      break;
  }
  return remove_small_instances(g, options.min_instance_area);
}

}  // namespace cellseg
