#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "cellseg/raster.hpp"

namespace cellseg {

/// Class-assignment thresholds of the TH rule.
struct ThresholdParams {
  double gamma1 = 0.5;  ///< cell
  double gamma2 = 0.5;  ///< touching

  void validate() const;
};

/// Marker thresholds of the WT rule.
struct WatershedParams {
  double tau0 = 0.8;  ///< background
  double tau1 = 0.8;  ///< cell

  void validate() const;
};

enum class DecodeStrategy { Map, Threshold, Watershed };

DecodeStrategy parse_strategy(std::string_view name);
std::string to_string(DecodeStrategy strategy);

struct DecodeOptions {
  DecodeStrategy strategy = DecodeStrategy::Watershed;
  std::optional<ThresholdParams> threshold;  ///< required for Threshold
  WatershedParams watershed{};
  std::int64_t min_instance_area = 0;
};

/// Per-pixel argmax; ties go to the larger class id.
SemanticMap decode_map(const ProbabilityMap& z);

/// 2 if z2 >= gamma2, else 1 if z1 >= gamma1, else 0.
SemanticMap decode_threshold(const ProbabilityMap& z, const ThresholdParams& params);

/// Labels 8-connected cell regions 1..m and hands each touching pixel the label
/// of the nearest cell-region boundary pixel (lexicographic tie-break).
InstanceMap semantic_to_instances(const SemanticMap& hhat);

/// Marker watershed on z2 - z1. Background markers (z0 >= tau0) and cell
/// markers (z1 >= tau1) are labelled as separate 8-connected components; a
/// pixel meeting both thresholds joins the class with the larger probability.
/// Basins flooded from background markers become 0.
InstanceMap decode_watershed(const ProbabilityMap& z, const WatershedParams& params = {});

/// Sets instances smaller than `min_area` pixels to background.
InstanceMap remove_small_instances(const InstanceMap& g, std::int64_t min_area);

InstanceMap decode(const ProbabilityMap& z, const DecodeOptions& options);

}  // namespace cellseg
