#pragma once

#include <array>
#include <cstdint>

#include "cellseg/raster.hpp"

namespace cellseg {

/// Radius k of the (2k+1)x(2k+1) window used to detect touching pixels.
struct NeighborhoodSpec {
  int k = 2;

  NeighborhoodSpec() = default;
  explicit NeighborhoodSpec(int radius) : k(radius) {
    if (k < 1) throw ValidationError("neighbourhood radius k must be >= 1, got " + std::to_string(k));
  }
};

struct ClassCounts {
  std::array<std::int64_t, kNumClasses> n{};

  std::int64_t operator[](int c) const { return n[static_cast<std::size_t>(c)]; }
  std::int64_t total() const { return n[0] + n[1] + n[2]; }
};

/// Three-class ground truth: background (g = 0), touching (more than one
/// pixel of another instance inside the clipped window) and cell.
SemanticMap instance_to_semantic(const InstanceMap& g, NeighborhoodSpec neighborhood = {});

OneHotMap one_hot(const SemanticMap& h);

ClassCounts class_counts(const SemanticMap& h);

}  // namespace cellseg
