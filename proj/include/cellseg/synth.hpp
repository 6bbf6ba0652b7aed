#pragma once

#include <cstdint>

#include "cellseg/raster.hpp"

namespace cellseg {

/// Random scenes of touching ellipse clusters with known instance labels.
struct SynthSpec {
  Index rows = 128;
  Index cols = 128;
  int clusters = 3;
  int min_cells = 2;  ///< cells per cluster
  int max_cells = 4;
  double min_radius = 9.0;
  double max_radius = 13.0;
  double min_spacing = 1.5;  ///< neighbour centre distance, in radii
  double max_spacing = 2.0;
  double noise = 0.03;   ///< additive Gaussian noise on the [0,1] intensity scale
  int k = 2;             ///< neighbourhood radius used to accept a scene
  int max_attempts = 200;

  void validate() const;
};

struct SynthScene {
  GrayImage image;  ///< integral 16-bit intensities
  InstanceMap instances;
};

/// Deterministic in (spec, seed). Every accepted scene has, for each cell, a
/// non-empty and 8-connected set of cell-class pixels, so touching bands
/// separate adjacent cells.
SynthScene generate_scene(const SynthSpec& spec, std::uint64_t seed);

/// Separable Gaussian blur with reflect borders and a 3-sigma kernel.
Grid<double> gaussian_blur(const Grid<double>& g, double sigma);

/// One-hot encoding of `h` as probabilities, optionally blurred per channel
/// and renormalised.
ProbabilityMap oracle_probability_map(const SemanticMap& h, double blur_sigma = 0.0);

}  // namespace cellseg
