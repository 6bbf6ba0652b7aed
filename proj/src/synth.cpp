#include "cellseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "cellseg/augment.hpp"
#include "cellseg/gtprep.hpp"
#include "cellseg/morphology.hpp"

namespace cellseg {

namespace {

struct Ellipse {
  double cy, cx, a, b, angle;

  /// Normalised radial coordinate; < 1 inside.
  double rho(double y, double x) const {
    const double dy = y - cy;
    const double dx = x - cx;
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    const double u = ca * dx + sa * dy;
    const double v = -sa * dx + ca * dy;
    return std::sqrt((u / a) * (u / a) + (v / b) * (v / b));
  }
};

struct Cluster {
  double cy, cx, extent;
  std::vector<Ellipse> cells;
};

double gaussian(AugmentRng& rng) {
  const double u1 = std::max(rng.uniform(), 0x1.0p-53);
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool try_place_cluster(const SynthSpec& spec, AugmentRng& rng, const std::vector<Cluster>& placed,
                       Cluster& out) {
  const int n = spec.min_cells + static_cast<int>(rng.below(
                                      static_cast<std::uint64_t>(spec.max_cells - spec.min_cells + 1)));
  const double radius = rng.uniform(spec.min_radius, spec.max_radius);
  // Neighbouring centres sit `spacing` radii apart: wide contacts near the
  // lower bound, narrow ones or small gaps near the upper.
  const double spacing = rng.uniform(spec.min_spacing, spec.max_spacing);
  const double spread = n == 1 ? 0.0 : 0.5 * spacing * radius / std::sin(std::numbers::pi / n);
  out.extent = spread + radius * 1.3 + 1.0;
  out.cy = rng.uniform(out.extent + 2.0, static_cast<double>(spec.rows) - out.extent - 2.0);
  out.cx = rng.uniform(out.extent + 2.0, static_cast<double>(spec.cols) - out.extent - 2.0);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  out.cells.clear();
  for (int j = 0; j < n; ++j) {
    const double theta = phase + 2.0 * std::numbers::pi * j / n;
    const double r = radius * rng.uniform(0.9, 1.1);
    out.cells.push_back({out.cy + spread * std::sin(theta), out.cx + spread * std::cos(theta),
                         r * rng.uniform(1.0, 1.3), r * rng.uniform(0.75, 1.0),
                         rng.uniform(0.0, std::numbers::pi)});
  }
  if (out.cy - out.extent < 1.0 || out.cx - out.extent < 1.0 ||
      out.cy + out.extent > static_cast<double>(spec.rows) - 2.0 ||
      out.cx + out.extent > static_cast<double>(spec.cols) - 2.0) {
    return false;
  }
  for (const auto& other : placed) {
    const double d = std::hypot(out.cy - other.cy, out.cx - other.cx);
    if (d < out.extent + other.extent + 4.0) return false;
  }
  return true;
}

InstanceMap rasterize(const SynthSpec& spec, const std::vector<Cluster>& clusters) {
  InstanceMap g = InstanceMap::Zero(spec.rows, spec.cols);
  Label next = 0;
  for (const auto& cluster : clusters) {
    const Label first = next + 1;
    next += static_cast<Label>(cluster.cells.size());
    const Index r0 = std::max<Index>(0, static_cast<Index>(cluster.cy - cluster.extent));
    const Index r1 = std::min<Index>(spec.rows - 1, static_cast<Index>(cluster.cy + cluster.extent) + 1);
    const Index c0 = std::max<Index>(0, static_cast<Index>(cluster.cx - cluster.extent));
    const Index c1 = std::min<Index>(spec.cols - 1, static_cast<Index>(cluster.cx + cluster.extent) + 1);
    for (Index r = r0; r <= r1; ++r) {
      for (Index c = c0; c <= c1; ++c) {
        double best = 1.0;
        Label owner = 0;
        for (std::size_t j = 0; j < cluster.cells.size(); ++j) {
          const double rho = cluster.cells[j].rho(static_cast<double>(r), static_cast<double>(c));
          if (rho < best) {
            best = rho;
            owner = first + static_cast<Label>(j);
          }
        }
        if (owner != 0) g(r, c) = owner;
      }
    }
  }
  return g;
}

/// Each instance is one 8-connected piece whose cell-class pixels are also one piece.
bool well_separated(const InstanceMap& g, const SemanticMap& h) {
  if (g.size() == 0 || g.maxCoeff() == 0) return false;
  for (Label label = 1; label <= g.maxCoeff(); ++label) {
    const Mask region = g == label;
    if (!region.any()) return false;
    if (connected_components(region).maxCoeff() != 1) return false;
    const Mask core = region && (h == kCell);
    if (!core.any()) return false;
    if (connected_components(core).maxCoeff() != 1) return false;
  }
  return true;
}

GrayImage render(const InstanceMap& g, const SemanticMap& h, double noise, AugmentRng& rng) {
  const ContourSet contours = extract_contours(g);
  GrayImage x(g.rows(), g.cols());
  for (Index i = 0; i < x.size(); ++i) {
    double v = 0.1;
    if (h.data()[i] == kTouching) {
      v = 0.75;
    } else if (contours.mask.data()[i]) {
      v = 0.6;
    } else if (h.data()[i] == kCell) {
      v = 0.4;
    }
    x.data()[i] = v;
  }
  x = gaussian_blur(x, 0.8);
  for (Index i = 0; i < x.size(); ++i) {
    const double v = std::clamp(x.data()[i] + noise * gaussian(rng), 0.0, 1.0);
    x.data()[i] = std::round(v * 60000.0);
  }
  return x;
}

}  // namespace

void SynthSpec::validate() const {
  if (rows < 16 || cols < 16) throw ValidationError("synthetic scenes need at least 16x16 pixels");
  if (clusters < 1) throw ValidationError("synthetic scenes need at least one cluster");
  if (min_cells < 1 || max_cells < min_cells) throw ValidationError("invalid cells-per-cluster range");
  if (!(min_radius >= 3.0 && max_radius >= min_radius)) throw ValidationError("invalid radius range");
  if (!(min_spacing > 0.0 && max_spacing >= min_spacing)) throw ValidationError("invalid spacing range");
  if (!(noise >= 0.0)) throw ValidationError("noise must be >= 0");
  if (k < 1) throw ValidationError("k must be >= 1");
}

SynthScene generate_scene(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  AugmentRng rng(derive_seed(seed, 0x5EED));
  for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
    std::vector<Cluster> clusters;
    int failures = 0;
    while (static_cast<int>(clusters.size()) < spec.clusters && failures < 500) {
      Cluster c;
      if (try_place_cluster(spec, rng, clusters, c)) {
        clusters.push_back(std::move(c));
      } else {
        ++failures;
      }
    }
    if (clusters.empty()) continue;
    InstanceMap g = rasterize(spec, clusters);
    const SemanticMap h = instance_to_semantic(g, NeighborhoodSpec(spec.k));
    if (!well_separated(g, h)) continue;
    return {render(g, h, spec.noise, rng), std::move(g)};
  }
  throw Error("could not generate a well-separated synthetic scene; relax the scene parameters");
}

Grid<double> gaussian_blur(const Grid<double>& g, double sigma) {
  if (!(sigma > 0.0)) return g;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (double& k : kernel) k /= total;

  const Index rows = g.rows();
  const Index cols = g.cols();
  Grid<double> tmp(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        s += kernel[static_cast<std::size_t>(i + radius)] * g(r, detail::reflect_index(c + i, cols));
      }
      tmp(r, c) = s;
    }
  }
  Grid<double> out(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        s += kernel[static_cast<std::size_t>(i + radius)] * tmp(detail::reflect_index(r + i, rows), c);
      }
      out(r, c) = s;
    }
  }
  return out;
}

ProbabilityMap oracle_probability_map(const SemanticMap& h, double blur_sigma) {
  validate_semantic_map(h);
  ProbabilityMap z(kNumClasses, h.rows(), h.cols());
  for (int l = 0; l < kNumClasses; ++l) {
    z[l] = (h == l).cast<double>();
    if (blur_sigma > 0.0) z[l] = gaussian_blur(z[l], blur_sigma);
  }
  if (blur_sigma > 0.0) {
    const Grid<double> total = z[0] + z[1] + z[2];
    for (int l = 0; l < kNumClasses; ++l) z[l] = (z[l] / total).min(1.0).max(0.0);
  }
  return z;
}

}  // namespace cellseg
