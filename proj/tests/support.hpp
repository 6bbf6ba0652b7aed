// Shared fixtures and brute-force oracles for the test binaries. Everything in
// here is written from the definitions, without calling the kernels it checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "cellseg/raster.hpp"

namespace testing {

using namespace cellseg;

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

/// Random ellipses painted in sequence; later blobs overwrite earlier ones, so
/// touching and partly hidden instances are common.
inline InstanceMap random_instance_map(Rng& rng, Index rows, Index cols, int blobs) {
  InstanceMap g = InstanceMap::Zero(rows, cols);
  for (int b = 1; b <= blobs; ++b) {
    const double cy = uniform(rng, 0, static_cast<double>(rows));
    const double cx = uniform(rng, 0, static_cast<double>(cols));
    const double ry = uniform(rng, 2, static_cast<double>(rows) / 4.0);
    const double rx = uniform(rng, 2, static_cast<double>(cols) / 4.0);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        const double u = (static_cast<double>(r) - cy) / ry;
        const double v = (static_cast<double>(c) - cx) / rx;
        if (u * u + v * v <= 1.0) g(r, c) = b;
      }
    }
  }
  return g;
}

inline Mask random_mask(Rng& rng, Index rows, Index cols, double density) {
  Mask m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, 0, 1) < density;
  return m;
}

/// Literal per-pixel transcription of the three-class rule.
inline SemanticMap oracle_semantic(const InstanceMap& g, int k) {
  SemanticMap h(g.rows(), g.cols());
  for (Index r = 0; r < g.rows(); ++r) {
    for (Index c = 0; c < g.cols(); ++c) {
      if (g(r, c) == 0) {
        h(r, c) = 0;
        continue;
      }
      int foreign = 0;
      for (Index rr = r - k; rr <= r + k; ++rr) {
        for (Index cc = c - k; cc <= c + k; ++cc) {
          if (rr < 0 || cc < 0 || rr >= g.rows() || cc >= g.cols()) continue;
          if (g(rr, cc) != g(r, c) && g(rr, cc) != 0) ++foreign;
        }
      }
      h(r, c) = foreign > 1 ? 2 : 1;
    }
  }
  return h;
}

/// Squared distance to the nearest source pixel by exhaustive scan.
inline Grid<std::int64_t> oracle_squared_distance(const Mask& source) {
  std::vector<std::pair<Index, Index>> points;
  for (Index r = 0; r < source.rows(); ++r) {
    for (Index c = 0; c < source.cols(); ++c) {
      if (source(r, c)) points.emplace_back(r, c);
    }
  }
  Grid<std::int64_t> d(source.rows(), source.cols());
  for (Index r = 0; r < source.rows(); ++r) {
    for (Index c = 0; c < source.cols(); ++c) {
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      for (const auto& [pr, pc] : points) {
        best = std::min<std::int64_t>(best, (r - pr) * (r - pr) + (c - pc) * (c - pc));
      }
      d(r, c) = best;
    }
  }
  return d;
}

/// Closest source pixel; the first one met in row-major order wins ties.
inline Pixel oracle_nearest(const Mask& source, Index r, Index c) {
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  Pixel arg{-1, -1};
  for (Index pr = 0; pr < source.rows(); ++pr) {
    for (Index pc = 0; pc < source.cols(); ++pc) {
      if (!source(pr, pc)) continue;
      const std::int64_t d = (r - pr) * (r - pr) + (c - pc) * (c - pc);
      if (d < best) {
        best = d;
        arg = {static_cast<std::int32_t>(pr), static_cast<std::int32_t>(pc)};
      }
    }
  }
  return arg;
}

/// Instance pixels with an 8-neighbour of another label or outside the raster.
inline Mask oracle_contour(const InstanceMap& g) {
  Mask m = Mask::Constant(g.rows(), g.cols(), false);
  for (Index r = 0; r < g.rows(); ++r) {
    for (Index c = 0; c < g.cols(); ++c) {
      if (g(r, c) == 0) continue;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const Index rr = r + dr;
          const Index cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= g.rows() || cc >= g.cols() || g(rr, cc) != g(r, c)) {
            m(r, c) = true;
          }
        }
      }
    }
  }
  return m;
}

/// 8-connected flood fill over equal mask values, returns a labelling.
inline InstanceMap oracle_components(const Mask& mask, bool eight) {
  InstanceMap out = InstanceMap::Zero(mask.rows(), mask.cols());
  Label next = 0;
  for (Index r = 0; r < mask.rows(); ++r) {
    for (Index c = 0; c < mask.cols(); ++c) {
      if (!mask(r, c) || out(r, c) != 0) continue;
      ++next;
      std::vector<std::pair<Index, Index>> stack{{r, c}};
      out(r, c) = next;
      while (!stack.empty()) {
        const auto [pr, pc] = stack.back();
        stack.pop_back();
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if ((dr == 0 && dc == 0) || (!eight && dr != 0 && dc != 0)) continue;
            const Index rr = pr + dr;
            const Index cc = pc + dc;
            if (rr < 0 || cc < 0 || rr >= mask.rows() || cc >= mask.cols()) continue;
            if (mask(rr, cc) && out(rr, cc) == 0) {
              out(rr, cc) = next;
              stack.emplace_back(rr, cc);
            }
          }
        }
      }
    }
  }
  return out;
}

/// True when the two labellings induce the same partition, 0 mapping to 0.
inline bool same_partition(const InstanceMap& a, const InstanceMap& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  std::map<Label, Label> ab, ba;
  for (Index i = 0; i < a.size(); ++i) {
    const Label x = a.data()[i];
    const Label y = b.data()[i];
    if ((x == 0) != (y == 0)) return false;
    if (auto [it, fresh] = ab.emplace(x, y); !fresh && it->second != y) return false;
    if (auto [it, fresh] = ba.emplace(y, x); !fresh && it->second != x) return false;
  }
  return true;
}

/// Weighted cross entropy as three nested loops.
inline double oracle_loss(const Planes<std::uint8_t>& y, const Planes<double>& z, const Grid<double>& w) {
  double total = 0.0;
  for (Index l = 0; l < y.channels(); ++l) {
    for (Index r = 0; r < y.rows(); ++r) {
      for (Index c = 0; c < y.cols(); ++c) {
        total -= w(r, c) * y[l](r, c) * std::log(std::max(z[l](r, c), 1e-12));
      }
    }
  }
  return total;
}

/// Rounding-error bound for comparing total(c w) with c total(w): both sides
/// are sums of n rounded products (pairwise summation, depth <= log2 n), then
/// one more rounding for the multiplication by c.
inline double linearity_bound(const Planes<std::uint8_t>& y, const Planes<double>& z, const Grid<double>& w,
                              double c) {
  double magnitude = 0.0;
  for (Index l = 0; l < y.channels(); ++l) {
    for (Index i = 0; i < w.size(); ++i) {
      if (y[l].data()[i]) magnitude += std::abs(w.data()[i] * std::log(std::max(z[l].data()[i], 1e-12)));
    }
  }
  const double depth = std::ceil(std::log2(static_cast<double>(std::max<Index>(w.size(), 2))));
  return 2.0 * (depth + 3.0) * 0x1.0p-53 * std::abs(c) * magnitude;
}

/// Random valid probability map.
inline Planes<double> random_probability_map(Rng& rng, Index channels, Index rows, Index cols) {
  Planes<double> z(channels, rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      double sum = 0.0;
      for (Index l = 0; l < channels; ++l) sum += z[l](r, c) = uniform(rng, 0.01, 1.0);
      for (Index l = 0; l < channels; ++l) z[l](r, c) /= sum;
    }
  }
  return z;
}

/// Direct four-case weight transcription. Distances come from exhaustive
/// scans; the skeleton is passed in because its algorithm is pinned separately.
inline Grid<double> oracle_w3(const InstanceMap& g, const SemanticMap& h, const Mask& skeleton,
                              double beta, double nu, double sigma) {
  std::int64_t n[3] = {0, 0, 0};
  for (Index i = 0; i < h.size(); ++i) ++n[h.data()[i]];
  const auto inv = [&](int l) { return n[l] > 0 ? nu / static_cast<double>(n[l]) : 0.0; };
  const auto phi = [&](double u) { return std::max(0.0, 1.0 - u / beta); };
  const Mask contour = oracle_contour(g);
  const Mask foreground = g != 0;
  const auto scan = [](const Mask& src, Index r, Index c) {
    double best = std::numeric_limits<double>::infinity();
    for (Index pr = 0; pr < src.rows(); ++pr) {
      for (Index pc = 0; pc < src.cols(); ++pc) {
        if (src(pr, pc)) best = std::min(best, std::hypot(double(r - pr), double(c - pc)));
      }
    }
    return best;
  };
  const auto contour_weight = [&](Index r, Index c) {
    if (h(r, c) == 2) return inv(2);
    return inv(1) + nu * phi(scan(skeleton, r, c));
  };
  Grid<double> w(g.rows(), g.cols());
  for (Index r = 0; r < g.rows(); ++r) {
    for (Index c = 0; c < g.cols(); ++c) {
      if (h(r, c) == 0) {
        w(r, c) = inv(0) + nu * phi(scan(foreground, r, c)) / static_cast<double>(n[1]);
      } else if (h(r, c) == 2) {
        w(r, c) = inv(2);
      } else if (contour(r, c)) {
        w(r, c) = contour_weight(r, c);
      } else {
        const Pixel z = oracle_nearest(contour, r, c);
        const double d = std::hypot(double(r - z.row), double(c - z.col));
        w(r, c) = inv(1) + contour_weight(z.row, z.col) * std::exp(-d * d / (sigma * sigma));
      }
    }
  }
  return w;
}

/// Largest |a-b| / max(|b|, tiny) over all entries.
inline double max_relative_error(const Grid<double>& a, const Grid<double>& b) {
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const double denom = std::max(std::abs(b.data()[i]), 1e-300);
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]) / denom);
  }
  return worst;
}

/// Touching rows of axis-aligned rectangles; clusters keep a background gap,
/// so every cell has a core of at least two columns.
inline InstanceMap rectangle_scene(Rng& rng, Index rows, Index cols) {
  InstanceMap g = InstanceMap::Zero(rows, cols);
  Label next = 0;
  const int clusters = uniform_int(rng, 1, 3);
  for (int k = 0; k < clusters; ++k) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      const Index h = uniform_int(rng, 6, 14);
      const Index r0 = uniform_int(rng, 1, static_cast<int>(rows - h - 1));
      const Index c0 = uniform_int(rng, 1, static_cast<int>(cols / 2));
      std::vector<Index> widths(static_cast<std::size_t>(uniform_int(rng, 1, 3)));
      for (auto& w : widths) w = uniform_int(rng, 6, 12);
      Index total = 0;
      for (Index w : widths) total += w;
      if (c0 + total >= cols - 1) continue;
      const Index top = std::max<Index>(r0 - 4, 0);
      const Index left = std::max<Index>(c0 - 4, 0);
      const Index bottom = std::min<Index>(r0 + h + 4, rows);
      const Index right = std::min<Index>(c0 + total + 4, cols);
      if ((g.block(top, left, bottom - top, right - left) != 0).any()) continue;
      Index c = c0;
      for (Index w : widths) {
        g.block(r0, c, h, w) = ++next;
        c += w;
      }
      break;
    }
  }
  return g;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cellseg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
