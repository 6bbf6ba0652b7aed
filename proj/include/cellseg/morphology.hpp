#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "cellseg/raster.hpp"

namespace cellseg {

enum class Connectivity { Four = 4, Eight = 8 };

/// Labels maximal connected regions of `mask` as 1..m. Labels follow the
/// row-major order of each region's first pixel.
InstanceMap connected_components(const Mask& mask, Connectivity connectivity = Connectivity::Eight);

/// Instance boundary pixels: an instance pixel whose 8-neighbourhood holds a
/// different label or leaves the image.
struct ContourSet {
  Mask mask;
  InstanceMap owner;  ///< instance label on contour pixels, 0 elsewhere

  Index size() const { return mask.count(); }
};

ContourSet extract_contours(const InstanceMap& instances);

/// Squared Euclidean distance to the nearest `source` pixel, exact in integer
/// arithmetic (separable lower-envelope transform). Throws on an empty source.
Grid<std::int64_t> squared_distance_transform(const Mask& source);

/// Exact Euclidean distance to the nearest `source` pixel.
DistanceField distance_transform(const Mask& source);

/// Per-pixel coordinates of the closest source pixel. Entries outside the
/// evaluated region hold -1.
struct NearestContourIndex {
  Grid<std::int32_t> rows;
  Grid<std::int32_t> cols;

  Pixel at(Index r, Index c) const { return {rows(r, c), cols(r, c)}; }
};

/// Closest source pixel for every pixel where `where` is set. Ties resolve to
/// the lexicographically smallest (row, col). `squared_distance` must be the
/// transform of `source`.
NearestContourIndex nearest_source_index(const Mask& source,
                                         const Grid<std::int64_t>& squared_distance,
                                         const Mask& where);

NearestContourIndex nearest_contour_map(const ContourSet& contours);

/// Zhang-Suen thinning applied to each instance on its own mask; the union of
/// the per-instance skeletons is returned.
Mask skeletonize(const InstanceMap& instances);

/// Marker-controlled priority flood over 8-neighbours. Pixels are claimed in
/// ascending topography order, FIFO among equal values, seeds in row-major
/// order. Marker pixels keep their labels.
InstanceMap watershed(const Grid<double>& topography, const InstanceMap& markers);

/// As above, but flooding never enters pixels outside `mask`; those stay 0
/// unless they are markers.
InstanceMap watershed(const Grid<double>& topography, const InstanceMap& markers, const Mask& mask);

namespace detail {

/// Half-sample symmetric reflection of `i` into [0, n).
inline Index reflect_index(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

}  // namespace detail

/// Exact sliding-window median with reflect padding (d c b a | a b c d).
template <typename Scalar>
Grid<Scalar> median_filter(const Grid<Scalar>& image, int window) {
  if (window < 1 || window % 2 == 0) {
    throw ValidationError("median window must be odd and >= 1, got " + std::to_string(window));
  }
  const Index rows = image.rows();
  const Index cols = image.cols();
  const int half = window / 2;
  Grid<Scalar> out(rows, cols);
  if (image.size() == 0) return out;

  // Reflected column indices are shared by every row.
  std::vector<Index> col_index(static_cast<std::size_t>(cols + 2 * half));
  for (Index c = -half; c < cols + half; ++c) {
    col_index[static_cast<std::size_t>(c + half)] = detail::reflect_index(c, cols);
  }
  std::vector<Scalar> values(static_cast<std::size_t>(window) * window);
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      std::size_t n = 0;
      for (int dr = -half; dr <= half; ++dr) {
        const auto row = image.row(detail::reflect_index(r + dr, rows));
        for (int dc = 0; dc < window; ++dc) {
          values[n++] = row(col_index[static_cast<std::size_t>(c + dc)]);
        }
      }
      std::nth_element(values.begin(), mid, values.end());
      out(r, c) = *mid;
    }
  }
  return out;
}

}  // namespace cellseg
