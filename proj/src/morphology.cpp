#include "cellseg/morphology.hpp"

#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <queue>

namespace cellseg {

namespace {

constexpr std::array<std::array<int, 2>, 8> kNeighbors8{
    {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}}};
constexpr std::array<std::array<int, 2>, 4> kNeighbors4{{{-1, 0}, {0, -1}, {0, 1}, {1, 0}}};

constexpr std::int64_t kInfinity = std::numeric_limits<std::int64_t>::max();

/// Exact rational num/den with den > 0.
struct Fraction {
  std::int64_t num;
  std::int64_t den;
};

bool less_equal(const Fraction& a, const Fraction& b) { return a.num * b.den <= b.num * a.den; }
bool less_than(const Fraction& a, std::int64_t q) { return a.num < q * a.den; }

/// One-dimensional lower envelope of parabolas (x - i)^2 + f[i]; infinite
/// entries are skipped. Writes exact squared distances into `out`.
void envelope_1d(const std::vector<std::int64_t>& f, std::vector<std::int64_t>& out,
                 std::vector<std::int64_t>& v, std::vector<Fraction>& z) {
  const auto n = static_cast<std::int64_t>(f.size());
  std::int64_t k = -1;
  for (std::int64_t q = 0; q < n; ++q) {
    if (f[q] == kInfinity) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      continue;
    }
    Fraction s{};
    while (true) {
      const std::int64_t p = v[k];
      s = {(f[q] + q * q) - (f[p] + p * p), 2 * (q - p)};
      if (k > 0 && less_equal(s, z[k])) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), kInfinity);
    return;
  }
  std::int64_t j = 0;
  for (std::int64_t q = 0; q < n; ++q) {
    while (j < k && less_than(z[j + 1], q)) ++j;
    const std::int64_t d = q - v[j];
    out[q] = d * d + f[v[j]];
  }
}

std::int64_t isqrt(std::int64_t value) {
  auto s = static_cast<std::int64_t>(std::sqrt(static_cast<double>(value)));
  while (s > 0 && s * s > value) --s;
  while ((s + 1) * (s + 1) <= value) ++s;
  return s;
}

// Zhang-Suen on a padded binary crop. Border of the crop stays 0.
void thin_zhang_suen(Grid<std::uint8_t>& img) {
  const Index rows = img.rows();
  const Index cols = img.cols();
  std::vector<Index> marked;
  Index remaining = (img != 0).count();
  bool changed = true;
  while (changed) {
    changed = false;
    for (int step = 0; step < 2; ++step) {
      marked.clear();
      for (Index r = 1; r + 1 < rows; ++r) {
        for (Index c = 1; c + 1 < cols; ++c) {
          if (img(r, c) == 0) continue;
          // P2..P9 clockwise from north.
          const int p2 = img(r - 1, c), p3 = img(r - 1, c + 1), p4 = img(r, c + 1),
                    p5 = img(r + 1, c + 1), p6 = img(r + 1, c), p7 = img(r + 1, c - 1),
                    p8 = img(r, c - 1), p9 = img(r - 1, c - 1);
          const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
          if (b < 2 || b > 6) continue;
          const int a = (p2 == 0 && p3 == 1) + (p3 == 0 && p4 == 1) + (p4 == 0 && p5 == 1) +
                        (p5 == 0 && p6 == 1) + (p6 == 0 && p7 == 1) + (p7 == 0 && p8 == 1) +
                        (p8 == 0 && p9 == 1) + (p9 == 0 && p2 == 1);
          if (a != 1) continue;
          if (step == 0) {
            if (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0) continue;
          } else {
            if (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0) continue;
          }
          marked.push_back(r * cols + c);
        }
      }
      if (marked.empty()) continue;
      // A 2x2 block is fully deletable; keep its first pixel so no instance vanishes.
      const bool would_vanish = static_cast<Index>(marked.size()) == remaining;
      for (std::size_t i = would_vanish ? 1 : 0; i < marked.size(); ++i) {
        img.data()[marked[i]] = 0;
      }
      remaining -= static_cast<Index>(marked.size()) - (would_vanish ? 1 : 0);
      changed = true;
    }
  }
}

struct Box {
  Index r0 = std::numeric_limits<Index>::max();
  Index c0 = std::numeric_limits<Index>::max();
  Index r1 = -1;
  Index c1 = -1;
};

}  // namespace

InstanceMap connected_components(const Mask& mask, Connectivity connectivity) {
  const Index rows = mask.rows();
  const Index cols = mask.cols();
  InstanceMap labels = InstanceMap::Zero(rows, cols);
  std::deque<Index> queue;
  Label next = 0;
  const bool eight = connectivity == Connectivity::Eight;
  for (Index start = 0; start < mask.size(); ++start) {
    if (!mask.data()[start] || labels.data()[start] != 0) continue;
    ++next;
    labels.data()[start] = next;
    queue.push_back(start);
    while (!queue.empty()) {
      const Index p = queue.front();
      queue.pop_front();
      const Index r = p / cols;
      const Index c = p % cols;
      const auto visit = [&](int dr, int dc) {
        const Index nr = r + dr;
        const Index nc = c + dc;
        if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) return;
        if (!mask(nr, nc) || labels(nr, nc) != 0) return;
        labels(nr, nc) = next;
        queue.push_back(nr * cols + nc);
      };
      if (eight) {
        for (const auto& d : kNeighbors8) visit(d[0], d[1]);
      } else {
        for (const auto& d : kNeighbors4) visit(d[0], d[1]);
      }
    }
  }
  return labels;
}

ContourSet extract_contours(const InstanceMap& instances) {
  const Index rows = instances.rows();
  const Index cols = instances.cols();
  ContourSet out{Mask::Constant(rows, cols, false), InstanceMap::Zero(rows, cols)};
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const Label label = instances(r, c);
      if (label == 0) continue;
      bool boundary = false;
      for (const auto& d : kNeighbors8) {
        const Index nr = r + d[0];
        const Index nc = c + d[1];
        if (nr < 0 || nr >= rows || nc < 0 || nc >= cols || instances(nr, nc) != label) {
          boundary = true;
          break;
        }
      }
      if (boundary) {
        out.mask(r, c) = true;
        out.owner(r, c) = label;
      }
    }
  }
  return out;
}

Grid<std::int64_t> squared_distance_transform(const Mask& source) {
  if (!source.any()) throw ValidationError("distance transform needs a non-empty source set");
  const Index rows = source.rows();
  const Index cols = source.cols();
  Grid<std::int64_t> out(rows, cols);

  // Columns: distance in rows to the nearest source in the same column.
  for (Index c = 0; c < cols; ++c) {
    std::int64_t last = -1;
    for (Index r = 0; r < rows; ++r) {
      if (source(r, c)) last = r;
      out(r, c) = last < 0 ? kInfinity : (r - last);
    }
    last = -1;
    for (Index r = rows - 1; r >= 0; --r) {
      if (source(r, c)) last = r;
      if (last >= 0 && (out(r, c) == kInfinity || last - r < out(r, c))) out(r, c) = last - r;
    }
    for (Index r = 0; r < rows; ++r) {
      if (out(r, c) != kInfinity) out(r, c) *= out(r, c);
    }
  }

  // Rows: lower envelope over the column results.
  std::vector<std::int64_t> f(static_cast<std::size_t>(cols));
  std::vector<std::int64_t> d(static_cast<std::size_t>(cols));
  std::vector<std::int64_t> v(static_cast<std::size_t>(cols));
  std::vector<Fraction> z(static_cast<std::size_t>(cols) + 1);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) f[c] = out(r, c);
    envelope_1d(f, d, v, z);
    for (Index c = 0; c < cols; ++c) out(r, c) = d[c];
  }
  return out;
}

DistanceField distance_transform(const Mask& source) {
  return squared_distance_transform(source).cast<double>().sqrt();
}

NearestContourIndex nearest_source_index(const Mask& source,
                                         const Grid<std::int64_t>& squared_distance,
                                         const Mask& where) {
  require_same_shape(source, squared_distance, "source vs distance field");
  require_same_shape(source, where, "source vs query mask");
  const Index rows = source.rows();
  const Index cols = source.cols();
  NearestContourIndex out{Grid<std::int32_t>::Constant(rows, cols, -1),
                          Grid<std::int32_t>::Constant(rows, cols, -1)};
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      if (!where(r, c)) continue;
      const std::int64_t d2 = squared_distance(r, c);
      const std::int64_t reach = isqrt(d2);
      const Index first = std::max<Index>(-reach, -r);
      const Index last = std::min<Index>(reach, rows - 1 - r);
      bool found = false;
      // Scanning rows upward then columns left-first yields the lexicographic minimum.
      for (Index dr = first; dr <= last && !found; ++dr) {
        const std::int64_t rest = d2 - dr * dr;
        const std::int64_t dc = isqrt(rest);
        if (dc * dc != rest) continue;
        for (const Index cc : {c - dc, c + dc}) {
          if (cc >= 0 && cc < cols && source(r + dr, cc)) {
            out.rows(r, c) = static_cast<std::int32_t>(r + dr);
            out.cols(r, c) = static_cast<std::int32_t>(cc);
            found = true;
            break;
          }
        }
      }
      if (!found) throw Error("nearest source lookup failed; distance field does not match source");
    }
  }
  return out;
}

NearestContourIndex nearest_contour_map(const ContourSet& contours) {
  if (!contours.mask.any()) throw ValidationError("nearest contour map needs a non-empty contour set");
  const auto d2 = squared_distance_transform(contours.mask);
  return nearest_source_index(contours.mask, d2,
                              Mask::Constant(contours.mask.rows(), contours.mask.cols(), true));
}

Mask skeletonize(const InstanceMap& instances) {
  const Index rows = instances.rows();
  const Index cols = instances.cols();
  std::map<Label, Box> boxes;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const Label label = instances(r, c);
      if (label == 0) continue;
      Box& b = boxes[label];
      b.r0 = std::min(b.r0, r);
      b.c0 = std::min(b.c0, c);
      b.r1 = std::max(b.r1, r);
      b.c1 = std::max(b.c1, c);
    }
  }

  Mask out = Mask::Constant(rows, cols, false);
  for (const auto& [label, box] : boxes) {
    const Index h = box.r1 - box.r0 + 1;
    const Index w = box.c1 - box.c0 + 1;
    Grid<std::uint8_t> crop = Grid<std::uint8_t>::Zero(h + 2, w + 2);
    crop.block(1, 1, h, w) =
        (instances.block(box.r0, box.c0, h, w) == label).cast<std::uint8_t>();
    thin_zhang_suen(crop);
    for (Index r = 0; r < h; ++r) {
      for (Index c = 0; c < w; ++c) {
        if (crop(r + 1, c + 1) != 0) out(box.r0 + r, box.c0 + c) = true;
      }
    }
  }
  return out;
}

InstanceMap watershed(const Grid<double>& topography, const InstanceMap& markers) {
  return watershed(topography, markers, Mask::Constant(markers.rows(), markers.cols(), true));
}

InstanceMap watershed(const Grid<double>& topography, const InstanceMap& markers, const Mask& mask) {
  require_same_shape(topography, markers, "topography vs markers");
  require_same_shape(mask, markers, "mask vs markers");
  if (!all_finite(topography)) throw ValidationError("watershed topography has non-finite values");
  if (!(markers > 0).any()) throw ValidationError("watershed needs at least one marker");

  struct Entry {
    double value;
    std::uint64_t order;
    Index index;
    bool operator>(const Entry& o) const {
      return value != o.value ? value > o.value : order > o.order;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> queue;
  const Index rows = markers.rows();
  const Index cols = markers.cols();
  InstanceMap labels = markers.max(0);
  std::uint64_t order = 0;
  for (Index i = 0; i < labels.size(); ++i) {
    if (labels.data()[i] > 0) queue.push({topography.data()[i], order++, i});
  }
  while (!queue.empty()) {
    const Entry e = queue.top();
    queue.pop();
    const Index r = e.index / cols;
    const Index c = e.index % cols;
    const Label label = labels.data()[e.index];
    for (const auto& d : kNeighbors8) {
      const Index nr = r + d[0];
      const Index nc = c + d[1];
      if (nr < 0 || nr >= rows || nc < 0 || nc >= cols || labels(nr, nc) != 0 || !mask(nr, nc)) continue;
      labels(nr, nc) = label;
      queue.push({topography(nr, nc), order++, nr * cols + nc});
    }
  }
  return labels;
}

}  // namespace cellseg
