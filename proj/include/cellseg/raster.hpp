#pragma once

#include <Eigen/Core>

#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cellseg/errors.hpp"

namespace cellseg {

using Eigen::Index;

/// Row-major 2-D raster. Row index is y, column index is x.
template <typename Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Label = std::int32_t;

using GrayImage = Grid<double>;
using WeightMap = Grid<double>;
using DistanceField = Grid<double>;
using Mask = Grid<bool>;
using InstanceMap = Grid<Label>;
using SemanticMap = Grid<std::uint8_t>;

enum SemanticClass : std::uint8_t {
  kBackground = 0,
  kCell = 1,
  kTouching = 2,
};

inline constexpr int kNumClasses = 3;

struct Pixel {
  Index row = 0;
  Index col = 0;

  friend constexpr auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// A stack of equally shaped planes, indexed (channel, row, col).
template <typename Scalar>
class Planes {
 public:
  Planes() = default;

  Planes(Index channels, Index rows, Index cols, Scalar fill = Scalar(0))
      : planes_(static_cast<std::size_t>(channels), Grid<Scalar>::Constant(rows, cols, fill)),
        rows_(rows),
        cols_(cols) {}

  explicit Planes(std::vector<Grid<Scalar>> planes) : planes_(std::move(planes)) {
    if (!planes_.empty()) {
      rows_ = planes_.front().rows();
      cols_ = planes_.front().cols();
    }
    for (const auto& p : planes_) {
      if (p.rows() != rows_ || p.cols() != cols_) {
        throw ValidationError("planes must share one shape");
      }
    }
  }

  Index channels() const { return static_cast<Index>(planes_.size()); }
  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index size() const { return channels() * rows_ * cols_; }

  Grid<Scalar>& operator[](Index c) { return planes_[static_cast<std::size_t>(c)]; }
  const Grid<Scalar>& operator[](Index c) const { return planes_[static_cast<std::size_t>(c)]; }

  Scalar& operator()(Index c, Index r, Index x) { return (*this)[c](r, x); }
  Scalar operator()(Index c, Index r, Index x) const { return (*this)[c](r, x); }

  const std::vector<Grid<Scalar>>& planes() const { return planes_; }

  template <typename Other>
  Planes<Other> cast() const {
    std::vector<Grid<Other>> out;
    out.reserve(planes_.size());
    for (const auto& p : planes_) out.push_back(p.template cast<Other>());
    return Planes<Other>(std::move(out));
  }

  bool same_shape(const Planes& other) const {
    return channels() == other.channels() && rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Planes& a, const Planes& b) {
    if (!a.same_shape(b)) return false;
    for (Index c = 0; c < a.channels(); ++c) {
      if ((a[c] != b[c]).any()) return false;
    }
    return true;
  }

 private:
  std::vector<Grid<Scalar>> planes_;
  Index rows_ = 0;
  Index cols_ = 0;
};

using ProbabilityMap = Planes<double>;
using OneHotMap = Planes<std::uint8_t>;
/// In-memory image of the float32 array container.
using FloatArray = Planes<float>;

inline constexpr double kProbabilitySumTolerance = 1e-5;

template <typename A, typename B>
bool same_shape(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

template <typename A, typename B>
void require_same_shape(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b,
                        const char* what) {
  if (!same_shape(a, b)) {
    throw ValidationError(std::string("shape mismatch: ") + what + " (" +
                          std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                          std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  }
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& g) {
  return g.derived().array().isFinite().all();
}

/// Finite and non-negative; shared by gray images and weight maps.
template <typename Derived>
void validate_nonnegative(const Eigen::DenseBase<Derived>& g, const char* what) {
  if (!all_finite(g)) throw ValidationError(std::string(what) + " has non-finite values");
  if ((g.derived().array() < 0).any()) throw ValidationError(std::string(what) + " has negative values");
}

inline void validate_gray(const GrayImage& x) { validate_nonnegative(x, "gray image"); }
inline void validate_weight_map(const WeightMap& w) { validate_nonnegative(w, "weight map"); }

inline void validate_instance_map(const InstanceMap& g) {
  if ((g < 0).any()) throw ValidationError("instance map has negative labels");
}

inline void validate_semantic_map(const SemanticMap& h) {
  if ((h > kTouching).any()) throw ValidationError("semantic map has class ids outside {0,1,2}");
}

/// Rejects non-finite values, values outside [0,1] and channel sums off 1 by more than `tolerance`.
inline void validate_probability_map(const ProbabilityMap& z,
                                     double tolerance = kProbabilitySumTolerance) {
  if (z.channels() < 1) throw ValidationError("probability map has no channels");
  Grid<double> sum = Grid<double>::Zero(z.rows(), z.cols());
  for (Index c = 0; c < z.channels(); ++c) {
    const auto& p = z[c];
    if (!all_finite(p)) throw ValidationError("probability map has non-finite values");
    if ((p < 0.0).any() || (p > 1.0).any()) {
      throw ValidationError("probability map has values outside [0,1]");
    }
    sum += p;
  }
  if (((sum - 1.0).abs() > tolerance).any()) {
    throw ValidationError("probability map channels do not sum to 1");
  }
}

inline void require_channels(const ProbabilityMap& z, Index channels) {
  if (z.channels() != channels) {
    throw ValidationError("expected " + std::to_string(channels) + " channels, got " +
                          std::to_string(z.channels()));
  }
}

// Geometric helpers shared by augmentation and tests.

template <typename Scalar>
Grid<Scalar> flip_horizontal(const Grid<Scalar>& g) {
  return g.rowwise().reverse();
}

template <typename Scalar>
Grid<Scalar> flip_vertical(const Grid<Scalar>& g) {
  return g.colwise().reverse();
}

/// Counter-clockwise rotation by `quarter_turns` multiples of 90 degrees.
template <typename Scalar>
Grid<Scalar> rotate90(const Grid<Scalar>& g, int quarter_turns) {
  Grid<Scalar> out = g;
  for (int t = 0; t < ((quarter_turns % 4) + 4) % 4; ++t) {
    Grid<Scalar> rotated = out.transpose().colwise().reverse();
    out = std::move(rotated);
  }
  return out;
}

}  // namespace cellseg
