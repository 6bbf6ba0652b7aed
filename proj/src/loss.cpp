#include "cellseg/loss.hpp"

#include <algorithm>
#include <cmath>

namespace cellseg {

namespace {

void check_inputs(const OneHotMap& y, const ProbabilityMap& z, const WeightMap& w) {
  if (y.channels() != z.channels()) throw ValidationError("shape mismatch: one-hot vs probability channels");
  if (y.rows() != z.rows() || y.cols() != z.cols()) {
    throw ValidationError("shape mismatch: one-hot vs probability map");
  }
  require_same_shape(z[0], w, "probability map vs weight map");
  validate_weight_map(w);
}

/// Unvalidated per-class evaluation shared by the loss and the finite-difference helper.
std::vector<double> class_terms(const OneHotMap& y, const ProbabilityMap& z, const WeightMap& w) {
  std::vector<double> per_class(static_cast<std::size_t>(z.channels()));
  std::vector<double> terms(static_cast<std::size_t>(w.size()));
  for (Index l = 0; l < z.channels(); ++l) {
    const auto& yl = y[l];
    const auto& zl = z[l];
    for (Index i = 0; i < w.size(); ++i) {
      terms[static_cast<std::size_t>(i)] =
          yl.data()[i] != 0 ? -w.data()[i] * std::log(std::max(zl.data()[i], kLogFloor)) : 0.0;
    }
    per_class[static_cast<std::size_t>(l)] = pairwise_sum(terms);
  }
  return per_class;
}

double total_of(const std::vector<double>& per_class) {
  double total = 0.0;
  for (double v : per_class) total += v;
  return total;
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kBlock = 64;
  if (values.size() <= kBlock) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

LossReport weighted_cross_entropy(const OneHotMap& y, const ProbabilityMap& z, const WeightMap& w) {
  check_inputs(y, z, w);
  validate_probability_map(z);
  for (Index l = 0; l < y.channels(); ++l) {
    if ((y[l] > 1).any()) throw ValidationError("one-hot map holds values other than 0 and 1");
  }
  LossReport report;
  report.per_class = class_terms(y, z, w);
  report.total = total_of(report.per_class);
  report.pixel_count = w.size();
  return report;
}

ProbabilityMap weighted_cross_entropy_gradient(const OneHotMap& y, const ProbabilityMap& z,
                                               const WeightMap& w) {
  check_inputs(y, z, w);
  ProbabilityMap grad(z.channels(), z.rows(), z.cols());
  for (Index l = 0; l < z.channels(); ++l) {
    grad[l] = -w * y[l].cast<double>() / z[l].max(kLogFloor);
  }
  return grad;
}

ProbabilityMap finite_difference_gradient(const OneHotMap& y, const ProbabilityMap& z,
                                          const WeightMap& w, double step) {
  check_inputs(y, z, w);
  if (!(step > 0.0)) throw ValidationError("finite-difference step must be > 0");
  ProbabilityMap grad(z.channels(), z.rows(), z.cols());
  ProbabilityMap probe = z;
  for (Index l = 0; l < z.channels(); ++l) {
    for (Index i = 0; i < w.size(); ++i) {
      double& entry = probe[l].data()[i];
      const double saved = entry;
      entry = saved + step;
      const double up = total_of(class_terms(y, probe, w));
      entry = saved - step;
      const double down = total_of(class_terms(y, probe, w));
      entry = saved;
      grad[l].data()[i] = (up - down) / (2.0 * step);
    }
  }
  return grad;
}

ProbabilityMap combine_probability_maps(std::span<const ProbabilityMap> maps) {
  if (maps.size() < 2) throw ValidationError("combine needs at least two probability maps");
  const ProbabilityMap& first = maps.front();
  for (const auto& m : maps) {
    if (!m.same_shape(first)) throw ValidationError("shape mismatch between probability maps");
    validate_probability_map(m);
  }
  // Summing each pixel's values in sorted order makes the mean independent of
  // the order of `maps`, bit for bit.
  ProbabilityMap mean(first.channels(), first.rows(), first.cols());
  std::vector<double> values(maps.size());
  for (Index l = 0; l < first.channels(); ++l) {
    for (Index i = 0; i < first[l].size(); ++i) {
      for (std::size_t m = 0; m < maps.size(); ++m) values[m] = maps[m][l].data()[i];
      std::sort(values.begin(), values.end());
      double sum = 0.0;
      for (double v : values) sum += v;
      mean[l].data()[i] = sum / static_cast<double>(maps.size());
    }
  }

  Grid<double> peak = mean[0];
  for (Index l = 1; l < mean.channels(); ++l) peak = peak.max(mean[l]);
  Grid<double> norm = Grid<double>::Zero(first.rows(), first.cols());
  for (Index l = 0; l < mean.channels(); ++l) {
    mean[l] = (mean[l] - peak).exp();
    norm += mean[l];
  }
  for (Index l = 0; l < mean.channels(); ++l) mean[l] /= norm;
  return mean;
}

}  // namespace cellseg
