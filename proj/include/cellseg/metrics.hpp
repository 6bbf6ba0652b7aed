#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cellseg/raster.hpp"

namespace cellseg {

/// |a ∩ b| / |a ∪ b|. Throws when both sets are empty.
double jaccard(const Mask& a, const Mask& b);

struct MatchedPair {
  Label gt = 0;
  Label pred = 0;
  double jaccard = 0.0;
};

struct MatchResult {
  std::vector<MatchedPair> pairs;  ///< sorted by gt label
  std::vector<Label> unmatched_gt;
  std::vector<Label> unmatched_pred;
};

/// Pairs every (gt, pred) instance with Jaccard strictly above 0.5. Such pairs
/// are unique, so no assignment step is needed. Label 0 is ignored.
MatchResult match_instances(const InstanceMap& gt, const InstanceMap& pred);

struct MetricsReport {
  double p05 = 1.0;
  double rq = 1.0;
  double sq = 1.0;
  double pq = 1.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  double jaccard_sum = 0.0;
};

/// Panoptic figures from raw counts. With nothing to detect and nothing
/// predicted every figure is 1; with no matches sq and pq are 0.
MetricsReport metrics_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn,
                                  double jaccard_sum);

MetricsReport panoptic_metrics(const MatchResult& match);

/// Arithmetic means of per-image figures. The mean pq is not the product of
/// the mean rq and sq, hence a separate type.
struct MetricAverages {
  double p05 = 0.0;
  double rq = 0.0;
  double sq = 0.0;
  double pq = 0.0;
};

struct DatasetReport {
  MetricsReport pooled;  ///< counts and Jaccard sums pooled over images
  MetricAverages per_image_mean;
  std::vector<MetricsReport> per_image;
};

DatasetReport evaluate_dataset(std::span<const MatchResult> matches);
DatasetReport evaluate_dataset(std::span<const std::pair<InstanceMap, InstanceMap>> pairs);

}  // namespace cellseg
