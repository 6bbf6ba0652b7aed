#include "cellseg/metrics.hpp"

#include <algorithm>
#include <map>

namespace cellseg {

double jaccard(const Mask& a, const Mask& b) {
  require_same_shape(a, b, "jaccard operands");
  const auto inter = (a && b).count();
  const auto uni = (a || b).count();
  if (uni == 0) throw ValidationError("jaccard of two empty sets is undefined");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

MatchResult match_instances(const InstanceMap& gt, const InstanceMap& pred) {
  require_same_shape(gt, pred, "ground truth vs prediction");
  validate_instance_map(gt);
  validate_instance_map(pred);
  std::map<Label, std::int64_t> gt_area;
  std::map<Label, std::int64_t> pred_area;
  std::map<std::pair<Label, Label>, std::int64_t> overlap;
  for (Index i = 0; i < gt.size(); ++i) {
    const Label a = gt.data()[i];
    const Label b = pred.data()[i];
    if (a != 0) ++gt_area[a];
    if (b != 0) ++pred_area[b];
    if (a != 0 && b != 0) ++overlap[{a, b}];
  }

  MatchResult out;
  std::map<Label, bool> gt_used;
  std::map<Label, bool> pred_used;
  for (const auto& [key, inter] : overlap) {
    const auto [a, b] = key;
    const std::int64_t uni = gt_area[a] + pred_area[b] - inter;
    // Strict inequality in integers: inter / uni > 1/2.
    if (2 * inter <= uni) continue;
    out.pairs.push_back({a, b, static_cast<double>(inter) / static_cast<double>(uni)});
    gt_used[a] = true;
    pred_used[b] = true;
  }
  for (const auto& [label, area] : gt_area) {
    if (!gt_used.contains(label)) out.unmatched_gt.push_back(label);
  }
  for (const auto& [label, area] : pred_area) {
    if (!pred_used.contains(label)) out.unmatched_pred.push_back(label);
  }
  return out;
}

MetricsReport metrics_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn,
                                  double jaccard_sum) {
  MetricsReport m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.jaccard_sum = jaccard_sum;
  if (tp + fp + fn == 0) return m;
  const double t = static_cast<double>(tp);
  m.rq = t / (t + 0.5 * static_cast<double>(fp) + 0.5 * static_cast<double>(fn));
  m.sq = tp > 0 ? jaccard_sum / t : 0.0;
  m.p05 = tp + fp > 0 ? t / static_cast<double>(tp + fp) : 0.0;
  m.pq = m.rq * m.sq;
  return m;
}

MetricsReport panoptic_metrics(const MatchResult& match) {
  // Sorted summation keeps sq independent of how instances are numbered.
  std::vector<double> values;
  values.reserve(match.pairs.size());
  for (const auto& p : match.pairs) values.push_back(p.jaccard);
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return metrics_from_counts(static_cast<std::int64_t>(match.pairs.size()),
                             static_cast<std::int64_t>(match.unmatched_pred.size()),
                             static_cast<std::int64_t>(match.unmatched_gt.size()), sum);
}

DatasetReport evaluate_dataset(std::span<const MatchResult> matches) {
  if (matches.empty()) throw ValidationError("evaluation needs at least one image");
  DatasetReport report;
  std::int64_t tp = 0, fp = 0, fn = 0;
  double jaccard_sum = 0.0;
  MetricAverages& mean = report.per_image_mean;
  for (const auto& m : matches) {
    const MetricsReport r = panoptic_metrics(m);
    report.per_image.push_back(r);
    tp += r.tp;
    fp += r.fp;
    fn += r.fn;
    jaccard_sum += r.jaccard_sum;
    mean.p05 += r.p05;
    mean.rq += r.rq;
    mean.sq += r.sq;
    mean.pq += r.pq;
  }
  const double n = static_cast<double>(matches.size());
  mean.p05 /= n;
  mean.rq /= n;
  mean.sq /= n;
  mean.pq /= n;
  report.pooled = metrics_from_counts(tp, fp, fn, jaccard_sum);
  return report;
}

DatasetReport evaluate_dataset(std::span<const std::pair<InstanceMap, InstanceMap>> pairs) {
  std::vector<MatchResult> matches;
  matches.reserve(pairs.size());
  for (const auto& [gt, pred] : pairs) matches.push_back(match_instances(gt, pred));
  return evaluate_dataset(std::span<const MatchResult>(matches));
}

}  // namespace cellseg
