#include "hktgnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hktgnn {

double f1_score(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size()) throw ShapeError("f1_score: prediction/label length mismatch");
  if (preds.empty()) throw ValidationError("f1_score: empty input");
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] && labels[i]) ++tp;
    else if (preds[i] && !labels[i]) ++fp;
    else if (!preds[i] && labels[i]) ++fn;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

double auc_score(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc_score: score/label length mismatch");
  const auto n = scores.size();
  const auto pos = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](int y) { return y != 0; }));
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0 || neg == 0) throw DegenerateSplit("auc_score: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]]) rank_sum += avg_rank;
    i = j + 1;
  }
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw ValidationError("mean_std: no values");
  MeanStd r;
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return r;
}

}  // namespace hktgnn
