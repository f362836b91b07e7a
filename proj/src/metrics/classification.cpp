// Copyright 2026 The cxrvlp Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <algorithm>
#include <numeric>
#include <vector>

#include "cxrvlp/metrics/metrics.hpp"

namespace cxrvlp::metrics {

namespace {

void check_inputs(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw MetricError("scores and labels differ in length");
  const auto pos = std::count(labels.begin(), labels.end(), true);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) {
    throw MetricError("labels contain a single class; AUROC is undefined");
  }
}

}  // namespace

double auroc(std::span<const double> scores, const std::vector<bool>& labels) {
  check_inputs(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double rank_sum = 0.0;
  double n_pos = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i]) {
      rank_sum += rank[i];
      n_pos += 1.0;
    }
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

ClassificationMetrics classification_metrics(std::span<const double> scores,
                                             const std::vector<bool>& labels) {
  ClassificationMetrics m;
  m.auroc = auroc(scores, labels);
  std::vector<double> candidates(scores.begin(), scores.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  double best_f1 = -1.0;
  for (double t : candidates) {
    double tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool p = scores[i] >= t;
      if (p && labels[i]) ++tp;
      else if (p) ++fp;
      else if (labels[i]) ++fn;
      else ++tn;
    }
    const double f1 = tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
    // ">=" keeps the highest threshold among ties.
    if (f1 >= best_f1) {
      best_f1 = f1;
      m.f1 = f1;
      m.threshold = t;
      m.accuracy = (tp + tn) / static_cast<double>(scores.size());
      m.sensitivity = tp / (tp + fn);
      m.specificity = tn / (tn + fp);
    }
  }
  return m;
}

}  // namespace cxrvlp::metrics
