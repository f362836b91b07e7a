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


/// @file metrics.hpp
/// @brief Grounding metrics on similarity grids and binary classification scores.

#pragma once

#include <array>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cxrvlp/corpus/types.hpp"

namespace cxrvlp::metrics {

/// Per-cell cosine similarities for one phrase and one image, row-major.
struct SimilarityMap {
  int height = 0;
  int width = 0;
  std::vector<double> cells;
  std::string phrase;
  std::string image_id;

  double at(int y, int x) const { return cells[static_cast<std::size_t>(y) * width + x]; }
};

/// Box interior A on the feature grid; the complement is the exterior.
struct CellMask {
  int height = 0;
  int width = 0;
  std::vector<bool> cells;

  bool at(int y, int x) const { return cells[static_cast<std::size_t>(y) * width + x]; }
  std::size_t interior() const;
};

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A cell is interior when its centre pixel ((j + 0.5) * W / w, (i + 0.5) * H / h)
/// lies inside any box, boxes being half-open [x, x + w) x [y, y + h).
CellMask rasterize_boxes(std::span<const corpus::Box> boxes, corpus::ImageSize image, int grid_h,
                         int grid_w);

inline constexpr double kCnrEpsilon = 1e-12;
inline constexpr std::array<double, 5> kIouThresholds = {0.1, 0.2, 0.3, 0.4, 0.5};
inline constexpr double kDiceThreshold = 0.6;

/// |mean_A - mean_out| / sqrt(var_A + var_out + eps), population variances.
double cnr(const SimilarityMap& map, const CellMask& mask);

struct IouResult {
  double miou = 0.0;
  std::map<double, double> per_threshold;
};

/// IoU of {cells with similarity > t} against A for each threshold, and the mean.
IouResult miou(const SimilarityMap& map, const CellMask& mask);

/// Dice of {(s + 1) / 2 > threshold} against A; 0 when both sets are empty.
double dice(const SimilarityMap& map, const CellMask& mask, double threshold = kDiceThreshold);

/// Affine map sending (min, max) to (-1, 1). Throws MetricError on a constant map.
SimilarityMap minmax_rescale(const SimilarityMap& map);

struct GroundingScore {
  double cnr = 0.0;
  double miou = 0.0;
  double dice = 0.0;
  std::map<double, double> per_threshold_iou;
};

GroundingScore grounding_score(const SimilarityMap& map, const CellMask& mask);

struct ClassificationMetrics {
  double accuracy = 0.0;
  double f1 = 0.0;
  double auroc = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double threshold = 0.0;  // predict positive when score >= threshold
};

/// Rank-statistic AUROC with midranks for ties. Throws MetricError unless both
/// classes are present.
double auroc(std::span<const double> scores, const std::vector<bool>& labels);

/// AUROC plus accuracy, F1, sensitivity and specificity at the observed score
/// that maximizes F1.
ClassificationMetrics classification_metrics(std::span<const double> scores,
                                             const std::vector<bool>& labels);

}  // namespace cxrvlp::metrics
