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
#include <cmath>

#include "cxrvlp/metrics/metrics.hpp"

namespace cxrvlp::metrics {

std::size_t CellMask::interior() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), true));
}

CellMask rasterize_boxes(std::span<const corpus::Box> boxes, corpus::ImageSize image, int grid_h,
                         int grid_w) {
  if (boxes.empty()) throw MetricError("rasterize_boxes: empty box list");
  if (grid_h <= 0 || grid_w <= 0 || image.height <= 0 || image.width <= 0) {
    throw MetricError("rasterize_boxes: non-positive grid or image size");
  }
  CellMask m;
  m.height = grid_h;
  m.width = grid_w;
  m.cells.assign(static_cast<std::size_t>(grid_h) * grid_w, false);
  const double cell_h = static_cast<double>(image.height) / grid_h;
  const double cell_w = static_cast<double>(image.width) / grid_w;
  for (int i = 0; i < grid_h; ++i) {
    const double cy = (i + 0.5) * cell_h;
    for (int j = 0; j < grid_w; ++j) {
      const double cx = (j + 0.5) * cell_w;
      for (const corpus::Box& b : boxes) {
        if (cx >= b.x && cx < b.x + b.w && cy >= b.y && cy < b.y + b.h) {
          m.cells[static_cast<std::size_t>(i) * grid_w + j] = true;
          break;
        }
      }
    }
  }
  return m;
}

namespace {

void check_shapes(const SimilarityMap& map, const CellMask& mask) {
  if (map.height != mask.height || map.width != mask.width ||
      map.cells.size() != mask.cells.size()) {
    throw MetricError("similarity map and cell mask have different shapes");
  }
}

// IoU of a predicted set against the mask; 0 when both are empty.
double iou_of(const std::vector<bool>& pred, const CellMask& mask) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += pred[i] && mask.cells[i];
    uni += pred[i] || mask.cells[i];
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

double cnr(const SimilarityMap& map, const CellMask& mask) {
  check_shapes(map, mask);
  double sum_in = 0.0, sum_out = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t i = 0; i < map.cells.size(); ++i) {
    if (mask.cells[i]) {
      sum_in += map.cells[i];
      ++n_in;
    } else {
      sum_out += map.cells[i];
      ++n_out;
    }
  }
  if (n_in == 0 || n_out == 0) throw MetricError("cnr: box interior or exterior is empty");
  const double mu_in = sum_in / static_cast<double>(n_in);
  const double mu_out = sum_out / static_cast<double>(n_out);
  double var_in = 0.0, var_out = 0.0;
  for (std::size_t i = 0; i < map.cells.size(); ++i) {
    const double d = map.cells[i] - (mask.cells[i] ? mu_in : mu_out);
    (mask.cells[i] ? var_in : var_out) += d * d;
  }
  var_in /= static_cast<double>(n_in);
  var_out /= static_cast<double>(n_out);
  return std::abs(mu_in - mu_out) / std::sqrt(var_in + var_out + kCnrEpsilon);
}

IouResult miou(const SimilarityMap& map, const CellMask& mask) {
  check_shapes(map, mask);
  IouResult r;
  std::vector<bool> pred(map.cells.size());
  for (double t : kIouThresholds) {
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = map.cells[i] > t;
    const double v = iou_of(pred, mask);
    r.per_threshold[t] = v;
    r.miou += v;
  }
  r.miou /= static_cast<double>(kIouThresholds.size());
  return r;
}

double dice(const SimilarityMap& map, const CellMask& mask, double threshold) {
  check_shapes(map, mask);
  std::size_t inter = 0, n_pred = 0, n_true = 0;
  for (std::size_t i = 0; i < map.cells.size(); ++i) {
    const bool p = (map.cells[i] + 1.0) / 2.0 > threshold;
    n_pred += p;
    n_true += mask.cells[i];
    inter += p && mask.cells[i];
  }
  if (n_pred + n_true == 0) return 0.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(n_pred + n_true);
}

SimilarityMap minmax_rescale(const SimilarityMap& map) {
  if (map.cells.empty()) throw MetricError("minmax_rescale: empty map");
  const auto [lo, hi] = std::minmax_element(map.cells.begin(), map.cells.end());
  const double a = *lo, b = *hi;
  if (!(b > a)) throw MetricError("minmax_rescale: constant map has no defined scaling");
  SimilarityMap out = map;
  for (double& v : out.cells) v = 2.0 * (v - a) / (b - a) - 1.0;
  return out;
}

GroundingScore grounding_score(const SimilarityMap& map, const CellMask& mask) {
  GroundingScore g;
  g.cnr = cnr(map, mask);
  IouResult r = miou(map, mask);
  g.miou = r.miou;
  g.per_threshold_iou = std::move(r.per_threshold);
  g.dice = dice(map, mask);
  return g;
}

}  // namespace cxrvlp::metrics
