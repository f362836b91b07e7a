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

/// @file evaluation.hpp
/// @brief Zero-shot, grounding, segmentation and prompt-sensitivity evaluation.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cxrvlp/corpus/types.hpp"
#include "cxrvlp/inference/inference.hpp"
#include "cxrvlp/metrics/metrics.hpp"

namespace cxrvlp::pipeline {

std::string positive_prompt(corpus::Finding f);  // "Findings suggesting {f}"
std::string negative_prompt(corpus::Finding f);  // "No evidence of {f}"

/// Finding categories that occur in the dataset's annotations, in enum order.
std::vector<corpus::Finding> annotated_categories(const corpus::Dataset& ds);

/// Images of a split (pair order) and, per image, whether any of its
/// annotations has the category.
std::vector<const corpus::ImageRecord*> split_images(const corpus::Dataset& ds, corpus::Split s);
std::vector<bool> category_labels(const corpus::Dataset& ds,
                                  const std::vector<const corpus::ImageRecord*>& images,
                                  corpus::Finding f);

/// Indices of the first min(|P|, |N|) positives and negatives, in order.
std::vector<std::size_t> balanced_subset(const std::vector<bool>& labels);

struct BinaryZeroShot {
  std::string pos_prompt;
  std::string neg_prompt;
  std::vector<double> p_pos;  // per image
  std::vector<bool> labels;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  double balanced_accuracy = 0.0;  // argmax decisions on the balanced subset
  metrics::ClassificationMetrics metrics;  // from p_pos over all images
};

/// Two-prompt zero-shot classification. `embeddings` are the images' global
/// embeddings (rows in image order).
BinaryZeroShot binary_zero_shot(const inference::Matrix& embeddings, const std::vector<bool>& labels,
                                const std::string& pos, const std::string& neg,
                                const inference::JointModel& m);

struct ZeroShotReport {
  std::map<corpus::Finding, BinaryZeroShot> categories;
  double mean_accuracy = 0.0;
  nlohmann::json to_json() const;
};

ZeroShotReport eval_zeroshot(const inference::JointModel& m, const corpus::Dataset& ds,
                             corpus::Split split = corpus::Split::test);

struct GroundingSample {
  std::string image_id;
  std::string phrase;
  corpus::Finding category = corpus::Finding::pneumonia;
  metrics::GroundingScore score;
};

struct GroundingOptions {
  corpus::Split split = corpus::Split::test;
  bool rescale = false;   // min-max rescale maps before scoring
  bool dilation = false;  // finer grid from the dilated last stage
};

struct GroundingReport {
  std::vector<GroundingSample> samples;
  std::map<corpus::Finding, metrics::GroundingScore> per_category;  // means over samples
  metrics::GroundingScore macro;        // mean over categories
  metrics::GroundingScore sample_mean;  // mean over samples
  nlohmann::json to_json() const;
  void write_csv(const std::filesystem::path& path) const;
};

/// Box mask of an annotation on a grid of the processed image.
metrics::CellMask annotation_mask(const corpus::GroundingAnnotation& a, const corpus::ImageRecord& img,
                                  int grid_h, int grid_w);

GroundingReport eval_grounding(const inference::JointModel& m, const corpus::Dataset& ds,
                               const GroundingOptions& opts = {});

/// Writes the map as an NPY array and, when png is non-empty, a heatmap
/// overlay upsampled to the image resolution.
void export_similarity_map(const metrics::SimilarityMap& map, const corpus::ImageRecord& img,
                           const std::filesystem::path& npy, const std::filesystem::path& png = {});

struct SegmentationReport {
  double zero_shot_dice = 0.0;
  std::optional<double> probe_dice;  // set when a probe was trained
  double fraction = 0.0;
  std::size_t n_annotations = 0;
  nlohmann::json to_json() const;
};

/// Dice of phrase similarity maps against box masks. When fraction > 0 a
/// per-cell probe, initialized from the category's prompt pair, is trained
/// on that fraction of train-split images and its map 2p - 1 is scored too.
SegmentationReport eval_segmentation(const inference::JointModel& m, const corpus::Dataset& ds,
                                     double fraction, std::uint64_t seed,
                                     const inference::ProbeOptions& opts = {});

struct PromptSensitivityRow {
  std::string pos;
  std::string neg;
  double f1 = 0.0;
  double auroc = 0.0;
  double delta_auc = 0.0;  // |AUROC - AUROC of the first pair|
};

/// Zero-shot F1/ROC-AUC per prompt pair. Throws metrics::MetricError on a
/// single-class label set and std::invalid_argument on fewer than two pairs.
std::vector<PromptSensitivityRow> prompt_sensitivity_report(
    const inference::JointModel& m, const std::vector<std::pair<std::string, std::string>>& pairs,
    const std::vector<const corpus::ImageRecord*>& images, const std::vector<bool>& labels);

std::string format_sensitivity_table(const std::vector<PromptSensitivityRow>& rows);

}  // namespace cxrvlp::pipeline
