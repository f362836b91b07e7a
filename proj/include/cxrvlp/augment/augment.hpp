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

/// @file augment.hpp
/// @brief Sentence shuffling, whole-word masking and image augmentation.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cxrvlp/corpus/types.hpp"
#include "cxrvlp/nn/random.hpp"
#include "cxrvlp/text/vocab.hpp"

namespace cxrvlp::augment {

/// Independently permutes the sentences of each section.
corpus::ReportDocument shuffle_sentences(const corpus::ReportDocument& r, Rng& rng);

enum class Replacement { mask, random_token, keep };

struct MaskPlan {
  std::vector<std::int64_t> positions;  // sorted token indices
  std::vector<Replacement> replacement;
  std::vector<int> random_ids;  // token drawn for random_token entries, else -1
};

/// Tokens that may be masked: everything except [PAD], [CLS], [SEP], [MASK].
bool maskable(int id);

/// Samples whole words without replacement until at least
/// ceil(rate * maskable tokens) tokens are covered (at least one word), then
/// draws 80% [MASK] / 10% random token / 10% keep per masked token.
/// Throws std::invalid_argument when the sequence has nothing to mask.
MaskPlan sample_whole_word_mask(const text::TokenSequence& seq, double rate, int vocab_size,
                                Rng& rng);

struct MaskedInput {
  std::vector<int> ids;               // with replacements applied
  std::vector<std::int64_t> positions;
  std::vector<int> targets;           // original ids at positions
};

MaskedInput apply_mask(const text::TokenSequence& seq, const MaskPlan& plan);

enum class Stage { joint, image_only, finetune };
std::string_view to_string(Stage s);
Stage parse_stage(std::string_view s);

class AugmentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Image augmentation settings. Operations run in this order, each skipped
/// when its magnitude is zero: affine (shear, rotation), brightness,
/// contrast, horizontal flip, random resized crop, occlusion, elastic
/// deformation, additive Gaussian noise. Output is clamped to [0, 1].
struct AugmentParams {
  Stage stage = Stage::joint;
  double shear_deg = 0.0;       // shear angle drawn from U(-s, s)
  double rotation_deg = 0.0;    // rotation drawn from U(-r, r)
  double brightness = 0.0;      // factor drawn from U(1-b, 1+b)
  double contrast = 0.0;        // factor drawn from U(1-c, 1+c), around the image mean
  double flip_prob = 0.0;
  std::pair<double, double> crop_scale{0.0, 0.0};      // area fraction; (0, 0) disables
  double occlusion_prob = 0.0;
  std::pair<double, double> occlusion_scale{0.0, 0.0};  // area fraction
  std::pair<double, double> occlusion_ratio{1.0, 1.0};  // aspect, log-uniform between the two
  double elastic_prob = 0.0;
  double elastic_sigma = 0.0;
  double elastic_alpha = 0.0;
  double noise_std = 0.0;

  /// Throws AugmentError if a field is set that the stage does not allow:
  /// the joint stage permits only affine and colour jitter, fine-tuning adds
  /// flips, and image-only pretraining allows everything.
  void validate() const;
  nlohmann::json to_json() const;
  static AugmentParams from_json(const nlohmann::json& j);

  static AugmentParams joint_preset();
  static AugmentParams image_only_preset();
  static AugmentParams finetune_preset();
  static AugmentParams identity(Stage s = Stage::joint);
};

corpus::ImageRecord image_augment(const corpus::ImageRecord& img, const AugmentParams& p, Rng& rng);

}  // namespace cxrvlp::augment
