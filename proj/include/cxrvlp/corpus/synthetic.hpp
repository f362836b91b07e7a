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

/// @file synthetic.hpp
/// @brief Synthetic paired image/report corpus with ground-truth boxes.
///
/// Each image is a stylised chest radiograph: a bright body, two dark lung
/// fields and a bright mediastinum, plus noise. Findings are elliptical
/// patterns placed in one of four lung zones. The zone grid follows the
/// radiological convention: the patient's right is on the image left, so
/// the top-left quadrant is the "right upper" zone.

#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "cxrvlp/corpus/types.hpp"

namespace cxrvlp::corpus {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SyntheticConfig {
  std::vector<Finding> categories = {Finding::pneumonia, Finding::pneumothorax};
  int image_size = 64;
  int n_train = 512;
  int n_val = 64;
  int n_test = 128;
  double normal_fraction = 0.5;     // finding-free images per split
  double second_finding_prob = 0.25;  // abnormal images with a second finding
  double noise = 0.03;
  int filler_sentences = 2;

  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticConfig from_json(const nlohmann::json& j);
};

enum class Zone { right_upper, left_upper, right_lower, left_lower };
std::string_view zone_name(Zone z);  // "right upper", ...

struct PlacedFinding {
  Finding category;
  Zone zone;
  double cx, cy;  // centre, pixels
  double rx, ry;  // radii, pixels
  Box box;        // tight box around the finding's pixels
  std::string phrase;
};

/// Pixels covered by a placed finding, as a side x side boolean mask.
std::vector<bool> finding_mask(const PlacedFinding& f, int side);

struct SyntheticCorpus {
  Dataset dataset;
  std::map<std::string, std::vector<PlacedFinding>> findings;  // by image id
};

SyntheticCorpus generate_synthetic_detail(const SyntheticConfig& cfg, std::uint64_t seed);
Dataset generate_synthetic_corpus(const SyntheticConfig& cfg, std::uint64_t seed);

/// Impression-style phrase describing a finding in a zone, the form the
/// generator emits and uses for annotations.
std::string finding_phrase(Finding f, Zone z);

}  // namespace cxrvlp::corpus
