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

/// @file validate.hpp
/// @brief Grounding-annotation curation rules.
///
/// Rules, numbered 1-7:
///   1 finding not present in the image
///   2 phrase is not a clinical finding, or names several unrelated ones
///   3 box and phrase do not match (includes boxes outside the image or of
///     zero area)
///   4 high uncertainty expressed
///   5 image unsuitable for assessing the finding
///   6 differential diagnosis or longitudinal information
///   7 phrase longer than 30 tokens, full stop included
/// Only 7 and the geometric part of 3 can be decided mechanically; the rest
/// need a human reader.

#pragma once

#include <string>
#include <vector>

#include "cxrvlp/corpus/types.hpp"
#include "cxrvlp/text/vocab.hpp"

namespace cxrvlp::corpus {

enum class VerdictStatus { accept, reject, needs_review };
std::string_view to_string(VerdictStatus s);

struct ValidationVerdict {
  VerdictStatus status = VerdictStatus::needs_review;
  std::vector<int> rule_ids;  // violated (reject) or undecided (needs_review)
  std::string message;
};

struct ReviewPolicy {
  /// When false the caller vouches for rules 1-6 (for instance on generated
  /// data), so an annotation passing the mechanical rules is accepted.
  bool clinical_review = true;
};

inline constexpr int kMaxPhraseTokens = 30;

ValidationVerdict validate_annotation(const GroundingAnnotation& a, const text::Vocabulary& v,
                                      ImageSize source_size, const ReviewPolicy& policy = {});

}  // namespace cxrvlp::corpus
