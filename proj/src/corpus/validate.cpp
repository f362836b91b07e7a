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

#include "cxrvlp/corpus/validate.hpp"

namespace cxrvlp::corpus {

std::string_view to_string(VerdictStatus s) {
  switch (s) {
    case VerdictStatus::accept:
      return "accept";
    case VerdictStatus::reject:
      return "reject";
    case VerdictStatus::needs_review:
      return "needs_review";
  }
  return "unknown";
}

ValidationVerdict validate_annotation(const GroundingAnnotation& a, const text::Vocabulary& v,
                                      ImageSize source_size, const ReviewPolicy& policy) {
  ValidationVerdict out;
  std::string why;

  bool bad_geometry = a.boxes.empty();
  for (const Box& b : a.boxes) {
    if (b.w <= 0 || b.h <= 0) {
      bad_geometry = true;
      why += "degenerate box; ";
    } else if (b.x < 0 || b.y < 0 || b.x + b.w > source_size.width ||
               b.y + b.h > source_size.height) {
      bad_geometry = true;
      why += "box outside image; ";
    }
  }
  if (a.boxes.empty()) why += "no boxes; ";
  if (bad_geometry) out.rule_ids.push_back(3);

  const std::size_t n_tokens = text::tokenize(a.phrase, v).size();
  if (n_tokens > static_cast<std::size_t>(kMaxPhraseTokens)) {
    out.rule_ids.push_back(7);
    why += "phrase has " + std::to_string(n_tokens) + " tokens; ";
  }

  if (!out.rule_ids.empty()) {
    out.status = VerdictStatus::reject;
    why.resize(why.size() - 2);
    out.message = why;
    return out;
  }
  if (policy.clinical_review) {
    out.status = VerdictStatus::needs_review;
    out.rule_ids = {1, 2, 3, 4, 5, 6};
    out.message = "mechanical rules pass; rules 1-6 need a reader";
    return out;
  }
  out.status = VerdictStatus::accept;
  out.message = "mechanical rules pass";
  return out;
}

}  // namespace cxrvlp::corpus
