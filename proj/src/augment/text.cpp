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

#include "cxrvlp/augment/augment.hpp"

namespace cxrvlp::augment {

using text::Vocabulary;

corpus::ReportDocument shuffle_sentences(const corpus::ReportDocument& r, Rng& rng) {
  corpus::ReportDocument out = r;
  rng.shuffle(out.findings);
  rng.shuffle(out.impression);
  return out;
}

bool maskable(int id) {
  return id != Vocabulary::kPad && id != Vocabulary::kCls && id != Vocabulary::kSep &&
         id != Vocabulary::kMask;
}

MaskPlan sample_whole_word_mask(const text::TokenSequence& seq, double rate, int vocab_size,
                                Rng& rng) {
  if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("mask rate must lie in (0, 1]");
  if (vocab_size <= static_cast<int>(text::kSpecialTokens.size())) {
    throw std::invalid_argument("vocabulary has no ordinary tokens to sample from");
  }
  // Group maskable tokens into words: a word starts at a word_starts mark
  // or after a non-maskable token.
  std::vector<std::vector<std::int64_t>> words;
  bool open = false;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (!maskable(seq.ids[i])) {
      open = false;
      continue;
    }
    if (!open || seq.word_starts[i]) words.emplace_back();
    words.back().push_back(static_cast<std::int64_t>(i));
    open = true;
  }
  std::size_t total = 0;
  for (const auto& w : words) total += w.size();
  if (total == 0) throw std::invalid_argument("sequence has no maskable tokens");

  const auto need = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(total) - 1e-9));
  std::vector<std::size_t> order(words.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  MaskPlan plan;
  std::size_t covered = 0;
  for (std::size_t k = 0; k < order.size() && (covered < need || covered == 0); ++k) {
    for (std::int64_t p : words[order[k]]) plan.positions.push_back(p);
    covered += words[order[k]].size();
  }
  std::sort(plan.positions.begin(), plan.positions.end());
  const int n_ordinary = vocab_size - static_cast<int>(text::kSpecialTokens.size());
  for (std::size_t i = 0; i < plan.positions.size(); ++i) {
    const double u = rng.uniform();
    if (u < 0.8) {
      plan.replacement.push_back(Replacement::mask);
      plan.random_ids.push_back(-1);
    } else if (u < 0.9) {
      plan.replacement.push_back(Replacement::random_token);
      plan.random_ids.push_back(static_cast<int>(text::kSpecialTokens.size()) +
                                static_cast<int>(rng.below(static_cast<std::uint64_t>(n_ordinary))));
    } else {
      plan.replacement.push_back(Replacement::keep);
      plan.random_ids.push_back(-1);
    }
  }
  return plan;
}

MaskedInput apply_mask(const text::TokenSequence& seq, const MaskPlan& plan) {
  MaskedInput out;
  out.ids = seq.ids;
  out.positions = plan.positions;
  for (std::size_t i = 0; i < plan.positions.size(); ++i) {
    const auto p = static_cast<std::size_t>(plan.positions[i]);
    out.targets.push_back(seq.ids.at(p));
    switch (plan.replacement[i]) {
      case Replacement::mask:
        out.ids[p] = Vocabulary::kMask;
        break;
      case Replacement::random_token:
        out.ids[p] = plan.random_ids[i];
        break;
      case Replacement::keep:
        break;
    }
  }
  return out;
}

}  // namespace cxrvlp::augment
