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
#include <map>
#include <set>
#include <string>

#include "doctest.h"

#include "cxrvlp/augment/augment.hpp"

using namespace cxrvlp;
using augment::AugmentParams;
using augment::Replacement;
using augment::Stage;
using text::Vocabulary;

namespace {

Vocabulary piece_vocab() {
  std::vector<std::string> t(text::kSpecialTokens.begin(), text::kSpecialTokens.end());
  for (const char* s : {"pneu", "##mo", "##nia", "left", "lung", "base", "##s", "no", "clear", ".",
                        "effu", "##sion", "small", "right"}) {
    t.emplace_back(s);
  }
  return Vocabulary(t);
}

corpus::ReportDocument random_report(Rng& rng) {
  corpus::ReportDocument r;
  r.id = "r";
  const auto nf = rng.below(6);
  const auto ni = 1 + rng.below(4);
  for (std::uint64_t i = 0; i < nf; ++i) r.findings.push_back("f" + std::to_string(rng.below(3)));
  for (std::uint64_t i = 0; i < ni; ++i) r.impression.push_back("i" + std::to_string(rng.below(3)));
  return r;
}

// Index of the word each position belongs to, -1 for specials.
std::vector<int> word_of(const text::TokenSequence& s) {
  std::vector<int> out(s.size(), -1);
  int w = -1;
  bool open = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!augment::maskable(s.ids[i])) {
      open = false;
      continue;
    }
    if (!open || s.word_starts[i]) ++w;
    out[i] = w;
    open = true;
  }
  return out;
}

corpus::ImageRecord constant_image(float v, int side = 32) {
  corpus::ImageRecord img;
  img.id = "c";
  img.height = img.width = side;
  img.pixels.assign(static_cast<std::size_t>(side) * side, v);
  img.source_size = {side, side};
  return img;
}

}  // namespace

TEST_CASE("sentence shuffling permutes each section") {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto r = random_report(rng);
    const auto s = augment::shuffle_sentences(r, rng);
    CHECK(std::is_permutation(s.findings.begin(), s.findings.end(), r.findings.begin(), r.findings.end()));
    CHECK(std::is_permutation(s.impression.begin(), s.impression.end(), r.impression.begin(),
                              r.impression.end()));
    CHECK(s.id == r.id);
  }
}

TEST_CASE("sentence shuffling is uniform over orders") {
  corpus::ReportDocument r{"r", {"a", "b", "c"}, {"x"}};
  Rng rng(2);
  std::map<std::vector<std::string>, int> counts;
  const int n = 6000;
  for (int i = 0; i < n; ++i) ++counts[augment::shuffle_sentences(r, rng).findings];
  REQUIRE(counts.size() == 6);
  double chi2 = 0.0;
  for (const auto& [order, c] : counts) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
  // 5 degrees of freedom, p = 0.001
  CHECK(chi2 < 20.52);
}

TEST_CASE("whole-word masking never splits a word") {
  const auto v = piece_vocab();
  const std::vector<std::string> words = {"pneumonia", "left", "lungs", "bases", "effusion",
                                          "no",        "clear", ".",     "small", "zzz"};
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    const auto n = 1 + rng.below(15);
    for (std::uint64_t i = 0; i < n; ++i) text += words[rng.below(words.size())] + " ";
    const auto seq = text::with_specials(text::tokenize(text, v));
    const auto wid = word_of(seq);
    const auto plan = augment::sample_whole_word_mask(seq, 0.15, v.size(), rng);
    REQUIRE_FALSE(plan.positions.empty());
    CHECK(std::is_sorted(plan.positions.begin(), plan.positions.end()));
    std::set<int> hit;
    std::size_t maskable = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) maskable += wid[i] >= 0;
    for (auto p : plan.positions) {
      REQUIRE(wid[static_cast<std::size_t>(p)] >= 0);
      hit.insert(wid[static_cast<std::size_t>(p)]);
    }
    std::size_t covered = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) covered += wid[i] >= 0 && hit.count(wid[i]);
    CHECK(covered == plan.positions.size());
    CHECK(covered >= static_cast<std::size_t>(std::ceil(0.15 * static_cast<double>(maskable))));
  }
}

TEST_CASE("masking budget for single-piece words") {
  const auto v = piece_vocab();
  Rng rng(4);
  std::string twenty;
  for (int i = 0; i < 20; ++i) twenty += "left ";
  const auto seq = text::with_specials(text::tokenize(twenty, v));
  REQUIRE(seq.size() == 22);
  CHECK(augment::sample_whole_word_mask(seq, 0.15, v.size(), rng).positions.size() == 3);

  const auto one = text::with_specials(text::tokenize("pneumonia", v));
  REQUIRE(one.size() == 5);
  const auto plan = augment::sample_whole_word_mask(one, 0.15, v.size(), rng);
  CHECK(plan.positions == std::vector<std::int64_t>{1, 2, 3});

  const auto empty = text::with_specials(text::tokenize("", v));
  CHECK_THROWS_AS(augment::sample_whole_word_mask(empty, 0.15, v.size(), rng), std::invalid_argument);
  CHECK_THROWS_AS(augment::sample_whole_word_mask(one, 0.0, v.size(), rng), std::invalid_argument);
}

TEST_CASE("replacement split is 80/10/10") {
  const auto v = piece_vocab();
  std::string text;
  for (int i = 0; i < 40; ++i) text += "lung ";
  const auto seq = text::with_specials(text::tokenize(text, v));
  Rng rng(5);
  std::map<Replacement, double> n;
  double total = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    const auto plan = augment::sample_whole_word_mask(seq, 0.15, v.size(), rng);
    const auto m = augment::apply_mask(seq, plan);
    for (std::size_t i = 0; i < plan.positions.size(); ++i) {
      ++n[plan.replacement[i]];
      ++total;
      const auto p = static_cast<std::size_t>(plan.positions[i]);
      CHECK(m.targets[i] == seq.ids[p]);
      switch (plan.replacement[i]) {
        case Replacement::mask:
          CHECK(m.ids[p] == Vocabulary::kMask);
          break;
        case Replacement::random_token:
          CHECK_FALSE(Vocabulary::is_special(m.ids[p]));
          CHECK(m.ids[p] < v.size());
          break;
        case Replacement::keep:
          CHECK(m.ids[p] == seq.ids[p]);
          break;
      }
    }
  }
  CHECK(n[Replacement::mask] / total == doctest::Approx(0.8).epsilon(0.0125));
  CHECK(n[Replacement::random_token] / total == doctest::Approx(0.1).epsilon(0.1));
  CHECK(n[Replacement::keep] / total == doctest::Approx(0.1).epsilon(0.1));
}

TEST_CASE("stage rules for image augmentation") {
  auto joint = AugmentParams::joint_preset();
  CHECK_NOTHROW(joint.validate());
  joint.flip_prob = 0.5;
  CHECK_THROWS_AS(joint.validate(), augment::AugmentError);
  Rng rng(6);
  CHECK_THROWS_AS(augment::image_augment(constant_image(0.5f), joint, rng), augment::AugmentError);

  auto ft = AugmentParams::finetune_preset();
  CHECK_NOTHROW(ft.validate());
  ft.noise_std = 0.1;
  CHECK_THROWS_AS(ft.validate(), augment::AugmentError);
  CHECK_NOTHROW(AugmentParams::image_only_preset().validate());
  CHECK_THROWS_AS(augment::parse_stage("pretrain"), augment::AugmentError);

  const auto round = AugmentParams::from_json(AugmentParams::image_only_preset().to_json());
  CHECK(round.to_json() == AugmentParams::image_only_preset().to_json());
}

TEST_CASE("identity augmentation returns the input") {
  Rng rng(7);
  corpus::ImageRecord img = constant_image(0.0f);
  for (float& p : img.pixels) p = static_cast<float>(rng.uniform());
  for (Stage s : {Stage::joint, Stage::image_only, Stage::finetune}) {
    CHECK(augment::image_augment(img, AugmentParams::identity(s), rng) == img);
  }
}

TEST_CASE("brightness jitter on a constant image") {
  auto p = AugmentParams::identity();
  p.brightness = 0.2;
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto out = augment::image_augment(constant_image(0.5f), p, rng);
    const auto [lo, hi] = std::minmax_element(out.pixels.begin(), out.pixels.end());
    CHECK(*lo == *hi);
    CHECK(*lo >= 0.4f);
    CHECK(*lo <= 0.6f);
  }
}

TEST_CASE("full augmentation keeps shape and range") {
  Rng rng(9);
  corpus::ImageRecord img = constant_image(0.0f, 48);
  for (float& p : img.pixels) p = static_cast<float>(rng.uniform());
  for (const auto& p : {AugmentParams::joint_preset(), AugmentParams::image_only_preset(),
                        AugmentParams::finetune_preset()}) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto out = augment::image_augment(img, p, rng);
      CHECK(out.height == 48);
      CHECK(out.width == 48);
      CHECK(out.id == img.id);
      CHECK(std::all_of(out.pixels.begin(), out.pixels.end(), [](float v) { return v >= 0.0f && v <= 1.0f; }));
    }
  }
}
