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


#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

#include "cxrvlp/corpus/image_io.hpp"
#include "cxrvlp/corpus/manifest.hpp"
#include "cxrvlp/corpus/synthetic.hpp"
#include "cxrvlp/corpus/validate.hpp"
#include "cxrvlp/text/vocab.hpp"

using namespace cxrvlp;
using namespace cxrvlp::corpus;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("cxrvlp_test_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p);
  os << s;
}

void write_image(const fs::path& dir, const std::string& id, int side, float v) {
  fs::create_directories(dir / "images");
  write_npy(dir / "images" / (id + ".npy"),
            {side, side, std::vector<float>(static_cast<std::size_t>(side) * side, v)});
}

// Two reports, two images, two pairs, one annotation.
void write_fixture(const fs::path& dir) {
  write_text(dir / "reports.jsonl",
             R"({"id": "r1", "findings": ["Lungs are clear."], "impression": ["No acute findings."]})"
             "\n"
             R"({"id": "r2", "findings": [], "impression": ["Right lower pneumonia.", "No effusion."]})"
             "\n");
  write_text(dir / "pairs.jsonl",
             R"({"image_id": "i1", "report_id": "r1", "split": "train"})"
             "\n"
             R"({"image_id": "i2", "report_id": "r2", "split": "test"})"
             "\n");
  write_text(dir / "annotations.jsonl",
             R"({"image_id": "i2", "phrase": "Right lower pneumonia.", "category": "pneumonia", "boxes": [[2, 8, 5, 4]]})"
             "\n");
  write_image(dir, "i1", 16, 0.25f);
  write_image(dir, "i2", 16, 0.75f);
}

text::Vocabulary letters_vocab() {
  std::vector<std::string> t(text::kSpecialTokens.begin(), text::kSpecialTokens.end());
  for (char c = 'a'; c <= 'z'; ++c) t.emplace_back(1, c);
  t.emplace_back(".");
  return text::Vocabulary(t);
}

SyntheticConfig small_config() {
  SyntheticConfig c;
  c.n_train = 24;
  c.n_val = 8;
  c.n_test = 8;
  c.image_size = 32;
  return c;
}

}  // namespace

TEST_CASE("hand-written manifest loads") {
  TempDir d("fixture");
  write_fixture(d.path);
  const Dataset ds = load_manifest(d.path);
  CHECK(ds.reports.size() == 2);
  CHECK(ds.images.size() == 2);
  CHECK(ds.pairs.size() == 2);
  CHECK(ds.annotations.size() == 1);
  REQUIRE(ds.find_report("r2"));
  CHECK(ds.find_report("r2")->findings.empty());
  CHECK(ds.find_report("r2")->impression.size() == 2);
  REQUIRE(ds.find_image("i1"));
  CHECK(ds.find_image("i1")->at(3, 3) == 0.25f);
  CHECK(ds.pairs_in(Split::test).size() == 1);
  CHECK(ds.annotations_in(Split::test).size() == 1);
  CHECK(ds.annotations_in(Split::train).empty());
  CHECK(ds.annotations.front().boxes.front() == Box{2, 8, 5, 4});
}

TEST_CASE("empty manifest loads as an empty dataset") {
  TempDir d("empty");
  write_text(d.path / "reports.jsonl", "");
  write_text(d.path / "pairs.jsonl", "");
  const Dataset ds = load_manifest(d.path);
  CHECK(ds.reports.empty());
  CHECK(ds.pairs.empty());
  CHECK(ds.annotations.empty());
}

TEST_CASE("manifest errors") {
  SUBCASE("missing file") {
    TempDir d("missing");
    write_fixture(d.path);
    fs::remove(d.path / "pairs.jsonl");
    CHECK_THROWS_WITH_AS(load_manifest(d.path), doctest::Contains("missing file"), ManifestError);
  }
  SUBCASE("dangling reference") {
    TempDir d("dangling");
    write_fixture(d.path);
    write_text(d.path / "pairs.jsonl", R"({"image_id": "i1", "report_id": "r9", "split": "train"})" "\n");
    CHECK_THROWS_WITH_AS(load_manifest(d.path), doctest::Contains("r9"), ManifestError);
  }
  SUBCASE("malformed record carries its location") {
    TempDir d("malformed");
    write_fixture(d.path);
    write_text(d.path / "reports.jsonl", R"({"id": "r1", "findings": [], "impression": ["x"]})" "\n{oops\n");
    CHECK_THROWS_WITH_AS(load_manifest(d.path), doctest::Contains("reports.jsonl:2:"), ManifestError);
  }
  SUBCASE("report without impression") {
    TempDir d("noimp");
    write_fixture(d.path);
    write_text(d.path / "reports.jsonl", R"({"id": "r1", "findings": ["a"], "impression": []})" "\n");
    CHECK_THROWS_AS(load_manifest(d.path), ManifestError);
  }
  SUBCASE("split leakage") {
    TempDir d("leak");
    write_fixture(d.path);
    write_text(d.path / "pairs.jsonl",
               R"({"image_id": "i1", "report_id": "r1", "split": "train"})"
               "\n"
               R"({"image_id": "i1", "report_id": "r2", "split": "test"})"
               "\n");
    CHECK_THROWS_WITH_AS(load_manifest(d.path), doctest::Contains("leakage"), ManifestError);
  }
}

TEST_CASE("manifest round trip") {
  const Dataset ds = generate_synthetic_corpus(small_config(), 11);
  TempDir d("roundtrip");
  write_manifest(ds, d.path);
  const Dataset back = load_manifest(d.path);
  CHECK(back.reports.size() == ds.reports.size());
  CHECK(back.pairs.size() == ds.pairs.size());
  CHECK(back.annotations.size() == ds.annotations.size());
  for (const auto& r : ds.reports) {
    REQUIRE(back.find_report(r.id));
    CHECK(*back.find_report(r.id) == r);
  }
  for (const auto& img : ds.images) {
    REQUIRE(back.find_image(img.id));
    CHECK(*back.find_image(img.id) == img);
  }
  for (const auto& p : ds.pairs) {
    CHECK(std::find(back.pairs.begin(), back.pairs.end(), p) != back.pairs.end());
  }
  for (const auto& a : ds.annotations) {
    CHECK(std::find(back.annotations.begin(), back.annotations.end(), a) != back.annotations.end());
  }
}

TEST_CASE("centre crop and box mapping") {
  ImageRecord img;
  img.id = "w";
  img.height = 20;
  img.width = 40;
  img.source_size = {20, 40};
  img.pixels.assign(800, 0.0f);
  for (int y = 0; y < 20; ++y) {
    for (int x = 10; x < 30; ++x) img.at(y, x) = 1.0f;
  }
  const ImageRecord out = centre_crop_resize(img, 10);
  CHECK(out.height == 10);
  CHECK(out.width == 10);
  for (float v : out.pixels) CHECK(v == doctest::Approx(1.0f));
  CHECK(map_box_to_processed({10, 0, 20, 20}, {20, 40}, 10) == Box{0, 0, 10, 10});
  CHECK(map_box_to_processed({20, 10, 10, 10}, {20, 40}, 10) == Box{5, 5, 5, 5});
}

TEST_CASE("annotation validation") {
  const auto v = letters_vocab();
  const ImageSize size{64, 64};
  GroundingAnnotation a{"i", "right lower pneumonia.", Finding::pneumonia, {{4, 4, 10, 10}}};

  auto verdict = validate_annotation(a, v, size);
  CHECK(verdict.status == VerdictStatus::needs_review);
  CHECK(verdict.rule_ids == std::vector<int>{1, 2, 3, 4, 5, 6});
  CHECK(validate_annotation(a, v, size, {false}).status == VerdictStatus::accept);

  // 30 tokens pass, 31 do not; the full stop counts.
  a.phrase = std::string(29, 'a') + ".";
  CHECK(validate_annotation(a, v, size, {false}).status == VerdictStatus::accept);
  a.phrase = std::string(30, 'a') + ".";
  verdict = validate_annotation(a, v, size, {false});
  CHECK(verdict.status == VerdictStatus::reject);
  CHECK(verdict.rule_ids == std::vector<int>{7});

  a.phrase = "small left effusion.";
  a.boxes = {{4, 4, 0, 10}};
  verdict = validate_annotation(a, v, size, {false});
  CHECK(verdict.status == VerdictStatus::reject);
  CHECK(verdict.rule_ids == std::vector<int>{3});
  a.boxes = {{60, 4, 10, 10}};
  CHECK(validate_annotation(a, v, size, {false}).rule_ids == std::vector<int>{3});
  a.boxes.clear();
  CHECK(validate_annotation(a, v, size, {false}).status == VerdictStatus::reject);
}

TEST_CASE("synthetic generation is deterministic") {
  const auto cfg = small_config();
  TempDir a("gen_a");
  TempDir b("gen_b");
  write_manifest(generate_synthetic_corpus(cfg, 5), a.path);
  write_manifest(generate_synthetic_corpus(cfg, 5), b.path);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a.path)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a.path);
    std::ifstream fa(e.path(), std::ios::binary);
    std::ifstream fb(b.path / rel, std::ios::binary);
    REQUIRE(fb);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {});
    const std::string sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(sa == sb);
    ++files;
  }
  CHECK(files > 40);
  CHECK_FALSE(generate_synthetic_corpus(cfg, 6).images == generate_synthetic_corpus(cfg, 5).images);
}

TEST_CASE("synthetic corpus properties") {
  SyntheticConfig cfg;
  cfg.n_train = 1000;
  cfg.n_val = 0;
  cfg.n_test = 0;
  cfg.image_size = 32;
  cfg.normal_fraction = 0.8;
  const auto corpus = generate_synthetic_detail(cfg, 21);
  const Dataset& ds = corpus.dataset;
  int normal = 0;
  for (const auto& [id, fs_] : corpus.findings) normal += fs_.empty();
  CHECK(normal / 1000.0 == doctest::Approx(0.8).epsilon(0.025));

  std::vector<std::string> text;
  for (const auto& r : ds.reports) {
    for (const auto& s : r.impression) text.push_back(s);
  }
  const auto v = text::build_vocab(text, 400);
  for (const auto& a : ds.annotations) {
    const ImageRecord* img = ds.find_image(a.image_id);
    REQUIRE(img);
    CHECK(validate_annotation(a, v, img->source_size, {false}).status == VerdictStatus::accept);
  }
  // Every finding lies inside its box, and its phrase appears in the impression.
  for (const auto& p : ds.pairs) {
    const auto& placed = corpus.findings.at(p.image_id);
    const ReportDocument* r = ds.find_report(p.report_id);
    for (const auto& f : placed) {
      const auto m = finding_mask(f, cfg.image_size);
      int inside = 0, total = 0;
      for (int y = 0; y < cfg.image_size; ++y) {
        for (int x = 0; x < cfg.image_size; ++x) {
          if (!m[static_cast<std::size_t>(y) * cfg.image_size + x]) continue;
          ++total;
          inside += x >= f.box.x && x < f.box.x + f.box.w && y >= f.box.y && y < f.box.y + f.box.h;
        }
      }
      CHECK(total > 0);
      CHECK(inside == total);
      CHECK(std::find(r->impression.begin(), r->impression.end(), f.phrase) != r->impression.end());
    }
    if (placed.empty()) CHECK(ds.annotations_for(p.image_id).empty());
  }
}

TEST_CASE("synthetic config validation") {
  SyntheticConfig c;
  c.normal_fraction = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  const auto back = SyntheticConfig::from_json(small_config().to_json());
  CHECK(back.to_json() == small_config().to_json());
}
