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
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

#include "cxrvlp/corpus/manifest.hpp"
#include "cxrvlp/corpus/synthetic.hpp"
#include "cxrvlp/metrics/metrics.hpp"
#include "cxrvlp/nn/archive.hpp"
#include "cxrvlp/pipeline/evaluation.hpp"
#include "cxrvlp/pipeline/phases.hpp"

using namespace cxrvlp;
using pipeline::Phase;
namespace fs = std::filesystem;

namespace {

const Phase kAllPhases[] = {Phase::vocab, Phase::text_phase2, Phase::text_phase3,
                            Phase::image_pretrain, Phase::joint};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cxrvlp_pipe_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

struct Fixture {
  fs::path root;
  fs::path data;
  corpus::Dataset ds;

  Fixture() : root(scratch("fixture")), data(root / "data") {
    corpus::SyntheticConfig sc;
    sc.n_train = 8;
    sc.n_val = 4;
    sc.n_test = 8;
    sc.image_size = 32;
    write_manifest(corpus::generate_synthetic_corpus(sc, 17), data);
    ds = corpus::load_manifest(data, {32});
  }
  ~Fixture() { if (!std::getenv("KEEP")) fs::remove_all(root); }

  pipeline::RunConfig config(Phase p, const fs::path& out, std::uint64_t seed = 1) const {
    nlohmann::json j = {
        {"dataset", data.string()},
        {"out", out.string()},
        {"seed", seed},
        {"image_side", 32},
        {"vocab", {{"size", 200}}},
        {"text", {{"width", 16}, {"layers", 1}, {"heads", 2}, {"ffn", 32}, {"proj_hidden", 16}, {"proj_dim", 8}}},
        {"vision", {{"widths", {4, 4, 8, 8}}, {"proj_hidden", 16}, {"proj_dim", 8}, {"simclr_hidden", 8}, {"simclr_dim", 8}}},
    };
    for (const char* k : {"text_phase2", "text_phase3", "image_pretrain", "joint"}) {
      j["phases"][k] = {{"max_epochs", 1}, {"batch_size", 4}};
    }
    return pipeline::run_config_from_json(j, p);
  }

  void run_all(const fs::path& out, std::uint64_t seed = 1) const {
    for (Phase p : kAllPhases) pipeline::run_phase(config(p, out, seed), ds);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("every phase runs for one epoch") {
  const auto& f = fixture();
  const fs::path out = f.root / "smoke";
  f.run_all(out);
  CHECK(fs::exists(out / "vocab.txt"));
  for (Phase p : {Phase::text_phase2, Phase::text_phase3, Phase::image_pretrain, Phase::joint}) {
    const auto cfg = f.config(p, out);
    CAPTURE(to_string(p));
    REQUIRE(fs::exists(cfg.checkpoint_path(p)));
    const auto info = pipeline::read_checkpoint_info(cfg.checkpoint_path(p));
    CHECK(info.phase == p);
    CHECK(info.epoch == 1);
    CHECK(info.steps == 2);
    CHECK(std::isfinite(info.best_val_loss));
    const std::string log = slurp(cfg.phase_dir(p) / "train_log.csv");
    CHECK(log.rfind("step,epoch,lr,loss", 0) == 0);
    CHECK(std::count(log.begin(), log.end(), '\n') == 3);
    CHECK(fs::exists(cfg.phase_dir(p) / "val_log.csv"));
  }
}

TEST_CASE("runs are deterministic for a fixed seed") {
  const auto& f = fixture();
  const fs::path a = f.root / "det_a";
  const fs::path b = f.root / "det_b";
  f.run_all(a);
  f.run_all(b);
  CHECK(slurp(a / "vocab.txt") == slurp(b / "vocab.txt"));
  for (Phase p : {Phase::text_phase2, Phase::text_phase3, Phase::image_pretrain, Phase::joint}) {
    const std::string dir(to_string(p));
    CAPTURE(dir);
    CHECK(slurp(a / dir / "train_log.csv") == slurp(b / dir / "train_log.csv"));
    CHECK(slurp(a / dir / "val_log.csv") == slurp(b / dir / "val_log.csv"));
    const auto ca = nn::read_archive(a / dir / "checkpoint.bin");
    const auto cb = nn::read_archive(b / dir / "checkpoint.bin");
    REQUIRE(ca.tensors.size() == cb.tensors.size());
    for (const auto& [name, t] : ca.tensors) CHECK(t.values == cb.tensors.at(name).values);
  }
  const fs::path c = f.root / "det_c";
  for (Phase p : {Phase::vocab, Phase::text_phase2}) pipeline::run_phase(f.config(p, c, 2), f.ds);
  CHECK(slurp(a / "text_phase2" / "train_log.csv") != slurp(c / "text_phase2" / "train_log.csv"));
}

TEST_CASE("reloaded checkpoints reproduce the forward pass") {
  const auto& f = fixture();
  const fs::path out = f.root / "reload";
  f.run_all(out);
  const auto cfg = f.config(Phase::joint, out);
  const auto ck = cfg.checkpoint_path(Phase::joint);
  const auto m1 = pipeline::load_model(ck, cfg.vocab_path());
  const auto archive = nn::read_archive(ck);
  auto params = m1.text.parameters();
  for (auto& p : m1.image.parameters()) params.push_back(p);
  std::size_t matched = 0;
  for (const auto& p : params) {
    const auto it = archive.tensors.find(p.first);
    if (it == archive.tensors.end()) continue;
    const auto v = p.second.values();
    CHECK(std::vector<float>(v.begin(), v.end()) == it->second.values);
    ++matched;
  }
  CHECK(matched > 0);

  // A different seed only changes the fresh SimCLR head, never the forward.
  const auto m2 = pipeline::load_model(ck, cfg.vocab_path(), 99);
  const auto images = pipeline::split_images(f.ds, corpus::Split::test);
  CHECK(inference::embed_images(images, m1) == inference::embed_images(images, m2));
  const std::vector<std::string> texts = {"Findings suggesting pneumonia", "No evidence of pneumothorax"};
  CHECK(inference::embed_texts(texts, m1) == inference::embed_texts(texts, m2));

  const auto fresh = pipeline::untrained_model(cfg);
  CHECK_FALSE(inference::embed_images(images, fresh) == inference::embed_images(images, m1));
}

TEST_CASE("missing prerequisites fail before training") {
  const auto& f = fixture();
  const fs::path out = f.root / "prereq";
  CHECK_THROWS_WITH_AS(pipeline::run_phase(f.config(Phase::text_phase2, out), f.ds),
                       doctest::Contains("missing prerequisite"), pipeline::TrainingError);
  pipeline::run_phase(f.config(Phase::vocab, out), f.ds);
  CHECK_THROWS_WITH_AS(pipeline::run_phase(f.config(Phase::text_phase3, out), f.ds),
                       doctest::Contains("missing prerequisite"), pipeline::TrainingError);
  CHECK_THROWS_WITH_AS(pipeline::run_phase(f.config(Phase::joint, out), f.ds),
                       doctest::Contains("missing prerequisite"), pipeline::TrainingError);
  CHECK_FALSE(fs::exists(out / "joint" / "train_log.csv"));
}

TEST_CASE("prompt sensitivity") {
  const auto& f = fixture();
  const fs::path out = f.root / "sens";
  pipeline::run_phase(f.config(Phase::vocab, out), f.ds);
  const auto m = pipeline::untrained_model(f.config(Phase::joint, out));
  const auto images = pipeline::split_images(f.ds, corpus::Split::test);
  std::vector<bool> labels;
  for (std::size_t i = 0; i < images.size(); ++i) labels.push_back(i % 2 == 0);
  const std::pair<std::string, std::string> pair{"Findings suggesting pneumonia", "No evidence of pneumonia"};
  const auto rows = pipeline::prompt_sensitivity_report(m, {pair, pair}, images, labels);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].delta_auc == 0.0);
  CHECK(rows[1].delta_auc == 0.0);
  CHECK(rows[1].auroc == rows[0].auroc);
  CHECK(pipeline::format_sensitivity_table(rows).find("No evidence of pneumonia") != std::string::npos);

  CHECK_THROWS_AS(pipeline::prompt_sensitivity_report(m, {pair}, images, labels), std::invalid_argument);
  const std::vector<bool> one_class(images.size(), true);
  CHECK_THROWS_AS(pipeline::prompt_sensitivity_report(m, {pair, pair}, images, one_class), metrics::MetricError);
}
