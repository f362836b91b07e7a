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


// Command-line front end: corpus generation, the training phases and the
// evaluation suites. Every subcommand takes --config, --seed and --out.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cxrvlp/corpus/manifest.hpp"
#include "cxrvlp/corpus/synthetic.hpp"
#include "cxrvlp/pipeline/config.hpp"
#include "cxrvlp/pipeline/evaluation.hpp"
#include "cxrvlp/pipeline/phases.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cxrvlp;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string dataset;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--seed", c.seed, "random seed (overrides the config)");
  cmd->add_option("--out", c.out, "output directory (overrides the config)");
  cmd->add_option("--dataset", c.dataset, "manifest directory (overrides the config)");
}

json read_json(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw pipeline::ConfigError("cannot open config " + path);
  if (fs::path(path).extension() != ".json") {
    throw pipeline::ConfigError("config " + path + ": only JSON config files are supported");
  }
  return json::parse(is);
}

pipeline::RunConfig make_config(const Common& c, pipeline::Phase phase) {
  pipeline::RunConfig cfg = c.config.empty() ? pipeline::run_config_from_json(json::object(), phase)
                                             : pipeline::load_run_config(c.config, phase);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out = c.out;
  if (!c.dataset.empty()) cfg.dataset = c.dataset;
  return cfg;
}

void write_json(const fs::path& p, const json& j) {
  fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::trunc);
  os << j.dump(2) << '\n';
  std::cout << "wrote " << p.string() << '\n';
}

fs::path default_checkpoint(const pipeline::RunConfig& cfg, const std::string& ck) {
  return ck.empty() ? cfg.checkpoint_path(pipeline::Phase::joint) : fs::path(ck);
}

corpus::Dataset load_dataset(const pipeline::RunConfig& cfg) {
  if (cfg.dataset.empty()) throw pipeline::ConfigError("no dataset given (--dataset or \"dataset\" in the config)");
  corpus::LoadOptions o;
  o.image_side = cfg.image_side;
  return corpus::load_manifest(cfg.dataset, o);
}

void report_phase(const pipeline::Checkpoint& ck) {
  std::cout << to_string(ck.phase) << ": " << ck.path.string();
  if (ck.phase != pipeline::Phase::vocab) {
    std::cout << " (epoch " << ck.epoch << ", " << ck.steps << " steps, best val loss " << ck.best_val_loss << ")";
  }
  std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cxrvlp: paired chest X-ray image/report pretraining and evaluation"};
  app.require_subcommand(1);

  Common gen_c;
  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic paired corpus as a manifest");
  add_common(gen, gen_c);

  Common vocab_c;
  auto* vocab = app.add_subcommand("build-vocab", "induce the WordPiece vocabulary");
  add_common(vocab, vocab_c);

  Common text_c;
  int text_phase = 2;
  auto* text = app.add_subcommand("pretrain-text", "text pretraining (2: MLM, 3: MLM + section matching)");
  add_common(text, text_c);
  text->add_option("--phase", text_phase)->required()->check(CLI::IsMember({2, 3}));

  Common image_c;
  auto* image = app.add_subcommand("pretrain-image", "SimCLR image pretraining");
  add_common(image, image_c);

  Common joint_c;
  auto* joint = app.add_subcommand("train-joint", "joint image-text training");
  add_common(joint, joint_c);

  Common zs_c;
  std::string zs_ck, pos_prompt, neg_prompt, prompt_file, zs_split = "test", zs_category = "pneumonia";
  auto* zs = app.add_subcommand("eval-zeroshot", "zero-shot classification");
  add_common(zs, zs_c);
  zs->add_option("--checkpoint", zs_ck, "model checkpoint (default: <out>/joint/checkpoint.bin)");
  zs->add_option("--pos-prompt", pos_prompt);
  zs->add_option("--neg-prompt", neg_prompt);
  zs->add_option("--prompt-file", prompt_file, "one prompt per line; line order is the class id");
  zs->add_option("--split", zs_split);
  zs->add_option("--category", zs_category, "category labelling the custom prompt pair");

  Common gr_c;
  std::string gr_ck, gr_split = "test";
  bool rescale = false, dilation = false;
  int export_n = 0;
  auto* gr = app.add_subcommand("eval-grounding", "phrase grounding metrics");
  add_common(gr, gr_c);
  gr->add_option("--checkpoint", gr_ck);
  gr->add_flag("--rescale", rescale, "min-max rescale similarity maps before scoring");
  gr->add_flag("--dilation", dilation, "dilated last stage (stride 8 grid)");
  gr->add_option("--export", export_n, "export the first N similarity maps as NPY + PNG overlays");
  gr->add_option("--split", gr_split);

  Common seg_c;
  std::string seg_ck;
  double fraction = 0.0;
  auto* seg = app.add_subcommand("eval-segmentation", "zero-shot and probed segmentation Dice");
  add_common(seg, seg_c);
  seg->add_option("--checkpoint", seg_ck);
  seg->add_option("--fraction", fraction, "train fraction for the cell-wise probe (0 skips it)")
      ->check(CLI::Range(0.0, 1.0));

  Common ps_c;
  std::string ps_ck, category = "pneumonia";
  std::vector<std::string> pairs;
  auto* ps = app.add_subcommand("prompt-sensitivity", "zero-shot F1/ROC-AUC across prompt pairs");
  add_common(ps, ps_c);
  ps->add_option("--checkpoint", ps_ck);
  ps->add_option("--pair", pairs, "prompt pair as 'positive|negative' (repeatable)")->required();
  ps->add_option("--category", category);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const json j = read_json(gen_c.config);
      corpus::SyntheticConfig sc =
          j.contains("synthetic") ? corpus::SyntheticConfig::from_json(j.at("synthetic")) : corpus::SyntheticConfig{};
      const std::uint64_t seed = gen_c.seed.value_or(j.value("seed", std::uint64_t{0}));
      std::string out = gen_c.out;
      if (out.empty()) out = j.contains("dataset") ? (fs::path(gen_c.config).parent_path() / j.at("dataset").get<std::string>()).string() : "data/synthetic";
      const corpus::Dataset ds = corpus::generate_synthetic_corpus(sc, seed);
      corpus::write_manifest(ds, out);
      std::cout << "wrote " << ds.pairs.size() << " pairs to " << out << '\n';
    } else if (vocab->parsed()) {
      report_phase(pipeline::run_phase(make_config(vocab_c, pipeline::Phase::vocab)));
    } else if (text->parsed()) {
      const auto phase = text_phase == 2 ? pipeline::Phase::text_phase2 : pipeline::Phase::text_phase3;
      report_phase(pipeline::run_phase(make_config(text_c, phase)));
    } else if (image->parsed()) {
      report_phase(pipeline::run_phase(make_config(image_c, pipeline::Phase::image_pretrain)));
    } else if (joint->parsed()) {
      report_phase(pipeline::run_phase(make_config(joint_c, pipeline::Phase::joint)));
    } else if (zs->parsed()) {
      const auto cfg = make_config(zs_c, pipeline::Phase::joint);
      const auto model = pipeline::load_model(default_checkpoint(cfg, zs_ck), cfg.vocab_path(), cfg.seed);
      const auto ds = load_dataset(cfg);
      const auto split = corpus::parse_split(zs_split);
      const fs::path dir = cfg.out / "eval";
      if (!prompt_file.empty()) {
        std::ifstream is(prompt_file);
        if (!is) throw std::runtime_error("cannot open " + prompt_file);
        std::vector<std::string> prompts;
        for (std::string line; std::getline(is, line);) {
          if (!line.empty()) prompts.push_back(line);
        }
        const auto set = inference::embed_prompts(prompts, model);
        const auto images = pipeline::split_images(ds, split);
        const auto emb = inference::embed_images(images, model);
        fs::create_directories(dir);
        std::ofstream os(dir / "zeroshot_probs.csv", std::ios::trunc);
        os << "image_id,predicted";
        for (std::size_t c = 0; c < prompts.size(); ++c) os << ",p" << c;
        os << '\n';
        for (std::size_t i = 0; i < images.size(); ++i) {
          const auto p = inference::zero_shot_probs(emb.row(static_cast<Eigen::Index>(i)).transpose(), set);
          Eigen::Index best = 0;
          p.maxCoeff(&best);
          os << images[i]->id << ',' << best;
          for (Eigen::Index c = 0; c < p.size(); ++c) os << ',' << p(c);
          os << '\n';
        }
        std::cout << "wrote " << (dir / "zeroshot_probs.csv").string() << '\n';
      } else if (!pos_prompt.empty() || !neg_prompt.empty()) {
        if (pos_prompt.empty() || neg_prompt.empty()) throw std::invalid_argument("--pos-prompt and --neg-prompt go together");
        const auto images = pipeline::split_images(ds, split);
        const auto emb = inference::embed_images(images, model);
        const auto f = corpus::parse_finding(zs_category);
        const auto r = pipeline::binary_zero_shot(emb, pipeline::category_labels(ds, images, f), pos_prompt, neg_prompt, model);
        write_json(dir / "zeroshot_custom.json", {{"category", zs_category},
                                                  {"pos_prompt", pos_prompt},
                                                  {"neg_prompt", neg_prompt},
                                                  {"balanced_accuracy", r.balanced_accuracy},
                                                  {"f1", r.metrics.f1},
                                                  {"auroc", r.metrics.auroc}});
      } else {
        const auto rep = pipeline::eval_zeroshot(model, ds, split);
        write_json(dir / "zeroshot.json", rep.to_json());
        std::cout << "mean balanced accuracy " << rep.mean_accuracy << '\n';
      }
    } else if (gr->parsed()) {
      const auto cfg = make_config(gr_c, pipeline::Phase::joint);
      const auto model = pipeline::load_model(default_checkpoint(cfg, gr_ck), cfg.vocab_path(), cfg.seed);
      const auto ds = load_dataset(cfg);
      pipeline::GroundingOptions o;
      o.split = corpus::parse_split(gr_split);
      o.rescale = rescale;
      o.dilation = dilation;
      const auto rep = pipeline::eval_grounding(model, ds, o);
      const fs::path dir = cfg.out / "eval";
      write_json(dir / "grounding.json", rep.to_json());
      rep.write_csv(dir / "grounding_samples.csv");
      std::cout << "macro CNR " << rep.macro.cnr << ", mIoU " << rep.macro.miou << ", Dice " << rep.macro.dice << '\n';
      if (export_n > 0) {
        auto m = model;
        m.image.set_dilation(dilation);
        const fs::path maps = dir / "maps";
        fs::create_directories(maps);
        const auto anns = ds.annotations_in(o.split);
        for (int k = 0; k < export_n && k < static_cast<int>(anns.size()); ++k) {
          const auto* img = ds.find_image(anns[static_cast<std::size_t>(k)]->image_id);
          const auto map = inference::similarity_map(*img, anns[static_cast<std::size_t>(k)]->phrase, m);
          const std::string stem = img->id + "_" + std::to_string(k);
          pipeline::export_similarity_map(map, *img, maps / (stem + ".npy"), maps / (stem + ".png"));
        }
        std::cout << "exported " << std::min<std::size_t>(export_n, anns.size()) << " maps to " << maps.string() << '\n';
      }
    } else if (seg->parsed()) {
      const auto cfg = make_config(seg_c, pipeline::Phase::joint);
      const auto model = pipeline::load_model(default_checkpoint(cfg, seg_ck), cfg.vocab_path(), cfg.seed);
      const auto rep = pipeline::eval_segmentation(model, load_dataset(cfg), fraction, cfg.seed);
      write_json(cfg.out / "eval" / "segmentation.json", rep.to_json());
    } else if (ps->parsed()) {
      const auto cfg = make_config(ps_c, pipeline::Phase::joint);
      const auto model = pipeline::load_model(default_checkpoint(cfg, ps_ck), cfg.vocab_path(), cfg.seed);
      const auto ds = load_dataset(cfg);
      std::vector<std::pair<std::string, std::string>> pp;
      for (const auto& s : pairs) {
        const auto bar = s.find('|');
        if (bar == std::string::npos) throw std::invalid_argument("--pair expects 'positive|negative', got '" + s + "'");
        pp.emplace_back(s.substr(0, bar), s.substr(bar + 1));
      }
      const auto images = pipeline::split_images(ds, corpus::Split::test);
      const auto rows = pipeline::prompt_sensitivity_report(
          model, pp, images, pipeline::category_labels(ds, images, corpus::parse_finding(category)));
      std::cout << pipeline::format_sensitivity_table(rows);
      json j = json::array();
      for (const auto& r : rows) j.push_back({{"pos", r.pos}, {"neg", r.neg}, {"f1", r.f1}, {"roc_auc", r.auroc}, {"delta_auc", r.delta_auc}});
      write_json(cfg.out / "eval" / "prompt_sensitivity.json", j);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
