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


#include "cxrvlp/pipeline/config.hpp"

#include <fstream>

namespace cxrvlp::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::vocab:
      return "vocab";
    case Phase::text_phase2:
      return "text_phase2";
    case Phase::text_phase3:
      return "text_phase3";
    case Phase::image_pretrain:
      return "image_pretrain";
    case Phase::joint:
      return "joint";
  }
  return "unknown";
}

Phase parse_phase(std::string_view s) {
  for (Phase p : {Phase::vocab, Phase::text_phase2, Phase::text_phase3, Phase::image_pretrain, Phase::joint}) {
    if (s == to_string(p)) return p;
  }
  throw ConfigError("unknown phase '" + std::string(s) + "'");
}

PhaseSettings default_settings(Phase p) {
  PhaseSettings s;
  switch (p) {
    case Phase::vocab:
      break;
    case Phase::text_phase2:
      s.optim.lr = 1e-3;
      s.max_epochs = 20;
      break;
    case Phase::text_phase3:
      s.optim.lr = 5e-4;
      s.max_epochs = 15;
      break;
    case Phase::image_pretrain:
      s.optim.lr = 1e-3;
      s.max_epochs = 8;
      s.augment = augment::AugmentParams::image_only_preset();
      break;
    case Phase::joint:
      s.optim.lr = 5e-4;
      s.max_epochs = 20;
      s.augment = augment::AugmentParams::joint_preset();
      break;
  }
  return s;
}

void RunConfig::validate() const {
  const auto& o = settings.optim;
  if (!(o.warmup_fraction >= 0.0 && o.warmup_fraction < 1.0)) {
    throw ConfigError("warmup_fraction must lie in [0, 1)");
  }
  if (!(o.lr > 0.0)) throw ConfigError("lr must be positive");
  if (o.batch_size < 1) throw ConfigError("batch_size must be positive");
  const bool contrastive = phase == Phase::text_phase3 || phase == Phase::image_pretrain || phase == Phase::joint;
  if (contrastive && o.batch_size < 2) {
    throw ConfigError(std::string(to_string(phase)) + ": contrastive phases need batch_size >= 2");
  }
  if (settings.max_epochs < 0 || settings.eval_every < 1 || settings.patience < 1) {
    throw ConfigError("max_epochs must be >= 0, eval_every and patience >= 1");
  }
  if (!(mask_rate > 0.0 && mask_rate <= 1.0)) throw ConfigError("mask_rate must lie in (0, 1]");
  if (!(simclr_tau > 0.0)) throw ConfigError("simclr_tau must be positive");
  if (image_side <= 0) throw ConfigError("image_side must be positive");
  try {
    temperatures.validate();
    settings.augment.validate();
    vision.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (phase == Phase::image_pretrain && settings.augment.stage != augment::Stage::image_only) {
    throw ConfigError("image_pretrain expects image_only augmentation");
  }
  if (phase == Phase::joint && settings.augment.stage != augment::Stage::joint) {
    throw ConfigError("joint training expects joint-stage augmentation");
  }
}

RunConfig run_config_from_json(const json& j, Phase phase, const fs::path& base_dir) {
  auto resolve = [&](const std::string& s) {
    fs::path p(s);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  RunConfig c;
  c.phase = phase;
  try {
    if (j.contains("dataset")) c.dataset = resolve(j.at("dataset").get<std::string>());
    if (j.contains("out")) c.out = resolve(j.at("out").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.image_side = j.value("image_side", c.image_side);
    if (j.contains("vocab")) c.vocab_size = j.at("vocab").value("size", c.vocab_size);
    if (j.contains("text")) c.text = text::EncoderConfig::from_json(j.at("text"));
    if (j.contains("vision")) c.vision = vision::VisionConfig::from_json(j.at("vision"));
    if (j.contains("temperatures")) {
      const auto& t = j.at("temperatures");
      c.temperatures.tau1 = t.value("tau1", c.temperatures.tau1);
      c.temperatures.tau2 = t.value("tau2", c.temperatures.tau2);
      c.temperatures.lambda_mlm = t.value("lambda_mlm", c.temperatures.lambda_mlm);
      c.temperatures.lambda_ga = t.value("lambda_ga", c.temperatures.lambda_ga);
    }
    c.mask_rate = j.value("mask_rate", c.mask_rate);
    c.simclr_tau = j.value("simclr_tau", c.simclr_tau);

    c.settings = default_settings(phase);
    const std::string key(to_string(phase));
    if (j.contains("phases") && j.at("phases").contains(key)) {
      const auto& s = j.at("phases").at(key);
      auto& o = c.settings.optim;
      o.lr = s.value("lr", o.lr);
      o.warmup_fraction = s.value("warmup_fraction", o.warmup_fraction);
      o.weight_decay = s.value("weight_decay", o.weight_decay);
      o.clip_norm = s.value("clip_norm", o.clip_norm);
      o.batch_size = s.value("batch_size", o.batch_size);
      c.settings.max_epochs = s.value("max_epochs", c.settings.max_epochs);
      c.settings.eval_every = s.value("eval_every", c.settings.eval_every);
      c.settings.patience = s.value("patience", c.settings.patience);
      if (s.contains("augment")) c.settings.augment = augment::AugmentParams::from_json(s.at("augment"));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path, Phase phase) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  const std::string ext = path.extension().string();
  if (ext != ".json") {
    throw ConfigError("config " + path.string() + ": only JSON config files are supported");
  }
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j, phase, path.parent_path());
}

}  // namespace cxrvlp::pipeline
