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


/// @file config.hpp
/// @brief Run configuration for the training phases.
///
/// A config file is JSON with shared sections ("dataset", "seed", "vocab",
/// "text", "vision", "temperatures", "mask_rate", "simclr_tau") and one
/// section per trainable phase under "phases". Each subcommand selects the
/// section of its phase. Relative paths resolve against the file's directory.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "cxrvlp/augment/augment.hpp"
#include "cxrvlp/objectives/losses.hpp"
#include "cxrvlp/text/encoder.hpp"
#include "cxrvlp/vision/encoder.hpp"

namespace cxrvlp::pipeline {

enum class Phase { vocab, text_phase2, text_phase3, image_pretrain, joint };
std::string_view to_string(Phase p);
Phase parse_phase(std::string_view s);

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct OptimSettings {
  double lr = 1e-3;
  double warmup_fraction = 0.03;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  int batch_size = 32;
};

struct PhaseSettings {
  OptimSettings optim;
  int max_epochs = 10;
  int eval_every = 1;  // epochs between validation passes
  int patience = 5;    // validation passes without improvement before stopping
  augment::AugmentParams augment;
};

struct RunConfig {
  std::filesystem::path dataset;
  std::filesystem::path out = "runs/default";
  Phase phase = Phase::vocab;
  std::uint64_t seed = 0;
  int image_side = 64;

  int vocab_size = 1000;
  text::EncoderConfig text;  // vocab_size is taken from the built vocabulary
  vision::VisionConfig vision;
  objectives::TemperatureConfig temperatures;
  double mask_rate = 0.15;
  double simclr_tau = 0.5;

  PhaseSettings settings;  // of `phase`

  std::filesystem::path vocab_path() const { return out / "vocab.txt"; }
  std::filesystem::path phase_dir(Phase p) const { return out / std::string(to_string(p)); }
  std::filesystem::path checkpoint_path(Phase p) const { return phase_dir(p) / "checkpoint.bin"; }

  /// Throws ConfigError on invalid values (batch size < 2 for contrastive
  /// phases, warmup outside [0, 1), augmentation not allowed for the stage).
  void validate() const;
};

/// Defaults for each phase; the file's values override them.
PhaseSettings default_settings(Phase p);

RunConfig run_config_from_json(const nlohmann::json& j, Phase phase,
                               const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path, Phase phase);

}  // namespace cxrvlp::pipeline
