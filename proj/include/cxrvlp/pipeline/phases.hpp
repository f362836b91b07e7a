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


/// @file phases.hpp
/// @brief Training phases, checkpoints and the shared optimization loop.
///
/// Files written under RunConfig::out:
///   vocab.txt
///   <phase>/checkpoint.bin   best-validation weights and training state
///   <phase>/train_log.csv    one row per optimizer step
///   <phase>/val_log.csv      one row per validation pass

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "cxrvlp/corpus/types.hpp"
#include "cxrvlp/inference/inference.hpp"
#include "cxrvlp/pipeline/config.hpp"

namespace cxrvlp::pipeline {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  Phase phase = Phase::vocab;
  int epoch = 0;
  std::int64_t steps = 0;
  double best_val_loss = 0.0;
  std::string rng_state;
  std::filesystem::path path;
};

/// Runs one phase end to end. Prerequisites (vocabulary for every text or
/// joint phase, phase-2 weights for phase 3, phase-3 text and image-pretrain
/// weights for joint training) are checked before any training step.
Checkpoint run_phase(const RunConfig& cfg);

/// Same, on an already loaded dataset.
Checkpoint run_phase(const RunConfig& cfg, const corpus::Dataset& ds);

/// Texts used for vocabulary induction: every sentence of the train-split reports.
std::vector<std::string> vocabulary_corpus(const corpus::Dataset& ds);

/// Freshly initialized model for the config (vocabulary loaded from disk).
inference::JointModel untrained_model(const RunConfig& cfg);
inference::JointModel untrained_model(const RunConfig& cfg, const text::Vocabulary& vocab);

/// Loads a vocabulary and a checkpoint holding text and/or image weights.
/// Towers absent from the checkpoint keep their fresh initialization.
inference::JointModel load_model(const std::filesystem::path& checkpoint,
                                 const std::filesystem::path& vocab, std::uint64_t seed = 0);

Checkpoint read_checkpoint_info(const std::filesystem::path& path);

}  // namespace cxrvlp::pipeline
