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


/// @file inference.hpp
/// @brief Zero-shot classification, linear probing and similarity maps.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cxrvlp/corpus/types.hpp"
#include "cxrvlp/metrics/metrics.hpp"
#include "cxrvlp/nn/random.hpp"
#include "cxrvlp/text/encoder.hpp"
#include "cxrvlp/text/vocab.hpp"
#include "cxrvlp/vision/encoder.hpp"

namespace cxrvlp::inference {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A vocabulary with its text and image towers.
struct JointModel {
  text::Vocabulary vocab;
  text::TextEncoder text;
  vision::ImageEncoder image;
};

struct PromptSet {
  std::vector<std::string> prompts;
  Matrix embeddings;  // C x D, unit rows
  std::size_t size() const { return prompts.size(); }
};

/// Tokenized with [CLS]/[SEP]; throws std::invalid_argument on an empty prompt.
text::TokenSequence prompt_tokens(const std::string& prompt, const text::Vocabulary& v);

/// Unit-norm joint-space embeddings of arbitrary texts, one row each.
Matrix embed_texts(const std::vector<std::string>& texts, const JointModel& m);

/// Throws std::invalid_argument for fewer than two prompts or an empty one.
PromptSet embed_prompts(const std::vector<std::string>& prompts, const JointModel& m);

/// Global image embeddings v, one unit row per image (eval mode, batched).
Matrix embed_images(const std::vector<const corpus::ImageRecord*>& images, const JointModel& m,
                    int batch_size = 32);

/// softmax over v . t^c, no temperature.
Vector zero_shot_probs(const Vector& v, const PromptSet& ps);
Vector zero_shot_classify(const corpus::ImageRecord& img, const PromptSet& ps, const JointModel& m);

/// Projected, per-cell normalized grid V of one image: (h*w) x D rows.
struct ProjectedCells {
  Matrix cells;
  int height = 0;
  int width = 0;
};
ProjectedCells project_image(const corpus::ImageRecord& img, const JointModel& m);

/// cell (i, j) = V_ij . t, clamped to [-1, 1] against rounding.
metrics::SimilarityMap similarity_map(const ProjectedCells& grid, const Vector& t);
metrics::SimilarityMap similarity_map(const corpus::ImageRecord& img, const std::string& phrase,
                                      const JointModel& m);

struct LinearProbe {
  Matrix beta;  // D x C
  Vector bias;  // C
  Vector logits(const Vector& v) const { return beta.transpose() * v + bias; }
  int predict(const Vector& v) const;
};

/// beta = [t^1 ... t^C], bias = 0.
LinearProbe init_probe(const PromptSet& ps);

struct ProbeOptions {
  int steps = 200;
  double lr = 0.5;
  double weight_decay = 0.0;
};

/// Softmax-regression training of (beta, bias) only, full batch gradient
/// descent, on a random `fraction` of the rows of `features` (N x D).
/// Throws std::invalid_argument if the chosen subset has a single class.
LinearProbe train_probe(const LinearProbe& probe, const Matrix& features,
                        const std::vector<int>& labels, double fraction, const ProbeOptions& opts,
                        Rng& rng);

}  // namespace cxrvlp::inference
