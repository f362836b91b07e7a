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

/// @file encoder.hpp
/// @brief Pre-LN transformer text encoder with MLM and projection heads.
///
/// Sequences are packed row-wise into one [sum(T), d] matrix; attention is
/// restricted to each sequence through its Segment, so no padding is used.

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "cxrvlp/nn/layers.hpp"
#include "cxrvlp/nn/random.hpp"
#include "cxrvlp/text/vocab.hpp"

namespace cxrvlp::text {

struct EncoderConfig {
  int vocab_size = 0;
  int width = 64;
  int layers = 4;
  int heads = 4;
  int ffn = 256;
  int max_positions = 128;
  float dropout = 0.25f;       // hidden states
  float attn_dropout = 0.25f;  // attention weights
  int proj_hidden = 128;
  int proj_dim = 128;
  nn::Activation proj_activation = nn::Activation::gelu;

  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
};

class SequenceTooLong : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Packed batch of token sequences.
struct PackedBatch {
  std::vector<int> ids;
  std::vector<int> positions;
  std::vector<nn::Segment> segments;

  static PackedBatch pack(const std::vector<const TokenSequence*>& seqs, int max_positions);
  static PackedBatch pack(const std::vector<TokenSequence>& seqs, int max_positions);
  std::int64_t rows() const { return static_cast<std::int64_t>(ids.size()); }
};

struct TextFeatures {
  nn::Tensor token_features;  // T x d
  nn::Tensor cls_feature;     // 1 x d
};

class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(const EncoderConfig& cfg, Rng& rng);

  const EncoderConfig& config() const { return cfg_; }

  /// Hidden states for every packed row. Dropout is applied only when rng is
  /// non-null.
  nn::Tensor forward(const PackedBatch& batch, Rng* rng) const;

  /// Rows at the start of each segment (the [CLS] positions).
  nn::Tensor cls_rows(const nn::Tensor& hidden, const PackedBatch& batch) const;

  /// Vocabulary logits for the selected rows of `hidden`.
  nn::Tensor mlm_logits(const nn::Tensor& hidden, std::span<const std::int64_t> rows) const;

  /// Projection head output, not normalized.
  nn::Tensor project_raw(const nn::Tensor& cls) const { return proj_(cls); }
  /// Projection followed by row-wise l2 normalization.
  nn::Tensor project(const nn::Tensor& cls) const;

  /// Eval-mode forward of one sequence, which must already carry its specials.
  TextFeatures encode(const TokenSequence& seq) const;

  /// Unit-norm joint-space embeddings for a batch of sequences (eval mode).
  nn::Tensor embed(const std::vector<TokenSequence>& seqs) const;

  nn::ProjectionHead& projection() { return proj_; }
  const nn::ProjectionHead& projection() const { return proj_; }
  nn::Tensor& position_table() { return pos_; }

  nn::ParameterList parameters(const std::string& prefix = "text") const;
  /// Encoder body, MLM head and projection are grouped separately so that
  /// each phase can train only what it uses.
  nn::ParameterList encoder_parameters(const std::string& prefix = "text") const;
  nn::ParameterList mlm_parameters(const std::string& prefix = "text") const;
  nn::ParameterList projection_parameters(const std::string& prefix = "text") const;

 private:
  struct Block {
    nn::LayerNorm ln1;
    nn::Linear q, k, v, o;
    nn::LayerNorm ln2;
    nn::Linear fc1, fc2;
  };

  EncoderConfig cfg_;
  nn::Tensor tok_;  // vocab x d
  nn::Tensor pos_;  // max_positions x d
  std::vector<Block> blocks_;
  nn::LayerNorm final_ln_;
  nn::Linear mlm_transform_;
  nn::LayerNorm mlm_ln_;
  nn::Linear mlm_decoder_;
  nn::ProjectionHead proj_;
};

}  // namespace cxrvlp::text
