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

#include "cxrvlp/text/encoder.hpp"

#include <cmath>
#include <string>

#include "cxrvlp/nn/ops.hpp"

namespace cxrvlp::text {

using nn::Tensor;

void EncoderConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("text encoder config: " + m); };
  if (vocab_size <= static_cast<int>(kSpecialTokens.size())) fail("vocab_size too small");
  if (width <= 0 || layers <= 0 || heads <= 0 || ffn <= 0) fail("dimensions must be positive");
  if (width % heads != 0) fail("width must be divisible by heads");
  if (max_positions < 2) fail("max_positions must be at least 2");
  if (!(dropout >= 0.0f && dropout < 1.0f) || !(attn_dropout >= 0.0f && attn_dropout < 1.0f)) {
    fail("dropout rates must lie in [0, 1)");
  }
  if (proj_hidden <= 0 || proj_dim <= 0) fail("projection dimensions must be positive");
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"vocab_size", vocab_size}, {"width", width},
          {"layers", layers},         {"heads", heads},
          {"ffn", ffn},               {"max_positions", max_positions},
          {"dropout", dropout},       {"attn_dropout", attn_dropout},
          {"proj_hidden", proj_hidden}, {"proj_dim", proj_dim},
          {"proj_activation", proj_activation == nn::Activation::gelu ? "gelu" : "identity"}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.width = j.value("width", c.width);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.ffn = j.value("ffn", c.ffn);
  c.max_positions = j.value("max_positions", c.max_positions);
  c.dropout = j.value("dropout", c.dropout);
  c.attn_dropout = j.value("attn_dropout", c.attn_dropout);
  c.proj_hidden = j.value("proj_hidden", c.proj_hidden);
  c.proj_dim = j.value("proj_dim", c.proj_dim);
  const std::string act = j.value("proj_activation", std::string("gelu"));
  if (act == "gelu") {
    c.proj_activation = nn::Activation::gelu;
  } else if (act == "identity") {
    c.proj_activation = nn::Activation::identity;
  } else {
    throw std::invalid_argument("text encoder config: unknown proj_activation '" + act + "'");
  }
  return c;
}

PackedBatch PackedBatch::pack(const std::vector<const TokenSequence*>& seqs, int max_positions) {
  PackedBatch b;
  for (const TokenSequence* s : seqs) {
    if (s->empty()) throw std::invalid_argument("cannot encode an empty token sequence");
    if (static_cast<int>(s->size()) > max_positions) {
      throw SequenceTooLong("sequence of " + std::to_string(s->size()) +
                            " tokens exceeds max_positions " + std::to_string(max_positions));
    }
    b.segments.push_back({b.rows(), static_cast<std::int64_t>(s->size())});
    for (std::size_t i = 0; i < s->size(); ++i) {
      b.ids.push_back(s->ids[i]);
      b.positions.push_back(static_cast<int>(i));
    }
  }
  return b;
}

PackedBatch PackedBatch::pack(const std::vector<TokenSequence>& seqs, int max_positions) {
  std::vector<const TokenSequence*> ptrs;
  ptrs.reserve(seqs.size());
  for (const auto& s : seqs) ptrs.push_back(&s);
  return pack(ptrs, max_positions);
}

TextEncoder::TextEncoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const std::int64_t d = cfg_.width;
  tok_ = nn::normal_parameter(cfg_.vocab_size, d, 0.02f, rng);
  pos_ = nn::normal_parameter(cfg_.max_positions, d, 0.02f, rng);
  for (int l = 0; l < cfg_.layers; ++l) {
    Block b;
    b.ln1 = nn::LayerNorm(d);
    b.q = nn::Linear(d, d, rng);
    b.k = nn::Linear(d, d, rng);
    b.v = nn::Linear(d, d, rng);
    b.o = nn::Linear(d, d, rng);
    b.ln2 = nn::LayerNorm(d);
    b.fc1 = nn::Linear(d, cfg_.ffn, rng);
    b.fc2 = nn::Linear(cfg_.ffn, d, rng);
    blocks_.push_back(std::move(b));
  }
  final_ln_ = nn::LayerNorm(d);
  mlm_transform_ = nn::Linear(d, d, rng);
  mlm_ln_ = nn::LayerNorm(d);
  mlm_decoder_ = nn::Linear(d, cfg_.vocab_size, rng);
  proj_ = nn::ProjectionHead(d, cfg_.proj_hidden, cfg_.proj_dim, rng, cfg_.proj_activation);
}

Tensor TextEncoder::forward(const PackedBatch& batch, Rng* rng) const {
  if (batch.rows() == 0) throw std::invalid_argument("text encoder: empty batch");
  for (int p : batch.positions) {
    if (p >= cfg_.max_positions) throw SequenceTooLong("position beyond max_positions");
  }
  for (int id : batch.ids) {
    if (id < 0 || id >= cfg_.vocab_size) {
      throw std::out_of_range("text encoder: token id " + std::to_string(id) + " outside vocabulary");
    }
  }
  auto drop = [&](const Tensor& t) {
    return rng != nullptr ? nn::dropout(t, cfg_.dropout, *rng) : t;
  };
  Tensor x = nn::add(nn::embedding(tok_, batch.ids), nn::embedding(pos_, batch.positions));
  x = drop(x);
  const float attn_p = rng != nullptr ? cfg_.attn_dropout : 0.0f;
  for (const Block& b : blocks_) {
    Tensor h = b.ln1(x);
    Tensor a = nn::multi_head_attention(b.q(h), b.k(h), b.v(h), batch.segments, cfg_.heads, attn_p,
                                        rng);
    x = nn::add(x, drop(b.o(a)));
    h = b.ln2(x);
    x = nn::add(x, drop(b.fc2(nn::gelu(b.fc1(h)))));
  }
  return final_ln_(x);
}

Tensor TextEncoder::cls_rows(const Tensor& hidden, const PackedBatch& batch) const {
  std::vector<std::int64_t> rows;
  rows.reserve(batch.segments.size());
  for (const auto& s : batch.segments) rows.push_back(s.offset);
  return nn::gather_rows(hidden, rows);
}

Tensor TextEncoder::mlm_logits(const Tensor& hidden, std::span<const std::int64_t> rows) const {
  Tensor h = nn::gather_rows(hidden, rows);
  h = mlm_ln_(nn::gelu(mlm_transform_(h)));
  return mlm_decoder_(h);
}

Tensor TextEncoder::project(const Tensor& cls) const {
  if (cls.cols() != cfg_.width) {
    throw std::invalid_argument("project_text: expected width " + std::to_string(cfg_.width) +
                                ", got " + std::to_string(cls.cols()));
  }
  return nn::l2_normalize_rows(proj_(cls));
}

TextFeatures TextEncoder::encode(const TokenSequence& seq) const {
  nn::NoGradGuard guard;
  const PackedBatch b = PackedBatch::pack(std::vector<const TokenSequence*>{&seq}, cfg_.max_positions);
  TextFeatures f;
  f.token_features = forward(b, nullptr);
  f.cls_feature = cls_rows(f.token_features, b);
  return f;
}

Tensor TextEncoder::embed(const std::vector<TokenSequence>& seqs) const {
  nn::NoGradGuard guard;
  const PackedBatch b = PackedBatch::pack(seqs, cfg_.max_positions);
  return project(cls_rows(forward(b, nullptr), b));
}

nn::ParameterList TextEncoder::encoder_parameters(const std::string& prefix) const {
  nn::ParameterList out;
  out.emplace_back(prefix + ".tok", tok_);
  out.emplace_back(prefix + ".pos", pos_);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const Block& b = blocks_[l];
    const std::string p = prefix + ".block" + std::to_string(l);
    b.ln1.collect(out, p + ".ln1");
    b.q.collect(out, p + ".q");
    b.k.collect(out, p + ".k");
    b.v.collect(out, p + ".v");
    b.o.collect(out, p + ".o");
    b.ln2.collect(out, p + ".ln2");
    b.fc1.collect(out, p + ".fc1");
    b.fc2.collect(out, p + ".fc2");
  }
  final_ln_.collect(out, prefix + ".final_ln");
  return out;
}

nn::ParameterList TextEncoder::mlm_parameters(const std::string& prefix) const {
  nn::ParameterList out;
  mlm_transform_.collect(out, prefix + ".mlm.transform");
  mlm_ln_.collect(out, prefix + ".mlm.ln");
  mlm_decoder_.collect(out, prefix + ".mlm.decoder");
  return out;
}

nn::ParameterList TextEncoder::projection_parameters(const std::string& prefix) const {
  nn::ParameterList out;
  proj_.collect(out, prefix + ".proj");
  return out;
}

nn::ParameterList TextEncoder::parameters(const std::string& prefix) const {
  nn::ParameterList out = encoder_parameters(prefix);
  for (auto& p : mlm_parameters(prefix)) out.push_back(std::move(p));
  for (auto& p : projection_parameters(prefix)) out.push_back(std::move(p));
  return out;
}

}  // namespace cxrvlp::text
