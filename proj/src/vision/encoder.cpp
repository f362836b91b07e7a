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

#include "cxrvlp/vision/encoder.hpp"

#include <algorithm>

#include "cxrvlp/nn/ops.hpp"

namespace cxrvlp::vision {

using nn::Tensor;

void VisionConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("vision config: " + m); };
  if (widths.size() != 4) fail("exactly four stage widths are required");
  if (std::any_of(widths.begin(), widths.end(), [](int w) { return w <= 0; })) {
    fail("stage widths must be positive");
  }
  if (proj_hidden <= 0 || proj_dim <= 0 || simclr_hidden <= 0 || simclr_dim <= 0) {
    fail("head dimensions must be positive");
  }
}

nlohmann::json VisionConfig::to_json() const {
  return {{"widths", widths},           {"dilation", dilation},
          {"stride", stride()},         {"proj_hidden", proj_hidden},
          {"proj_dim", proj_dim},       {"simclr_hidden", simclr_hidden},
          {"simclr_dim", simclr_dim},
          {"proj_activation", proj_activation == nn::Activation::gelu ? "gelu" : "identity"}};
}

VisionConfig VisionConfig::from_json(const nlohmann::json& j) {
  VisionConfig c;
  if (j.contains("widths")) c.widths = j.at("widths").get<std::vector<int>>();
  c.dilation = j.value("dilation", c.dilation);
  c.proj_hidden = j.value("proj_hidden", c.proj_hidden);
  c.proj_dim = j.value("proj_dim", c.proj_dim);
  c.simclr_hidden = j.value("simclr_hidden", c.simclr_hidden);
  c.simclr_dim = j.value("simclr_dim", c.simclr_dim);
  const std::string act = j.value("proj_activation", std::string("gelu"));
  if (act == "gelu") {
    c.proj_activation = nn::Activation::gelu;
  } else if (act == "identity") {
    c.proj_activation = nn::Activation::identity;
  } else {
    throw std::invalid_argument("vision config: unknown proj_activation '" + act + "'");
  }
  return c;
}

Tensor image_batch(const std::vector<const corpus::ImageRecord*>& images) {
  if (images.empty()) throw std::invalid_argument("image_batch: no images");
  const int side = images.front()->height;
  std::vector<float> v;
  v.reserve(images.size() * static_cast<std::size_t>(side) * side);
  for (const auto* img : images) {
    if (img->height != side || img->width != side) {
      throw std::invalid_argument("image_batch: image '" + img->id + "' is not " +
                                  std::to_string(side) + "x" + std::to_string(side));
    }
    v.insert(v.end(), img->pixels.begin(), img->pixels.end());
  }
  const auto rows = static_cast<std::int64_t>(v.size());
  return Tensor::from(std::move(v), rows, 1);
}

ImageEncoder::ImageEncoder(const VisionConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  int in = 1;
  for (std::size_t s = 0; s < cfg_.widths.size(); ++s) {
    const int out = cfg_.widths[s];
    Stage st;
    st.down = nn::Conv2d(in, out, {3, 2, 1, 1}, rng);
    st.down_ln = nn::LayerNorm(out);
    st.block.conv1 = nn::Conv2d(out, out, {3, 1, 1, 1}, rng);
    st.block.ln = nn::LayerNorm(out);
    st.block.conv2 = nn::Conv2d(out, out, {3, 1, 1, 1}, rng);
    stages_.push_back(std::move(st));
    in = out;
  }
  final_ln_ = nn::LayerNorm(in);
  proj_ = nn::ProjectionHead(in, cfg_.proj_hidden, cfg_.proj_dim, rng, cfg_.proj_activation);
  simclr_ = nn::ProjectionHead(in, cfg_.simclr_hidden, cfg_.simclr_dim, rng);
  set_dilation(cfg_.dilation);
}

void ImageEncoder::set_dilation(bool on) {
  cfg_.dilation = on;
  Stage& last = stages_.back();
  last.down.spec.stride = on ? 1 : 2;
  const int dil = on ? 2 : 1;
  for (nn::Conv2d* c : {&last.block.conv1, &last.block.conv2}) {
    c->spec.dilation = dil;
    c->spec.padding = dil;
  }
}

Tensor ImageEncoder::res_block(const ResBlock& b, const Tensor& x, const nn::Geometry& g) const {
  Tensor h = nn::gelu(b.ln(b.conv1(x, g)));
  h = b.conv2(h, g);
  return nn::gelu(nn::add(x, h));
}

Grid ImageEncoder::encode(const Tensor& pixels, std::int64_t batch, std::int64_t side) const {
  if (side <= 0 || side % cfg_.stride() != 0) {
    throw std::invalid_argument("encode_image: side " + std::to_string(side) +
                                " is not divisible by stride " + std::to_string(cfg_.stride()));
  }
  if (pixels.cols() != 1 || pixels.rows() != batch * side * side) {
    throw std::invalid_argument("encode_image: pixel tensor does not match batch geometry");
  }
  // Centre intensities around zero.
  nn::Buffer centred(pixels.values().begin(), pixels.values().end());
  for (float& v : centred) v = 2.0f * v - 1.0f;
  Tensor x = Tensor::from(std::move(centred), pixels.rows(), 1);

  nn::Geometry g{batch, side, side};
  for (const Stage& st : stages_) {
    const nn::Geometry next = st.down.output_geometry(g);
    x = nn::gelu(st.down_ln(st.down(x, g)));
    g = next;
    x = res_block(st.block, x, g);
  }
  Grid out;
  out.cells = final_ln_(x);
  out.batch = batch;
  out.height = g.height;
  out.width = g.width;
  out.stride = cfg_.stride();
  return out;
}

Grid ImageEncoder::encode(const std::vector<const corpus::ImageRecord*>& images) const {
  Tensor px = image_batch(images);
  return encode(px, static_cast<std::int64_t>(images.size()), images.front()->height);
}

Tensor ImageEncoder::project_cells_raw(const Grid& g) const {
  if (g.cells.cols() != proj_.in_features()) {
    throw std::invalid_argument("project_grid: feature width " + std::to_string(g.cells.cols()) +
                                " does not match head width " +
                                std::to_string(proj_.in_features()));
  }
  return proj_(g.cells);
}

Grid ImageEncoder::project_grid(const Grid& g) const {
  Grid out = g;
  out.cells = nn::l2_normalize_rows(project_cells_raw(g));
  return out;
}

Tensor ImageEncoder::pool_global(const Grid& g) const {
  if (g.cells_per_image() == 0) throw std::invalid_argument("pool_global: empty grid");
  return nn::l2_normalize_rows(nn::mean_row_groups(project_cells_raw(g), g.cells_per_image()));
}

Tensor ImageEncoder::simclr_embed(const Grid& g) const {
  if (g.cells_per_image() == 0) throw std::invalid_argument("simclr_embed: empty grid");
  return nn::l2_normalize_rows(simclr_(nn::mean_row_groups(g.cells, g.cells_per_image())));
}

nn::ParameterList ImageEncoder::backbone_parameters(const std::string& prefix) const {
  nn::ParameterList out;
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    const std::string p = prefix + ".stage" + std::to_string(s);
    stages_[s].down.collect(out, p + ".down");
    stages_[s].down_ln.collect(out, p + ".down_ln");
    stages_[s].block.conv1.collect(out, p + ".conv1");
    stages_[s].block.ln.collect(out, p + ".ln");
    stages_[s].block.conv2.collect(out, p + ".conv2");
  }
  final_ln_.collect(out, prefix + ".final_ln");
  return out;
}

nn::ParameterList ImageEncoder::projection_parameters(const std::string& prefix) const {
  nn::ParameterList out;
  proj_.collect(out, prefix + ".proj");
  return out;
}

nn::ParameterList ImageEncoder::simclr_parameters(const std::string& prefix) const {
  nn::ParameterList out;
  simclr_.collect(out, prefix + ".simclr");
  return out;
}

nn::ParameterList ImageEncoder::parameters(const std::string& prefix) const {
  nn::ParameterList out = backbone_parameters(prefix);
  for (auto& p : projection_parameters(prefix)) out.push_back(std::move(p));
  for (auto& p : simclr_parameters(prefix)) out.push_back(std::move(p));
  return out;
}

}  // namespace cxrvlp::vision
