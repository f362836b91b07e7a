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
/// @brief Residual CNN image encoder with per-cell projection and pooling.
///
/// Feature maps are channels-last: a batch of N images of h x w cells is a
/// [N*h*w, C] tensor, row index (n*h + y)*w + x.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "cxrvlp/corpus/types.hpp"
#include "cxrvlp/nn/layers.hpp"
#include "cxrvlp/nn/random.hpp"

namespace cxrvlp::vision {

struct VisionConfig {
  std::vector<int> widths = {16, 32, 64, 128};  // one residual stage each
  bool dilation = false;  // last stage keeps resolution and dilates instead
  int proj_hidden = 128;
  int proj_dim = 128;
  int simclr_hidden = 128;
  int simclr_dim = 64;
  nn::Activation proj_activation = nn::Activation::gelu;

  /// Input pixels per output cell: 16, or 8 in dilation mode.
  int stride() const { return dilation ? 8 : 16; }
  int feature_dim() const { return widths.back(); }
  void validate() const;
  nlohmann::json to_json() const;
  static VisionConfig from_json(const nlohmann::json& j);
};

/// LocalFeatureGrid / ProjectedGrid share this layout.
struct Grid {
  nn::Tensor cells;  // [N*h*w, d]
  std::int64_t batch = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  int stride = 0;
  std::int64_t cells_per_image() const { return height * width; }
};

/// Stacks images into a [N*H*W, 1] tensor. All images must share one square size.
nn::Tensor image_batch(const std::vector<const corpus::ImageRecord*>& images);

class ImageEncoder {
 public:
  ImageEncoder() = default;
  ImageEncoder(const VisionConfig& cfg, Rng& rng);

  const VisionConfig& config() const { return cfg_; }
  /// Switches the last stage between strided and dilated operation. Weights
  /// are shared between both modes.
  void set_dilation(bool on);

  /// Local feature grid for a batch of images of side x side pixels.
  Grid encode(const nn::Tensor& pixels, std::int64_t batch, std::int64_t side) const;
  Grid encode(const std::vector<const corpus::ImageRecord*>& images) const;

  /// Per-cell two-layer projection without normalization.
  nn::Tensor project_cells_raw(const Grid& g) const;
  /// Per-cell projection followed by per-cell l2 normalization (V).
  Grid project_grid(const Grid& g) const;
  /// v = normalize(mean over cells of project_cells_raw(g)).
  nn::Tensor pool_global(const Grid& g) const;

  /// SimCLR head on mean-pooled local features, l2 normalized.
  nn::Tensor simclr_embed(const Grid& g) const;

  nn::ProjectionHead& projection() { return proj_; }
  const nn::ProjectionHead& projection() const { return proj_; }

  nn::ParameterList parameters(const std::string& prefix = "image") const;
  nn::ParameterList backbone_parameters(const std::string& prefix = "image") const;
  nn::ParameterList projection_parameters(const std::string& prefix = "image") const;
  nn::ParameterList simclr_parameters(const std::string& prefix = "image") const;

 private:
  struct ResBlock {
    nn::Conv2d conv1;
    nn::LayerNorm ln;
    nn::Conv2d conv2;
  };
  struct Stage {
    nn::Conv2d down;  // stem for the first stage
    nn::LayerNorm down_ln;
    ResBlock block;
  };

  nn::Tensor res_block(const ResBlock& b, const nn::Tensor& x, const nn::Geometry& g) const;

  VisionConfig cfg_;
  std::vector<Stage> stages_;
  nn::LayerNorm final_ln_;
  nn::ProjectionHead proj_;
  nn::ProjectionHead simclr_;
};

}  // namespace cxrvlp::vision
