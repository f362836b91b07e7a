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

/// @file ops.hpp
/// @brief Differentiable operations on 2-D tensors.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cxrvlp/nn/random.hpp"
#include "cxrvlp/nn/tensor.hpp"

namespace cxrvlp::nn {

Tensor matmul(const Tensor& a, const Tensor& b);

/// x [n, in] * w [in, out] + b [1, out]; the bias may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);

Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);

/// Normalizes each row to zero mean and unit variance, then applies gamma, beta [1, d].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);

/// Inverted dropout. Identity when p == 0.
Tensor dropout(const Tensor& x, float p, Rng& rng);

/// Rows of table [V, d] selected by ids.
Tensor embedding(const Tensor& table, std::span<const int> ids);

Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> rows);

/// Stacks tensors of equal width vertically.
Tensor concat_rows(const std::vector<Tensor>& parts);

/// Mean over consecutive groups of `group` rows: [n*group, d] -> [n, d].
Tensor mean_row_groups(const Tensor& x, std::int64_t group);

/// Each row divided by max(||row||, eps).
Tensor l2_normalize_rows(const Tensor& x, float eps = 1e-12f);

/// Sum of all entries of a tensor as a 1x1 tensor.
Tensor sum(const Tensor& x);

/// Segment of packed rows forming one sequence.
struct Segment {
  std::int64_t offset;
  std::int64_t length;
};

/// Multi-head softmax self-attention evaluated independently inside each
/// segment of the packed rows. q, k, v are [n, d] with d divisible by heads.
/// Dropout with rate attn_dropout is applied to the attention weights.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::span<const Segment> segments, int heads, float attn_dropout,
                            Rng* rng);

/// Spatial layout of a channels-last image batch stored as [N*H*W, C].
struct Geometry {
  std::int64_t batch;
  std::int64_t height;
  std::int64_t width;
};

struct Conv2dSpec {
  int kernel = 3;
  int stride = 1;
  int padding = 1;
  int dilation = 1;
};

std::int64_t conv_output_size(std::int64_t in, const Conv2dSpec& spec);

/// 2-D convolution on a channels-last batch. weight is [k*k*Cin, Cout] with
/// row index (ky*k + kx)*Cin + c; bias is [1, Cout] or undefined.
Tensor conv2d(const Tensor& x, const Geometry& geom, const Tensor& weight, const Tensor& bias,
              const Conv2dSpec& spec);

}  // namespace cxrvlp::nn
