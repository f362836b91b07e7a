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

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cxrvlp/nn/ops.hpp"
#include "cxrvlp/nn/random.hpp"
#include "cxrvlp/nn/tensor.hpp"

namespace cxrvlp::nn {

/// Named trainable tensors. Entries share storage with the owning layers,
/// so an optimizer stepping through this list updates the model in place.
using ParameterList = std::vector<std::pair<std::string, Tensor>>;

Tensor uniform_parameter(std::int64_t rows, std::int64_t cols, float bound, Rng& rng);
Tensor normal_parameter(std::int64_t rows, std::int64_t cols, float stddev, Rng& rng);
Tensor constant_parameter(std::int64_t rows, std::int64_t cols, float value);

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [1, out]

  Linear() = default;
  Linear(std::int64_t in, std::int64_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
  std::int64_t in_features() const { return weight.rows(); }
  std::int64_t out_features() const { return weight.cols(); }
  void collect(ParameterList& out, const std::string& prefix) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  LayerNorm() = default;
  explicit LayerNorm(std::int64_t dim);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }
  void collect(ParameterList& out, const std::string& prefix) const;
};

struct Conv2d {
  Tensor weight;  // [k*k*in, out]
  Tensor bias;    // [1, out]
  Conv2dSpec spec;

  Conv2d() = default;
  Conv2d(std::int64_t in, std::int64_t out, Conv2dSpec spec, Rng& rng);
  Tensor operator()(const Tensor& x, const Geometry& g) const {
    return conv2d(x, g, weight, bias, spec);
  }
  Geometry output_geometry(const Geometry& g) const {
    return {g.batch, conv_output_size(g.height, spec), conv_output_size(g.width, spec)};
  }
  void collect(ParameterList& out, const std::string& prefix) const;
};

/// FNV-1a over the raw bytes of every parameter, in list order.
enum class Activation { gelu, identity };

/// Two-layer perceptron: fc2(act(fc1(x))). Output is not normalized.
struct ProjectionHead {
  Linear fc1;
  Linear fc2;
  Activation activation = Activation::gelu;
  ProjectionHead() = default;
  ProjectionHead(std::int64_t in, std::int64_t hidden, std::int64_t out, Rng& rng,
                 Activation act = Activation::gelu);
  Tensor operator()(const Tensor& x) const;
  std::int64_t in_features() const { return fc1.in_features(); }
  std::int64_t out_features() const { return fc2.out_features(); }
  void collect(ParameterList& out, const std::string& prefix) const;
};

std::uint64_t weights_hash(const ParameterList& params);

std::int64_t parameter_count(const ParameterList& params);

}  // namespace cxrvlp::nn
