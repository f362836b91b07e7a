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

#include "cxrvlp/nn/layers.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace cxrvlp::nn {

Tensor uniform_parameter(std::int64_t rows, std::int64_t cols, float bound, Rng& rng) {
  Buffer v(static_cast<std::size_t>(rows * cols));
  for (float& x : v) x = static_cast<float>(rng.uniform(-bound, bound));
  return Tensor::from(std::move(v), rows, cols, true);
}

Tensor normal_parameter(std::int64_t rows, std::int64_t cols, float stddev, Rng& rng) {
  Buffer v(static_cast<std::size_t>(rows * cols));
  for (float& x : v) x = static_cast<float>(rng.normal() * stddev);
  return Tensor::from(std::move(v), rows, cols, true);
}

Tensor constant_parameter(std::int64_t rows, std::int64_t cols, float value) {
  return Tensor::from(Buffer(static_cast<std::size_t>(rows * cols), value), rows,
                      cols, true);
}

Linear::Linear(std::int64_t in, std::int64_t out, Rng& rng)
    : weight(uniform_parameter(in, out, 1.0f / std::sqrt(static_cast<float>(in)), rng)),
      bias(constant_parameter(1, out, 0.0f)) {}

void Linear::collect(ParameterList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

LayerNorm::LayerNorm(std::int64_t dim)
    : gamma(constant_parameter(1, dim, 1.0f)), beta(constant_parameter(1, dim, 0.0f)) {}

void LayerNorm::collect(ParameterList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
}

Conv2d::Conv2d(std::int64_t in, std::int64_t out, Conv2dSpec s, Rng& rng)
    : weight(normal_parameter(static_cast<std::int64_t>(s.kernel) * s.kernel * in, out,
                              std::sqrt(2.0f / static_cast<float>(s.kernel * s.kernel * in)),
                              rng)),
      bias(constant_parameter(1, out, 0.0f)),
      spec(s) {}

void Conv2d::collect(ParameterList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

ProjectionHead::ProjectionHead(std::int64_t in, std::int64_t hidden, std::int64_t out, Rng& rng,
                               Activation act)
    : fc1(in, hidden, rng), fc2(hidden, out, rng), activation(act) {}

Tensor ProjectionHead::operator()(const Tensor& x) const {
  if (x.cols() != in_features()) {
    throw std::invalid_argument("projection head expects width " + std::to_string(in_features()) +
                                ", got " + std::to_string(x.cols()));
  }
  Tensor h = fc1(x);
  if (activation == Activation::gelu) h = gelu(h);
  return fc2(h);
}

void ProjectionHead::collect(ParameterList& out, const std::string& prefix) const {
  fc1.collect(out, prefix + ".fc1");
  fc2.collect(out, prefix + ".fc2");
}

std::uint64_t weights_hash(const ParameterList& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& [name, t] : params) {
    for (float v : t.values()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      for (int i = 0; i < 4; ++i) {
        h ^= (bits >> (8 * i)) & 0xffu;
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

std::int64_t parameter_count(const ParameterList& params) {
  std::int64_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

}  // namespace cxrvlp::nn
