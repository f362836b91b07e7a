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


// Shared helpers for the unit tests.

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "cxrvlp/nn/ops.hpp"
#include "cxrvlp/nn/random.hpp"
#include "cxrvlp/nn/tensor.hpp"
#include "cxrvlp/objectives/autograd.hpp"

namespace cxrvlp::testing {

inline nn::Tensor random_tensor(std::int64_t r, std::int64_t c, Rng& rng, bool grad = true,
                                double scale = 1.0) {
  std::vector<float> v(static_cast<std::size_t>(r * c));
  for (float& x : v) x = static_cast<float>(scale * rng.normal());
  return nn::Tensor::from(std::move(v), r, c, grad);
}

// Reduces an op output to a scalar with position-dependent weights, so a
// backward pass that mixes up rows or columns cannot pass.
struct Probe {
  nn::Tensor proj;
  std::vector<int> targets;
  Probe(std::int64_t rows, std::int64_t cols, Rng& rng) : proj(random_tensor(cols, 5, rng, false)) {
    for (std::int64_t i = 0; i < rows; ++i) targets.push_back(static_cast<int>(rng.below(5)));
  }
  nn::Tensor operator()(const nn::Tensor& out) const {
    return objectives::mlm_loss(nn::matmul(out, proj), targets);
  }
};

// Largest relative error between backprop and central differences over
// every element of every input.
inline double max_grad_error(std::vector<nn::Tensor> inputs,
                             const std::function<nn::Tensor(const std::vector<nn::Tensor>&)>& f,
                             double h = 1e-3) {
  for (auto& t : inputs) t.zero_grad();
  f(inputs).backward();
  double worst = 0.0;
  for (auto& t : inputs) {
    std::vector<float> analytic(t.grad().begin(), t.grad().end());
    auto vals = t.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const float orig = vals[i];
      vals[i] = orig + static_cast<float>(h);
      double up;
      double down;
      {
        nn::NoGradGuard g;
        up = f(inputs).item();
        vals[i] = orig - static_cast<float>(h);
        down = f(inputs).item();
      }
      vals[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic.empty() ? 0.0 : analytic[i];
      const double err = std::abs(a - numeric) / std::max(1e-2, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace cxrvlp::testing
