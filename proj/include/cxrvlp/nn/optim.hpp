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
#include <vector>

#include "cxrvlp/nn/layers.hpp"

namespace cxrvlp::nn {

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 1.0;  // <= 0 disables global-norm clipping
};

class AdamW {
 public:
  AdamW(ParameterList params, AdamWOptions opts);

  /// Applies one update with the given learning rate and clears gradients.
  /// Returns the pre-clipping global gradient norm.
  double step(double lr);
  void zero_grad();

  const ParameterList& params() const { return params_; }
  std::int64_t steps() const { return t_; }

 private:
  ParameterList params_;
  AdamWOptions opts_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  std::int64_t t_ = 0;
};

/// Linear warmup over the first warmup_fraction of steps, then linear decay to zero.
class LinearSchedule {
 public:
  LinearSchedule(double base_lr, std::int64_t total_steps, double warmup_fraction);
  double lr_at(std::int64_t step) const;

 private:
  double base_lr_;
  std::int64_t total_;
  std::int64_t warmup_;
};

}  // namespace cxrvlp::nn
