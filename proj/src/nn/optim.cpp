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

#include "cxrvlp/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cxrvlp::nn {

AdamW::AdamW(ParameterList params, AdamWOptions opts)
    : params_(std::move(params)), opts_(opts) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& [name, t] : params_) {
    m_.emplace_back(static_cast<std::size_t>(t.size()), 0.0f);
    v_.emplace_back(static_cast<std::size_t>(t.size()), 0.0f);
  }
}

void AdamW::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

double AdamW::step(double lr) {
  double sq = 0.0;
  for (const auto& [name, t] : params_) {
    if (!t.has_grad()) continue;
    for (float g : t.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  const double clip =
      (opts_.clip_norm > 0.0 && norm > opts_.clip_norm) ? opts_.clip_norm / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor& t = params_[p].second;
    if (!t.has_grad()) continue;
    auto w = t.mutable_values();
    const auto g = t.grad();
    auto& m = m_[p];
    auto& v = v_[p];
    // Gains and biases of 1-row tensors are exempt from decay.
    const bool decay = t.rows() > 1;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] * clip;
      m[i] = static_cast<float>(opts_.beta1 * m[i] + (1.0 - opts_.beta1) * gi);
      v[i] = static_cast<float>(opts_.beta2 * v[i] + (1.0 - opts_.beta2) * gi * gi);
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      double upd = mhat / (std::sqrt(vhat) + opts_.eps);
      if (decay) upd += opts_.weight_decay * w[i];
      w[i] = static_cast<float>(w[i] - lr * upd);
    }
  }
  zero_grad();
  return norm;
}

LinearSchedule::LinearSchedule(double base_lr, std::int64_t total_steps, double warmup_fraction)
    : base_lr_(base_lr),
      total_(std::max<std::int64_t>(1, total_steps)),
      warmup_(static_cast<std::int64_t>(std::ceil(warmup_fraction * total_steps))) {
  if (warmup_fraction < 0.0 || warmup_fraction >= 1.0) {
    throw std::invalid_argument("warmup fraction must be in [0, 1)");
  }
}

double LinearSchedule::lr_at(std::int64_t step) const {
  if (warmup_ > 0 && step < warmup_) {
    return base_lr_ * static_cast<double>(step + 1) / static_cast<double>(warmup_);
  }
  const double span = static_cast<double>(std::max<std::int64_t>(1, total_ - warmup_));
  const double frac = static_cast<double>(step - warmup_) / span;
  return base_lr_ * std::max(0.0, 1.0 - frac);
}

}  // namespace cxrvlp::nn
