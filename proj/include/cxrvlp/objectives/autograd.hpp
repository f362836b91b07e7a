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

/// @file autograd.hpp
/// @brief Graph nodes that evaluate the closed-form losses on network outputs.

#pragma once

#include <span>

#include "cxrvlp/nn/tensor.hpp"
#include "cxrvlp/objectives/losses.hpp"

namespace cxrvlp::objectives {

Matrix to_matrix(const nn::Tensor& t);

/// Each function returns a 1x1 differentiable tensor and writes the loss
/// value (with components) to `value` when non-null.
nn::Tensor mlm_loss(const nn::Tensor& logits, std::span<const int> targets,
                    LossValue* value = nullptr);
nn::Tensor rsm_loss(const nn::Tensor& findings, const nn::Tensor& impressions, double tau1,
                    LossValue* value = nullptr);
nn::Tensor global_alignment_loss(const nn::Tensor& images, const nn::Tensor& impressions,
                                 double tau2, LossValue* value = nullptr);
nn::Tensor simclr_loss(const nn::Tensor& views, double tau, LossValue* value = nullptr);

}  // namespace cxrvlp::objectives
