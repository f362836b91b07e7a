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

#include "cxrvlp/objectives/autograd.hpp"

namespace cxrvlp::objectives {

namespace {

std::vector<float> to_floats(const Matrix& m) {
  std::vector<float> out(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out[static_cast<std::size_t>(r * m.cols() + c)] = static_cast<float>(m(r, c));
    }
  }
  return out;
}

void accumulate(nn::detail::Node& parent, const std::vector<float>& g, float upstream) {
  if (!parent.requires_grad) return;
  float* dst = parent.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += upstream * g[i];
}

nn::Tensor scalar_node(double loss, std::vector<nn::Tensor> inputs,
                       std::vector<std::vector<float>> grads) {
  return nn::Tensor::make_result(
      1, 1, {static_cast<float>(loss)}, std::move(inputs),
      [grads = std::move(grads)](nn::detail::Node& self) {
        for (std::size_t i = 0; i < grads.size(); ++i) {
          accumulate(*self.parents[i], grads[i], self.grad[0]);
        }
      });
}

}  // namespace

Matrix to_matrix(const nn::Tensor& t) {
  Matrix m(t.rows(), t.cols());
  const auto v = t.values();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = v[static_cast<std::size_t>(r * m.cols() + c)];
    }
  }
  return m;
}

nn::Tensor mlm_loss(const nn::Tensor& logits, std::span<const int> targets, LossValue* value) {
  MlmGrad g = mlm_loss_with_grad(to_matrix(logits), targets);
  if (value) *value = g.loss;
  return scalar_node(g.loss.scalar, {logits}, {to_floats(g.d_logits)});
}

nn::Tensor rsm_loss(const nn::Tensor& findings, const nn::Tensor& impressions, double tau1,
                    LossValue* value) {
  PairGrad g = rsm_loss_with_grad(to_matrix(findings), to_matrix(impressions), tau1);
  if (value) *value = g.loss;
  return scalar_node(g.loss.scalar, {findings, impressions},
                     {to_floats(g.d_first), to_floats(g.d_second)});
}

nn::Tensor global_alignment_loss(const nn::Tensor& images, const nn::Tensor& impressions,
                                 double tau2, LossValue* value) {
  PairGrad g = global_alignment_loss_with_grad(to_matrix(images), to_matrix(impressions), tau2);
  if (value) *value = g.loss;
  return scalar_node(g.loss.scalar, {images, impressions},
                     {to_floats(g.d_first), to_floats(g.d_second)});
}

nn::Tensor simclr_loss(const nn::Tensor& views, double tau, LossValue* value) {
  SingleGrad g = simclr_loss_with_grad(to_matrix(views), tau);
  if (value) *value = g.loss;
  return scalar_node(g.loss.scalar, {views}, {to_floats(g.d_input)});
}

}  // namespace cxrvlp::objectives
