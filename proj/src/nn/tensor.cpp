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

#include "cxrvlp/nn/tensor.hpp"

#include <stdexcept>
#include <unordered_set>

namespace cxrvlp::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor Tensor::zeros(std::int64_t rows, std::int64_t cols, bool requires_grad) {
  return from(Buffer(static_cast<std::size_t>(rows * cols), 0.0f), rows, cols,
              requires_grad);
}

Tensor Tensor::from(Buffer values, std::int64_t rows, std::int64_t cols,
                    bool requires_grad) {
  if (rows < 0 || cols < 0 || static_cast<std::int64_t>(values.size()) != rows * cols) {
    throw std::invalid_argument("Tensor::from: value count does not match shape");
  }
  auto n = std::make_shared<detail::Node>();
  n->rows = rows;
  n->cols = cols;
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(float v) { return from({v}, 1, 1); }

float Tensor::item() const {
  if (size() != 1) throw std::logic_error("Tensor::item on non-scalar");
  return node_->value[0];
}

Tensor Tensor::detach() const { return from(node_->value, node_->rows, node_->cols, false); }

Tensor Tensor::make_result(std::int64_t rows, std::int64_t cols, Buffer value,
                           std::vector<Tensor> inputs,
                           std::function<void(detail::Node&)> backward) {
  auto n = std::make_shared<detail::Node>();
  n->rows = rows;
  n->cols = cols;
  n->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& t : inputs) needs = needs || t.requires_grad();
  }
  if (needs) {
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (auto& t : inputs) n->parents.push_back(t.node_);
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

void Tensor::backward() const {
  if (size() != 1) throw std::logic_error("backward() requires a scalar tensor");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS; reversed it is a valid topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      detail::Node* p = n->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  // Intermediate gradients are dead after the sweep; leaves keep theirs.
  for (detail::Node* n : order) {
    if (n->backward) {
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

}  // namespace cxrvlp::nn
