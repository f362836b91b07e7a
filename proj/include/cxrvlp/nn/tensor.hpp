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

/// @file tensor.hpp
/// @brief Row-major 2-D tensors with tape-free reverse-mode differentiation.
///
/// Every tensor is a rows x cols float matrix. Image batches are stored
/// channels-last as (N*H*W) x C, so per-pixel maps (linear layers, layer
/// norm, the per-cell projection head) are ordinary row-wise operations.
///
/// A tensor produced by an op keeps shared ownership of its inputs and a
/// closure that propagates its gradient to them. backward() on a scalar
/// topologically sorts the reachable graph and runs the closures once.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace cxrvlp::nn {

/// Allocates on 64-byte boundaries. Vectorized reductions peel according to
/// the address, so unaligned storage makes float rounding vary between runs.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using Buffer = std::vector<float, AlignedAllocator<float>>;

namespace detail {

struct Node {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  Buffer value;
  Buffer grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  float* grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0f);
    return grad.data();
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::int64_t rows, std::int64_t cols, bool requires_grad = false);
  static Tensor from(Buffer values, std::int64_t rows, std::int64_t cols,
                     bool requires_grad = false);
  static Tensor from(const std::vector<float>& values, std::int64_t rows, std::int64_t cols,
                     bool requires_grad = false) {
    return from(Buffer(values.begin(), values.end()), rows, cols, requires_grad);
  }
  static Tensor from(std::initializer_list<float> values, std::int64_t rows, std::int64_t cols,
                     bool requires_grad = false) {
    return from(Buffer(values), rows, cols, requires_grad);
  }
  static Tensor scalar(float v);

  bool defined() const { return node_ != nullptr; }
  std::int64_t rows() const { return node_->rows; }
  std::int64_t cols() const { return node_->cols; }
  std::int64_t size() const { return node_->rows * node_->cols; }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const float> values() const { return node_->value; }
  std::span<float> mutable_values() { return node_->value; }
  std::span<const float> grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  float item() const;
  float at(std::int64_t r, std::int64_t c) const { return node_->value[r * node_->cols + c]; }

  void zero_grad() { node_->grad.clear(); }

  /// Runs reverse-mode accumulation from this scalar (seed gradient 1).
  void backward() const;

  /// Returns a leaf holding a copy of the values; the copy is cut from the graph.
  Tensor detach() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& shared_node() const { return node_; }

  static Tensor make_result(std::int64_t rows, std::int64_t cols, Buffer value,
                            std::vector<Tensor> inputs, std::function<void(detail::Node&)> backward);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph construction on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace cxrvlp::nn
