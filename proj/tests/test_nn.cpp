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


#include "doctest.h"

#include "cxrvlp/nn/archive.hpp"
#include "cxrvlp/nn/layers.hpp"
#include "cxrvlp/nn/optim.hpp"
#include "helpers.hpp"

using namespace cxrvlp;
using testing::max_grad_error;
using testing::Probe;
using testing::random_tensor;

namespace {
constexpr double kTol = 2e-2;
}

TEST_CASE("matmul, linear, add, scale backprop") {
  Rng rng(1);
  auto a = random_tensor(4, 3, rng), b = random_tensor(3, 6, rng), bias = random_tensor(1, 6, rng);
  auto c = random_tensor(4, 6, rng), d = random_tensor(4, 6, rng);
  Probe p(4, 6, rng);
  CHECK(max_grad_error({a, b}, [&](const auto& x) { return p(nn::matmul(x[0], x[1])); }) < kTol);
  CHECK(max_grad_error({a, b, bias}, [&](const auto& x) { return p(nn::linear(x[0], x[1], x[2])); }) < kTol);
  CHECK(max_grad_error({c, d}, [&](const auto& x) { return p(nn::add(x[0], x[1])); }) < kTol);
  CHECK(max_grad_error({c}, [&](const auto& x) { return p(nn::scale(nn::gelu(x[0]), -1.7f)); }) < kTol);
  CHECK(max_grad_error({c}, [&](const auto& x) { return p(nn::relu(x[0])); }) < kTol);
}

TEST_CASE("layer norm and l2 normalization backprop") {
  Rng rng(2);
  auto x = random_tensor(5, 8, rng), g = random_tensor(1, 8, rng), b = random_tensor(1, 8, rng);
  Probe p(5, 8, rng);
  CHECK(max_grad_error({x, g, b}, [&](const auto& t) { return p(nn::layer_norm(t[0], t[1], t[2])); }, 1e-2) < kTol);
  CHECK(max_grad_error({x}, [&](const auto& t) { return p(nn::l2_normalize_rows(t[0])); }) < kTol);
}

TEST_CASE("row gathers, concatenation and group means backprop") {
  Rng rng(3);
  auto x = random_tensor(6, 4, rng), y = random_tensor(2, 4, rng), table = random_tensor(7, 4, rng);
  const std::vector<std::int64_t> rows{5, 0, 0, 3};
  const std::vector<int> ids{6, 1, 1, 0, 3};
  Probe p4(4, 4, rng), p8(8, 4, rng), p3(3, 4, rng), p5(5, 4, rng);
  CHECK(max_grad_error({x}, [&](const auto& t) { return p4(nn::gather_rows(t[0], rows)); }) < kTol);
  CHECK(max_grad_error({x, y}, [&](const auto& t) { return p8(nn::concat_rows({t[0], t[1]})); }) < kTol);
  CHECK(max_grad_error({x}, [&](const auto& t) { return p3(nn::mean_row_groups(t[0], 2)); }) < kTol);
  CHECK(max_grad_error({table}, [&](const auto& t) { return p5(nn::embedding(t[0], ids)); }) < kTol);
  CHECK(max_grad_error({x}, [&](const auto& t) { return nn::sum(nn::gelu(t[0])); }) < kTol);
}

TEST_CASE("segmented multi-head attention backprop") {
  Rng rng(4);
  auto q = random_tensor(7, 8, rng), k = random_tensor(7, 8, rng), v = random_tensor(7, 8, rng);
  const std::vector<nn::Segment> seg{{0, 3}, {3, 4}};
  Probe p(7, 8, rng);
  CHECK(max_grad_error({q, k, v}, [&](const auto& t) {
          return p(nn::multi_head_attention(t[0], t[1], t[2], seg, 2, 0.0f, nullptr));
        }) < kTol);
}

TEST_CASE("attention does not mix segments") {
  Rng rng(5);
  auto q = random_tensor(5, 4, rng, false), k = random_tensor(5, 4, rng, false), v = random_tensor(5, 4, rng, false);
  const std::vector<nn::Segment> seg{{0, 2}, {2, 3}};
  const auto out = nn::multi_head_attention(q, k, v, seg, 2, 0.0f, nullptr);
  auto v2 = v.detach();
  for (int c = 0; c < 4; ++c) v2.mutable_values()[static_cast<std::size_t>(4 * 4 + c)] += 10.0f;  // row 4
  const auto out2 = nn::multi_head_attention(q, k, v2, seg, 2, 0.0f, nullptr);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 4; ++c) CHECK(out.at(r, c) == out2.at(r, c));
  }
}

TEST_CASE("dropout backprop with a replayed mask") {
  Rng rng(6);
  auto x = random_tensor(4, 5, rng);
  Probe p(4, 5, rng);
  CHECK(max_grad_error({x}, [&](const auto& t) {
          Rng r(99);
          return p(nn::dropout(t[0], 0.3f, r));
        }) < kTol);
}

TEST_CASE("conv2d backprop across stride, padding and dilation") {
  Rng rng(7);
  for (const nn::Conv2dSpec spec : {nn::Conv2dSpec{3, 1, 1, 1}, nn::Conv2dSpec{3, 2, 1, 1}, nn::Conv2dSpec{3, 1, 2, 2}}) {
    const nn::Geometry g{2, 6, 6};
    auto x = random_tensor(2 * 36, 3, rng), w = random_tensor(27, 4, rng, true, 0.3), b = random_tensor(1, 4, rng);
    const auto oh = nn::conv_output_size(6, spec);
    Probe p(2 * oh * oh, 4, rng);
    CHECK(max_grad_error({x, w, b}, [&](const auto& t) { return p(nn::conv2d(t[0], g, t[1], t[2], spec)); }) < kTol);
  }
}

TEST_CASE("conv2d matches a direct convolution") {
  Rng rng(8);
  const nn::Geometry g{1, 5, 5};
  const nn::Conv2dSpec spec{3, 2, 2, 2};
  auto x = random_tensor(25, 2, rng, false), w = random_tensor(18, 3, rng, false), b = random_tensor(1, 3, rng, false);
  const auto y = nn::conv2d(x, g, w, b, spec);
  const auto oh = nn::conv_output_size(5, spec);
  REQUIRE(y.rows() == oh * oh);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < oh; ++ox) {
      for (int co = 0; co < 3; ++co) {
        double acc = b.at(0, co);
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const int iy = oy * 2 - 2 + ky * 2, ix = ox * 2 - 2 + kx * 2;
            if (iy < 0 || ix < 0 || iy >= 5 || ix >= 5) continue;
            for (int ci = 0; ci < 2; ++ci) acc += x.at(iy * 5 + ix, ci) * w.at((ky * 3 + kx) * 2 + ci, co);
          }
        }
        CHECK(y.at(oy * oh + ox, co) == doctest::Approx(acc).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("no-grad guard builds no graph") {
  Rng rng(9);
  auto x = random_tensor(2, 2, rng);
  nn::NoGradGuard g;
  const auto y = nn::gelu(x);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("AdamW reduces a quadratic and skips decay on vectors") {
  Rng rng(10);
  auto w = random_tensor(3, 3, rng);
  auto b = nn::Tensor::from({0.5f, 0.5f, 0.5f}, 1, 3, true);
  nn::AdamW opt({{"w", w}, {"b", b}}, {0.05, 0.9, 0.999, 1e-8, 0.0, 0.0});
  double first = 0.0, last = 0.0;
  for (int s = 0; s < 100; ++s) {
    auto loss = nn::add(nn::sum(nn::relu(w)), nn::sum(nn::relu(b)));
    if (s == 0) first = loss.item();
    last = loss.item();
    loss.backward();
    opt.step(0.05);
  }
  CHECK(last < first);
  // With zero gradient, weight decay shrinks matrices but leaves 1-row tensors alone.
  auto m = nn::Tensor::from({1.0f, 1.0f, 1.0f, 1.0f}, 2, 2, true);
  auto v = nn::Tensor::from({1.0f, 1.0f}, 1, 2, true);
  nn::AdamW decay({{"m", m}, {"v", v}}, {0.1, 0.9, 0.999, 1e-8, 0.5, 0.0});
  nn::sum(nn::scale(nn::add(m, m), 0.0f)).backward();
  nn::sum(nn::scale(v, 0.0f)).backward();
  decay.step(0.1);
  CHECK(m.at(0, 0) < 1.0f);
  CHECK(v.at(0, 0) == 1.0f);
}

TEST_CASE("linear schedule warms up then decays to zero") {
  const nn::LinearSchedule s(1.0, 100, 0.1);
  CHECK(s.lr_at(0) < s.lr_at(5));
  CHECK(s.lr_at(9) == doctest::Approx(1.0));
  CHECK(s.lr_at(50) < s.lr_at(20));
  CHECK(s.lr_at(99) < 0.05);
  CHECK_THROWS(nn::LinearSchedule(1.0, 10, 1.0));
}

TEST_CASE("archive round trip preserves every bit") {
  Rng rng(11);
  nn::Linear l(4, 3, rng);
  nn::ParameterList params;
  l.collect(params, "fc");
  const auto path = std::filesystem::temp_directory_path() / "cxrvlp_archive_test.bin";
  nn::write_archive(path, {{"phase", "x"}}, params);
  nn::Linear l2(4, 3, rng);
  nn::ParameterList params2;
  l2.collect(params2, "fc");
  CHECK(nn::weights_hash(params) != nn::weights_hash(params2));
  const auto ar = nn::read_archive(path);
  nn::load_parameters(ar, params2);
  CHECK(nn::weights_hash(params) == nn::weights_hash(params2));
  CHECK(ar.meta.at("phase") == "x");
  std::filesystem::remove(path);
}
