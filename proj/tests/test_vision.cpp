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


#include <cmath>

#include "doctest.h"

#include "cxrvlp/nn/layers.hpp"
#include "cxrvlp/vision/encoder.hpp"
#include "helpers.hpp"

using namespace cxrvlp;

namespace {

vision::VisionConfig small_vision() {
  vision::VisionConfig c;
  c.widths = {4, 8, 8, 16};
  c.proj_hidden = 16;
  c.proj_dim = 16;
  c.simclr_hidden = 8;
  c.simclr_dim = 8;
  return c;
}

nn::Tensor pixels(std::int64_t n, std::int64_t side, Rng& rng) {
  std::vector<float> v(static_cast<std::size_t>(n * side * side));
  for (float& x : v) x = static_cast<float>(rng.uniform());
  return nn::Tensor::from(std::move(v), n * side * side, 1);
}

void make_identity(nn::ProjectionHead& h) {
  for (nn::Linear* l : {&h.fc1, &h.fc2}) {
    auto w = l->weight.mutable_values();
    const auto cols = static_cast<std::size_t>(l->weight.cols());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = (i / cols == i % cols) ? 1.0f : 0.0f;
    for (float& b : l->bias.mutable_values()) b = 0.0f;
  }
  h.activation = nn::Activation::identity;
}

vision::Grid grid_of(std::vector<float> cells, std::int64_t h, std::int64_t w, std::int64_t d) {
  vision::Grid g;
  g.cells = nn::Tensor::from(std::move(cells), h * w, d);
  g.batch = 1;
  g.height = h;
  g.width = w;
  g.stride = 16;
  return g;
}

}  // namespace

TEST_CASE("feature grid geometry") {
  Rng rng(31);
  vision::ImageEncoder enc(small_vision(), rng);
  {
    nn::NoGradGuard g;
    const auto grid = enc.encode(pixels(2, 64, rng), 2, 64);
    CHECK(grid.height == 4);
    CHECK(grid.width == 4);
    CHECK(grid.cells.rows() == 32);
    CHECK(grid.cells.cols() == 16);
    CHECK(enc.encode(pixels(1, 512, rng), 1, 512).height == 32);
    const auto hash = nn::weights_hash(enc.parameters());
    enc.set_dilation(true);
    CHECK(enc.config().stride() == 8);
    CHECK(enc.encode(pixels(1, 64, rng), 1, 64).height == 8);
    CHECK(nn::weights_hash(enc.parameters()) == hash);
    enc.set_dilation(false);
  }
  CHECK_THROWS(enc.encode(pixels(1, 40, rng), 1, 40));
}

TEST_CASE("projected cells are unit norm and local") {
  Rng rng(32);
  const vision::ImageEncoder enc(small_vision(), rng);
  nn::NoGradGuard guard;
  const auto grid = enc.encode(pixels(1, 64, rng), 1, 64);
  const auto p = enc.project_grid(grid);
  for (std::int64_t r = 0; r < p.cells.rows(); ++r) {
    double n = 0;
    for (std::int64_t c = 0; c < p.cells.cols(); ++c) n += p.cells.at(r, c) * p.cells.at(r, c);
    CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-6));
  }
  // One cell on its own projects exactly as it does inside the grid.
  std::vector<float> row(grid.cells.values().begin() + 16 * 5, grid.cells.values().begin() + 16 * 6);
  const auto single = enc.project_grid(grid_of(row, 1, 1, 16));
  for (int c = 0; c < 16; ++c) CHECK(single.cells.at(0, c) == doctest::Approx(p.cells.at(5, c)).epsilon(1e-5));
  // A constant grid projects to identical cells.
  std::vector<float> flat;
  for (int k = 0; k < 4; ++k) flat.insert(flat.end(), row.begin(), row.end());
  const auto cp = enc.project_grid(grid_of(flat, 2, 2, 16));
  for (int k = 1; k < 4; ++k) {
    for (int c = 0; c < 16; ++c) CHECK(cp.cells.at(k, c) == doctest::Approx(cp.cells.at(0, c)).epsilon(1e-5));
  }
  const auto v = enc.pool_global(grid_of(flat, 2, 2, 16));
  for (int c = 0; c < 16; ++c) CHECK(v.at(0, c) == doctest::Approx(single.cells.at(0, c)).epsilon(1e-6));
}

TEST_CASE("global embedding of two orthonormal cells") {
  Rng rng(33);
  vision::ImageEncoder enc(small_vision(), rng);
  make_identity(enc.projection());
  std::vector<float> cells(32, 0.0f);
  cells[0] = 1.0f;
  cells[16 + 1] = 1.0f;
  const auto v = enc.pool_global(grid_of(cells, 1, 2, 16));
  CHECK(v.at(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(v.at(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)));
  for (int c = 2; c < 16; ++c) CHECK(v.at(0, c) == 0.0f);
}

TEST_CASE("projection happens before pooling") {
  Rng rng(34);
  const vision::ImageEncoder enc(small_vision(), rng);
  nn::NoGradGuard guard;
  const auto grid = enc.encode(pixels(1, 64, rng), 1, 64);
  const auto pipeline_v = enc.pool_global(grid);
  const auto pool_then_project =
      nn::l2_normalize_rows(enc.projection()(nn::mean_row_groups(grid.cells, grid.cells_per_image())));
  const auto project_then_pool =
      nn::l2_normalize_rows(nn::mean_row_groups(enc.project_cells_raw(grid), grid.cells_per_image()));
  double diff_pp = 0, diff_pipe = 0;
  for (int c = 0; c < 16; ++c) {
    diff_pp += std::abs(pool_then_project.at(0, c) - project_then_pool.at(0, c));
    diff_pipe += std::abs(pipeline_v.at(0, c) - project_then_pool.at(0, c));
  }
  CHECK(diff_pp > 1e-4);
  CHECK(diff_pipe == 0.0);
}

TEST_CASE("image encoder backprop reaches every parameter") {
  Rng rng(35);
  const vision::ImageEncoder enc(small_vision(), rng);
  const auto grid = enc.encode(pixels(2, 32, rng), 2, 32);
  nn::sum(nn::add(nn::sum(enc.pool_global(grid)), nn::sum(enc.simclr_embed(grid)))).backward();
  for (const auto& [name, t] : enc.parameters()) CHECK_MESSAGE(t.has_grad(), name);
}

TEST_CASE("vision config validation") {
  auto c = small_vision();
  c.widths = {4, 8, 16};
  CHECK_THROWS(c.validate());
  CHECK(vision::VisionConfig::from_json(small_vision().to_json()).widths == small_vision().widths);
}
