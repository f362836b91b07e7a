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

#include "cxrvlp/inference/inference.hpp"
#include "cxrvlp/nn/layers.hpp"

using namespace cxrvlp;
using inference::Matrix;
using inference::Vector;

namespace {

inference::JointModel tiny_model(std::uint64_t seed = 3) {
  const std::vector<std::string> corpus = {"No evidence of pneumonia.", "Findings suggesting pneumonia.",
                                           "Right lower lobe opacity.", "Small left effusion."};
  auto vocab = text::build_vocab(corpus, 80);
  text::EncoderConfig tc;
  tc.vocab_size = vocab.size();
  tc.width = 16;
  tc.layers = 1;
  tc.heads = 2;
  tc.ffn = 32;
  tc.proj_hidden = 16;
  tc.proj_dim = 8;
  vision::VisionConfig vc;
  vc.widths = {4, 4, 8, 8};
  vc.proj_hidden = 16;
  vc.proj_dim = 8;
  vc.simclr_hidden = 8;
  vc.simclr_dim = 8;
  Rng rng(seed);
  text::TextEncoder te(tc, rng);
  vision::ImageEncoder ie(vc, rng);
  return {std::move(vocab), std::move(te), std::move(ie)};
}

corpus::ImageRecord noise_image(Rng& rng, int side = 32) {
  corpus::ImageRecord img;
  img.id = "n";
  img.height = img.width = side;
  img.source_size = {side, side};
  for (int i = 0; i < side * side; ++i) img.pixels.push_back(static_cast<float>(rng.uniform()));
  return img;
}

inference::PromptSet unit_prompts(const Matrix& t) {
  inference::PromptSet ps;
  for (Eigen::Index i = 0; i < t.rows(); ++i) ps.prompts.push_back("p" + std::to_string(i));
  ps.embeddings = t;
  return ps;
}

double ce_loss(const inference::LinearProbe& p, const Matrix& x, const std::vector<int>& y) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vector z = p.logits(x.row(i).transpose());
    const double lse = z.maxCoeff() + std::log((z.array() - z.maxCoeff()).exp().sum());
    loss += lse - z(y[static_cast<std::size_t>(i)]);
  }
  return loss / static_cast<double>(x.rows());
}

}  // namespace

TEST_CASE("zero-shot softmax values") {
  Matrix t(2, 2);
  t << 1, 0, 0, 1;
  const auto ps = unit_prompts(t);
  Vector v(2);
  v << 1, 0;
  const Vector p = inference::zero_shot_probs(v, ps);
  CHECK(p(0) == doctest::Approx(0.7310586).epsilon(1e-6));
  CHECK(p(1) == doctest::Approx(0.2689414).epsilon(1e-6));

  Vector mid(2);
  mid << std::sqrt(0.5), std::sqrt(0.5);
  const Vector u = inference::zero_shot_probs(mid, ps);
  CHECK(u(0) == doctest::Approx(0.5));
  CHECK(u(1) == doctest::Approx(0.5));
}

TEST_CASE("zero-shot argmax is invariant to affine score maps") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix t = Matrix::Random(4, 6);
    t.rowwise().normalize();
    Vector v = Vector::Random(6).normalized();
    const Vector p = inference::zero_shot_probs(v, unit_prompts(t));
    const Vector s = t * v;
    Vector s2 = (2.0 * s.array() + 1.0).matrix();
    Eigen::Index a, b, c;
    p.maxCoeff(&a);
    s.maxCoeff(&b);
    s2.maxCoeff(&c);
    CHECK(a == b);
    CHECK(a == c);
    CHECK(p.sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("prompt embeddings") {
  const auto m = tiny_model();
  const auto ps = inference::embed_prompts({"No evidence of pneumonia", "No evidence of pneumonia",
                                            "Findings suggesting pneumonia"}, m);
  REQUIRE(ps.embeddings.rows() == 3);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(ps.embeddings.row(i).norm() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK((ps.embeddings.row(0) - ps.embeddings.row(1)).norm() == 0.0);
  CHECK_THROWS_AS(inference::embed_prompts({"only one"}, m), std::invalid_argument);
  CHECK_THROWS_AS(inference::embed_prompts({"a", ""}, m), std::invalid_argument);
}

TEST_CASE("probe initialization matches zero-shot") {
  const auto m = tiny_model();
  const auto ps = inference::embed_prompts({"Findings suggesting pneumonia", "No evidence of pneumonia"}, m);
  const auto probe = inference::init_probe(ps);
  CHECK(probe.beta.isApprox(ps.embeddings.transpose()));
  CHECK(probe.bias.isZero());
  Rng rng(2);
  std::vector<const corpus::ImageRecord*> ptrs;
  std::vector<corpus::ImageRecord> imgs;
  for (int i = 0; i < 8; ++i) imgs.push_back(noise_image(rng));
  for (const auto& i : imgs) ptrs.push_back(&i);
  const Matrix v = inference::embed_images(ptrs, m, 3);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    CHECK(v.row(i).norm() == doctest::Approx(1.0).epsilon(1e-6));
    Eigen::Index zs;
    inference::zero_shot_probs(v.row(i).transpose(), ps).maxCoeff(&zs);
    CHECK(probe.predict(v.row(i).transpose()) == zs);
  }
  // Batched embedding agrees with single-image classification.
  const Vector single = inference::zero_shot_classify(imgs[4], ps, m);
  CHECK(single.isApprox(inference::zero_shot_probs(v.row(4).transpose(), ps), 1e-5));
}

TEST_CASE("probe training") {
  Rng rng(3);
  const int n = 60;
  Matrix x(n, 3);
  std::vector<int> y;
  for (int i = 0; i < n; ++i) {
    const int c = i % 2;
    x.row(i) << (c ? 1.0 : -1.0) + 0.2 * rng.normal(), 0.2 * rng.normal(), 0.2 * rng.normal();
    y.push_back(c);
  }
  inference::LinearProbe p0{Matrix::Zero(3, 2), Vector::Zero(2)};

  SUBCASE("separable data is fit") {
    const auto p = inference::train_probe(p0, x, y, 1.0, {}, rng);
    int correct = 0;
    for (int i = 0; i < n; ++i) correct += p.predict(x.row(i).transpose()) == y[static_cast<std::size_t>(i)];
    CHECK(correct == n);
    CHECK(ce_loss(p, x, y) < ce_loss(p0, x, y));
  }
  SUBCASE("zero steps leave the probe unchanged") {
    inference::ProbeOptions o;
    o.steps = 0;
    const auto p = inference::train_probe(p0, x, y, 1.0, o, rng);
    CHECK(p.beta == p0.beta);
    CHECK(p.bias == p0.bias);
  }
  SUBCASE("one step follows the loss gradient") {
    inference::LinearProbe start{Matrix::Random(3, 2), Vector::Random(2)};
    inference::ProbeOptions o;
    o.steps = 1;
    o.lr = 1.0;
    const auto p = inference::train_probe(start, x, y, 1.0, o, rng);
    const double h = 1e-6;
    for (Eigen::Index r = 0; r < 3; ++r) {
      for (Eigen::Index c = 0; c < 2; ++c) {
        auto up = start, down = start;
        up.beta(r, c) += h;
        down.beta(r, c) -= h;
        const double g = (ce_loss(up, x, y) - ce_loss(down, x, y)) / (2 * h);
        CHECK(start.beta(r, c) - p.beta(r, c) == doctest::Approx(g).epsilon(1e-5));
      }
    }
    for (Eigen::Index c = 0; c < 2; ++c) {
      auto up = start, down = start;
      up.bias(c) += h;
      down.bias(c) -= h;
      const double g = (ce_loss(up, x, y) - ce_loss(down, x, y)) / (2 * h);
      CHECK(start.bias(c) - p.bias(c) == doctest::Approx(g).epsilon(1e-5));
    }
  }
  SUBCASE("single-class subset is rejected") {
    std::vector<int> ones(n, 1);
    CHECK_THROWS_AS(inference::train_probe(p0, x, ones, 1.0, {}, rng), std::invalid_argument);
  }
}

TEST_CASE("probe training leaves the encoders untouched") {
  const auto m = tiny_model();
  const auto before_text = nn::weights_hash(m.text.parameters());
  const auto before_image = nn::weights_hash(m.image.parameters());
  Rng rng(4);
  std::vector<corpus::ImageRecord> imgs;
  std::vector<const corpus::ImageRecord*> ptrs;
  for (int i = 0; i < 10; ++i) imgs.push_back(noise_image(rng));
  for (const auto& i : imgs) ptrs.push_back(&i);
  const Matrix v = inference::embed_images(ptrs, m);
  const auto ps = inference::embed_prompts({"Findings suggesting pneumonia", "No evidence of pneumonia"}, m);
  std::vector<int> y;
  for (int i = 0; i < 10; ++i) y.push_back(i % 2);
  inference::train_probe(inference::init_probe(ps), v, y, 1.0, {}, rng);
  CHECK(nn::weights_hash(m.text.parameters()) == before_text);
  CHECK(nn::weights_hash(m.image.parameters()) == before_image);
}

TEST_CASE("similarity maps") {
  inference::ProjectedCells grid;
  grid.height = 2;
  grid.width = 2;
  grid.cells = Matrix::Zero(4, 2);
  grid.cells.col(0).setOnes();
  Vector t(2);
  t << 1, 0;
  auto map = inference::similarity_map(grid, t);
  for (double c : map.cells) CHECK(c == 1.0);
  t << 0, 1;
  map = inference::similarity_map(grid, t);
  for (double c : map.cells) CHECK(c == 0.0);
  // Rounding past 1 is clamped.
  grid.cells *= 1.0 + 1e-12;
  t << 1, 0;
  for (double c : inference::similarity_map(grid, t).cells) CHECK(c <= 1.0);

  const auto m = tiny_model();
  Rng rng(5);
  const auto img = noise_image(rng);
  const auto sm = inference::similarity_map(img, "Right lower lobe opacity", m);
  CHECK(sm.height == 2);
  CHECK(sm.width == 2);
  for (double c : sm.cells) {
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
  }
  const auto cells = inference::project_image(img, m);
  for (Eigen::Index r = 0; r < cells.cells.rows(); ++r) {
    CHECK(cells.cells.row(r).norm() == doctest::Approx(1.0).epsilon(1e-6));
  }
}
