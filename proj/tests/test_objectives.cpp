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


#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"

#include "cxrvlp/objectives/autograd.hpp"
#include "cxrvlp/objectives/losses.hpp"
#include "helpers.hpp"

using namespace cxrvlp;
using objectives::Matrix;
using namespace cxrvlp::oracle;

namespace {

Matrix unit_rows(Eigen::Index n, Eigen::Index d, Rng& rng) {
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rng.normal();
    m.row(i).normalize();
  }
  return m;
}


}  // namespace

TEST_CASE("losses agree with loop oracles") {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = unit_rows(5, 8, rng), b = unit_rows(5, 8, rng), z = unit_rows(6, 8, rng);
    CHECK(objectives::rsm_loss(a, b, 0.5).scalar == doctest::Approx(oracle_pair(a, b, 0.5)).epsilon(1e-12));
    CHECK(objectives::global_alignment_loss(a, b, 0.3).scalar ==
          doctest::Approx(oracle_pair(a, b, 0.3)).epsilon(1e-12));
    CHECK(objectives::simclr_loss(z, 0.5).scalar == doctest::Approx(oracle_simclr(z, 0.5)).epsilon(1e-12));
    Matrix logits = Matrix::Random(4, 11) * 3.0;
    std::vector<int> t{0, 10, 3, 3};
    CHECK(objectives::mlm_loss(logits, t).scalar == doctest::Approx(oracle_mlm(logits, t)).epsilon(1e-12));
  }
}

TEST_CASE("hand-evaluated loss values") {
  SUBCASE("uniform logits over 100 tokens") {
    const Matrix logits = Matrix::Zero(1, 100);
    CHECK(objectives::mlm_loss(logits, std::vector<int>{42}).scalar == doctest::Approx(std::log(100.0)).epsilon(1e-12));
  }
  SUBCASE("mlm averages positions") {
    Matrix logits(2, 3);
    logits << 1, 2, 3, 0, 0, 1;
    const double a = std::log(std::exp(1) + std::exp(2) + std::exp(3)) - 1;
    const double b = std::log(2 + std::exp(1)) - 0;
    CHECK(objectives::mlm_loss(logits, std::vector<int>{0, 0}).scalar == doctest::Approx((a + b) / 2).epsilon(1e-12));
  }
  SUBCASE("confident logits drive mlm to zero") {
    Matrix logits = Matrix::Zero(1, 5);
    logits(0, 2) = 50;
    CHECK(objectives::mlm_loss(logits, std::vector<int>{2}).scalar < 1e-18);
  }
  SUBCASE("N=2 orthonormal matched pairs") {
    const Matrix e = Matrix::Identity(2, 4);
    const double expect = 2 * std::log(1 + std::exp(-2.0));
    CHECK(expect == doctest::Approx(0.2539).epsilon(1e-3));
    CHECK(objectives::rsm_loss(e, e, 0.5).scalar == doctest::Approx(expect).epsilon(1e-9));
    CHECK(objectives::global_alignment_loss(e, e, 0.5).scalar == doctest::Approx(expect).epsilon(1e-9));
  }
  SUBCASE("identical embeddings give 2 log N") {
    Matrix v = Matrix::Zero(6, 4);
    v.col(1).setOnes();
    CHECK(objectives::global_alignment_loss(v, v, 0.5).scalar == doctest::Approx(2 * std::log(6.0)).epsilon(1e-12));
  }
  SUBCASE("SimCLR with views collapsed onto two orthonormal vectors") {
    Matrix z = Matrix::Zero(4, 3);
    z(0, 0) = z(1, 0) = 1;
    z(2, 1) = z(3, 1) = 1;
    const double expect = -std::log(std::exp(2.0) / (std::exp(2.0) + 2));
    CHECK(expect == doctest::Approx(0.2395).epsilon(1e-3));
    CHECK(objectives::simclr_loss(z, 0.5).scalar == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("single pair or view pair gives exactly zero") {
    Rng rng(2);
    const Matrix a = unit_rows(1, 4, rng), b = unit_rows(1, 4, rng), z = unit_rows(2, 4, rng);
    CHECK(objectives::rsm_loss(a, b, 0.5).scalar == 0.0);
    CHECK(objectives::global_alignment_loss(a, b, 0.5).scalar == 0.0);
    CHECK(objectives::simclr_loss(z, 0.5).scalar == 0.0);
  }
}

TEST_CASE("loss combinations") {
  objectives::TemperatureConfig cfg;
  objectives::LossValue rsm{0.2539, {}}, mlm{4.6052, {}};
  CHECK(objectives::combine_phase3(rsm, mlm, cfg).scalar == doctest::Approx(0.71442).epsilon(1e-9));
  CHECK(objectives::combine_joint(rsm, mlm, cfg).scalar == doctest::Approx(4.73215).epsilon(1e-9));
  cfg.lambda_mlm = 0.0;
  CHECK(objectives::combine_phase3(rsm, mlm, cfg).scalar == 0.2539);
  cfg.lambda_ga = 0.0;
  CHECK(objectives::combine_joint(rsm, mlm, cfg).scalar == 4.6052);
  cfg.lambda_ga = 1.0;
  const double one = objectives::combine_joint(rsm, mlm, cfg).scalar;
  cfg.lambda_ga = 2.0;
  CHECK(objectives::combine_joint(rsm, mlm, cfg).scalar - one == doctest::Approx(0.2539).epsilon(1e-12));
  const auto c = objectives::combine_joint(rsm, mlm, cfg);
  CHECK(c.components.at("ga") == 0.2539);
  CHECK(c.components.at("mlm") == 4.6052);
}

TEST_CASE("losses are non-negative and batch-permutation invariant") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = static_cast<Eigen::Index>(2 + rng.below(6));
    const Matrix a = unit_rows(n, 6, rng), b = unit_rows(n, 6, rng), z = unit_rows(2 * n, 6, rng);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Matrix pa(n, 6), pb(n, 6), pz(2 * n, 6);
    for (Eigen::Index i = 0; i < n; ++i) {
      pa.row(i) = a.row(perm[static_cast<std::size_t>(i)]);
      pb.row(i) = b.row(perm[static_cast<std::size_t>(i)]);
      pz.row(2 * i) = z.row(2 * perm[static_cast<std::size_t>(i)]);
      pz.row(2 * i + 1) = z.row(2 * perm[static_cast<std::size_t>(i)] + 1);
    }
    const double r = objectives::rsm_loss(a, b, 0.5).scalar;
    const double g = objectives::global_alignment_loss(a, b, 0.5).scalar;
    const double s = objectives::simclr_loss(z, 0.5).scalar;
    CHECK(r >= 0.0);
    CHECK(g >= 0.0);
    CHECK(s >= 0.0);
    CHECK(std::abs(objectives::rsm_loss(pa, pb, 0.5).scalar - r) < 1e-9);
    CHECK(std::abs(objectives::global_alignment_loss(pa, pb, 0.5).scalar - g) < 1e-9);
    CHECK(std::abs(objectives::simclr_loss(pz, 0.5).scalar - s) < 1e-9);
  }
}

TEST_CASE("analytic loss gradients match central differences") {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix a = unit_rows(4, 8, rng), b = unit_rows(4, 8, rng), z = unit_rows(8, 8, rng);
    const auto pg = objectives::rsm_loss_with_grad(a, b, 0.5);
    CHECK(rel_err(pg.d_first, fd(a, [&](const Matrix& x) { return objectives::rsm_loss(x, b, 0.5).scalar; })) < 1e-6);
    CHECK(rel_err(pg.d_second, fd(b, [&](const Matrix& x) { return objectives::rsm_loss(a, x, 0.5).scalar; })) < 1e-6);
    const auto sg = objectives::simclr_loss_with_grad(z, 0.5);
    CHECK(rel_err(sg.d_input, fd(z, [&](const Matrix& x) { return objectives::simclr_loss(x, 0.5).scalar; })) < 1e-6);
    Matrix logits = Matrix::Random(4, 7);
    const std::vector<int> t{1, 2, 3, 6};
    const auto mg = objectives::mlm_loss_with_grad(logits, t);
    CHECK(rel_err(mg.d_logits, fd(logits, [&](const Matrix& x) { return objectives::mlm_loss(x, t).scalar; })) < 1e-6);
  }
}

TEST_CASE("autograd wrappers route the closed-form gradients") {
  Rng rng(5);
  auto a = testing::random_tensor(4, 6, rng), b = testing::random_tensor(4, 6, rng);
  auto loss = objectives::global_alignment_loss(nn::l2_normalize_rows(a), nn::l2_normalize_rows(b), 0.5);
  CHECK(testing::max_grad_error({a, b}, [](const auto& x) {
          return objectives::global_alignment_loss(nn::l2_normalize_rows(x[0]), nn::l2_normalize_rows(x[1]), 0.5);
        }) < 2e-2);
  auto z = testing::random_tensor(6, 5, rng);
  CHECK(testing::max_grad_error({z}, [](const auto& x) {
          return objectives::simclr_loss(nn::l2_normalize_rows(x[0]), 0.5);
        }) < 2e-2);
  objectives::LossValue v;
  objectives::rsm_loss(a, b, 0.5, &v);
  CHECK(v.components.count("rsm") == 1);
  (void)loss;
}

TEST_CASE("loss input errors") {
  Rng rng(6);
  CHECK_THROWS_AS(objectives::simclr_loss(unit_rows(3, 4, rng), 0.5), objectives::LossError);
  CHECK_THROWS_AS(objectives::rsm_loss(unit_rows(3, 4, rng), unit_rows(2, 4, rng), 0.5), objectives::LossError);
  CHECK_THROWS_AS(objectives::rsm_loss(unit_rows(2, 4, rng), unit_rows(2, 4, rng), 0.0), objectives::LossError);
}
