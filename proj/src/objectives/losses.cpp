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

#include "cxrvlp/objectives/losses.hpp"

#include <cmath>
#include <limits>

namespace cxrvlp::objectives {

namespace {

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw LossError("temperature must be positive and finite");
  }
}

void check_pair_shapes(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw LossError("contrastive inputs differ in shape: " + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                    std::to_string(b.cols()));
  }
  if (a.rows() == 0) throw LossError("contrastive loss needs at least one pair");
}

// Numerically stable row-wise softmax and log-sum-exp.
void row_softmax(const Matrix& s, Matrix& p, Eigen::VectorXd& lse) {
  p.resize(s.rows(), s.cols());
  lse.resize(s.rows());
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    double z = 0.0;
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
      const double e = std::exp(s(r, c) - mx);
      p(r, c) = e;
      z += e;
    }
    p.row(r) /= z;
    lse(r) = mx + std::log(z);
  }
}

}  // namespace

void TemperatureConfig::validate() const {
  check_tau(tau1);
  check_tau(tau2);
  if (lambda_mlm < 0.0 || lambda_ga < 0.0) throw LossError("loss weights must be non-negative");
}

MlmGrad mlm_loss_with_grad(const Matrix& logits, std::span<const int> targets) {
  const Eigen::Index m = logits.rows();
  if (m == 0 || targets.empty()) {
    throw LossError("mlm_loss: no masked positions in batch");
  }
  if (static_cast<Eigen::Index>(targets.size()) != m) {
    throw LossError("mlm_loss: target count does not match logits rows");
  }
  Matrix p;
  Eigen::VectorXd lse;
  row_softmax(logits, p, lse);
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= logits.cols()) throw LossError("mlm_loss: target id out of range");
    total += lse(i) - logits(i, t);
    p(i, t) -= 1.0;
  }
  MlmGrad out;
  out.loss.scalar = total / static_cast<double>(m);
  out.loss.components["mlm"] = out.loss.scalar;
  out.d_logits = p / static_cast<double>(m);
  return out;
}

LossValue mlm_loss(const Matrix& logits, std::span<const int> targets) {
  return mlm_loss_with_grad(logits, targets).loss;
}

PairGrad symmetric_info_nce_with_grad(const Matrix& first, const Matrix& second, double tau,
                                      const std::string& name) {
  check_tau(tau);
  check_pair_shapes(first, second);
  const Eigen::Index n = first.rows();
  const Matrix s = (first * second.transpose()) / tau;  // s(i,j) = f_i . s_j / tau

  Matrix prow;
  Eigen::VectorXd lse_row;
  row_softmax(s, prow, lse_row);
  Matrix pcol_t;
  Eigen::VectorXd lse_col;
  row_softmax(s.transpose(), pcol_t, lse_col);  // pcol_t(i,j) = softmax over s(., i) at j

  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    total += (lse_row(i) - s(i, i)) + (lse_col(i) - s(i, i));
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  // dL/ds(i,j) = (prow(i,j) - d_ij + pcol_t(j,i) - d_ij) / N
  Matrix ds = (prow + pcol_t.transpose()) * inv_n;
  ds.diagonal().array() -= 2.0 * inv_n;

  PairGrad out;
  out.loss.scalar = total * inv_n;
  out.loss.components[name] = out.loss.scalar;
  out.d_first = ds * second / tau;
  out.d_second = ds.transpose() * first / tau;
  return out;
}

LossValue symmetric_info_nce(const Matrix& first, const Matrix& second, double tau,
                             const std::string& name) {
  return symmetric_info_nce_with_grad(first, second, tau, name).loss;
}

LossValue rsm_loss(const Matrix& findings, const Matrix& impressions, double tau1) {
  return symmetric_info_nce(findings, impressions, tau1, "rsm");
}
PairGrad rsm_loss_with_grad(const Matrix& findings, const Matrix& impressions, double tau1) {
  return symmetric_info_nce_with_grad(findings, impressions, tau1, "rsm");
}

LossValue global_alignment_loss(const Matrix& images, const Matrix& impressions, double tau2) {
  return symmetric_info_nce(images, impressions, tau2, "ga");
}
PairGrad global_alignment_loss_with_grad(const Matrix& images, const Matrix& impressions,
                                         double tau2) {
  return symmetric_info_nce_with_grad(images, impressions, tau2, "ga");
}

SingleGrad simclr_loss_with_grad(const Matrix& views, double tau) {
  check_tau(tau);
  const Eigen::Index rows = views.rows();
  if (rows == 0 || rows % 2 != 0) {
    throw LossError("simclr_loss: row count must be even and positive (paired views)");
  }
  SingleGrad out;
  if (rows == 2) {
    // Each anchor has a single candidate: its own positive.
    out.loss.scalar = 0.0;
    out.loss.components["simclr"] = 0.0;
    out.d_input = Matrix::Zero(views.rows(), views.cols());
    return out;
  }
  Matrix s = (views * views.transpose()) / tau;
  const double neg_inf = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < rows; ++i) s(i, i) = neg_inf;
  Matrix p;
  Eigen::VectorXd lse;
  row_softmax(s, p, lse);
  double total = 0.0;
  const double inv = 1.0 / static_cast<double>(rows);
  for (Eigen::Index a = 0; a < rows; ++a) {
    const Eigen::Index pos = a ^ 1;
    total += lse(a) - s(a, pos);
    p(a, pos) -= 1.0;
  }
  p *= inv;  // p now holds dL/ds (diagonal entries are exactly zero)
  out.loss.scalar = total * inv;
  out.loss.components["simclr"] = out.loss.scalar;
  out.d_input = (p + p.transpose()) * views / tau;
  return out;
}

LossValue simclr_loss(const Matrix& views, double tau) {
  return simclr_loss_with_grad(views, tau).loss;
}

LossValue combine_phase3(const LossValue& rsm, const LossValue& mlm,
                         const TemperatureConfig& cfg) {
  LossValue out;
  out.components["rsm"] = rsm.scalar;
  out.components["mlm"] = mlm.scalar;
  out.scalar = rsm.scalar + cfg.lambda_mlm * mlm.scalar;
  return out;
}

LossValue combine_joint(const LossValue& ga, const LossValue& mlm, const TemperatureConfig& cfg) {
  LossValue out;
  out.components["ga"] = ga.scalar;
  out.components["mlm"] = mlm.scalar;
  out.scalar = cfg.lambda_ga * ga.scalar + mlm.scalar;
  return out;
}

LossValue phase3_loss(const Phase3Batch& batch, const TemperatureConfig& cfg) {
  cfg.validate();
  return combine_phase3(rsm_loss(batch.findings_proj, batch.impression_proj, cfg.tau1),
                        mlm_loss(batch.mlm_logits, batch.mlm_targets), cfg);
}

LossValue joint_loss(const JointBatch& batch, const TemperatureConfig& cfg) {
  cfg.validate();
  return combine_joint(global_alignment_loss(batch.image_global, batch.impression_proj, cfg.tau2),
                       mlm_loss(batch.mlm_logits, batch.mlm_targets), cfg);
}

}  // namespace cxrvlp::objectives
