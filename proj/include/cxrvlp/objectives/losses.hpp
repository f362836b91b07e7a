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

/// @file losses.hpp
/// @brief Training objectives with closed-form gradients.
///
/// All losses are evaluated in double precision on row-per-sample matrices.
/// Similarities are plain dot products; callers pass l2-normalized rows so
/// that these are cosines. Each loss has a `_with_grad` variant returning the
/// gradient of the scalar with respect to every input matrix.

#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cxrvlp::objectives {

using Matrix = Eigen::MatrixXd;

class LossError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LossValue {
  double scalar = 0.0;
  std::map<std::string, double> components;
};

struct TemperatureConfig {
  double tau1 = 0.5;        // section matching
  double tau2 = 0.5;        // image-text global alignment
  double lambda_mlm = 0.1;  // MLM weight in the section-matching phase
  double lambda_ga = 0.5;   // alignment weight in joint training

  void validate() const;
};

struct MlmGrad {
  LossValue loss;
  Matrix d_logits;
};

struct PairGrad {
  LossValue loss;
  Matrix d_first;
  Matrix d_second;
};

struct SingleGrad {
  LossValue loss;
  Matrix d_input;
};

/// Mean cross-entropy over M masked positions. logits is M x |V|.
/// Throws LossError when M == 0.
LossValue mlm_loss(const Matrix& logits, std::span<const int> targets);
MlmGrad mlm_loss_with_grad(const Matrix& logits, std::span<const int> targets);

/// Symmetric InfoNCE over N matched rows of `first` and `second`:
///   -(1/N) sum_i [ log softmax_j(f_i.s_j/tau)_i + log softmax_j(s_i.f_j/tau)_i ].
/// The denominators run over every j, including the matched one.
LossValue symmetric_info_nce(const Matrix& first, const Matrix& second, double tau,
                             const std::string& name);
PairGrad symmetric_info_nce_with_grad(const Matrix& first, const Matrix& second, double tau,
                                      const std::string& name);

/// Findings/impression section matching; component "rsm".
LossValue rsm_loss(const Matrix& findings, const Matrix& impressions, double tau1);
PairGrad rsm_loss_with_grad(const Matrix& findings, const Matrix& impressions, double tau1);

/// Global image / impression alignment; component "ga".
LossValue global_alignment_loss(const Matrix& images, const Matrix& impressions, double tau2);
PairGrad global_alignment_loss_with_grad(const Matrix& images, const Matrix& impressions,
                                         double tau2);

/// NT-Xent over 2N rows where rows 2k and 2k+1 are two views of one image.
/// Each anchor's softmax excludes itself; the loss is averaged over 2N anchors.
LossValue simclr_loss(const Matrix& views, double tau);
SingleGrad simclr_loss_with_grad(const Matrix& views, double tau);

/// rsm + lambda_mlm * mlm, components {rsm, mlm}.
LossValue combine_phase3(const LossValue& rsm, const LossValue& mlm, const TemperatureConfig& cfg);
/// lambda_ga * ga + mlm, components {ga, mlm}.
LossValue combine_joint(const LossValue& ga, const LossValue& mlm, const TemperatureConfig& cfg);

struct Phase3Batch {
  Matrix findings_proj;    // N x 128
  Matrix impression_proj;  // N x 128
  Matrix mlm_logits;       // M x |V| over masked tokens of both sections
  std::vector<int> mlm_targets;
};

struct JointBatch {
  Matrix image_global;     // N x 128
  Matrix impression_proj;  // N x 128
  Matrix mlm_logits;
  std::vector<int> mlm_targets;
};

LossValue phase3_loss(const Phase3Batch& batch, const TemperatureConfig& cfg);
LossValue joint_loss(const JointBatch& batch, const TemperatureConfig& cfg);

}  // namespace cxrvlp::objectives
