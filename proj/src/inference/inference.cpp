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


#include "cxrvlp/inference/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "cxrvlp/objectives/autograd.hpp"

namespace cxrvlp::inference {

text::TokenSequence prompt_tokens(const std::string& prompt, const text::Vocabulary& v) {
  text::TokenSequence seq = text::tokenize(prompt, v);
  if (seq.empty()) throw std::invalid_argument("empty prompt");
  return text::with_specials(seq);
}

Matrix embed_texts(const std::vector<std::string>& texts, const JointModel& m) {
  std::vector<text::TokenSequence> seqs;
  seqs.reserve(texts.size());
  for (const auto& t : texts) seqs.push_back(prompt_tokens(t, m.vocab));
  return objectives::to_matrix(m.text.embed(seqs));
}

PromptSet embed_prompts(const std::vector<std::string>& prompts, const JointModel& m) {
  if (prompts.size() < 2) throw std::invalid_argument("a prompt set needs at least two prompts");
  PromptSet ps;
  ps.prompts = prompts;
  ps.embeddings = embed_texts(prompts, m);
  return ps;
}

Matrix embed_images(const std::vector<const corpus::ImageRecord*>& images, const JointModel& m,
                    int batch_size) {
  nn::NoGradGuard guard;
  Matrix out(static_cast<Eigen::Index>(images.size()), m.image.config().proj_dim);
  for (std::size_t start = 0; start < images.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(images.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const corpus::ImageRecord*> chunk(images.begin() + static_cast<std::ptrdiff_t>(start),
                                                  images.begin() + static_cast<std::ptrdiff_t>(end));
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start)) =
        objectives::to_matrix(m.image.pool_global(m.image.encode(chunk)));
  }
  return out;
}

Vector zero_shot_probs(const Vector& v, const PromptSet& ps) {
  Vector s = ps.embeddings * v;
  s.array() -= s.maxCoeff();
  s = s.array().exp();
  return s / s.sum();
}

Vector zero_shot_classify(const corpus::ImageRecord& img, const PromptSet& ps, const JointModel& m) {
  const Matrix v = embed_images({&img}, m);
  return zero_shot_probs(v.row(0).transpose(), ps);
}

ProjectedCells project_image(const corpus::ImageRecord& img, const JointModel& m) {
  nn::NoGradGuard guard;
  const vision::Grid g = m.image.project_grid(m.image.encode({&img}));
  ProjectedCells out;
  out.cells = objectives::to_matrix(g.cells);
  out.height = static_cast<int>(g.height);
  out.width = static_cast<int>(g.width);
  return out;
}

metrics::SimilarityMap similarity_map(const ProjectedCells& grid, const Vector& t) {
  if (grid.cells.cols() != t.size()) throw std::invalid_argument("similarity_map: dimension mismatch");
  metrics::SimilarityMap map;
  map.height = grid.height;
  map.width = grid.width;
  const Vector s = grid.cells * t;
  map.cells.resize(static_cast<std::size_t>(s.size()));
  for (Eigen::Index i = 0; i < s.size(); ++i) map.cells[static_cast<std::size_t>(i)] = std::clamp(s(i), -1.0, 1.0);
  return map;
}

metrics::SimilarityMap similarity_map(const corpus::ImageRecord& img, const std::string& phrase,
                                      const JointModel& m) {
  const Matrix t = embed_texts({phrase}, m);
  metrics::SimilarityMap map = similarity_map(project_image(img, m), t.row(0).transpose());
  map.phrase = phrase;
  map.image_id = img.id;
  return map;
}

int LinearProbe::predict(const Vector& v) const {
  Eigen::Index c = 0;
  logits(v).maxCoeff(&c);
  return static_cast<int>(c);
}

LinearProbe init_probe(const PromptSet& ps) {
  LinearProbe p;
  p.beta = ps.embeddings.transpose();
  p.bias = Vector::Zero(static_cast<Eigen::Index>(ps.size()));
  return p;
}

LinearProbe train_probe(const LinearProbe& probe, const Matrix& features,
                        const std::vector<int>& labels, double fraction, const ProbeOptions& opts,
                        Rng& rng) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (labels.size() != n) throw std::invalid_argument("train_probe: labels and features differ in length");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("train_probe: fraction must lie in (0, 1]");
  if (features.cols() != probe.beta.rows()) throw std::invalid_argument("train_probe: feature width mismatch");
  const auto classes = probe.beta.cols();
  for (int y : labels) {
    if (y < 0 || y >= classes) throw std::invalid_argument("train_probe: label out of range");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng.shuffle(idx);
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))));
  idx.resize(std::min(k, n));
  std::set<int> seen;
  for (std::size_t i : idx) seen.insert(labels[i]);
  if (seen.size() < 2) throw std::invalid_argument("train_probe: training subset contains a single class");

  LinearProbe p = probe;
  const auto m = static_cast<double>(idx.size());
  for (int step = 0; step < opts.steps; ++step) {
    Matrix g_beta = Matrix::Zero(p.beta.rows(), p.beta.cols());
    Vector g_bias = Vector::Zero(p.bias.size());
    for (std::size_t i : idx) {
      const Vector x = features.row(static_cast<Eigen::Index>(i)).transpose();
      Vector z = p.logits(x);
      z.array() -= z.maxCoeff();
      Vector prob = z.array().exp();
      prob /= prob.sum();
      prob(labels[i]) -= 1.0;
      g_beta.noalias() += x * prob.transpose();
      g_bias += prob;
    }
    p.beta -= opts.lr * (g_beta / m + opts.weight_decay * p.beta);
    p.bias -= opts.lr * (g_bias / m);
  }
  return p;
}

}  // namespace cxrvlp::inference
