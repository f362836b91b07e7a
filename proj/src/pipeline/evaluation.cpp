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


#include "cxrvlp/pipeline/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "cxrvlp/corpus/image_io.hpp"
#include "cxrvlp/nn/tensor.hpp"
#include "cxrvlp/objectives/autograd.hpp"

namespace cxrvlp::pipeline {

using inference::Matrix;
using inference::Vector;
using nlohmann::json;

namespace {

std::vector<inference::ProjectedCells> project_images(const std::vector<const corpus::ImageRecord*>& images,
                                                      const inference::JointModel& m, int batch = 32) {
  nn::NoGradGuard guard;
  std::vector<inference::ProjectedCells> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(images.size(), start + static_cast<std::size_t>(batch));
    std::vector<const corpus::ImageRecord*> chunk(images.begin() + static_cast<std::ptrdiff_t>(start),
                                                  images.begin() + static_cast<std::ptrdiff_t>(end));
    const vision::Grid g = m.image.project_grid(m.image.encode(chunk));
    const Matrix cells = objectives::to_matrix(g.cells);
    const auto per = static_cast<Eigen::Index>(g.cells_per_image());
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      inference::ProjectedCells pc;
      pc.cells = cells.middleRows(static_cast<Eigen::Index>(i) * per, per);
      pc.height = static_cast<int>(g.height);
      pc.width = static_cast<int>(g.width);
      out.push_back(std::move(pc));
    }
  }
  return out;
}

json score_json(const metrics::GroundingScore& s) {
  json iou = json::object();
  for (const auto& [t, v] : s.per_threshold_iou) {
    std::ostringstream k;
    k << t;
    iou[k.str()] = v;
  }
  return {{"cnr", s.cnr}, {"miou", s.miou}, {"dice", s.dice}, {"iou", iou}};
}

metrics::GroundingScore mean_score(const std::vector<const metrics::GroundingScore*>& xs) {
  metrics::GroundingScore out;
  if (xs.empty()) return out;
  for (const auto* s : xs) {
    out.cnr += s->cnr;
    out.miou += s->miou;
    out.dice += s->dice;
    for (const auto& [t, v] : s->per_threshold_iou) out.per_threshold_iou[t] += v;
  }
  const auto n = static_cast<double>(xs.size());
  out.cnr /= n;
  out.miou /= n;
  out.dice /= n;
  for (auto& [t, v] : out.per_threshold_iou) v /= n;
  return out;
}

std::string category_key(corpus::Finding f) {
  std::string s(corpus::to_string(f));
  std::replace(s.begin(), s.end(), ' ', '_');
  return s;
}

}  // namespace

std::string positive_prompt(corpus::Finding f) { return "Findings suggesting " + std::string(corpus::to_string(f)); }
std::string negative_prompt(corpus::Finding f) { return "No evidence of " + std::string(corpus::to_string(f)); }

std::vector<corpus::Finding> annotated_categories(const corpus::Dataset& ds) {
  std::set<corpus::Finding> seen;
  for (const auto& a : ds.annotations) seen.insert(a.category);
  return {seen.begin(), seen.end()};
}

std::vector<const corpus::ImageRecord*> split_images(const corpus::Dataset& ds, corpus::Split s) {
  std::vector<const corpus::ImageRecord*> out;
  for (const auto* p : ds.pairs_in(s)) out.push_back(ds.find_image(p->image_id));
  return out;
}

std::vector<bool> category_labels(const corpus::Dataset& ds,
                                  const std::vector<const corpus::ImageRecord*>& images,
                                  corpus::Finding f) {
  std::vector<bool> out;
  out.reserve(images.size());
  for (const auto* img : images) {
    bool pos = false;
    for (const auto* a : ds.annotations_for(img->id)) pos = pos || a->category == f;
    out.push_back(pos);
  }
  return out;
}

std::vector<std::size_t> balanced_subset(const std::vector<bool>& labels) {
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  const std::size_t k = std::min(n_pos, labels.size() - n_pos);
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  std::size_t neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] && pos < k) {
      out.push_back(i);
      ++pos;
    } else if (!labels[i] && neg < k) {
      out.push_back(i);
      ++neg;
    }
  }
  return out;
}

BinaryZeroShot binary_zero_shot(const Matrix& embeddings, const std::vector<bool>& labels,
                                const std::string& pos, const std::string& neg,
                                const inference::JointModel& m) {
  if (static_cast<std::size_t>(embeddings.rows()) != labels.size()) {
    throw std::invalid_argument("binary_zero_shot: embeddings and labels differ in length");
  }
  const inference::PromptSet ps = inference::embed_prompts({pos, neg}, m);
  BinaryZeroShot r;
  r.pos_prompt = pos;
  r.neg_prompt = neg;
  r.labels = labels;
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    r.p_pos.push_back(inference::zero_shot_probs(embeddings.row(i).transpose(), ps)(0));
  }
  r.n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  r.n_neg = labels.size() - r.n_pos;
  const auto subset = balanced_subset(labels);
  if (subset.empty()) throw metrics::MetricError("zero-shot: the evaluation set has a single class");
  std::size_t correct = 0;
  for (std::size_t i : subset) correct += (r.p_pos[i] > 0.5) == labels[i];
  r.balanced_accuracy = static_cast<double>(correct) / static_cast<double>(subset.size());
  r.metrics = metrics::classification_metrics(r.p_pos, labels);
  return r;
}

json ZeroShotReport::to_json() const {
  json cats = json::object();
  for (const auto& [f, r] : categories) {
    cats[category_key(f)] = {{"pos_prompt", r.pos_prompt},
                             {"neg_prompt", r.neg_prompt},
                             {"n_pos", r.n_pos},
                             {"n_neg", r.n_neg},
                             {"balanced_accuracy", r.balanced_accuracy},
                             {"accuracy_at_f1_threshold", r.metrics.accuracy},
                             {"f1", r.metrics.f1},
                             {"auroc", r.metrics.auroc},
                             {"sensitivity", r.metrics.sensitivity},
                             {"specificity", r.metrics.specificity},
                             {"threshold", r.metrics.threshold}};
  }
  return {{"categories", cats}, {"mean_accuracy", mean_accuracy}};
}

ZeroShotReport eval_zeroshot(const inference::JointModel& m, const corpus::Dataset& ds, corpus::Split split) {
  const auto images = split_images(ds, split);
  if (images.empty()) throw std::invalid_argument("eval_zeroshot: the split has no images");
  const Matrix emb = inference::embed_images(images, m);
  ZeroShotReport rep;
  for (corpus::Finding f : annotated_categories(ds)) {
    const auto labels = category_labels(ds, images, f);
    rep.categories.emplace(f, binary_zero_shot(emb, labels, positive_prompt(f), negative_prompt(f), m));
  }
  if (rep.categories.empty()) throw std::invalid_argument("eval_zeroshot: the dataset has no annotations");
  for (const auto& [f, r] : rep.categories) rep.mean_accuracy += r.balanced_accuracy;
  rep.mean_accuracy /= static_cast<double>(rep.categories.size());
  return rep;
}

metrics::CellMask annotation_mask(const corpus::GroundingAnnotation& a, const corpus::ImageRecord& img,
                                  int grid_h, int grid_w) {
  std::vector<corpus::Box> boxes;
  const corpus::ImageSize src = img.source_size.height > 0 ? img.source_size
                                                           : corpus::ImageSize{img.height, img.width};
  for (const auto& b : a.boxes) boxes.push_back(corpus::map_box_to_processed(b, src, img.height));
  return metrics::rasterize_boxes(boxes, {img.height, img.width}, grid_h, grid_w);
}

GroundingReport eval_grounding(const inference::JointModel& model, const corpus::Dataset& ds,
                               const GroundingOptions& opts) {
  inference::JointModel m = model;  // shares weights; only the conv geometry differs
  m.image.set_dilation(opts.dilation);
  const auto anns = ds.annotations_in(opts.split);
  if (anns.empty()) throw std::invalid_argument("eval_grounding: the split has no annotations");

  std::vector<const corpus::ImageRecord*> images;
  std::map<std::string, std::size_t> slot;
  std::vector<std::string> phrases;
  for (const auto* a : anns) {
    if (!slot.count(a->image_id)) {
      slot[a->image_id] = images.size();
      images.push_back(ds.find_image(a->image_id));
    }
    phrases.push_back(a->phrase);
  }
  const auto grids = project_images(images, m);
  const Matrix t = inference::embed_texts(phrases, m);

  GroundingReport rep;
  for (std::size_t k = 0; k < anns.size(); ++k) {
    const auto& a = *anns[k];
    const auto& g = grids[slot.at(a.image_id)];
    metrics::SimilarityMap map = inference::similarity_map(g, t.row(static_cast<Eigen::Index>(k)).transpose());
    map.phrase = a.phrase;
    map.image_id = a.image_id;
    if (opts.rescale) map = metrics::minmax_rescale(map);
    const metrics::CellMask mask = annotation_mask(a, *images[slot.at(a.image_id)], g.height, g.width);
    rep.samples.push_back({a.image_id, a.phrase, a.category, metrics::grounding_score(map, mask)});
  }
  std::map<corpus::Finding, std::vector<const metrics::GroundingScore*>> by_cat;
  std::vector<const metrics::GroundingScore*> all;
  for (const auto& s : rep.samples) {
    by_cat[s.category].push_back(&s.score);
    all.push_back(&s.score);
  }
  std::vector<const metrics::GroundingScore*> cat_means;
  for (const auto& [f, xs] : by_cat) rep.per_category[f] = mean_score(xs);
  for (const auto& [f, s] : rep.per_category) cat_means.push_back(&s);
  rep.macro = mean_score(cat_means);
  rep.sample_mean = mean_score(all);
  return rep;
}

json GroundingReport::to_json() const {
  json cats = json::object();
  for (const auto& [f, s] : per_category) {
    json j = score_json(s);
    j["n"] = std::count_if(samples.begin(), samples.end(), [f = f](const auto& x) { return x.category == f; });
    cats[category_key(f)] = j;
  }
  return {{"categories", cats},
          {"macro", score_json(macro)},
          {"sample_mean", score_json(sample_mean)},
          {"n_samples", samples.size()}};
}

void GroundingReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "image_id,category,phrase,cnr,miou,dice\n";
  os << std::setprecision(9);
  for (const auto& s : samples) {
    std::string phrase = s.phrase;
    std::string quoted;
    for (char c : phrase) {
      if (c == '"') quoted += '"';
      quoted += c;
    }
    os << s.image_id << ',' << category_key(s.category) << ",\"" << quoted << "\"," << s.score.cnr << ','
       << s.score.miou << ',' << s.score.dice << '\n';
  }
}

void export_similarity_map(const metrics::SimilarityMap& map, const corpus::ImageRecord& img,
                           const std::filesystem::path& npy, const std::filesystem::path& png) {
  corpus::Array2D a;
  a.rows = map.height;
  a.cols = map.width;
  for (double v : map.cells) a.values.push_back(static_cast<float>(v));
  corpus::write_npy(npy, a);
  if (png.empty()) return;
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(img.height) * img.width * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const int cy = std::min(map.height - 1, y * map.height / img.height);
      const int cx = std::min(map.width - 1, x * map.width / img.width);
      const double h = std::clamp((map.at(cy, cx) + 1.0) / 2.0, 0.0, 1.0);
      const double g = std::clamp(static_cast<double>(img.at(y, x)), 0.0, 1.0);
      const std::size_t o = (static_cast<std::size_t>(y) * img.width + x) * 3;
      rgb[o] = static_cast<std::uint8_t>(std::lround(255.0 * (0.5 * g + 0.5 * h)));
      rgb[o + 1] = static_cast<std::uint8_t>(std::lround(255.0 * 0.5 * g));
      rgb[o + 2] = static_cast<std::uint8_t>(std::lround(255.0 * (0.5 * g + 0.5 * (1.0 - h)) * 0.5));
    }
  }
  corpus::write_png_rgb(png, img.height, img.width, rgb);
}

json SegmentationReport::to_json() const {
  json j{{"zero_shot_dice", zero_shot_dice}, {"fraction", fraction}, {"n_annotations", n_annotations}};
  j["probe_dice"] = probe_dice ? json(*probe_dice) : json(nullptr);
  return j;
}

SegmentationReport eval_segmentation(const inference::JointModel& m, const corpus::Dataset& ds,
                                     double fraction, std::uint64_t seed,
                                     const inference::ProbeOptions& opts) {
  const auto test_anns = ds.annotations_in(corpus::Split::test);
  if (test_anns.empty()) throw std::invalid_argument("eval_segmentation: the test split has no annotations");
  SegmentationReport rep;
  rep.fraction = fraction;
  rep.n_annotations = test_anns.size();

  std::vector<const corpus::ImageRecord*> test_images;
  std::vector<std::string> phrases;
  for (const auto* a : test_anns) {
    test_images.push_back(ds.find_image(a->image_id));
    phrases.push_back(a->phrase);
  }
  const auto test_grids = project_images(test_images, m);
  const Matrix t = inference::embed_texts(phrases, m);
  std::vector<metrics::CellMask> masks;
  for (std::size_t k = 0; k < test_anns.size(); ++k) {
    const auto& g = test_grids[k];
    masks.push_back(annotation_mask(*test_anns[k], *test_images[k], g.height, g.width));
    rep.zero_shot_dice +=
        metrics::dice(inference::similarity_map(g, t.row(static_cast<Eigen::Index>(k)).transpose()), masks[k]);
  }
  rep.zero_shot_dice /= static_cast<double>(test_anns.size());
  if (fraction <= 0.0) return rep;

  // One cell-wise probe per category; cell labels use the rasterization rule.
  const auto train_images = split_images(ds, corpus::Split::train);
  const auto train_grids = project_images(train_images, m);
  Rng rng(seed);
  std::map<corpus::Finding, inference::LinearProbe> probes;
  for (corpus::Finding f : annotated_categories(ds)) {
    std::vector<std::size_t> order(train_images.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    order.resize(std::max<std::size_t>(
        1, std::min(order.size(), static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(order.size()))))));
    std::vector<Vector> rows;
    std::vector<int> labels;
    for (std::size_t i : order) {
      const auto& g = train_grids[i];
      std::vector<bool> inside(static_cast<std::size_t>(g.height) * g.width, false);
      for (const auto* a : ds.annotations_for(train_images[i]->id)) {
        if (a->category != f) continue;
        const auto mask = annotation_mask(*a, *train_images[i], g.height, g.width);
        for (std::size_t c = 0; c < inside.size(); ++c) inside[c] = inside[c] || mask.cells[c];
      }
      for (std::size_t c = 0; c < inside.size(); ++c) {
        rows.push_back(g.cells.row(static_cast<Eigen::Index>(c)).transpose());
        labels.push_back(inside[c] ? 0 : 1);
      }
    }
    Matrix feats(static_cast<Eigen::Index>(rows.size()), t.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) feats.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    const inference::PromptSet ps = inference::embed_prompts({positive_prompt(f), negative_prompt(f)}, m);
    probes.emplace(f, inference::train_probe(inference::init_probe(ps), feats, labels, 1.0, opts, rng));
  }
  double total = 0.0;
  for (std::size_t k = 0; k < test_anns.size(); ++k) {
    const auto& g = test_grids[k];
    const auto& probe = probes.at(test_anns[k]->category);
    metrics::SimilarityMap map;
    map.height = g.height;
    map.width = g.width;
    for (Eigen::Index c = 0; c < g.cells.rows(); ++c) {
      Vector z = probe.logits(g.cells.row(c).transpose());
      z.array() -= z.maxCoeff();
      const Vector p = z.array().exp() / z.array().exp().sum();
      map.cells.push_back(2.0 * p(0) - 1.0);
    }
    total += metrics::dice(map, masks[k]);
  }
  rep.probe_dice = total / static_cast<double>(test_anns.size());
  return rep;
}

std::vector<PromptSensitivityRow> prompt_sensitivity_report(
    const inference::JointModel& m, const std::vector<std::pair<std::string, std::string>>& pairs,
    const std::vector<const corpus::ImageRecord*>& images, const std::vector<bool>& labels) {
  if (pairs.size() < 2) throw std::invalid_argument("prompt sensitivity needs at least two prompt pairs");
  const auto n_pos = std::count(labels.begin(), labels.end(), true);
  if (n_pos == 0 || n_pos == static_cast<long>(labels.size())) {
    throw metrics::MetricError("prompt sensitivity: AUROC is undefined on a single-class evaluation set");
  }
  const Matrix emb = inference::embed_images(images, m);
  std::vector<PromptSensitivityRow> rows;
  for (const auto& [pos, neg] : pairs) {
    const BinaryZeroShot z = binary_zero_shot(emb, labels, pos, neg, m);
    rows.push_back({pos, neg, z.metrics.f1, z.metrics.auroc, 0.0});
  }
  for (auto& r : rows) r.delta_auc = std::abs(r.auroc - rows.front().auroc);
  return rows;
}

std::string format_sensitivity_table(const std::vector<PromptSensitivityRow>& rows) {
  std::ostringstream os;
  os << "positive prompt | negative prompt | F1 | ROC-AUC | |dAUC|\n";
  os << std::fixed << std::setprecision(3);
  for (const auto& r : rows) {
    os << r.pos << " | " << r.neg << " | " << r.f1 << " | " << r.auroc << " | " << r.delta_auc << '\n';
  }
  return os.str();
}

}  // namespace cxrvlp::pipeline
