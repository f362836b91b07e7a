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

#include "cxrvlp/pipeline/phases.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "cxrvlp/augment/augment.hpp"
#include "cxrvlp/corpus/manifest.hpp"
#include "cxrvlp/nn/archive.hpp"
#include "cxrvlp/nn/ops.hpp"
#include "cxrvlp/nn/optim.hpp"
#include "cxrvlp/objectives/autograd.hpp"

namespace cxrvlp::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nn::Tensor;

namespace {

constexpr std::uint64_t kTextInitStream = 0x7465787400000001ULL;
constexpr std::uint64_t kImageInitStream = 0x696d616700000002ULL;
constexpr std::uint64_t kEvalStream = 0x6576616c00000003ULL;

// Tokenizes sentences once; reports are re-assembled from cached pieces
// after sentence shuffling.
class SentenceCache {
 public:
  explicit SentenceCache(const text::Vocabulary& v) : vocab_(v) {}

  const text::TokenSequence& get(const std::string& s) {
    auto it = cache_.find(s);
    if (it == cache_.end()) it = cache_.emplace(s, text::tokenize(s, vocab_)).first;
    return it->second;
  }

  text::TokenSequence section(const std::vector<std::string>& sentences) {
    text::TokenSequence out;
    for (const auto& s : sentences) {
      const auto& t = get(s);
      out.ids.insert(out.ids.end(), t.ids.begin(), t.ids.end());
      out.word_starts.insert(out.word_starts.end(), t.word_starts.begin(), t.word_starts.end());
    }
    return text::with_specials(out);
  }

  text::TokenSequence report(const corpus::ReportDocument& r) {
    std::vector<std::string> all = r.findings;
    all.insert(all.end(), r.impression.begin(), r.impression.end());
    return section(all);
  }

 private:
  const text::Vocabulary& vocab_;
  std::unordered_map<std::string, text::TokenSequence> cache_;
};

struct MaskedBatch {
  text::PackedBatch packed;
  std::vector<std::int64_t> rows;
  std::vector<int> targets;
};

MaskedBatch mask_and_pack(const std::vector<text::TokenSequence>& seqs, double rate, int vocab_size,
                          int max_positions, Rng& rng) {
  MaskedBatch b;
  b.packed = text::PackedBatch::pack(seqs, max_positions);
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    const augment::MaskPlan plan = augment::sample_whole_word_mask(seqs[s], rate, vocab_size, rng);
    const augment::MaskedInput mi = augment::apply_mask(seqs[s], plan);
    const std::int64_t off = b.packed.segments[s].offset;
    for (std::size_t i = 0; i < mi.ids.size(); ++i) b.packed.ids[static_cast<std::size_t>(off) + i] = mi.ids[i];
    for (std::size_t k = 0; k < mi.positions.size(); ++k) {
      b.rows.push_back(off + mi.positions[k]);
      b.targets.push_back(mi.targets[k]);
    }
  }
  return b;
}

struct Step {
  Tensor loss;
  objectives::LossValue value;
};

struct Task {
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::vector<std::string> components;
  nn::ParameterList params;
  // idx refers to train items when train is true, else to validation items.
  std::function<Step(const std::vector<std::size_t>& idx, bool train, Rng& rng)> step;
  std::function<void(const fs::path&, const json& meta)> save;
};

// Consecutive batches of `bs`; a trailing remainder of one item joins the
// previous batch so contrastive losses never see a lone sample.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, int bs) {
  std::vector<std::vector<std::size_t>> out;
  const auto b = static_cast<std::size_t>(bs);
  for (std::size_t i = 0; i < order.size(); i += b) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + b)));
  }
  if (out.size() > 1 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back().front());
    out.pop_back();
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

void check_finite(const objectives::LossValue& v, Phase phase, int epoch, std::int64_t step) {
  bool ok = std::isfinite(v.scalar);
  for (const auto& [k, c] : v.components) ok = ok && std::isfinite(c);
  if (ok) return;
  std::string diag = std::string(to_string(phase)) + ": non-finite loss at epoch " + std::to_string(epoch) +
                     ", step " + std::to_string(step) + " (loss=" + fmt(v.scalar);
  for (const auto& [k, c] : v.components) diag += ", " + k + "=" + fmt(c);
  throw TrainingError(diag + "); lower the learning rate or check the inputs");
}

Checkpoint train(const RunConfig& cfg, Task& task, Rng& rng) {
  const PhaseSettings& s = cfg.settings;
  const fs::path dir = cfg.phase_dir(cfg.phase);
  fs::create_directories(dir);
  if (task.n_train < 2) {
    throw TrainingError(std::string(to_string(cfg.phase)) + ": need at least two training samples");
  }
  std::vector<std::size_t> train_order(task.n_train);
  std::iota(train_order.begin(), train_order.end(), std::size_t{0});
  const std::size_t steps_per_epoch = make_batches(train_order, s.optim.batch_size).size();
  nn::AdamW opt(task.params, {s.optim.lr, 0.9, 0.999, 1e-8, s.optim.weight_decay, s.optim.clip_norm});
  const nn::LinearSchedule schedule(s.optim.lr, static_cast<std::int64_t>(steps_per_epoch) * s.max_epochs,
                                    s.optim.warmup_fraction);

  std::ofstream log(dir / "train_log.csv", std::ios::trunc);
  std::ofstream val_log(dir / "val_log.csv", std::ios::trunc);
  log << "step,epoch,lr,loss";
  for (const auto& c : task.components) log << ',' << c;
  log << ",grad_norm\n";
  val_log << "epoch,val_loss";
  for (const auto& c : task.components) val_log << ",val_" << c;
  val_log << ",best\n";

  // Validation never touches labels: it replays the phase loss on held-out
  // items with a fixed stream so that passes are comparable.
  auto evaluate = [&]() {
    nn::NoGradGuard guard;
    Rng eval_rng(cfg.seed ^ kEvalStream);
    std::vector<std::size_t> order(task.n_val);
    std::iota(order.begin(), order.end(), std::size_t{0});
    objectives::LossValue total;
    double weight = 0.0;
    for (const auto& batch : make_batches(order, s.optim.batch_size)) {
      const Step st = task.step(batch, false, eval_rng);
      const auto w = static_cast<double>(batch.size());
      total.scalar += w * st.value.scalar;
      for (const auto& [k, v] : st.value.components) total.components[k] += w * v;
      weight += w;
    }
    total.scalar /= weight;
    for (auto& [k, v] : total.components) v /= weight;
    return total;
  };

  Checkpoint ck;
  ck.phase = cfg.phase;
  ck.path = cfg.checkpoint_path(cfg.phase);
  ck.best_val_loss = std::numeric_limits<double>::infinity();
  auto save = [&](int epoch, std::int64_t steps) {
    ck.epoch = epoch;
    ck.steps = steps;
    ck.rng_state = rng.state();
    json meta{{"phase", std::string(to_string(cfg.phase))},
              {"epoch", epoch},
              {"steps", steps},
              {"best_val_loss", std::isfinite(ck.best_val_loss) ? json(ck.best_val_loss) : json(nullptr)},
              {"rng_state", ck.rng_state},
              {"seed", cfg.seed}};
    const fs::path tmp = ck.path.string() + ".tmp";
    task.save(tmp, meta);
    fs::rename(tmp, ck.path);
  };

  std::int64_t step = 0;
  int stale = 0;
  for (int epoch = 1; epoch <= s.max_epochs; ++epoch) {
    rng.shuffle(train_order);
    for (const auto& batch : make_batches(train_order, s.optim.batch_size)) {
      const double lr = schedule.lr_at(step);
      Step st = task.step(batch, true, rng);
      check_finite(st.value, cfg.phase, epoch, step);
      st.loss.backward();
      const double norm = opt.step(lr);
      log << step << ',' << epoch << ',' << fmt(lr) << ',' << fmt(st.value.scalar);
      for (const auto& c : task.components) log << ',' << fmt(st.value.components.at(c));
      log << ',' << fmt(norm) << '\n';
      ++step;
    }
    log.flush();
    const bool last = epoch == s.max_epochs;
    if (epoch % s.eval_every != 0 && !last) continue;
    if (task.n_val == 0) {
      // Without a validation split the latest weights are kept.
      save(epoch, step);
      continue;
    }
    const objectives::LossValue val = evaluate();
    check_finite(val, cfg.phase, epoch, step);
    const bool improved = val.scalar < ck.best_val_loss;
    if (improved) {
      ck.best_val_loss = val.scalar;
      stale = 0;
      save(epoch, step);
    } else {
      ++stale;
    }
    val_log << epoch << ',' << fmt(val.scalar);
    for (const auto& c : task.components) val_log << ',' << fmt(val.components.at(c));
    val_log << ',' << (improved ? 1 : 0) << '\n';
    val_log.flush();
    if (stale >= s.patience) break;
  }
  if (s.max_epochs == 0) save(0, 0);
  return ck;
}

void append(nn::ParameterList& dst, nn::ParameterList src) {
  for (auto& p : src) dst.push_back(std::move(p));
}

void require_file(const fs::path& p, Phase phase, const std::string& what) {
  if (!fs::exists(p)) {
    throw TrainingError(std::string(to_string(phase)) + ": missing prerequisite " + what + " (" +
                        p.string() + ")");
  }
}

text::EncoderConfig text_config(const RunConfig& cfg, const text::Vocabulary& v) {
  text::EncoderConfig c = cfg.text;
  c.vocab_size = v.size();
  return c;
}

std::vector<const corpus::ReportDocument*> reports_in(const corpus::Dataset& ds, corpus::Split s) {
  std::vector<const corpus::ReportDocument*> out;
  for (const auto* p : ds.pairs_in(s)) out.push_back(ds.find_report(p->report_id));
  return out;
}

std::vector<const corpus::ImageRecord*> images_in(const corpus::Dataset& ds, corpus::Split s) {
  std::vector<const corpus::ImageRecord*> out;
  for (const auto* p : ds.pairs_in(s)) out.push_back(ds.find_image(p->image_id));
  return out;
}

void check_image_sizes(const std::vector<const corpus::ImageRecord*>& imgs, int side) {
  for (const auto* img : imgs) {
    if (img->height != side || img->width != side) {
      throw TrainingError("image '" + img->id + "' is " + std::to_string(img->height) + "x" +
                          std::to_string(img->width) + ", expected " + std::to_string(side) +
                          " (set image_side or resize the manifest)");
    }
  }
}

json archive_meta(const json& base, const text::TextEncoder* t, const vision::ImageEncoder* v) {
  json meta = base;
  if (t) meta["text_config"] = t->config().to_json();
  if (v) {
    vision::VisionConfig vc = v->config();
    vc.dilation = false;
    meta["vision_config"] = vc.to_json();
  }
  return meta;
}

Checkpoint run_vocab(const RunConfig& cfg, const corpus::Dataset& ds) {
  const auto corpus_texts = vocabulary_corpus(ds);
  if (corpus_texts.empty()) throw TrainingError("vocab: the train split has no report text");
  const text::Vocabulary v = text::build_vocab(corpus_texts, static_cast<std::size_t>(cfg.vocab_size));
  fs::create_directories(cfg.phase_dir(Phase::vocab));
  v.save(cfg.vocab_path());
  const text::TokenStats st = text::token_stats(corpus_texts, v);
  std::ofstream os(cfg.phase_dir(Phase::vocab) / "stats.json", std::ios::trunc);
  os << json{{"vocab_size", v.size()},
             {"avg_tokens", st.avg_tokens},
             {"avg_words", st.avg_words},
             {"pct_increase_vs_words", st.pct_increase_vs_words}}
            .dump(2)
     << '\n';
  Checkpoint ck;
  ck.phase = Phase::vocab;
  ck.path = cfg.vocab_path();
  return ck;
}

Checkpoint run_text_phase(const RunConfig& cfg, const corpus::Dataset& ds) {
  require_file(cfg.vocab_path(), cfg.phase, "vocabulary");
  if (cfg.phase == Phase::text_phase3) {
    require_file(cfg.checkpoint_path(Phase::text_phase2), cfg.phase, "phase-2 text checkpoint");
  }
  const text::Vocabulary vocab = text::Vocabulary::load(cfg.vocab_path());
  inference::JointModel model = untrained_model(cfg, vocab);
  if (cfg.phase == Phase::text_phase3) {
    nn::load_parameters(nn::read_archive(cfg.checkpoint_path(Phase::text_phase2)), model.text.parameters());
  }
  const text::TextEncoder& enc = model.text;
  const bool phase3 = cfg.phase == Phase::text_phase3;

  auto keep = [&](corpus::Split s) {
    std::vector<const corpus::ReportDocument*> out;
    for (const auto* r : reports_in(ds, s)) {
      if (!phase3 || !r->findings.empty()) out.push_back(r);
    }
    return out;
  };
  const auto train_reports = keep(corpus::Split::train);
  const auto val_reports = keep(corpus::Split::val);
  auto cache = std::make_shared<SentenceCache>(vocab);

  Rng rng(cfg.seed);
  Task task;
  task.n_train = train_reports.size();
  task.n_val = val_reports.size();
  task.params = enc.encoder_parameters();
  append(task.params, enc.mlm_parameters());
  if (phase3) append(task.params, enc.projection_parameters());
  task.components = phase3 ? std::vector<std::string>{"rsm", "mlm"} : std::vector<std::string>{"mlm"};
  const int vsize = vocab.size();
  const int maxpos = enc.config().max_positions;
  task.step = [&, cache](const std::vector<std::size_t>& idx, bool is_train, Rng& r) {
    const auto& pool = is_train ? train_reports : val_reports;
    std::vector<text::TokenSequence> seqs;
    if (!phase3) {
      for (std::size_t i : idx) {
        const corpus::ReportDocument doc = is_train ? augment::shuffle_sentences(*pool[i], r) : *pool[i];
        seqs.push_back(cache->report(doc));
      }
    } else {
      std::vector<text::TokenSequence> imp;
      for (std::size_t i : idx) {
        const corpus::ReportDocument doc = is_train ? augment::shuffle_sentences(*pool[i], r) : *pool[i];
        seqs.push_back(cache->section(doc.findings));
        imp.push_back(cache->section(doc.impression));
      }
      seqs.insert(seqs.end(), imp.begin(), imp.end());
    }
    const MaskedBatch mb = mask_and_pack(seqs, cfg.mask_rate, vsize, maxpos, r);
    const Tensor hidden = enc.forward(mb.packed, is_train ? &r : nullptr);
    objectives::LossValue mlm_v;
    Tensor mlm = objectives::mlm_loss(enc.mlm_logits(hidden, mb.rows), mb.targets, &mlm_v);
    if (!phase3) return Step{mlm, mlm_v};
    const Tensor proj = enc.project(enc.cls_rows(hidden, mb.packed));
    const auto n = static_cast<std::int64_t>(idx.size());
    std::vector<std::int64_t> first(static_cast<std::size_t>(n)), second(static_cast<std::size_t>(n));
    std::iota(first.begin(), first.end(), std::int64_t{0});
    std::iota(second.begin(), second.end(), n);
    objectives::LossValue rsm_v;
    Tensor rsm = objectives::rsm_loss(nn::gather_rows(proj, first), nn::gather_rows(proj, second),
                                      cfg.temperatures.tau1, &rsm_v);
    Tensor total = nn::add(rsm, nn::scale(mlm, static_cast<float>(cfg.temperatures.lambda_mlm)));
    return Step{total, objectives::combine_phase3(rsm_v, mlm_v, cfg.temperatures)};
  };
  task.save = [&](const fs::path& p, const json& meta) {
    nn::write_archive(p, archive_meta(meta, &enc, nullptr), enc.parameters());
  };
  return train(cfg, task, rng);
}

Checkpoint run_image_pretrain(const RunConfig& cfg, const corpus::Dataset& ds) {
  const auto train_imgs = images_in(ds, corpus::Split::train);
  const auto val_imgs = images_in(ds, corpus::Split::val);
  check_image_sizes(train_imgs, cfg.image_side);
  check_image_sizes(val_imgs, cfg.image_side);
  Rng init(cfg.seed ^ kImageInitStream);
  const vision::ImageEncoder enc(cfg.vision, init);

  Rng rng(cfg.seed);
  Task task;
  task.n_train = train_imgs.size();
  task.n_val = val_imgs.size();
  task.params = enc.backbone_parameters();
  append(task.params, enc.simclr_parameters());
  task.components = {"simclr"};
  task.step = [&](const std::vector<std::size_t>& idx, bool is_train, Rng& r) {
    const auto& pool = is_train ? train_imgs : val_imgs;
    std::vector<corpus::ImageRecord> views;
    views.reserve(idx.size() * 2);
    for (std::size_t i : idx) {
      views.push_back(augment::image_augment(*pool[i], cfg.settings.augment, r));
      views.push_back(augment::image_augment(*pool[i], cfg.settings.augment, r));
    }
    std::vector<const corpus::ImageRecord*> ptrs;
    for (const auto& v : views) ptrs.push_back(&v);
    const Tensor z = enc.simclr_embed(enc.encode(ptrs));
    objectives::LossValue v;
    Tensor loss = objectives::simclr_loss(z, cfg.simclr_tau, &v);
    return Step{loss, v};
  };
  task.save = [&](const fs::path& p, const json& meta) {
    nn::write_archive(p, archive_meta(meta, nullptr, &enc), enc.parameters());
  };
  return train(cfg, task, rng);
}

Checkpoint run_joint(const RunConfig& cfg, const corpus::Dataset& ds) {
  require_file(cfg.vocab_path(), cfg.phase, "vocabulary");
  require_file(cfg.checkpoint_path(Phase::text_phase3), cfg.phase, "phase-3 text checkpoint");
  require_file(cfg.checkpoint_path(Phase::image_pretrain), cfg.phase, "image-pretrain checkpoint");
  const text::Vocabulary vocab = text::Vocabulary::load(cfg.vocab_path());
  inference::JointModel model = untrained_model(cfg, vocab);
  nn::load_parameters(nn::read_archive(cfg.checkpoint_path(Phase::text_phase3)), model.text.parameters());
  nn::load_parameters(nn::read_archive(cfg.checkpoint_path(Phase::image_pretrain)),
                      model.image.backbone_parameters());
  const text::TextEncoder& tenc = model.text;
  const vision::ImageEncoder& ienc = model.image;

  struct Item {
    const corpus::ImageRecord* image;
    const corpus::ReportDocument* report;
  };
  auto items = [&](corpus::Split s) {
    std::vector<Item> out;
    for (const auto* p : ds.pairs_in(s)) out.push_back({ds.find_image(p->image_id), ds.find_report(p->report_id)});
    return out;
  };
  const auto train_items = items(corpus::Split::train);
  const auto val_items = items(corpus::Split::val);
  for (const auto* list : {&train_items, &val_items}) {
    std::vector<const corpus::ImageRecord*> imgs;
    for (const auto& it : *list) imgs.push_back(it.image);
    check_image_sizes(imgs, cfg.image_side);
  }
  auto cache = std::make_shared<SentenceCache>(vocab);

  Rng rng(cfg.seed);
  Task task;
  task.n_train = train_items.size();
  task.n_val = val_items.size();
  task.params = tenc.encoder_parameters();
  append(task.params, tenc.mlm_parameters());
  append(task.params, tenc.projection_parameters());
  append(task.params, ienc.backbone_parameters());
  append(task.params, ienc.projection_parameters());
  task.components = {"ga", "mlm"};
  const int vsize = vocab.size();
  const int maxpos = tenc.config().max_positions;
  task.step = [&, cache](const std::vector<std::size_t>& idx, bool is_train, Rng& r) {
    const auto& pool = is_train ? train_items : val_items;
    std::vector<corpus::ImageRecord> views;
    std::vector<text::TokenSequence> impressions;
    std::vector<text::TokenSequence> reports;
    for (std::size_t i : idx) {
      views.push_back(is_train ? augment::image_augment(*pool[i].image, cfg.settings.augment, r)
                               : *pool[i].image);
      const corpus::ReportDocument doc = is_train ? augment::shuffle_sentences(*pool[i].report, r)
                                                  : *pool[i].report;
      impressions.push_back(cache->section(doc.impression));
      reports.push_back(cache->report(doc));
    }
    std::vector<const corpus::ImageRecord*> ptrs;
    for (const auto& v : views) ptrs.push_back(&v);
    const Tensor v_img = ienc.pool_global(ienc.encode(ptrs));

    const text::PackedBatch ib = text::PackedBatch::pack(impressions, maxpos);
    const Tensor t_imp = tenc.project(tenc.cls_rows(tenc.forward(ib, is_train ? &r : nullptr), ib));
    objectives::LossValue ga_v;
    Tensor ga = objectives::global_alignment_loss(v_img, t_imp, cfg.temperatures.tau2, &ga_v);

    const MaskedBatch mb = mask_and_pack(reports, cfg.mask_rate, vsize, maxpos, r);
    const Tensor hidden = tenc.forward(mb.packed, is_train ? &r : nullptr);
    objectives::LossValue mlm_v;
    Tensor mlm = objectives::mlm_loss(tenc.mlm_logits(hidden, mb.rows), mb.targets, &mlm_v);
    Tensor total = nn::add(nn::scale(ga, static_cast<float>(cfg.temperatures.lambda_ga)), mlm);
    return Step{total, objectives::combine_joint(ga_v, mlm_v, cfg.temperatures)};
  };
  task.save = [&](const fs::path& p, const json& meta) {
    nn::ParameterList all = tenc.parameters();
    append(all, ienc.backbone_parameters());
    append(all, ienc.projection_parameters());
    nn::write_archive(p, archive_meta(meta, &tenc, &ienc), all);
  };
  return train(cfg, task, rng);
}

}  // namespace

std::vector<std::string> vocabulary_corpus(const corpus::Dataset& ds) {
  std::vector<std::string> out;
  for (const auto* r : reports_in(ds, corpus::Split::train)) {
    out.insert(out.end(), r->findings.begin(), r->findings.end());
    out.insert(out.end(), r->impression.begin(), r->impression.end());
  }
  return out;
}

inference::JointModel untrained_model(const RunConfig& cfg, const text::Vocabulary& vocab) {
  Rng text_rng(cfg.seed ^ kTextInitStream);
  Rng image_rng(cfg.seed ^ kImageInitStream);
  inference::JointModel m;
  m.vocab = vocab;
  m.text = text::TextEncoder(text_config(cfg, vocab), text_rng);
  m.image = vision::ImageEncoder(cfg.vision, image_rng);
  return m;
}

inference::JointModel untrained_model(const RunConfig& cfg) {
  require_file(cfg.vocab_path(), cfg.phase, "vocabulary");
  return untrained_model(cfg, text::Vocabulary::load(cfg.vocab_path()));
}

inference::JointModel load_model(const fs::path& checkpoint, const fs::path& vocab_path,
                                 std::uint64_t seed) {
  const nn::Archive ar = nn::read_archive(checkpoint);
  inference::JointModel m;
  m.vocab = text::Vocabulary::load(vocab_path);
  Rng text_rng(seed ^ kTextInitStream);
  Rng image_rng(seed ^ kImageInitStream);
  text::EncoderConfig tc;
  if (ar.meta.contains("text_config")) {
    tc = text::EncoderConfig::from_json(ar.meta.at("text_config"));
  }
  if (tc.vocab_size == 0) tc.vocab_size = m.vocab.size();
  if (tc.vocab_size != m.vocab.size()) {
    throw std::invalid_argument("checkpoint was trained with a " + std::to_string(tc.vocab_size) +
                                "-token vocabulary, but " + vocab_path.string() + " has " +
                                std::to_string(m.vocab.size()));
  }
  m.text = text::TextEncoder(tc, text_rng);
  vision::VisionConfig vc;
  if (ar.meta.contains("vision_config")) vc = vision::VisionConfig::from_json(ar.meta.at("vision_config"));
  m.image = vision::ImageEncoder(vc, image_rng);

  nn::ParameterList present;
  auto take = [&](const nn::ParameterList& list) {
    for (const auto& p : list) {
      if (ar.tensors.count(p.first)) present.push_back(p);
    }
  };
  take(m.text.parameters());
  take(m.image.parameters());
  if (present.empty()) throw std::invalid_argument(checkpoint.string() + ": no model weights found");
  nn::load_parameters(ar, present);
  return m;
}

Checkpoint read_checkpoint_info(const fs::path& path) {
  const nn::Archive ar = nn::read_archive(path);
  Checkpoint ck;
  ck.phase = parse_phase(ar.meta.value("phase", std::string("vocab")));
  ck.epoch = ar.meta.value("epoch", 0);
  ck.steps = ar.meta.value("steps", std::int64_t{0});
  const auto& b = ar.meta.contains("best_val_loss") ? ar.meta.at("best_val_loss") : json(nullptr);
  ck.best_val_loss = b.is_number() ? b.get<double>() : std::numeric_limits<double>::infinity();
  ck.rng_state = ar.meta.value("rng_state", std::string());
  ck.path = path;
  return ck;
}

Checkpoint run_phase(const RunConfig& cfg, const corpus::Dataset& ds) {
  cfg.validate();
  switch (cfg.phase) {
    case Phase::vocab:
      return run_vocab(cfg, ds);
    case Phase::text_phase2:
    case Phase::text_phase3:
      return run_text_phase(cfg, ds);
    case Phase::image_pretrain:
      return run_image_pretrain(cfg, ds);
    case Phase::joint:
      return run_joint(cfg, ds);
  }
  throw ConfigError("unknown phase");
}

Checkpoint run_phase(const RunConfig& cfg) {
  cfg.validate();
  // Prerequisite files are checked before the dataset is read.
  if (cfg.phase != Phase::vocab && cfg.phase != Phase::image_pretrain) {
    require_file(cfg.vocab_path(), cfg.phase, "vocabulary");
  }
  if (cfg.phase == Phase::text_phase3) {
    require_file(cfg.checkpoint_path(Phase::text_phase2), cfg.phase, "phase-2 text checkpoint");
  }
  if (cfg.phase == Phase::joint) {
    require_file(cfg.checkpoint_path(Phase::text_phase3), cfg.phase, "phase-3 text checkpoint");
    require_file(cfg.checkpoint_path(Phase::image_pretrain), cfg.phase, "image-pretrain checkpoint");
  }
  corpus::LoadOptions opts;
  opts.image_side = cfg.image_side;
  return run_phase(cfg, corpus::load_manifest(cfg.dataset, opts));
}

}  // namespace cxrvlp::pipeline
