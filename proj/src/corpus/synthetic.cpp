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

#include "cxrvlp/corpus/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "cxrvlp/nn/random.hpp"

namespace cxrvlp::corpus {

namespace {

enum class Pattern { blob, dark_rim, stripes, mottled };

Pattern pattern_for(Finding f) {
  switch (f) {
    case Finding::atelectasis:
    case Finding::pleural_effusion:
      return Pattern::stripes;
    case Finding::edema:
    case Finding::consolidation:
      return Pattern::mottled;
    case Finding::pneumothorax:
      return Pattern::dark_rim;
    default:
      return Pattern::blob;
  }
}

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[static_cast<std::size_t>(rng.below(v.size()))];
}

std::string format_id(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05d", prefix, i);
  return buf;
}

double ellipse_d2(const PlacedFinding& f, int x, int y) {
  const double dx = (x + 0.5 - f.cx) / f.rx;
  const double dy = (y + 0.5 - f.cy) / f.ry;
  return dx * dx + dy * dy;
}

void render_background(std::vector<float>& px, int side, double noise, Rng& rng) {
  const double s = side;
  // Per-image anatomy: lung placement and size, tissue densities and a
  // mild exposure gradient.
  const double shift = rng.uniform(-0.05, 0.05);
  const double dx = rng.uniform(-0.03, 0.03);
  const double dy = rng.uniform(-0.03, 0.03);
  const double lrx = 0.18 * rng.uniform(0.9, 1.1);
  const double lry = 0.38 * rng.uniform(0.9, 1.1);
  const double body = rng.uniform(0.5, 0.6);
  const double lung = rng.uniform(0.18, 0.26);
  const double med_w = rng.uniform(0.05, 0.09);
  const double med = rng.uniform(0.65, 0.75);
  const double tilt_x = rng.uniform(-0.08, 0.08);
  const double tilt_y = rng.uniform(-0.08, 0.08);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double u = (x + 0.5) / s;
      const double v = (y + 0.5) / s;
      double val = body;
      auto inside = [&](double cx, double cy, double rx, double ry) {
        const double ex = (u - cx) / rx;
        const double ey = (v - cy) / ry;
        return ex * ex + ey * ey <= 1.0;
      };
      if (inside(0.30 + dx, 0.50 + dy, lrx, lry) || inside(0.70 + dx, 0.50 + dy, lrx, lry)) val = lung;
      if (std::abs(u - 0.5 - dx) < med_w && v > 0.15 + dy) val = med;
      val += shift + tilt_x * (u - 0.5) + tilt_y * (v - 0.5) + noise * rng.normal();
      px[static_cast<std::size_t>(y) * side + x] = static_cast<float>(val);
    }
  }
}

void render_finding(std::vector<float>& px, int side, const PlacedFinding& f, Rng& rng) {
  const Pattern p = pattern_for(f.category);
  const double stripe_phase = rng.uniform(0.0, 4.0);
  for (int y = f.box.y; y < f.box.y + f.box.h; ++y) {
    for (int x = f.box.x; x < f.box.x + f.box.w; ++x) {
      const double d2 = ellipse_d2(f, x, y);
      if (d2 > 1.0) continue;
      float& v = px[static_cast<std::size_t>(y) * side + x];
      const double w = 1.0 - d2;
      switch (p) {
        case Pattern::blob:
          v += static_cast<float>(0.45 * (0.4 + 0.6 * w));
          break;
        case Pattern::dark_rim:
          v = d2 < 0.6 ? static_cast<float>(0.04 + 0.02 * rng.normal()) : v + 0.45f;
          break;
        case Pattern::stripes:
          if (static_cast<int>(std::floor((y + stripe_phase) / 3.0)) % 2 == 0) v += 0.4f;
          break;
        case Pattern::mottled:
          if (rng.uniform() < 0.55) v += static_cast<float>(0.3 + 0.2 * w);
          break;
      }
    }
  }
}

// Places one finding inside its zone; radii and centre jitter keep the box
// over at least one cell centre of the stride-16 grid.
PlacedFinding place(Finding cat, Zone zone, int side, Rng& rng) {
  const double scale = side / 64.0;
  const int zi = static_cast<int>(zone);
  const double ox = (zi % 2) * side / 2.0;
  const double oy = (zi / 2) * side / 2.0;
  PlacedFinding f;
  f.category = cat;
  f.zone = zone;
  f.cx = ox + (16.0 + rng.uniform(-4.0, 4.0)) * scale;
  f.cy = oy + (16.0 + rng.uniform(-4.0, 4.0)) * scale;
  f.rx = rng.uniform(9.0, 12.0) * scale;
  f.ry = rng.uniform(9.0, 12.0) * scale;
  int x0 = side, y0 = side, x1 = -1, y1 = -1;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      if (ellipse_d2(f, x, y) <= 1.0) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
    }
  }
  f.box = {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
  return f;
}

struct Case {
  std::vector<PlacedFinding> findings;
};

ReportDocument write_report(const std::string& id, const SyntheticConfig& cfg, Case& c, Rng& rng) {
  static const std::vector<std::string> present = {
      "there is {cat} in the {zone} lung.",
      "{zone} lung {cat} is noted.",
      "appearance of {cat} in the {zone} zone.",
  };
  static const std::vector<std::string> absent = {
      "no {cat} is seen.",
      "there is no evidence of {cat}.",
      "no {cat}.",
  };
  static const std::vector<std::string> filler = {
      "the cardiomediastinal silhouette is within normal limits.",
      "no acute osseous abnormality.",
      "the visualized upper abdomen is unremarkable.",
      "lung volumes are normal.",
      "degenerative changes of the spine.",
  };
  auto fill = [](std::string t, const std::string& cat, const std::string& zone) {
    for (auto [key, val] : {std::pair{std::string("{cat}"), cat}, std::pair{std::string("{zone}"), zone}}) {
      for (std::size_t p; (p = t.find(key)) != std::string::npos;) t.replace(p, key.size(), val);
    }
    return capitalize(t);
  };

  ReportDocument r;
  r.id = id;
  std::set<Finding> shown;
  for (PlacedFinding& f : c.findings) {
    const std::string cat(to_string(f.category));
    const std::string zone(zone_name(f.zone));
    shown.insert(f.category);
    r.findings.push_back(fill(pick(present, rng), cat, zone));
    f.phrase = rng.uniform() < 0.7 ? finding_phrase(f.category, f.zone)
                                   : fill("findings consistent with {cat} in the {zone} lung.", cat, zone);
    r.impression.push_back(f.phrase);
  }
  for (Finding cat : cfg.categories) {
    if (shown.count(cat)) continue;
    const std::string name(to_string(cat));
    r.findings.push_back(fill(pick(absent, rng), name, ""));
    r.impression.push_back(rng.uniform() < 0.6 ? fill("no evidence of {cat}.", name, "")
                                               : fill("there is no {cat}.", name, ""));
  }
  std::vector<std::string> pool = filler;
  rng.shuffle(pool);
  for (int i = 0; i < cfg.filler_sentences && i < static_cast<int>(pool.size()); ++i) {
    r.findings.push_back(capitalize(pool[static_cast<std::size_t>(i)]));
  }
  if (c.findings.empty()) r.impression.push_back("No acute cardiopulmonary process.");
  rng.shuffle(r.findings);
  rng.shuffle(r.impression);
  return r;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (categories.size() < 2) throw ConfigError("synthetic config: at least two finding categories are required");
  if (std::set<Finding>(categories.begin(), categories.end()).size() != categories.size()) {
    throw ConfigError("synthetic config: duplicate categories");
  }
  if (image_size < 32 || image_size % 16 != 0) {
    throw ConfigError("synthetic config: image_size " + std::to_string(image_size) +
                      " is too small for the 2x2 zone grid at stride 16 (needs a multiple of 16, >= 32)");
  }
  if (n_train < 0 || n_val < 0 || n_test < 0 || n_train + n_val + n_test == 0) {
    throw ConfigError("synthetic config: split counts must be non-negative and not all zero");
  }
  if (!(normal_fraction >= 0.0 && normal_fraction <= 1.0)) {
    throw ConfigError("synthetic config: normal_fraction must lie in [0, 1]");
  }
  if (!(second_finding_prob >= 0.0 && second_finding_prob <= 1.0)) {
    throw ConfigError("synthetic config: second_finding_prob must lie in [0, 1]");
  }
  if (!(noise >= 0.0)) throw ConfigError("synthetic config: noise must be non-negative");
}

nlohmann::json SyntheticConfig::to_json() const {
  std::vector<std::string> cats;
  for (Finding f : categories) cats.emplace_back(to_string(f));
  return {{"categories", cats},
          {"image_size", image_size},
          {"n_train", n_train},
          {"n_val", n_val},
          {"n_test", n_test},
          {"normal_fraction", normal_fraction},
          {"second_finding_prob", second_finding_prob},
          {"noise", noise},
          {"filler_sentences", filler_sentences}};
}

SyntheticConfig SyntheticConfig::from_json(const nlohmann::json& j) {
  SyntheticConfig c;
  if (j.contains("categories")) {
    c.categories.clear();
    for (const auto& s : j.at("categories")) c.categories.push_back(parse_finding(s.get<std::string>()));
  }
  c.image_size = j.value("image_size", c.image_size);
  c.n_train = j.value("n_train", c.n_train);
  c.n_val = j.value("n_val", c.n_val);
  c.n_test = j.value("n_test", c.n_test);
  c.normal_fraction = j.value("normal_fraction", c.normal_fraction);
  c.second_finding_prob = j.value("second_finding_prob", c.second_finding_prob);
  c.noise = j.value("noise", c.noise);
  c.filler_sentences = j.value("filler_sentences", c.filler_sentences);
  return c;
}

std::string_view zone_name(Zone z) {
  switch (z) {
    case Zone::right_upper:
      return "right upper";
    case Zone::left_upper:
      return "left upper";
    case Zone::right_lower:
      return "right lower";
    case Zone::left_lower:
      return "left lower";
  }
  return "unknown";
}

std::string finding_phrase(Finding f, Zone z) {
  return "Findings suggesting " + std::string(to_string(f)) + " in the " + std::string(zone_name(z)) +
         " lung.";
}

std::vector<bool> finding_mask(const PlacedFinding& f, int side) {
  std::vector<bool> m(static_cast<std::size_t>(side) * side, false);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) m[static_cast<std::size_t>(y) * side + x] = ellipse_d2(f, x, y) <= 1.0;
  }
  return m;
}

SyntheticCorpus generate_synthetic_detail(const SyntheticConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  SyntheticCorpus out;
  Dataset& ds = out.dataset;
  const int side = cfg.image_size;
  int next_id = 0;
  const std::pair<Split, int> splits[] = {
      {Split::train, cfg.n_train}, {Split::val, cfg.n_val}, {Split::test, cfg.n_test}};
  for (const auto& [split, n] : splits) {
    const int n_normal = static_cast<int>(std::lround(cfg.normal_fraction * n));
    std::vector<bool> normal(static_cast<std::size_t>(n), false);
    std::fill(normal.begin(), normal.begin() + n_normal, true);
    rng.shuffle(normal);
    for (int i = 0; i < n; ++i, ++next_id) {
      Case c;
      if (!normal[static_cast<std::size_t>(i)]) {
        const Finding first = pick(cfg.categories, rng);
        const Zone z1 = static_cast<Zone>(rng.below(4));
        c.findings.push_back(place(first, z1, side, rng));
        if (rng.uniform() < cfg.second_finding_prob) {
          std::vector<Finding> others;
          for (Finding f : cfg.categories) {
            if (f != first) others.push_back(f);
          }
          const Finding second = pick(others, rng);
          Zone z2 = static_cast<Zone>((static_cast<int>(z1) + 1 + static_cast<int>(rng.below(3))) % 4);
          c.findings.push_back(place(second, z2, side, rng));
        }
      }
      ImageRecord img;
      img.id = format_id("img", next_id);
      img.height = side;
      img.width = side;
      img.source_size = {side, side};
      img.pixels.assign(static_cast<std::size_t>(side) * side, 0.0f);
      render_background(img.pixels, side, cfg.noise, rng);
      for (const PlacedFinding& f : c.findings) render_finding(img.pixels, side, f, rng);
      for (float& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);

      ReportDocument rep = write_report(format_id("rep", next_id), cfg, c, rng);
      for (const PlacedFinding& f : c.findings) {
        ds.annotations.push_back({img.id, f.phrase, f.category, {f.box}});
      }
      ds.pairs.push_back({img.id, rep.id, split});
      out.findings[img.id] = c.findings;
      ds.images.push_back(std::move(img));
      ds.reports.push_back(std::move(rep));
    }
  }
  ds.reindex();
  return out;
}

Dataset generate_synthetic_corpus(const SyntheticConfig& cfg, std::uint64_t seed) {
  return generate_synthetic_detail(cfg, seed).dataset;
}

}  // namespace cxrvlp::corpus
