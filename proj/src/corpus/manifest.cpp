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

#include "cxrvlp/corpus/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <string>

#include "json.hpp"

#include "cxrvlp/corpus/image_io.hpp"

namespace cxrvlp::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct LineContext {
  std::string file;
  std::size_t line = 0;
};

[[noreturn]] void record_error(const LineContext& ctx, std::size_t column, const std::string& what) {
  throw ManifestError(ctx.file + ":" + std::to_string(ctx.line) + ":" + std::to_string(column) +
                      ": " + what);
}

// Calls fn(record, ctx) for every non-blank line of a JSONL file.
void for_each_record(const fs::path& path, const std::function<void(const json&, const LineContext&)>& fn) {
  std::ifstream is(path);
  if (!is) throw ManifestError("missing file: " + path.string());
  LineContext ctx{path.filename().string(), 0};
  std::string line;
  while (std::getline(is, line)) {
    ++ctx.line;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      record_error(ctx, e.byte, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) record_error(ctx, 1, "record is not a JSON object");
    try {
      fn(rec, ctx);
    } catch (const json::exception& e) {
      record_error(ctx, 1, std::string("bad field: ") + e.what());
    }
  }
}

std::vector<std::string> sentence_list(const json& rec, const char* key, const LineContext& ctx) {
  if (!rec.contains(key) || !rec.at(key).is_array()) {
    record_error(ctx, 1, std::string("field '") + key + "' must be a list of strings");
  }
  std::vector<std::string> out;
  for (const auto& s : rec.at(key)) {
    if (!s.is_string()) record_error(ctx, 1, std::string("field '") + key + "' has a non-string entry");
    std::string text = s.get<std::string>();
    std::string upper = text;
    for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (upper.rfind("FINDINGS:", 0) == 0 || upper.rfind("IMPRESSION:", 0) == 0) {
      record_error(ctx, 1, "sentence carries a section header: '" + text + "'");
    }
    out.push_back(std::move(text));
  }
  return out;
}

std::string required_string(const json& rec, const char* key, const LineContext& ctx) {
  if (!rec.contains(key) || !rec.at(key).is_string() || rec.at(key).get<std::string>().empty()) {
    record_error(ctx, 1, std::string("field '") + key + "' must be a non-empty string");
  }
  return rec.at(key).get<std::string>();
}

ImageRecord load_image_file(const fs::path& p, const LoadOptions& opts) {
  Array2D a = p.extension() == ".png" ? read_png_gray(p) : read_npy(p);
  ImageRecord img;
  img.id = p.stem().string();
  img.height = a.rows;
  img.width = a.cols;
  img.source_size = {a.rows, a.cols};
  img.pixels = std::move(a.values);
  for (float v : img.pixels) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw ManifestError(p.string() + ": intensity outside [0, 1]");
    }
  }
  if (opts.image_side > 0 && (img.height != opts.image_side || img.width != opts.image_side)) {
    img = centre_crop_resize(img, opts.image_side);
  } else if (img.height != img.width) {
    img = centre_crop_resize(img, std::min(img.height, img.width));
  }
  return img;
}

}  // namespace

Dataset load_manifest(const fs::path& dir, const LoadOptions& opts) {
  if (!fs::is_directory(dir)) throw ManifestError("missing file: manifest directory " + dir.string());
  Dataset ds;

  for_each_record(dir / "reports.jsonl", [&](const json& rec, const LineContext& ctx) {
    ReportDocument r;
    r.id = required_string(rec, "id", ctx);
    r.findings = sentence_list(rec, "findings", ctx);
    r.impression = sentence_list(rec, "impression", ctx);
    if (r.impression.empty()) record_error(ctx, 1, "report '" + r.id + "' has no IMPRESSION sentences");
    ds.reports.push_back(std::move(r));
  });

  std::map<std::string, ImageSize> source_sizes;
  if (fs::exists(dir / "images.jsonl")) {
    for_each_record(dir / "images.jsonl", [&](const json& rec, const LineContext& ctx) {
      const auto& s = rec.at("source_size");
      source_sizes[required_string(rec, "id", ctx)] = {s.at(0).get<int>(), s.at(1).get<int>()};
    });
  }
  if (fs::is_directory(dir / "images")) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir / "images")) {
      const auto ext = e.path().extension();
      if (e.is_regular_file() && (ext == ".npy" || ext == ".png")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      ImageRecord img = load_image_file(f, opts);
      if (auto it = source_sizes.find(img.id); it != source_sizes.end()) img.source_size = it->second;
      ds.images.push_back(std::move(img));
    }
  }

  for_each_record(dir / "pairs.jsonl", [&](const json& rec, const LineContext& ctx) {
    PairedSample p;
    p.image_id = required_string(rec, "image_id", ctx);
    p.report_id = required_string(rec, "report_id", ctx);
    try {
      p.split = parse_split(required_string(rec, "split", ctx));
    } catch (const std::invalid_argument& e) {
      record_error(ctx, 1, e.what());
    }
    ds.pairs.push_back(std::move(p));
  });

  if (fs::exists(dir / "annotations.jsonl")) {
    for_each_record(dir / "annotations.jsonl", [&](const json& rec, const LineContext& ctx) {
      GroundingAnnotation a;
      a.image_id = required_string(rec, "image_id", ctx);
      a.phrase = required_string(rec, "phrase", ctx);
      try {
        a.category = parse_finding(required_string(rec, "category", ctx));
      } catch (const std::invalid_argument& e) {
        record_error(ctx, 1, e.what());
      }
      if (!rec.contains("boxes") || !rec.at("boxes").is_array() || rec.at("boxes").empty()) {
        record_error(ctx, 1, "field 'boxes' must be a non-empty list");
      }
      for (const auto& b : rec.at("boxes")) {
        if (!b.is_array() || b.size() != 4 ||
            !std::all_of(b.begin(), b.end(), [](const json& v) { return v.is_number_integer(); })) {
          record_error(ctx, 1, "each box must be [x, y, w, h] integers");
        }
        a.boxes.push_back({b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()});
      }
      ds.annotations.push_back(std::move(a));
    });
  }

  try {
    ds.reindex();
  } catch (const std::invalid_argument& e) {
    throw ManifestError(e.what());
  }

  std::map<std::string, Split> image_split;
  std::map<std::string, Split> report_split;
  for (const auto& p : ds.pairs) {
    if (!ds.find_image(p.image_id)) throw ManifestError("pairs.jsonl: dangling image_id '" + p.image_id + "'");
    if (!ds.find_report(p.report_id)) throw ManifestError("pairs.jsonl: dangling report_id '" + p.report_id + "'");
    for (auto [map, id] : {std::pair{&image_split, &p.image_id}, std::pair{&report_split, &p.report_id}}) {
      auto [it, inserted] = map->emplace(*id, p.split);
      if (!inserted && it->second != p.split) {
        throw ManifestError("split leakage: id '" + *id + "' appears in both " +
                            std::string(to_string(it->second)) + " and " +
                            std::string(to_string(p.split)));
      }
    }
  }
  for (const auto& a : ds.annotations) {
    const ImageRecord* img = ds.find_image(a.image_id);
    if (!img) throw ManifestError("annotations.jsonl: dangling image_id '" + a.image_id + "'");
    for (const Box& b : a.boxes) {
      if (b.x < 0 || b.y < 0 || b.w < 0 || b.h < 0 || b.x + b.w > img->source_size.width ||
          b.y + b.h > img->source_size.height) {
        throw ManifestError("annotations.jsonl: box outside image '" + a.image_id + "'");
      }
    }
  }
  return ds;
}

void write_manifest(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir / "images");
  auto open = [&](const char* name) {
    std::ofstream os(dir / name, std::ios::trunc);
    if (!os) throw ManifestError("cannot write " + (dir / name).string());
    return os;
  };
  {
    auto os = open("reports.jsonl");
    for (const auto& r : ds.reports) {
      nlohmann::ordered_json j{{"id", r.id}, {"findings", r.findings}, {"impression", r.impression}};
      os << j.dump() << '\n';
    }
  }
  {
    auto os = open("pairs.jsonl");
    for (const auto& p : ds.pairs) {
      nlohmann::ordered_json j{{"image_id", p.image_id},
                               {"report_id", p.report_id},
                               {"split", std::string(to_string(p.split))}};
      os << j.dump() << '\n';
    }
  }
  {
    auto os = open("annotations.jsonl");
    for (const auto& a : ds.annotations) {
      json boxes = json::array();
      for (const Box& b : a.boxes) boxes.push_back({b.x, b.y, b.w, b.h});
      nlohmann::ordered_json j{{"image_id", a.image_id},
                               {"phrase", a.phrase},
                               {"category", std::string(to_string(a.category))},
                               {"boxes", boxes}};
      os << j.dump() << '\n';
    }
  }
  bool resized = false;
  for (const auto& img : ds.images) {
    resized = resized || img.source_size != ImageSize{img.height, img.width};
    write_npy(dir / "images" / (img.id + ".npy"), Array2D{img.height, img.width, img.pixels});
  }
  if (resized) {
    auto os = open("images.jsonl");
    for (const auto& img : ds.images) {
      nlohmann::ordered_json j{{"id", img.id},
                               {"source_size", {img.source_size.height, img.source_size.width}}};
      os << j.dump() << '\n';
    }
  }
}

}  // namespace cxrvlp::corpus
