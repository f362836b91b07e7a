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

#include "cxrvlp/corpus/types.hpp"

#include <stdexcept>

namespace cxrvlp::corpus {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + std::string(s) + "'");
}

std::string_view to_string(Finding f) {
  switch (f) {
    case Finding::atelectasis: return "atelectasis";
    case Finding::cardiomegaly: return "cardiomegaly";
    case Finding::consolidation: return "consolidation";
    case Finding::edema: return "edema";
    case Finding::lung_opacity: return "lung opacity";
    case Finding::pleural_effusion: return "pleural effusion";
    case Finding::pneumonia: return "pneumonia";
    case Finding::pneumothorax: return "pneumothorax";
  }
  return "pneumonia";
}

Finding parse_finding(std::string_view s) {
  for (Finding f : kAllFindings) {
    std::string name(to_string(f));
    std::string underscored = name;
    for (char& c : underscored) {
      if (c == ' ') c = '_';
    }
    if (s == name || s == underscored) return f;
  }
  throw std::invalid_argument("unknown finding category '" + std::string(s) + "'");
}

void Dataset::reindex() {
  report_index_.clear();
  image_index_.clear();
  image_split_.clear();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (!report_index_.emplace(reports[i].id, i).second) {
      throw std::invalid_argument("duplicate report id '" + reports[i].id + "'");
    }
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!image_index_.emplace(images[i].id, i).second) {
      throw std::invalid_argument("duplicate image id '" + images[i].id + "'");
    }
  }
  for (const auto& p : pairs) image_split_.emplace(p.image_id, p.split);
}

const ReportDocument* Dataset::find_report(std::string_view id) const {
  auto it = report_index_.find(std::string(id));
  return it == report_index_.end() ? nullptr : &reports[it->second];
}

const ImageRecord* Dataset::find_image(std::string_view id) const {
  auto it = image_index_.find(std::string(id));
  return it == image_index_.end() ? nullptr : &images[it->second];
}

std::vector<const PairedSample*> Dataset::pairs_in(Split s) const {
  std::vector<const PairedSample*> out;
  for (const auto& p : pairs) {
    if (p.split == s) out.push_back(&p);
  }
  return out;
}

std::vector<const GroundingAnnotation*> Dataset::annotations_for(std::string_view image_id) const {
  std::vector<const GroundingAnnotation*> out;
  for (const auto& a : annotations) {
    if (a.image_id == image_id) out.push_back(&a);
  }
  return out;
}

std::vector<const GroundingAnnotation*> Dataset::annotations_in(Split s) const {
  std::vector<const GroundingAnnotation*> out;
  for (const auto& a : annotations) {
    auto it = image_split_.find(a.image_id);
    if (it != image_split_.end() && it->second == s) out.push_back(&a);
  }
  return out;
}

}  // namespace cxrvlp::corpus
