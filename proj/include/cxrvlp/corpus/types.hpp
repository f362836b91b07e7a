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

/// @file types.hpp
/// @brief Paired image/report data model.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cxrvlp::corpus {

/// A report reduced to its two sections, each an ordered list of sentences.
struct ReportDocument {
  std::string id;
  std::vector<std::string> findings;
  std::vector<std::string> impression;  // never empty in a loaded dataset

  bool operator==(const ReportDocument&) const = default;
};

struct ImageSize {
  int height = 0;
  int width = 0;
  bool operator==(const ImageSize&) const = default;
};

/// Grayscale image with intensities in [0, 1], stored row-major.
struct ImageRecord {
  std::string id;
  int height = 0;
  int width = 0;
  std::vector<float> pixels;
  ImageSize source_size;  // size before centre-crop/resize; boxes live in this frame

  float at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  float& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const ImageRecord&) const = default;
};

enum class Split { train, val, test };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct PairedSample {
  std::string image_id;
  std::string report_id;
  Split split = Split::train;
  bool operator==(const PairedSample&) const = default;
};

enum class Finding {
  atelectasis,
  cardiomegaly,
  consolidation,
  edema,
  lung_opacity,
  pleural_effusion,
  pneumonia,
  pneumothorax,
};

inline constexpr std::array<Finding, 8> kAllFindings = {
    Finding::atelectasis,  Finding::cardiomegaly,     Finding::consolidation,
    Finding::edema,        Finding::lung_opacity,     Finding::pleural_effusion,
    Finding::pneumonia,    Finding::pneumothorax};

/// Display name, e.g. "pleural effusion".
std::string_view to_string(Finding f);
/// Accepts the display name or its underscore form; throws std::invalid_argument.
Finding parse_finding(std::string_view s);

/// Axis-aligned box in source pixels, origin top-left.
struct Box {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  bool operator==(const Box&) const = default;
};

struct GroundingAnnotation {
  std::string image_id;
  std::string phrase;
  Finding category = Finding::pneumonia;
  std::vector<Box> boxes;
  bool operator==(const GroundingAnnotation&) const = default;
};

/// Paired corpus. Immutable after construction by the loader or generator;
/// the id indices are built by reindex().
class Dataset {
 public:
  std::vector<ReportDocument> reports;
  std::vector<ImageRecord> images;
  std::vector<PairedSample> pairs;
  std::vector<GroundingAnnotation> annotations;

  /// Rebuilds id lookups. Throws std::invalid_argument on duplicate ids.
  void reindex();

  const ReportDocument* find_report(std::string_view id) const;
  const ImageRecord* find_image(std::string_view id) const;

  std::vector<const PairedSample*> pairs_in(Split s) const;
  std::vector<const GroundingAnnotation*> annotations_for(std::string_view image_id) const;

  /// Annotations whose image belongs to the given split.
  std::vector<const GroundingAnnotation*> annotations_in(Split s) const;

 private:
  std::unordered_map<std::string, std::size_t> report_index_;
  std::unordered_map<std::string, std::size_t> image_index_;
  std::unordered_map<std::string, Split> image_split_;
};

}  // namespace cxrvlp::corpus
