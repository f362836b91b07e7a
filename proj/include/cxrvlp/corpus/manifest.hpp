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

/// @file manifest.hpp
/// @brief Dataset directory reader/writer.
///
/// A manifest is a directory holding:
///   reports.jsonl      {"id", "findings": [str], "impression": [str]}
///   pairs.jsonl        {"image_id", "report_id", "split": "train"|"val"|"test"}
///   annotations.jsonl  {"image_id", "phrase", "category", "boxes": [[x,y,w,h], ...]}  (optional)
///   images/<id>.npy or images/<id>.png
/// Coordinates are integer source pixels with the origin at the top-left.

#pragma once

#include <filesystem>
#include <stdexcept>

#include "cxrvlp/corpus/types.hpp"

namespace cxrvlp::corpus {

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoadOptions {
  /// When positive, every image is centre-cropped and resized to side x side.
  /// Otherwise non-square images are centre-cropped to their shorter side.
  int image_side = 0;
};

/// Loads and cross-references a manifest directory. Throws ManifestError for
/// a missing file, a malformed record (message carries file:line:column),
/// duplicate ids, dangling id references, or ids shared across splits.
Dataset load_manifest(const std::filesystem::path& dir, const LoadOptions& opts = {});

/// Writes the dataset in manifest layout; images are stored as float32 NPY.
void write_manifest(const Dataset& ds, const std::filesystem::path& dir);

}  // namespace cxrvlp::corpus
