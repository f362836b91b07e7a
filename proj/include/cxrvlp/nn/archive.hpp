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

/// @file archive.hpp
/// @brief Binary weight archive: magic, JSON header, raw float32 payload.
///
/// Layout (little-endian):
///   8 bytes   "CXRVLPW1"
///   8 bytes   header length L (uint64)
///   L bytes   UTF-8 JSON header; header["tensors"] = [{name, rows, cols}, ...]
///   payload   float32 values of each tensor in header order, row-major

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "cxrvlp/nn/layers.hpp"

namespace cxrvlp::nn {

struct ArchiveTensor {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<float> values;
};

struct Archive {
  nlohmann::json meta;  // header minus the "tensors" table
  std::map<std::string, ArchiveTensor> tensors;
};

void write_archive(const std::filesystem::path& path, const nlohmann::json& meta,
                   const ParameterList& params);
Archive read_archive(const std::filesystem::path& path);

/// Copies archive values into matching parameters. Every parameter must be
/// present in the archive with the same shape.
void load_parameters(const Archive& archive, const ParameterList& params);

}  // namespace cxrvlp::nn
