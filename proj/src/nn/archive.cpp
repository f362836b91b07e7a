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

#include "cxrvlp/nn/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cxrvlp::nn {

static_assert(std::endian::native == std::endian::little,
              "archive payload is written in host order and assumes little-endian");

namespace {
constexpr char kMagic[8] = {'C', 'X', 'R', 'V', 'L', 'P', 'W', '1'};
}

void write_archive(const std::filesystem::path& path, const nlohmann::json& meta,
                   const ParameterList& params) {
  nlohmann::json header = meta;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& [name, t] : params) {
    table.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}});
  }
  header["tensors"] = std::move(table);
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  os.write(reinterpret_cast<const char*>(&len), sizeof len);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : params) {
    const auto v = t.values();
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open archive " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw std::runtime_error(path.string() + ": not a weight archive (bad magic)");
  }
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!is || len > (1ULL << 30)) throw std::runtime_error(path.string() + ": corrupt header length");
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error(path.string() + ": truncated header");

  Archive a;
  nlohmann::json header = nlohmann::json::parse(text);
  for (const auto& entry : header.at("tensors")) {
    ArchiveTensor t;
    t.rows = entry.at("rows").get<std::int64_t>();
    t.cols = entry.at("cols").get<std::int64_t>();
    t.values.resize(static_cast<std::size_t>(t.rows * t.cols));
    is.read(reinterpret_cast<char*>(t.values.data()),
            static_cast<std::streamsize>(t.values.size() * sizeof(float)));
    if (!is) throw std::runtime_error(path.string() + ": truncated payload");
    a.tensors.emplace(entry.at("name").get<std::string>(), std::move(t));
  }
  header.erase("tensors");
  a.meta = std::move(header);
  return a;
}

void load_parameters(const Archive& archive, const ParameterList& params) {
  for (const auto& [name, t] : params) {
    auto it = archive.tensors.find(name);
    if (it == archive.tensors.end()) {
      throw std::runtime_error("archive is missing parameter '" + name + "'");
    }
    if (it->second.rows != t.rows() || it->second.cols != t.cols()) {
      throw std::runtime_error("archive parameter '" + name + "' has shape " +
                               std::to_string(it->second.rows) + "x" +
                               std::to_string(it->second.cols) + ", model expects " +
                               std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
    }
    Tensor target = t;
    auto dst = target.mutable_values();
    std::copy(it->second.values.begin(), it->second.values.end(), dst.begin());
  }
}

}  // namespace cxrvlp::nn
