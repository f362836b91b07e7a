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

#include "cxrvlp/corpus/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <regex>
#include <stdexcept>
#include <string>

namespace cxrvlp::corpus {

namespace {

[[noreturn]] void npy_error(const std::filesystem::path& p, const std::string& what) {
  throw std::runtime_error(p.string() + ": " + what);
}

}  // namespace

Array2D read_npy(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) npy_error(path, "cannot open");
  char magic[6];
  is.read(magic, 6);
  if (!is || std::memcmp(magic, "\x93NUMPY", 6) != 0) npy_error(path, "not an NPY file");
  unsigned char ver[2];
  is.read(reinterpret_cast<char*>(ver), 2);
  std::uint32_t header_len = 0;
  if (ver[0] == 1) {
    std::uint16_t l16 = 0;
    is.read(reinterpret_cast<char*>(&l16), 2);
    header_len = l16;
  } else {
    is.read(reinterpret_cast<char*>(&header_len), 4);
  }
  std::string header(header_len, '\0');
  is.read(header.data(), header_len);
  if (!is) npy_error(path, "truncated header");

  std::smatch m;
  if (!std::regex_search(header, m, std::regex(R"('descr'\s*:\s*'([<>|=]?[a-z]\d+)')"))) {
    npy_error(path, "missing descr");
  }
  const std::string descr = m[1];
  if (std::regex_search(header, std::regex(R"('fortran_order'\s*:\s*True)"))) {
    npy_error(path, "fortran-ordered arrays are not supported");
  }
  if (!std::regex_search(header, m, std::regex(R"('shape'\s*:\s*\((\d+)\s*,\s*(\d+)\s*,?\s*\))"))) {
    npy_error(path, "expected a 2-D shape");
  }
  Array2D a;
  a.rows = std::stoi(m[1]);
  a.cols = std::stoi(m[2]);
  const std::size_t n = static_cast<std::size_t>(a.rows) * a.cols;
  a.values.resize(n);
  if (descr == "<f4" || descr == "f4") {
    is.read(reinterpret_cast<char*>(a.values.data()), static_cast<std::streamsize>(n * 4));
  } else if (descr == "<f8" || descr == "f8") {
    std::vector<double> tmp(n);
    is.read(reinterpret_cast<char*>(tmp.data()), static_cast<std::streamsize>(n * 8));
    for (std::size_t i = 0; i < n; ++i) a.values[i] = static_cast<float>(tmp[i]);
  } else if (descr == "|u1" || descr == "u1") {
    std::vector<std::uint8_t> tmp(n);
    is.read(reinterpret_cast<char*>(tmp.data()), static_cast<std::streamsize>(n));
    for (std::size_t i = 0; i < n; ++i) a.values[i] = static_cast<float>(tmp[i]) / 255.0f;
  } else {
    npy_error(path, "unsupported dtype " + descr);
  }
  if (!is) npy_error(path, "truncated payload");
  return a;
}

void write_npy(const std::filesystem::path& path, const Array2D& a) {
  std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" +
                       std::to_string(a.rows) + ", " + std::to_string(a.cols) + "), }";
  // Pad so that magic + version + length + header is a multiple of 64.
  const std::size_t prefix = 10;
  std::size_t total = prefix + header.size() + 1;
  header.append((64 - total % 64) % 64, ' ');
  header.push_back('\n');
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) npy_error(path, "cannot open for writing");
  os.write("\x93NUMPY", 6);
  const char ver[2] = {1, 0};
  os.write(ver, 2);
  const std::uint16_t len = static_cast<std::uint16_t>(header.size());
  os.write(reinterpret_cast<const char*>(&len), 2);
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  os.write(reinterpret_cast<const char*>(a.values.data()),
           static_cast<std::streamsize>(a.values.size() * sizeof(float)));
  if (!os) npy_error(path, "write failed");
}

Array2D read_png_gray(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw std::runtime_error(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw std::runtime_error(path.string() + ": " + msg);
  }
  Array2D a;
  a.rows = static_cast<int>(image.height);
  a.cols = static_cast<int>(image.width);
  a.values.resize(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) a.values[i] = static_cast<float>(buf[i]) / 255.0f;
  return a;
}

namespace {

void write_png(const std::filesystem::path& path, int rows, int cols, png_uint_32 format,
               const std::vector<std::uint8_t>& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(cols);
  image.height = static_cast<png_uint_32>(rows);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, data.data(), 0, nullptr)) {
    throw std::runtime_error(path.string() + ": " + image.message);
  }
}

}  // namespace

void write_png_gray(const std::filesystem::path& path, const Array2D& a) {
  std::vector<std::uint8_t> buf(a.values.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    buf[i] = static_cast<std::uint8_t>(std::lround(std::clamp(a.values[i], 0.0f, 1.0f) * 255.0f));
  }
  write_png(path, a.rows, a.cols, PNG_FORMAT_GRAY, buf);
}

void write_png_rgb(const std::filesystem::path& path, int rows, int cols,
                   const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(rows) * cols * 3) {
    throw std::invalid_argument("write_png_rgb: buffer size mismatch");
  }
  write_png(path, rows, cols, PNG_FORMAT_RGB, rgb);
}

ImageRecord centre_crop_resize(const ImageRecord& img, int side) {
  if (side <= 0) throw std::invalid_argument("centre_crop_resize: side must be positive");
  const int crop = std::min(img.height, img.width);
  const int oy = (img.height - crop) / 2;
  const int ox = (img.width - crop) / 2;
  ImageRecord out;
  out.id = img.id;
  out.height = side;
  out.width = side;
  out.source_size = img.source_size;
  out.pixels.resize(static_cast<std::size_t>(side) * side);
  if (crop == side) {
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) out.at(y, x) = img.at(oy + y, ox + x);
    }
    return out;
  }
  const double scale = static_cast<double>(crop) / side;
  for (int y = 0; y < side; ++y) {
    const double sy = std::clamp((y + 0.5) * scale - 0.5, 0.0, crop - 1.0);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, crop - 1);
    const double fy = sy - y0;
    for (int x = 0; x < side; ++x) {
      const double sx = std::clamp((x + 0.5) * scale - 0.5, 0.0, crop - 1.0);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, crop - 1);
      const double fx = sx - x0;
      const double v = (1 - fy) * ((1 - fx) * img.at(oy + y0, ox + x0) + fx * img.at(oy + y0, ox + x1)) +
                       fy * ((1 - fx) * img.at(oy + y1, ox + x0) + fx * img.at(oy + y1, ox + x1));
      out.at(y, x) = static_cast<float>(v);
    }
  }
  return out;
}

Box map_box_to_processed(const Box& b, ImageSize source, int side) {
  const int crop = std::min(source.height, source.width);
  const int oy = (source.height - crop) / 2;
  const int ox = (source.width - crop) / 2;
  const double s = static_cast<double>(side) / crop;
  const double x0 = std::clamp((b.x - ox) * s, 0.0, static_cast<double>(side));
  const double y0 = std::clamp((b.y - oy) * s, 0.0, static_cast<double>(side));
  const double x1 = std::clamp((b.x + b.w - ox) * s, 0.0, static_cast<double>(side));
  const double y1 = std::clamp((b.y + b.h - oy) * s, 0.0, static_cast<double>(side));
  Box out;
  out.x = static_cast<int>(std::floor(x0));
  out.y = static_cast<int>(std::floor(y0));
  out.w = static_cast<int>(std::ceil(x1)) - out.x;
  out.h = static_cast<int>(std::ceil(y1)) - out.y;
  return out;
}

}  // namespace cxrvlp::corpus
