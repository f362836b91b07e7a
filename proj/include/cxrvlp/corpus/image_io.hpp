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

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cxrvlp/corpus/types.hpp"

namespace cxrvlp::corpus {

/// 2-D float array read from or written to an NPY file.
struct Array2D {
  int rows = 0;
  int cols = 0;
  std::vector<float> values;
};

/// Reads a C-ordered 2-D NPY array of dtype <f4, <f8 or |u1 (u1 is scaled by 1/255).
Array2D read_npy(const std::filesystem::path& path);
/// Writes a 2-D little-endian float32 NPY array (format version 1.0).
void write_npy(const std::filesystem::path& path, const Array2D& a);

/// Reads an 8-bit PNG as grayscale in [0, 1]; colour inputs are converted.
Array2D read_png_gray(const std::filesystem::path& path);
void write_png_gray(const std::filesystem::path& path, const Array2D& a);
/// Writes an interleaved 8-bit RGB image (rows x cols x 3).
void write_png_rgb(const std::filesystem::path& path, int rows, int cols,
                   const std::vector<std::uint8_t>& rgb);

/// Centre crop to a square of the shorter side, then bilinear resize to side x side.
ImageRecord centre_crop_resize(const ImageRecord& img, int side);

/// Maps a box from the source frame into the frame produced by centre_crop_resize.
Box map_box_to_processed(const Box& b, ImageSize source, int side);

}  // namespace cxrvlp::corpus
