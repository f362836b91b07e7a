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


#include <algorithm>
#include <cmath>
#include <numbers>

#include "cxrvlp/augment/augment.hpp"

namespace cxrvlp::augment {

using corpus::ImageRecord;

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::joint:
      return "joint";
    case Stage::image_only:
      return "image_only";
    case Stage::finetune:
      return "finetune";
  }
  return "unknown";
}

Stage parse_stage(std::string_view s) {
  if (s == "joint") return Stage::joint;
  if (s == "image_only") return Stage::image_only;
  if (s == "finetune") return Stage::finetune;
  throw AugmentError("unknown augmentation stage '" + std::string(s) + "'");
}

void AugmentParams::validate() const {
  auto fail = [&](const std::string& what) {
    throw AugmentError(std::string(to_string(stage)) + " stage: " + what);
  };
  for (double v : {shear_deg, rotation_deg, brightness, contrast, noise_std, elastic_sigma, elastic_alpha}) {
    if (!(v >= 0.0)) fail("magnitudes must be non-negative");
  }
  if (brightness > 1.0 || contrast > 1.0) fail("colour jitter must not exceed 1");
  for (double p : {flip_prob, occlusion_prob, elastic_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) fail("probabilities must lie in [0, 1]");
  }
  const bool crop = crop_scale.second > 0.0;
  const bool occlusion = occlusion_prob > 0.0;
  const bool elastic = elastic_prob > 0.0 && elastic_alpha > 0.0;
  if (crop && !(crop_scale.first > 0.0 && crop_scale.first <= crop_scale.second && crop_scale.second <= 1.0)) {
    fail("crop scale must satisfy 0 < lo <= hi <= 1");
  }
  if (occlusion && !(occlusion_scale.first > 0.0 && occlusion_scale.first <= occlusion_scale.second &&
                     occlusion_scale.second < 1.0 && occlusion_ratio.first > 0.0 &&
                     occlusion_ratio.second > 0.0)) {
    fail("occlusion scale must satisfy 0 < lo <= hi < 1 and ratios must be positive");
  }
  if (elastic && !(elastic_sigma > 0.0)) fail("elastic sigma must be positive");
  if (stage == Stage::joint && flip_prob > 0.0) {
    fail("horizontal flips are not allowed during joint training (they destroy laterality)");
  }
  if (stage != Stage::image_only && (crop || occlusion || elastic || noise_std > 0.0)) {
    fail("crop, occlusion, elastic and noise are only available for image-only pretraining");
  }
}

nlohmann::json AugmentParams::to_json() const {
  return {{"stage", std::string(to_string(stage))},
          {"shear_deg", shear_deg},
          {"rotation_deg", rotation_deg},
          {"brightness", brightness},
          {"contrast", contrast},
          {"flip_prob", flip_prob},
          {"crop_scale", {crop_scale.first, crop_scale.second}},
          {"occlusion_prob", occlusion_prob},
          {"occlusion_scale", {occlusion_scale.first, occlusion_scale.second}},
          {"occlusion_ratio", {occlusion_ratio.first, occlusion_ratio.second}},
          {"elastic_prob", elastic_prob},
          {"elastic_sigma", elastic_sigma},
          {"elastic_alpha", elastic_alpha},
          {"noise_std", noise_std}};
}

AugmentParams AugmentParams::from_json(const nlohmann::json& j) {
  AugmentParams p;
  if (j.contains("preset")) {
    const Stage s = parse_stage(j.at("preset").get<std::string>());
    p = s == Stage::joint ? joint_preset() : s == Stage::image_only ? image_only_preset() : finetune_preset();
  }
  if (j.contains("stage")) p.stage = parse_stage(j.at("stage").get<std::string>());
  auto pair_of = [&](const char* key, std::pair<double, double>& dst) {
    if (j.contains(key)) dst = {j.at(key).at(0).get<double>(), j.at(key).at(1).get<double>()};
  };
  p.shear_deg = j.value("shear_deg", p.shear_deg);
  p.rotation_deg = j.value("rotation_deg", p.rotation_deg);
  p.brightness = j.value("brightness", p.brightness);
  p.contrast = j.value("contrast", p.contrast);
  p.flip_prob = j.value("flip_prob", p.flip_prob);
  pair_of("crop_scale", p.crop_scale);
  p.occlusion_prob = j.value("occlusion_prob", p.occlusion_prob);
  pair_of("occlusion_scale", p.occlusion_scale);
  pair_of("occlusion_ratio", p.occlusion_ratio);
  p.elastic_prob = j.value("elastic_prob", p.elastic_prob);
  p.elastic_sigma = j.value("elastic_sigma", p.elastic_sigma);
  p.elastic_alpha = j.value("elastic_alpha", p.elastic_alpha);
  p.noise_std = j.value("noise_std", p.noise_std);
  p.validate();
  return p;
}

AugmentParams AugmentParams::joint_preset() {
  AugmentParams p;
  p.stage = Stage::joint;
  p.shear_deg = 15.0;
  p.rotation_deg = 30.0;
  p.brightness = 0.2;
  p.contrast = 0.2;
  return p;
}

AugmentParams AugmentParams::image_only_preset() {
  AugmentParams p;
  p.stage = Stage::image_only;
  p.shear_deg = 40.0;
  p.rotation_deg = 180.0;
  p.brightness = 0.2;
  p.contrast = 0.2;
  p.flip_prob = 0.5;
  p.crop_scale = {0.75, 1.0};
  p.occlusion_prob = 0.5;
  p.occlusion_scale = {0.15, 0.4};
  p.occlusion_ratio = {0.33, 0.3};
  p.elastic_prob = 0.4;
  p.elastic_sigma = 4.0;
  p.elastic_alpha = 34.0;
  p.noise_std = 0.05;
  return p;
}

AugmentParams AugmentParams::finetune_preset() {
  AugmentParams p;
  p.stage = Stage::finetune;
  p.shear_deg = 25.0;
  p.rotation_deg = 45.0;
  p.brightness = 0.2;
  p.contrast = 0.2;
  p.flip_prob = 0.5;
  return p;
}

AugmentParams AugmentParams::identity(Stage s) {
  AugmentParams p;
  p.stage = s;
  return p;
}

namespace {

float sample_bilinear(const ImageRecord& img, double y, double x) {
  if (y < -0.5 || x < -0.5 || y > img.height - 0.5 || x > img.width - 0.5) return 0.0f;
  const double yc = std::clamp(y, 0.0, img.height - 1.0);
  const double xc = std::clamp(x, 0.0, img.width - 1.0);
  const int y0 = static_cast<int>(std::floor(yc));
  const int x0 = static_cast<int>(std::floor(xc));
  const int y1 = std::min(y0 + 1, img.height - 1);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const double fy = yc - y0;
  const double fx = xc - x0;
  return static_cast<float>((1 - fy) * ((1 - fx) * img.at(y0, x0) + fx * img.at(y0, x1)) +
                            fy * ((1 - fx) * img.at(y1, x0) + fx * img.at(y1, x1)));
}

// Rotation by `angle` composed with horizontal shear by `shear`, about the
// image centre; sampled through the inverse map.
ImageRecord affine(const ImageRecord& img, double angle_deg, double shear_deg) {
  constexpr double kDeg = std::numbers::pi / 180.0;
  const double a = angle_deg * kDeg;
  const double t = std::tan(shear_deg * kDeg);
  // Forward M = R(a) * [[1, t], [0, 1]] acting on (x, y).
  const double m00 = std::cos(a), m01 = std::cos(a) * t - std::sin(a);
  const double m10 = std::sin(a), m11 = std::sin(a) * t + std::cos(a);
  const double det = m00 * m11 - m01 * m10;
  const double i00 = m11 / det, i01 = -m01 / det, i10 = -m10 / det, i11 = m00 / det;
  const double cx = (img.width - 1) / 2.0;
  const double cy = (img.height - 1) / 2.0;
  ImageRecord out = img;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      out.at(y, x) = sample_bilinear(img, cy + i10 * dx + i11 * dy, cx + i00 * dx + i01 * dy);
    }
  }
  return out;
}

ImageRecord resized_crop(const ImageRecord& img, std::pair<double, double> scale, Rng& rng) {
  const double area = static_cast<double>(img.height) * img.width;
  int ch = img.height, cw = img.width;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(scale.first, scale.second);
    const double log_r = rng.uniform(std::log(3.0 / 4.0), std::log(4.0 / 3.0));
    const double r = std::exp(log_r);
    const int w = static_cast<int>(std::lround(std::sqrt(target * r)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / r)));
    if (w > 0 && h > 0 && w <= img.width && h <= img.height) {
      ch = h;
      cw = w;
      break;
    }
  }
  const int oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height - ch + 1)));
  const int ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width - cw + 1)));
  ImageRecord out = img;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double sy = oy + (y + 0.5) * ch / img.height - 0.5;
      const double sx = ox + (x + 0.5) * cw / img.width - 0.5;
      out.at(y, x) = sample_bilinear(img, sy, sx);
    }
  }
  return out;
}

void occlude(ImageRecord& img, const AugmentParams& p, Rng& rng) {
  const double area = static_cast<double>(img.height) * img.width;
  const double lo = std::log(std::min(p.occlusion_ratio.first, p.occlusion_ratio.second));
  const double hi = std::log(std::max(p.occlusion_ratio.first, p.occlusion_ratio.second));
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(p.occlusion_scale.first, p.occlusion_scale.second);
    const double r = std::exp(rng.uniform(lo, hi));
    const int h = static_cast<int>(std::lround(std::sqrt(target * r)));
    const int w = static_cast<int>(std::lround(std::sqrt(target / r)));
    if (h < 1 || w < 1 || h >= img.height || w >= img.width) continue;
    const int oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height - h + 1)));
    const int ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width - w + 1)));
    for (int y = oy; y < oy + h; ++y) {
      for (int x = ox; x < ox + w; ++x) img.at(y, x) = 0.0f;
    }
    return;
  }
}

std::vector<double> gaussian_blur(const std::vector<double>& f, int rows, int cols, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double s = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    s += k[static_cast<std::size_t>(i + radius)];
  }
  for (double& v : k) v /= s;
  auto idx = [&](int y, int x) { return static_cast<std::size_t>(y) * cols + x; };
  std::vector<double> tmp(f.size(), 0.0), out(f.size(), 0.0);
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = std::clamp(x + i, 0, cols - 1);
        acc += k[static_cast<std::size_t>(i + radius)] * f[idx(y, xx)];
      }
      tmp[idx(y, x)] = acc;
    }
  }
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, rows - 1);
        acc += k[static_cast<std::size_t>(i + radius)] * tmp[idx(yy, x)];
      }
      out[idx(y, x)] = acc;
    }
  }
  return out;
}

// Displacement fields are blurred uniform noise scaled to alpha / 2 pixels,
// the pixel-space equivalent of a normalised-coordinate displacement alpha / size.
ImageRecord elastic(const ImageRecord& img, double sigma, double alpha, Rng& rng) {
  const std::size_t n = img.pixels.size();
  std::vector<double> dx(n), dy(n);
  for (auto& v : dx) v = rng.uniform(-1.0, 1.0);
  for (auto& v : dy) v = rng.uniform(-1.0, 1.0);
  dx = gaussian_blur(dx, img.height, img.width, sigma);
  dy = gaussian_blur(dy, img.height, img.width, sigma);
  ImageRecord out = img;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
      out.at(y, x) = sample_bilinear(img, y + 0.5 * alpha * dy[i], x + 0.5 * alpha * dx[i]);
    }
  }
  return out;
}

}  // namespace

ImageRecord image_augment(const ImageRecord& img, const AugmentParams& p, Rng& rng) {
  p.validate();
  ImageRecord out = img;
  if (p.shear_deg > 0.0 || p.rotation_deg > 0.0) {
    const double shear = p.shear_deg > 0.0 ? rng.uniform(-p.shear_deg, p.shear_deg) : 0.0;
    const double angle = p.rotation_deg > 0.0 ? rng.uniform(-p.rotation_deg, p.rotation_deg) : 0.0;
    out = affine(out, angle, shear);
  }
  if (p.brightness > 0.0) {
    const auto f = static_cast<float>(rng.uniform(1.0 - p.brightness, 1.0 + p.brightness));
    for (float& v : out.pixels) v = std::clamp(v * f, 0.0f, 1.0f);
  }
  if (p.contrast > 0.0) {
    const auto f = static_cast<float>(rng.uniform(1.0 - p.contrast, 1.0 + p.contrast));
    double mean = 0.0;
    for (float v : out.pixels) mean += v;
    mean /= static_cast<double>(out.pixels.size());
    const auto m = static_cast<float>(mean);
    for (float& v : out.pixels) v = std::clamp(m + f * (v - m), 0.0f, 1.0f);
  }
  if (p.flip_prob > 0.0 && rng.bernoulli(p.flip_prob)) {
    for (int y = 0; y < out.height; ++y) {
      std::reverse(out.pixels.begin() + static_cast<std::ptrdiff_t>(y) * out.width,
                   out.pixels.begin() + static_cast<std::ptrdiff_t>(y + 1) * out.width);
    }
  }
  if (p.crop_scale.second > 0.0) out = resized_crop(out, p.crop_scale, rng);
  if (p.occlusion_prob > 0.0 && rng.bernoulli(p.occlusion_prob)) occlude(out, p, rng);
  if (p.elastic_prob > 0.0 && p.elastic_alpha > 0.0 && rng.bernoulli(p.elastic_prob)) {
    out = elastic(out, p.elastic_sigma, p.elastic_alpha, rng);
  }
  if (p.noise_std > 0.0) {
    for (float& v : out.pixels) v += static_cast<float>(p.noise_std * rng.normal());
  }
  for (float& v : out.pixels) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

}  // namespace cxrvlp::augment
