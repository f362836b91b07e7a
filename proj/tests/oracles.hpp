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


// Independent reference implementations shared by the unit tests and the
// acceptance suite. Everything here is written as plain loops.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cxrvlp/metrics/metrics.hpp"
#include "cxrvlp/text/vocab.hpp"

namespace cxrvlp::oracle {

using Matrix = Eigen::MatrixXd;
using metrics::CellMask;
using metrics::SimilarityMap;
using text::Vocabulary;

// Loop-based reference for one direction of the contrastive loss.
inline double nce_direction(const Matrix& a, const Matrix& b, double tau) {
  const auto n = a.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> s(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
      double dot = 0.0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) dot += a(i, k) * b(j, k);
      s[static_cast<std::size_t>(j)] = dot / tau;
    }
    const double mx = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (double v : s) z += std::exp(v - mx);
    total += -(s[static_cast<std::size_t>(i)] - mx - std::log(z));
  }
  return total / static_cast<double>(n);
}

inline double oracle_pair(const Matrix& a, const Matrix& b, double tau) {
  return nce_direction(a, b, tau) + nce_direction(b, a, tau);
}

inline double oracle_simclr(const Matrix& z, double tau) {
  const auto n = z.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double denom = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) denom += std::exp(z.row(i).dot(z.row(j)) / tau);
    }
    total += -std::log(std::exp(z.row(i).dot(z.row(i ^ 1)) / tau) / denom);
  }
  return total / static_cast<double>(n);
}

inline double oracle_mlm(const Matrix& logits, const std::vector<int>& t) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double z = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) z += std::exp(logits(i, j));
    total += std::log(z) - logits(i, t[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(logits.rows());
}

inline double rel_err(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1e-12, a.norm() + b.norm());
}

inline Matrix fd(const Matrix& x, const std::function<double(const Matrix&)>& f, double h = 1e-4) {
  Matrix g(x.rows(), x.cols());
  Matrix y = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      y(i, j) = x(i, j) + h;
      const double up = f(y);
      y(i, j) = x(i, j) - h;
      const double down = f(y);
      y(i, j) = x(i, j);
      g(i, j) = (up - down) / (2 * h);
    }
  }
  return g;
}

// Cell-by-cell reference implementations.
struct GroundingOracle {
  static double cnr(const SimilarityMap& m, const CellMask& a) {
    std::vector<double> in, out;
    for (int y = 0; y < m.height; ++y) {
      for (int x = 0; x < m.width; ++x) (a.at(y, x) ? in : out).push_back(m.at(y, x));
    }
    auto mean = [](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    auto var = [&](const std::vector<double>& v) {
      const double mu = mean(v);
      double s = 0;
      for (double x : v) s += (x - mu) * (x - mu);
      return s / static_cast<double>(v.size());
    };
    return std::fabs(mean(in) - mean(out)) / std::sqrt(var(in) + var(out) + 1e-12);
  }
  static double iou(const SimilarityMap& m, const CellMask& a, double t) {
    int inter = 0, uni = 0;
    for (int y = 0; y < m.height; ++y) {
      for (int x = 0; x < m.width; ++x) {
        const bool p = m.at(y, x) > t;
        inter += p && a.at(y, x);
        uni += p || a.at(y, x);
      }
    }
    return uni ? static_cast<double>(inter) / uni : 0.0;
  }
  static double miou(const SimilarityMap& m, const CellMask& a) {
    return (iou(m, a, 0.1) + iou(m, a, 0.2) + iou(m, a, 0.3) + iou(m, a, 0.4) + iou(m, a, 0.5)) / 5.0;
  }
  static double dice(const SimilarityMap& m, const CellMask& a) {
    int inter = 0, p = 0, t = 0;
    for (int y = 0; y < m.height; ++y) {
      for (int x = 0; x < m.width; ++x) {
        const bool pr = (m.at(y, x) + 1) / 2 > 0.6;
        inter += pr && a.at(y, x);
        p += pr;
        t += a.at(y, x);
      }
    }
    return p + t ? 2.0 * inter / (p + t) : 0.0;
  }
};

// Exhaustive reference: at every offset try every prefix length from the
// longest down and take the first one present.
inline std::vector<int> greedy_reference(const std::string& w, const Vocabulary& v) {
  std::vector<int> out;
  std::size_t i = 0;
  while (i < w.size()) {
    int found = -1;
    std::size_t len = 0;
    for (std::size_t l = w.size() - i; l >= 1; --l) {
      const std::string piece = (i == 0 ? "" : "##") + w.substr(i, l);
      if (v.id(piece) >= 0) {
        found = v.id(piece);
        len = l;
        break;
      }
    }
    if (found < 0) {
      out.push_back(Vocabulary::kUnk);
      ++i;
    } else {
      out.push_back(found);
      i += len;
    }
  }
  return out;
}

}  // namespace cxrvlp::oracle
