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

#include "cxrvlp/nn/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace cxrvlp::nn {

namespace {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;
using RowVec = Eigen::Matrix<float, 1, Eigen::Dynamic>;

CMapRM cmap(const detail::Node& n) { return CMapRM(n.value.data(), n.rows, n.cols); }
CMapRM cmap(const Buffer& v, std::int64_t r, std::int64_t c) {
  return CMapRM(v.data(), r, c);
}
MapRM gmap(detail::Node& n) { return MapRM(n.grad_buffer(), n.rows, n.cols); }

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                              "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                              "x" + std::to_string(b.cols()));
}

constexpr float kSqrt2OverPi = 0.7978845608028654f;

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Buffer out(static_cast<std::size_t>(a.rows() * b.cols()));
  MapRM(out.data(), a.rows(), b.cols()).noalias() = cmap(*a.node()) * cmap(*b.node());
  return Tensor::make_result(a.rows(), b.cols(), std::move(out), {a, b}, [](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    CMapRM g(self.grad.data(), self.rows, self.cols);
    if (pa.requires_grad) gmap(pa).noalias() += g * cmap(pb).transpose();
    if (pb.requires_grad) gmap(pb).noalias() += cmap(pa).transpose() * g;
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.cols() != w.rows()) shape_error("linear", x, w);
  const bool has_bias = b.defined();
  if (has_bias && (b.rows() != 1 || b.cols() != w.cols())) shape_error("linear(bias)", w, b);
  Buffer out(static_cast<std::size_t>(x.rows() * w.cols()));
  MapRM o(out.data(), x.rows(), w.cols());
  o.noalias() = cmap(*x.node()) * cmap(*w.node());
  if (has_bias) o.rowwise() += cmap(*b.node()).row(0);
  std::vector<Tensor> inputs{x, w};
  if (has_bias) inputs.push_back(b);
  return Tensor::make_result(
      x.rows(), w.cols(), std::move(out), std::move(inputs), [has_bias](detail::Node& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        CMapRM g(self.grad.data(), self.rows, self.cols);
        if (px.requires_grad) gmap(px).noalias() += g * cmap(pw).transpose();
        if (pw.requires_grad) gmap(pw).noalias() += cmap(px).transpose() * g;
        if (has_bias && self.parents[2]->requires_grad) {
          gmap(*self.parents[2]).row(0) += g.colwise().sum();
        }
      });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("add", a, b);
  Buffer out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return Tensor::make_result(a.rows(), a.cols(), std::move(out), {a, b}, [](detail::Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      float* g = p->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor scale(const Tensor& a, float s) {
  Buffer out(a.values().begin(), a.values().end());
  for (float& v : out) v *= s;
  return Tensor::make_result(a.rows(), a.cols(), std::move(out), {a}, [s](detail::Node& self) {
    float* g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += s * self.grad[i];
  });
}

Tensor gelu(const Tensor& x) {
  const auto xv = x.values();
  Buffer out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const float v = xv[i];
    out[i] = 0.5f * v * (1.0f + std::tanh(kSqrt2OverPi * (v + 0.044715f * v * v * v)));
  }
  return Tensor::make_result(x.rows(), x.cols(), std::move(out), {x}, [](detail::Node& self) {
    auto& p = *self.parents[0];
    float* g = p.grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const float v = p.value[i];
      const float inner = kSqrt2OverPi * (v + 0.044715f * v * v * v);
      const float t = std::tanh(inner);
      const float dinner = kSqrt2OverPi * (1.0f + 3.0f * 0.044715f * v * v);
      const float d = 0.5f * (1.0f + t) + 0.5f * v * (1.0f - t * t) * dinner;
      g[i] += d * self.grad[i];
    }
  });
}

Tensor relu(const Tensor& x) {
  const auto xv = x.values();
  Buffer out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::max(0.0f, xv[i]);
  return Tensor::make_result(x.rows(), x.cols(), std::move(out), {x}, [](detail::Node& self) {
    auto& p = *self.parents[0];
    float* g = p.grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (p.value[i] > 0.0f) g[i] += self.grad[i];
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  const std::int64_t n = x.rows();
  const std::int64_t d = x.cols();
  if (gamma.size() != d || beta.size() != d) shape_error("layer_norm", x, gamma);
  Buffer out(static_cast<std::size_t>(n * d));
  Buffer xhat(out.size());
  Buffer rstd(static_cast<std::size_t>(n));
  const float* xv = x.values().data();
  const float* gv = gamma.values().data();
  const float* bv = beta.values().data();
  for (std::int64_t r = 0; r < n; ++r) {
    const float* row = xv + r * d;
    double mean = 0.0;
    for (std::int64_t c = 0; c < d; ++c) mean += row[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::int64_t c = 0; c < d; ++c) {
      const double t = row[c] - mean;
      var += t * t;
    }
    var /= static_cast<double>(d);
    const float rs = static_cast<float>(1.0 / std::sqrt(var + eps));
    rstd[r] = rs;
    for (std::int64_t c = 0; c < d; ++c) {
      const float h = static_cast<float>(row[c] - mean) * rs;
      xhat[r * d + c] = h;
      out[r * d + c] = h * gv[c] + bv[c];
    }
  }
  return Tensor::make_result(
      n, d, std::move(out), {x, gamma, beta},
      [xhat = std::move(xhat), rstd = std::move(rstd), n, d](detail::Node& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        const float* g = self.grad.data();
        if (pg.requires_grad || pb.requires_grad) {
          float* gg = pg.requires_grad ? pg.grad_buffer() : nullptr;
          float* gb = pb.requires_grad ? pb.grad_buffer() : nullptr;
          for (std::int64_t r = 0; r < n; ++r) {
            for (std::int64_t c = 0; c < d; ++c) {
              if (gg) gg[c] += g[r * d + c] * xhat[r * d + c];
              if (gb) gb[c] += g[r * d + c];
            }
          }
        }
        if (!px.requires_grad) return;
        float* gx = px.grad_buffer();
        const float* gamma_v = pg.value.data();
        for (std::int64_t r = 0; r < n; ++r) {
          double mean_dh = 0.0;
          double mean_dh_h = 0.0;
          for (std::int64_t c = 0; c < d; ++c) {
            const double dh = g[r * d + c] * gamma_v[c];
            mean_dh += dh;
            mean_dh_h += dh * xhat[r * d + c];
          }
          mean_dh /= static_cast<double>(d);
          mean_dh_h /= static_cast<double>(d);
          for (std::int64_t c = 0; c < d; ++c) {
            const double dh = g[r * d + c] * gamma_v[c];
            gx[r * d + c] +=
                static_cast<float>(rstd[r] * (dh - mean_dh - xhat[r * d + c] * mean_dh_h));
          }
        }
      });
}

Tensor dropout(const Tensor& x, float p, Rng& rng) {
  if (p <= 0.0f) return x;
  if (p >= 1.0f) throw std::invalid_argument("dropout: rate must be < 1");
  const auto xv = x.values();
  Buffer mask(xv.size());
  Buffer out(xv.size());
  const float keep_scale = 1.0f / (1.0f - p);
  for (std::size_t i = 0; i < xv.size(); ++i) {
    mask[i] = rng.uniform() < p ? 0.0f : keep_scale;
    out[i] = xv[i] * mask[i];
  }
  return Tensor::make_result(x.rows(), x.cols(), std::move(out), {x},
                             [mask = std::move(mask)](detail::Node& self) {
                               float* g = self.parents[0]->grad_buffer();
                               for (std::size_t i = 0; i < mask.size(); ++i) {
                                 g[i] += mask[i] * self.grad[i];
                               }
                             });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  const std::int64_t d = table.cols();
  const std::int64_t n = static_cast<std::int64_t>(ids.size());
  Buffer out(static_cast<std::size_t>(n * d));
  const float* tv = table.values().data();
  for (std::int64_t r = 0; r < n; ++r) {
    if (ids[r] < 0 || ids[r] >= table.rows()) {
      throw std::out_of_range("embedding: id " + std::to_string(ids[r]) + " out of range");
    }
    std::memcpy(out.data() + r * d, tv + static_cast<std::int64_t>(ids[r]) * d,
                sizeof(float) * static_cast<std::size_t>(d));
  }
  std::vector<int> idcopy(ids.begin(), ids.end());
  return Tensor::make_result(n, d, std::move(out), {table},
                             [idcopy = std::move(idcopy), d](detail::Node& self) {
                               float* g = self.parents[0]->grad_buffer();
                               for (std::size_t r = 0; r < idcopy.size(); ++r) {
                                 float* dst = g + static_cast<std::int64_t>(idcopy[r]) * d;
                                 const float* src = self.grad.data() + r * d;
                                 for (std::int64_t c = 0; c < d; ++c) dst[c] += src[c];
                               }
                             });
}

Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> rows) {
  const std::int64_t d = x.cols();
  Buffer out(rows.size() * static_cast<std::size_t>(d));
  const float* xv = x.values().data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= x.rows()) throw std::out_of_range("gather_rows: row index");
    std::memcpy(out.data() + r * d, xv + rows[r] * d, sizeof(float) * static_cast<std::size_t>(d));
  }
  std::vector<std::int64_t> idx(rows.begin(), rows.end());
  return Tensor::make_result(static_cast<std::int64_t>(rows.size()), d, std::move(out), {x},
                             [idx = std::move(idx), d](detail::Node& self) {
                               float* g = self.parents[0]->grad_buffer();
                               for (std::size_t r = 0; r < idx.size(); ++r) {
                                 float* dst = g + idx[r] * d;
                                 const float* src = self.grad.data() + r * d;
                                 for (std::int64_t c = 0; c < d; ++c) dst[c] += src[c];
                               }
                             });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const std::int64_t d = parts.front().cols();
  std::int64_t n = 0;
  for (const auto& p : parts) {
    if (p.cols() != d) shape_error("concat_rows", parts.front(), p);
    n += p.rows();
  }
  Buffer out;
  out.reserve(static_cast<std::size_t>(n * d));
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return Tensor::make_result(n, d, std::move(out), parts, [](detail::Node& self) {
    std::size_t off = 0;
    for (auto& p : self.parents) {
      const std::size_t len = p->value.size();
      if (p->requires_grad) {
        float* g = p->grad_buffer();
        for (std::size_t i = 0; i < len; ++i) g[i] += self.grad[off + i];
      }
      off += len;
    }
  });
}

Tensor mean_row_groups(const Tensor& x, std::int64_t group) {
  if (group <= 0 || x.rows() % group != 0) {
    throw std::invalid_argument("mean_row_groups: rows not divisible by group size");
  }
  const std::int64_t n = x.rows() / group;
  const std::int64_t d = x.cols();
  Buffer out(static_cast<std::size_t>(n * d), 0.0f);
  const float* xv = x.values().data();
  const float inv = 1.0f / static_cast<float>(group);
  for (std::int64_t i = 0; i < n; ++i) {
    float* dst = out.data() + i * d;
    for (std::int64_t r = 0; r < group; ++r) {
      const float* src = xv + (i * group + r) * d;
      for (std::int64_t c = 0; c < d; ++c) dst[c] += src[c];
    }
    for (std::int64_t c = 0; c < d; ++c) dst[c] *= inv;
  }
  return Tensor::make_result(n, d, std::move(out), {x}, [group, n, d, inv](detail::Node& self) {
    float* g = self.parents[0]->grad_buffer();
    for (std::int64_t i = 0; i < n; ++i) {
      const float* src = self.grad.data() + i * d;
      for (std::int64_t r = 0; r < group; ++r) {
        float* dst = g + (i * group + r) * d;
        for (std::int64_t c = 0; c < d; ++c) dst[c] += src[c] * inv;
      }
    }
  });
}

Tensor l2_normalize_rows(const Tensor& x, float eps) {
  const std::int64_t n = x.rows();
  const std::int64_t d = x.cols();
  Buffer out(static_cast<std::size_t>(n * d));
  Buffer inv_norm(static_cast<std::size_t>(n));
  const float* xv = x.values().data();
  for (std::int64_t r = 0; r < n; ++r) {
    double ss = 0.0;
    for (std::int64_t c = 0; c < d; ++c) ss += static_cast<double>(xv[r * d + c]) * xv[r * d + c];
    const double norm = std::max(std::sqrt(ss), static_cast<double>(eps));
    const double inv = 1.0 / norm;
    inv_norm[r] = static_cast<float>(inv);
    for (std::int64_t c = 0; c < d; ++c) {
      out[r * d + c] = static_cast<float>(xv[r * d + c] * inv);
    }
  }
  Buffer y = out;
  return Tensor::make_result(
      n, d, std::move(out), {x},
      [y = std::move(y), inv_norm = std::move(inv_norm), n, d](detail::Node& self) {
        float* g = self.parents[0]->grad_buffer();
        for (std::int64_t r = 0; r < n; ++r) {
          double dot = 0.0;
          for (std::int64_t c = 0; c < d; ++c) dot += self.grad[r * d + c] * y[r * d + c];
          for (std::int64_t c = 0; c < d; ++c) {
            g[r * d + c] += inv_norm[r] * static_cast<float>(self.grad[r * d + c] -
                                                             dot * y[r * d + c]);
          }
        }
      });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (float v : x.values()) s += v;
  return Tensor::make_result(1, 1, {static_cast<float>(s)}, {x}, [](detail::Node& self) {
    float* g = self.parents[0]->grad_buffer();
    const float gs = self.grad[0];
    for (std::size_t i = 0; i < self.parents[0]->value.size(); ++i) g[i] += gs;
  });
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::span<const Segment> segments, int heads, float attn_dropout,
                            Rng* rng) {
  const std::int64_t n = q.rows();
  const std::int64_t d = q.cols();
  if (k.rows() != n || v.rows() != n || k.cols() != d || v.cols() != d) {
    shape_error("multi_head_attention", q, k);
  }
  if (heads <= 0 || d % heads != 0) {
    throw std::invalid_argument("multi_head_attention: width not divisible by heads");
  }
  if (attn_dropout > 0.0f && rng == nullptr) {
    throw std::invalid_argument("multi_head_attention: dropout requires an rng");
  }
  const std::int64_t dh = d / heads;
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(dh));
  using Stride = Eigen::OuterStride<>;
  using Block = Eigen::Map<const MatRM, 0, Stride>;
  using MBlock = Eigen::Map<MatRM, 0, Stride>;

  // Per (segment, head): softmax probabilities and the dropout-scaled version.
  std::vector<MatRM> probs;
  std::vector<MatRM> dropped;
  probs.reserve(segments.size() * heads);
  const bool use_dropout = attn_dropout > 0.0f;
  if (use_dropout) dropped.reserve(segments.size() * heads);
  const float keep_scale = use_dropout ? 1.0f / (1.0f - attn_dropout) : 1.0f;

  Buffer out(static_cast<std::size_t>(n * d), 0.0f);
  const float* qv = q.values().data();
  const float* kv = k.values().data();
  const float* vv = v.values().data();
  for (const Segment& s : segments) {
    if (s.offset < 0 || s.length <= 0 || s.offset + s.length > n) {
      throw std::out_of_range("multi_head_attention: segment out of range");
    }
    for (int h = 0; h < heads; ++h) {
      Block qs(qv + s.offset * d + h * dh, s.length, dh, Stride(d));
      Block ks(kv + s.offset * d + h * dh, s.length, dh, Stride(d));
      Block vs(vv + s.offset * d + h * dh, s.length, dh, Stride(d));
      MatRM sc = (qs * ks.transpose()) * inv_sqrt;
      for (std::int64_t r = 0; r < s.length; ++r) {
        const float mx = sc.row(r).maxCoeff();
        sc.row(r) = (sc.row(r).array() - mx).exp();
        sc.row(r) /= sc.row(r).sum();
      }
      MBlock os(out.data() + s.offset * d + h * dh, s.length, dh, Stride(d));
      if (use_dropout) {
        MatRM pd = sc;
        for (std::int64_t i = 0; i < pd.size(); ++i) {
          pd.data()[i] = rng->uniform() < attn_dropout ? 0.0f : pd.data()[i] * keep_scale;
        }
        os.noalias() = pd * vs;
        dropped.push_back(std::move(pd));
      } else {
        os.noalias() = sc * vs;
      }
      probs.push_back(std::move(sc));
    }
  }
  std::vector<Segment> segs(segments.begin(), segments.end());
  return Tensor::make_result(
      n, d, std::move(out), {q, k, v},
      [probs = std::move(probs), dropped = std::move(dropped), segs = std::move(segs), heads, d,
       dh, inv_sqrt, keep_scale, use_dropout](detail::Node& self) {
        auto& pq = *self.parents[0];
        auto& pk = *self.parents[1];
        auto& pv = *self.parents[2];
        float* gq = pq.requires_grad ? pq.grad_buffer() : nullptr;
        float* gk = pk.requires_grad ? pk.grad_buffer() : nullptr;
        float* gv = pv.requires_grad ? pv.grad_buffer() : nullptr;
        std::size_t idx = 0;
        for (const Segment& s : segs) {
          for (int h = 0; h < heads; ++h, ++idx) {
            const MatRM& p = probs[idx];
            const MatRM& pd = use_dropout ? dropped[idx] : probs[idx];
            Block go(self.grad.data() + s.offset * d + h * dh, s.length, dh, Stride(d));
            Block qs(pq.value.data() + s.offset * d + h * dh, s.length, dh, Stride(d));
            Block ks(pk.value.data() + s.offset * d + h * dh, s.length, dh, Stride(d));
            Block vs(pv.value.data() + s.offset * d + h * dh, s.length, dh, Stride(d));
            if (gv) {
              MBlock(gv + s.offset * d + h * dh, s.length, dh, Stride(d)).noalias() +=
                  pd.transpose() * go;
            }
            MatRM dp = go * vs.transpose();
            if (use_dropout) {
              // d(pd)/d(p) is keep_scale where kept, zero where dropped.
              for (std::int64_t i = 0; i < dp.size(); ++i) {
                dp.data()[i] = pd.data()[i] != 0.0f ? dp.data()[i] * keep_scale : 0.0f;
              }
            }
            MatRM ds(p.rows(), p.cols());
            for (std::int64_t r = 0; r < p.rows(); ++r) {
              const float dot = p.row(r).dot(dp.row(r));
              ds.row(r) = p.row(r).array() * (dp.row(r).array() - dot);
            }
            ds *= inv_sqrt;
            if (gq) {
              MBlock(gq + s.offset * d + h * dh, s.length, dh, Stride(d)).noalias() += ds * ks;
            }
            if (gk) {
              MBlock(gk + s.offset * d + h * dh, s.length, dh, Stride(d)).noalias() +=
                  ds.transpose() * qs;
            }
          }
        }
      });
}

std::int64_t conv_output_size(std::int64_t in, const Conv2dSpec& spec) {
  const std::int64_t eff = static_cast<std::int64_t>(spec.dilation) * (spec.kernel - 1) + 1;
  return (in + 2 * spec.padding - eff) / spec.stride + 1;
}

namespace {

void im2col(const float* x, const Geometry& g, std::int64_t cin, const Conv2dSpec& s,
            std::int64_t ho, std::int64_t wo, float* cols) {
  const std::int64_t kk = s.kernel;
  const std::int64_t row_len = kk * kk * cin;
  for (std::int64_t n = 0; n < g.batch; ++n) {
    for (std::int64_t oy = 0; oy < ho; ++oy) {
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        float* dst = cols + ((n * ho + oy) * wo + ox) * row_len;
        for (std::int64_t ky = 0; ky < kk; ++ky) {
          const std::int64_t iy = oy * s.stride - s.padding + ky * s.dilation;
          for (std::int64_t kx = 0; kx < kk; ++kx) {
            const std::int64_t ix = ox * s.stride - s.padding + kx * s.dilation;
            float* cell = dst + (ky * kk + kx) * cin;
            if (iy < 0 || iy >= g.height || ix < 0 || ix >= g.width) {
              std::memset(cell, 0, sizeof(float) * static_cast<std::size_t>(cin));
            } else {
              std::memcpy(cell, x + ((n * g.height + iy) * g.width + ix) * cin,
                          sizeof(float) * static_cast<std::size_t>(cin));
            }
          }
        }
      }
    }
  }
}

void col2im_add(const float* cols, const Geometry& g, std::int64_t cin, const Conv2dSpec& s,
                std::int64_t ho, std::int64_t wo, float* dx) {
  const std::int64_t kk = s.kernel;
  const std::int64_t row_len = kk * kk * cin;
  for (std::int64_t n = 0; n < g.batch; ++n) {
    for (std::int64_t oy = 0; oy < ho; ++oy) {
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        const float* src = cols + ((n * ho + oy) * wo + ox) * row_len;
        for (std::int64_t ky = 0; ky < kk; ++ky) {
          const std::int64_t iy = oy * s.stride - s.padding + ky * s.dilation;
          if (iy < 0 || iy >= g.height) continue;
          for (std::int64_t kx = 0; kx < kk; ++kx) {
            const std::int64_t ix = ox * s.stride - s.padding + kx * s.dilation;
            if (ix < 0 || ix >= g.width) continue;
            const float* cell = src + (ky * kk + kx) * cin;
            float* dst = dx + ((n * g.height + iy) * g.width + ix) * cin;
            for (std::int64_t c = 0; c < cin; ++c) dst[c] += cell[c];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Geometry& geom, const Tensor& weight, const Tensor& bias,
              const Conv2dSpec& spec) {
  const std::int64_t cin = x.cols();
  if (x.rows() != geom.batch * geom.height * geom.width) {
    throw std::invalid_argument("conv2d: row count does not match geometry");
  }
  const std::int64_t row_len = static_cast<std::int64_t>(spec.kernel) * spec.kernel * cin;
  if (weight.rows() != row_len) shape_error("conv2d(weight)", x, weight);
  const std::int64_t cout = weight.cols();
  const bool has_bias = bias.defined();
  const std::int64_t ho = conv_output_size(geom.height, spec);
  const std::int64_t wo = conv_output_size(geom.width, spec);
  if (ho <= 0 || wo <= 0) throw std::invalid_argument("conv2d: empty output");
  const std::int64_t out_rows = geom.batch * ho * wo;

  Buffer cols(static_cast<std::size_t>(out_rows * row_len));
  im2col(x.values().data(), geom, cin, spec, ho, wo, cols.data());
  Buffer out(static_cast<std::size_t>(out_rows * cout));
  MapRM o(out.data(), out_rows, cout);
  o.noalias() = cmap(cols, out_rows, row_len) * cmap(*weight.node());
  if (has_bias) o.rowwise() += cmap(*bias.node()).row(0);

  std::vector<Tensor> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return Tensor::make_result(
      out_rows, cout, std::move(out), std::move(inputs),
      [cols = std::move(cols), geom, spec, cin, ho, wo, out_rows, row_len,
       has_bias](detail::Node& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        CMapRM g(self.grad.data(), self.rows, self.cols);
        if (pw.requires_grad) gmap(pw).noalias() += cmap(cols, out_rows, row_len).transpose() * g;
        if (has_bias && self.parents[2]->requires_grad) {
          gmap(*self.parents[2]).row(0) += g.colwise().sum();
        }
        if (px.requires_grad) {
          Buffer dcols(static_cast<std::size_t>(out_rows * row_len));
          MapRM(dcols.data(), out_rows, row_len).noalias() = g * cmap(pw).transpose();
          col2im_add(dcols.data(), geom, cin, spec, ho, wo, px.grad_buffer());
        }
      });
}

}  // namespace cxrvlp::nn
