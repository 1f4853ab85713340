/*
 * Copyright 2026 The dialseg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Brute-force reference implementations used as independent oracles by the
// test suites. These deliberately avoid the library's fast paths (prefix
// sums, separable passes, GEMM) and evaluate definitions directly.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dialseg/image.hpp"
#include "dialseg/tensor.hpp"

namespace dialseg::oracle {

template <typename T>
Tensor<T> random_tensor(std::vector<int> shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  for (size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(uniform(rng, lo, hi));
  return t;
}

/// Direct bilinear resample of one plane, centers at (i+0.5)/n, edge clamp.
template <typename T>
Tensor<T> bilinear_resize_plane(const Tensor<T>& in, int oh, int ow) {
  int h = in.dim(0), w = in.dim(1);
  Tensor<T> out({oh, ow});
  for (int i = 0; i < oh; ++i)
    for (int j = 0; j < ow; ++j) {
      double sy = (i + 0.5) * static_cast<double>(h) / oh - 0.5;
      double sx = (j + 0.5) * static_cast<double>(w) / ow - 0.5;
      int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
      double ty = sy - y0, tx = sx - x0;
      auto pick = [&](int y, int x) {
        return static_cast<double>(in.at2(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1)));
      };
      out.at2(i, j) = static_cast<T>((1 - ty) * ((1 - tx) * pick(y0, x0) + tx * pick(y0, x0 + 1)) +
                                     ty * ((1 - tx) * pick(y0 + 1, x0) + tx * pick(y0 + 1, x0 + 1)));
    }
  return out;
}

/// O(r^2) windowed mean with truncated windows.
template <typename T>
Tensor<T> box_mean_plane(const Tensor<T>& in, int r) {
  int h = in.dim(0), w = in.dim(1);
  Tensor<T> out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      int n = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          acc += static_cast<double>(in.at2(yy, xx));
          n++;
        }
      out.at2(y, x) = static_cast<T>(acc / n);
    }
  return out;
}

/// Direct 2-D convolution with the outer-product Gaussian kernel, replicate
/// border.
template <typename T>
Tensor<T> gaussian_plane(const Tensor<T>& in, double sigma, int r) {
  int h = in.dim(0), w = in.dim(1);
  std::vector<double> k(static_cast<size_t>(2 * r + 1));
  double s = 0;
  for (int d = -r; d <= r; ++d) {
    k[static_cast<size_t>(d + r)] = std::exp(-0.5 * d * d / (sigma * sigma));
    s += k[static_cast<size_t>(d + r)];
  }
  for (auto& v : k) v /= s;
  Tensor<T> out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          int yy = std::clamp(y + dy, 0, h - 1);
          int xx = std::clamp(x + dx, 0, w - 1);
          acc += k[static_cast<size_t>(dy + r)] * k[static_cast<size_t>(dx + r)] *
                 static_cast<double>(in.at2(yy, xx));
        }
      out.at2(y, x) = static_cast<T>(acc);
    }
  return out;
}

/// Guided filter by materializing every window's mu_k, p_k, sigma^2_k, a_k,
/// b_k and averaging the overlapping per-window outputs.
template <typename T>
Tensor<T> guided_filter_plane(const Tensor<T>& p, const Tensor<T>& guide, int r, double eps) {
  int h = p.dim(0), w = p.dim(1);
  Tensor<double> a({h, w}), b({h, w});
  for (int ky = 0; ky < h; ++ky)
    for (int kx = 0; kx < w; ++kx) {
      double si = 0, sp = 0, sii = 0, sip = 0;
      int n = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          int y = ky + dy, x = kx + dx;
          if (y < 0 || y >= h || x < 0 || x >= w) continue;
          double iv = static_cast<double>(guide.at2(y, x));
          double pv = static_cast<double>(p.at2(y, x));
          si += iv;
          sp += pv;
          sii += iv * iv;
          sip += iv * pv;
          n++;
        }
      double mu = si / n, pbar = sp / n;
      double var = sii / n - mu * mu;
      double cov = sip / n - mu * pbar;
      double ak = cov / (var + eps);
      a.at2(ky, kx) = ak;
      b.at2(ky, kx) = pbar - ak * mu;
    }
  Tensor<T> q({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double sa = 0, sb = 0;
      int n = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          int ky = y + dy, kx = x + dx;
          if (ky < 0 || ky >= h || kx < 0 || kx >= w) continue;
          sa += a.at2(ky, kx);
          sb += b.at2(ky, kx);
          n++;
        }
      q.at2(y, x) = static_cast<T>(sa / n * static_cast<double>(guide.at2(y, x)) + sb / n);
    }
  return q;
}

/// Per-pixel loop over Eq-style weighted cross-entropy.
template <typename T>
double weighted_ce_plane(const Tensor<T>& probs, const LabelMap& gt,
                         const std::vector<T>& weights) {
  int k = probs.dim(0);
  size_t plane = static_cast<size_t>(probs.dim(1)) * probs.dim(2);
  double acc = 0;
  size_t n_valid = 0;
  for (size_t i = 0; i < plane; ++i) {
    uint8_t c = gt.ids[i];
    if (c == kIgnoreLabel) continue;
    n_valid++;
    acc += static_cast<double>(weights[c]) *
           std::log(static_cast<double>(probs[static_cast<size_t>(c) * plane + i]));
  }
  if (n_valid == 0) return 0.0;
  return -acc / (static_cast<double>(n_valid) * k);
}

/// Confusion-matrix mIoU.
inline double miou_confusion(const std::vector<LabelMap>& preds, const std::vector<LabelMap>& gts) {
  std::vector<std::vector<size_t>> conf(kNumCategories,
                                        std::vector<size_t>(kNumCategories, 0));
  for (size_t s = 0; s < preds.size(); ++s)
    for (size_t i = 0; i < preds[s].ids.size(); ++i) {
      uint8_t g = gts[s].ids[i];
      uint8_t p = preds[s].ids[i];
      if (g == kIgnoreLabel) continue;
      if (p < kNumCategories) conf[g][p]++;
    }
  double acc = 0;
  int present = 0;
  for (int m = 0; m < kNumCategories; ++m) {
    size_t tp = conf[size_t(m)][size_t(m)];
    size_t fn = 0, fp = 0;
    for (int j = 0; j < kNumCategories; ++j) {
      if (j != m) {
        fn += conf[size_t(m)][size_t(j)];
        fp += conf[size_t(j)][size_t(m)];
      }
    }
    size_t denom = tp + fp + fn;
    if (denom > 0) {
      acc += static_cast<double>(tp) / denom;
      present++;
    }
  }
  return present ? acc / present : 0.0;
}

}  // namespace dialseg::oracle
