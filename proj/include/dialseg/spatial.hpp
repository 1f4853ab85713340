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

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "dialseg/autodiff.hpp"
#include "dialseg/ops.hpp"

namespace dialseg {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// C (m×n) = A (m×k) · B (k×n), all row-major. Optionally accumulates.
template <typename T>
void matmul_rm(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
  Eigen::Map<const MatRM<T>> ma(a, m, k);
  Eigen::Map<const MatRM<T>> mb(b, k, n);
  Eigen::Map<MatRM<T>> mc(c, m, n);
  if (accumulate)
    mc.noalias() += ma * mb;
  else
    mc.noalias() = ma * mb;
}

/// C (m×n) += Aᵀ · B with A stored (k×m), B stored (k×n).
template <typename T>
void matmul_at_b(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
  Eigen::Map<const MatRM<T>> ma(a, k, m);
  Eigen::Map<const MatRM<T>> mb(b, k, n);
  Eigen::Map<MatRM<T>> mc(c, m, n);
  if (accumulate)
    mc.noalias() += ma.transpose() * mb;
  else
    mc.noalias() = ma.transpose() * mb;
}

/// C (m×n) += A · Bᵀ with A stored (m×k), B stored (n×k).
template <typename T>
void matmul_a_bt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
  Eigen::Map<const MatRM<T>> ma(a, m, k);
  Eigen::Map<const MatRM<T>> mb(b, n, k);
  Eigen::Map<MatRM<T>> mc(c, m, n);
  if (accumulate)
    mc.noalias() += ma * mb.transpose();
  else
    mc.noalias() = ma * mb.transpose();
}

// ---------------------------------------------------------------------------
// Bilinear resize (pixel centers at (i+0.5)/n, edges clamped)
// ---------------------------------------------------------------------------

struct ResizeAxis {
  std::vector<int> lo, hi;
  std::vector<double> t;  // weight on hi
};

inline ResizeAxis resize_axis_table(int in, int out) {
  ResizeAxis ax;
  ax.lo.resize(out);
  ax.hi.resize(out);
  ax.t.resize(out);
  for (int i = 0; i < out; ++i) {
    double src = (i + 0.5) * static_cast<double>(in) / out - 0.5;
    double fl = std::floor(src);
    int lo = static_cast<int>(fl);
    double t = src - fl;
    ax.lo[i] = std::clamp(lo, 0, in - 1);
    ax.hi[i] = std::clamp(lo + 1, 0, in - 1);
    ax.t[i] = t;
  }
  return ax;
}

/// Resize a CHW tensor to (out_h, out_w).
template <typename T>
Var<T> bilinear_resize(const Var<T>& x, int out_h, int out_w) {
  if (x.value().rank() != 3) throw InvalidArgument("bilinear_resize: CHW tensor expected");
  if (out_h < 1 || out_w < 1) throw InvalidArgument("bilinear_resize: zero-sized target");
  int c = x.value().dim(0), h = x.value().dim(1), w = x.value().dim(2);
  if (out_h == h && out_w == w) {
    // Same-size resize is an exact copy.
    Tensor<T> out = x.value();
    auto xn = x.node();
    return make_var<T>(std::move(out), {x}, "resize_id", [xn](Node<T>& self) {
      Tensor<T>& gx = xn->ensure_grad();
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
    });
  }
  auto ay = std::make_shared<ResizeAxis>(resize_axis_table(h, out_h));
  auto axx = std::make_shared<ResizeAxis>(resize_axis_table(w, out_w));
  Tensor<T> out({c, out_h, out_w});
  const Tensor<T>& xv = x.value();
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < out_h; ++i) {
      T ty = static_cast<T>(ay->t[i]);
      for (int j = 0; j < out_w; ++j) {
        T tx = static_cast<T>(axx->t[j]);
        T v00 = xv.at3(ch, ay->lo[i], axx->lo[j]);
        T v01 = xv.at3(ch, ay->lo[i], axx->hi[j]);
        T v10 = xv.at3(ch, ay->hi[i], axx->lo[j]);
        T v11 = xv.at3(ch, ay->hi[i], axx->hi[j]);
        out.at3(ch, i, j) = (T(1) - ty) * ((T(1) - tx) * v00 + tx * v01) +
                            ty * ((T(1) - tx) * v10 + tx * v11);
      }
    }
  auto xn = x.node();
  return make_var<T>(std::move(out), {x}, "resize",
                     [xn, ay, axx, c, out_h, out_w](Node<T>& self) {
                       Tensor<T>& gx = xn->ensure_grad();
                       for (int ch = 0; ch < c; ++ch)
                         for (int i = 0; i < out_h; ++i) {
                           T ty = static_cast<T>(ay->t[i]);
                           for (int j = 0; j < out_w; ++j) {
                             T tx = static_cast<T>(axx->t[j]);
                             T up = self.grad.at3(ch, i, j);
                             gx.at3(ch, ay->lo[i], axx->lo[j]) += up * (T(1) - ty) * (T(1) - tx);
                             gx.at3(ch, ay->lo[i], axx->hi[j]) += up * (T(1) - ty) * tx;
                             gx.at3(ch, ay->hi[i], axx->lo[j]) += up * ty * (T(1) - tx);
                             gx.at3(ch, ay->hi[i], axx->hi[j]) += up * ty * tx;
                           }
                         }
                     });
}

// ---------------------------------------------------------------------------
// Box mean filter (windows clipped to bounds, normalized by actual count)
// ---------------------------------------------------------------------------

namespace detail {

/// Windowed sums of one plane via a prefix-sum table (double accumulation).
template <typename T>
void box_window_sums(const T* src, int h, int w, int r, double* out) {
  std::vector<double> integral(static_cast<size_t>(h + 1) * (w + 1), 0.0);
  auto iat = [&](int y, int x) -> double& {
    return integral[static_cast<size_t>(y) * (w + 1) + x];
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      iat(y + 1, x + 1) = static_cast<double>(src[static_cast<size_t>(y) * w + x]) +
                          iat(y, x + 1) + iat(y + 1, x) - iat(y, x);
  for (int y = 0; y < h; ++y) {
    int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
    for (int x = 0; x < w; ++x) {
      int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
      out[static_cast<size_t>(y) * w + x] =
          iat(y1 + 1, x1 + 1) - iat(y0, x1 + 1) - iat(y1 + 1, x0) + iat(y0, x0);
    }
  }
}

inline int box_count(int h, int w, int r, int y, int x) {
  int ch = std::min(h - 1, y + r) - std::max(0, y - r) + 1;
  int cw = std::min(w - 1, x + r) - std::max(0, x - r) + 1;
  return ch * cw;
}

}  // namespace detail

/// Mean filter with radius r over each plane of a HW or CHW tensor.
/// O(1) per pixel via prefix sums; truncated border windows use true counts.
template <typename T>
Var<T> box_mean_filter(const Var<T>& x, int r) {
  if (r < 1) throw InvalidArgument("box_mean_filter: radius must be >= 1");
  int rank = x.value().rank();
  if (rank != 2 && rank != 3) throw InvalidArgument("box_mean_filter: HW or CHW tensor expected");
  int c = rank == 3 ? x.value().dim(0) : 1;
  int h = x.value().dim(rank - 2), w = x.value().dim(rank - 1);
  size_t plane = static_cast<size_t>(h) * w;
  Tensor<T> out(x.shape());
  std::vector<double> sums(plane);
  for (int ch = 0; ch < c; ++ch) {
    detail::box_window_sums(x.value().data() + ch * plane, h, w, r, sums.data());
    T* dst = out.data() + ch * plane;
    for (int y = 0; y < h; ++y)
      for (int xq = 0; xq < w; ++xq)
        dst[static_cast<size_t>(y) * w + xq] = static_cast<T>(
            sums[static_cast<size_t>(y) * w + xq] / detail::box_count(h, w, r, y, xq));
  }
  auto xn = x.node();
  return make_var<T>(std::move(out), {x}, "box_mean", [xn, r, c, h, w, plane](Node<T>& self) {
    // d out_i / d x_j = 1/n_i for j in the window of i; window membership is
    // symmetric, so grad_x = windowed-sum of (up / n).
    Tensor<T>& gx = xn->ensure_grad();
    std::vector<T> scaled(plane);
    std::vector<double> sums(plane);
    for (int ch = 0; ch < c; ++ch) {
      const T* up = self.grad.data() + ch * plane;
      for (int y = 0; y < h; ++y)
        for (int xq = 0; xq < w; ++xq)
          scaled[static_cast<size_t>(y) * w + xq] =
              up[static_cast<size_t>(y) * w + xq] /
              static_cast<T>(detail::box_count(h, w, r, y, xq));
      detail::box_window_sums(scaled.data(), h, w, r, sums.data());
      T* dst = gx.data() + ch * plane;
      for (size_t i = 0; i < plane; ++i) dst[i] += static_cast<T>(sums[i]);
    }
  });
}

// ---------------------------------------------------------------------------
// Gaussian blur (separable, normalized, replicate border)
// ---------------------------------------------------------------------------

template <typename T>
std::vector<T> gaussian_kernel(double sigma, int radius) {
  if (sigma <= 0) throw InvalidArgument("gaussian_blur: sigma must be positive");
  if (radius < 1) throw InvalidArgument("gaussian_blur: radius must be >= 1");
  std::vector<T> k(static_cast<size_t>(2 * radius + 1));
  double s = 0;
  for (int d = -radius; d <= radius; ++d) {
    double v = std::exp(-0.5 * d * d / (sigma * sigma));
    k[static_cast<size_t>(d + radius)] = static_cast<T>(v);
    s += v;
  }
  for (auto& v : k) v = static_cast<T>(v / s);
  return k;
}

namespace detail {

// y[i] = sum_d k[d] * x[clamp(i + d)] along rows, then columns.
template <typename T>
void sep_blur_plane(const T* src, T* dst, int h, int w, const std::vector<T>& k, int r,
                    std::vector<T>& tmp) {
  tmp.resize(static_cast<size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      T acc = 0;
      for (int d = -r; d <= r; ++d)
        acc += k[static_cast<size_t>(d + r)] * src[static_cast<size_t>(y) * w + std::clamp(x + d, 0, w - 1)];
      tmp[static_cast<size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      T acc = 0;
      for (int d = -r; d <= r; ++d)
        acc += k[static_cast<size_t>(d + r)] * tmp[static_cast<size_t>(std::clamp(y + d, 0, h - 1)) * w + x];
      dst[static_cast<size_t>(y) * w + x] = acc;
    }
}

// Transpose of the clamped-gather pass: scatter up through the same taps.
template <typename T>
void sep_blur_plane_transpose(const T* up, T* dst, int h, int w, const std::vector<T>& k, int r,
                              std::vector<T>& tmp) {
  tmp.assign(static_cast<size_t>(h) * w, T(0));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      T u = up[static_cast<size_t>(y) * w + x];
      for (int d = -r; d <= r; ++d)
        tmp[static_cast<size_t>(std::clamp(y + d, 0, h - 1)) * w + x] += k[static_cast<size_t>(d + r)] * u;
    }
  std::vector<T> row(static_cast<size_t>(h) * w, T(0));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      T u = tmp[static_cast<size_t>(y) * w + x];
      for (int d = -r; d <= r; ++d)
        row[static_cast<size_t>(y) * w + std::clamp(x + d, 0, w - 1)] += k[static_cast<size_t>(d + r)] * u;
    }
  for (size_t i = 0; i < row.size(); ++i) dst[i] += row[i];
}

}  // namespace detail

/// Separable Gaussian smoothing of each plane of a HW or CHW tensor.
template <typename T>
Var<T> gaussian_blur(const Var<T>& x, double sigma, int radius) {
  auto kernel = std::make_shared<std::vector<T>>(gaussian_kernel<T>(sigma, radius));
  int rank = x.value().rank();
  if (rank != 2 && rank != 3) throw InvalidArgument("gaussian_blur: HW or CHW tensor expected");
  int c = rank == 3 ? x.value().dim(0) : 1;
  int h = x.value().dim(rank - 2), w = x.value().dim(rank - 1);
  size_t plane = static_cast<size_t>(h) * w;
  Tensor<T> out(x.shape());
  std::vector<T> tmp;
  for (int ch = 0; ch < c; ++ch)
    detail::sep_blur_plane(x.value().data() + ch * plane, out.data() + ch * plane, h, w, *kernel,
                           radius, tmp);
  auto xn = x.node();
  return make_var<T>(std::move(out), {x}, "gaussian",
                     [xn, kernel, radius, c, h, w, plane](Node<T>& self) {
                       Tensor<T>& gx = xn->ensure_grad();
                       std::vector<T> tmp;
                       for (int ch = 0; ch < c; ++ch)
                         detail::sep_blur_plane_transpose(self.grad.data() + ch * plane,
                                                          gx.data() + ch * plane, h, w, *kernel,
                                                          radius, tmp);
                     });
}

// ---------------------------------------------------------------------------
// Convolution layers (im2col + GEMM)
// ---------------------------------------------------------------------------

struct ConvGeom {
  int stride = 1;
  int pad_top = 0, pad_left = 0, pad_bottom = 0, pad_right = 0;
};

namespace detail {

template <typename T>
void im2col(const T* x, int cin, int h, int w, int kh, int kw, const ConvGeom& g, int ho, int wo,
            T* col) {
  // col layout: [cin*kh*kw, ho*wo] row-major.
  size_t ncols = static_cast<size_t>(ho) * wo;
  for (int c = 0; c < cin; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        T* dst = col + (static_cast<size_t>(c) * kh * kw + static_cast<size_t>(ky) * kw + kx) * ncols;
        for (int oy = 0; oy < ho; ++oy) {
          int iy = oy * g.stride - g.pad_top + ky;
          bool yin = iy >= 0 && iy < h;
          for (int ox = 0; ox < wo; ++ox) {
            int ix = ox * g.stride - g.pad_left + kx;
            dst[static_cast<size_t>(oy) * wo + ox] =
                (yin && ix >= 0 && ix < w)
                    ? x[(static_cast<size_t>(c) * h + iy) * w + ix]
                    : T(0);
          }
        }
      }
}

template <typename T>
void col2im_add(const T* col, int cin, int h, int w, int kh, int kw, const ConvGeom& g, int ho,
                int wo, T* gx) {
  size_t ncols = static_cast<size_t>(ho) * wo;
  for (int c = 0; c < cin; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const T* src = col + (static_cast<size_t>(c) * kh * kw + static_cast<size_t>(ky) * kw + kx) * ncols;
        for (int oy = 0; oy < ho; ++oy) {
          int iy = oy * g.stride - g.pad_top + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < wo; ++ox) {
            int ix = ox * g.stride - g.pad_left + kx;
            if (ix < 0 || ix >= w) continue;
            gx[(static_cast<size_t>(c) * h + iy) * w + ix] += src[static_cast<size_t>(oy) * wo + ox];
          }
        }
      }
}

}  // namespace detail

/// conv2d: x [Cin,H,W], weight [Cout,Cin,kh,kw], bias [Cout] -> [Cout,Ho,Wo].
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, const ConvGeom& g) {
  const auto& xs = x.value();
  const auto& ws = weight.value();
  if (xs.rank() != 3 || ws.rank() != 4) throw InvalidArgument("conv2d: bad ranks");
  int cin = xs.dim(0), h = xs.dim(1), w = xs.dim(2);
  int cout = ws.dim(0), kh = ws.dim(2), kw = ws.dim(3);
  if (ws.dim(1) != cin) throw InvalidArgument("conv2d: channel mismatch");
  int ho = (h + g.pad_top + g.pad_bottom - kh) / g.stride + 1;
  int wo = (w + g.pad_left + g.pad_right - kw) / g.stride + 1;
  if (ho < 1 || wo < 1) throw InvalidArgument("conv2d: output would be empty");

  int krows = cin * kh * kw;
  size_t ncols = static_cast<size_t>(ho) * wo;
  auto col = std::make_shared<Tensor<T>>(std::vector<int>{krows, static_cast<int>(ncols)});
  detail::im2col(xs.data(), cin, h, w, kh, kw, g, ho, wo, col->data());

  Tensor<T> out({cout, ho, wo});
  matmul_rm(ws.data(), col->data(), out.data(), cout, krows, static_cast<int>(ncols));
  for (int o = 0; o < cout; ++o) {
    T b = bias.value()[static_cast<size_t>(o)];
    T* dst = out.data() + static_cast<size_t>(o) * ncols;
    for (size_t i = 0; i < ncols; ++i) dst[i] += b;
  }

  auto xn = x.node();
  auto wn = weight.node();
  auto bn = bias.node();
  ConvGeom geom = g;
  return make_var<T>(
      std::move(out), {x, weight, bias}, "conv2d",
      [xn, wn, bn, col, geom, cin, h, w, cout, kh, kw, ho, wo, krows, ncols](Node<T>& self) {
        const T* up = self.grad.data();  // [cout, ho*wo]
        if (bn->requires_grad) {
          Tensor<T>& gb = bn->ensure_grad();
          for (int o = 0; o < cout; ++o) {
            T acc = 0;
            const T* src = up + static_cast<size_t>(o) * ncols;
            for (size_t i = 0; i < ncols; ++i) acc += src[i];
            gb[static_cast<size_t>(o)] += acc;
          }
        }
        if (wn->requires_grad) {
          Tensor<T>& gw = wn->ensure_grad();
          matmul_a_bt(up, col->data(), gw.data(), cout, static_cast<int>(ncols), krows, true);
        }
        if (xn->requires_grad) {
          Tensor<T>& gx = xn->ensure_grad();
          Tensor<T> colg({krows, static_cast<int>(ncols)});
          matmul_at_b(wn->value.data(), up, colg.data(), krows, cout, static_cast<int>(ncols));
          detail::col2im_add(colg.data(), cin, h, w, kh, kw, geom, ho, wo, gx.data());
        }
      });
}

/// conv_transpose2d: x [Cin,H,W], weight [Cin,Cout,kh,kw], bias [Cout]
/// -> [Cout, (H-1)*stride+kh, (W-1)*stride+kw].
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride) {
  const auto& xs = x.value();
  const auto& ws = weight.value();
  if (xs.rank() != 3 || ws.rank() != 4) throw InvalidArgument("conv_transpose2d: bad ranks");
  int cin = xs.dim(0), h = xs.dim(1), w = xs.dim(2);
  int cout = ws.dim(1), kh = ws.dim(2), kw = ws.dim(3);
  if (ws.dim(0) != cin) throw InvalidArgument("conv_transpose2d: channel mismatch");
  int ho = (h - 1) * stride + kh;
  int wo = (w - 1) * stride + kw;
  int krows = cout * kh * kw;
  size_t npix = static_cast<size_t>(h) * w;

  // Permute weight [Cin,Cout,kh,kw] -> Wr [(Cout*kh*kw), Cin].
  auto permute_weight = [&](const Tensor<T>& src, Tensor<T>& dst) {
    for (int c = 0; c < cin; ++c)
      for (int o = 0; o < cout; ++o)
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx)
            dst[(static_cast<size_t>(o) * kh * kw + static_cast<size_t>(ky) * kw + kx) * cin + c] =
                src[((static_cast<size_t>(c) * cout + o) * kh + ky) * kw + kx];
  };
  Tensor<T> wr({krows, cin});
  permute_weight(ws, wr);

  Tensor<T> proj({krows, static_cast<int>(npix)});
  matmul_rm(wr.data(), xs.data(), proj.data(), krows, cin, static_cast<int>(npix));

  Tensor<T> out({cout, ho, wo});
  for (int o = 0; o < cout; ++o) {
    T b = bias.value()[static_cast<size_t>(o)];
    T* dst = out.data() + static_cast<size_t>(o) * ho * wo;
    for (size_t i = 0; i < static_cast<size_t>(ho) * wo; ++i) dst[i] = b;
  }
  for (int o = 0; o < cout; ++o)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const T* src = proj.data() + (static_cast<size_t>(o) * kh * kw + static_cast<size_t>(ky) * kw + kx) * npix;
        for (int iy = 0; iy < h; ++iy) {
          T* dst = out.data() + (static_cast<size_t>(o) * ho + iy * stride + ky) * wo + kx;
          const T* s = src + static_cast<size_t>(iy) * w;
          for (int ix = 0; ix < w; ++ix) dst[static_cast<size_t>(ix) * stride] += s[ix];
        }
      }

  auto xn = x.node();
  auto wn = weight.node();
  auto bn = bias.node();
  return make_var<T>(
      std::move(out), {x, weight, bias}, "conv_t2d",
      [xn, wn, bn, stride, cin, h, w, cout, kh, kw, ho, wo, krows, npix](Node<T>& self) {
        // Gather up into G [(Cout*kh*kw), H*W].
        Tensor<T> gmat({krows, static_cast<int>(npix)});
        const T* up = self.grad.data();
        for (int o = 0; o < cout; ++o)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              T* dst = gmat.data() + (static_cast<size_t>(o) * kh * kw + static_cast<size_t>(ky) * kw + kx) * npix;
              for (int iy = 0; iy < h; ++iy) {
                const T* s = up + (static_cast<size_t>(o) * ho + iy * stride + ky) * wo + kx;
                for (int ix = 0; ix < w; ++ix)
                  dst[static_cast<size_t>(iy) * w + ix] = s[static_cast<size_t>(ix) * stride];
              }
            }
        if (bn->requires_grad) {
          Tensor<T>& gb = bn->ensure_grad();
          for (int o = 0; o < cout; ++o) {
            T acc = 0;
            const T* src = up + static_cast<size_t>(o) * ho * wo;
            for (size_t i = 0; i < static_cast<size_t>(ho) * wo; ++i) acc += src[i];
            gb[static_cast<size_t>(o)] += acc;
          }
        }
        if (xn->requires_grad) {
          // grad_x [Cin, H*W] = Wrᵀ · G.
          Tensor<T> wr({krows, cin});
          for (int c = 0; c < cin; ++c)
            for (int o = 0; o < cout; ++o)
              for (int ky = 0; ky < kh; ++ky)
                for (int kx = 0; kx < kw; ++kx)
                  wr[(static_cast<size_t>(o) * kh * kw + static_cast<size_t>(ky) * kw + kx) * cin + c] =
                      wn->value[((static_cast<size_t>(c) * cout + o) * kh + ky) * kw + kx];
          Tensor<T>& gx = xn->ensure_grad();
          matmul_at_b(wr.data(), gmat.data(), gx.data(), cin, krows, static_cast<int>(npix), true);
        }
        if (wn->requires_grad) {
          // grad_Wr [(Cout*kh*kw), Cin] = G · Xᵀ, then un-permute.
          Tensor<T> gwr({krows, cin});
          matmul_a_bt(gmat.data(), xn->value.data(), gwr.data(), krows, static_cast<int>(npix),
                      cin);
          Tensor<T>& gw = wn->ensure_grad();
          for (int c = 0; c < cin; ++c)
            for (int o = 0; o < cout; ++o)
              for (int ky = 0; ky < kh; ++ky)
                for (int kx = 0; kx < kw; ++kx)
                  gw[((static_cast<size_t>(c) * cout + o) * kh + ky) * kw + kx] +=
                      gwr[(static_cast<size_t>(o) * kh * kw + static_cast<size_t>(ky) * kw + kx) * cin + c];
        }
      });
}

/// Fully connected layer: x [Cin], weight [Cout,Cin], bias [Cout] -> [Cout].
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  const auto& xs = x.value();
  const auto& ws = weight.value();
  if (xs.rank() != 1 || ws.rank() != 2 || ws.dim(1) != xs.dim(0))
    throw InvalidArgument("linear: shape mismatch");
  int cout = ws.dim(0), cin = ws.dim(1);
  Tensor<T> out({cout});
  for (int o = 0; o < cout; ++o) {
    T acc = bias.value()[static_cast<size_t>(o)];
    const T* wrow = ws.data() + static_cast<size_t>(o) * cin;
    for (int i = 0; i < cin; ++i) acc += wrow[i] * xs[static_cast<size_t>(i)];
    out[static_cast<size_t>(o)] = acc;
  }
  auto xn = x.node();
  auto wn = weight.node();
  auto bn = bias.node();
  return make_var<T>(std::move(out), {x, weight, bias}, "linear",
                     [xn, wn, bn, cout, cin](Node<T>& self) {
                       const T* up = self.grad.data();
                       if (bn->requires_grad) {
                         Tensor<T>& gb = bn->ensure_grad();
                         for (int o = 0; o < cout; ++o) gb[static_cast<size_t>(o)] += up[o];
                       }
                       if (wn->requires_grad) {
                         Tensor<T>& gw = wn->ensure_grad();
                         for (int o = 0; o < cout; ++o)
                           for (int i = 0; i < cin; ++i)
                             gw[static_cast<size_t>(o) * cin + i] += up[o] * xn->value[static_cast<size_t>(i)];
                       }
                       if (xn->requires_grad) {
                         Tensor<T>& gx = xn->ensure_grad();
                         for (int i = 0; i < cin; ++i) {
                           T acc = 0;
                           for (int o = 0; o < cout; ++o)
                             acc += up[o] * wn->value[static_cast<size_t>(o) * cin + i];
                           gx[static_cast<size_t>(i)] += acc;
                         }
                       }
                     });
}

}  // namespace dialseg
