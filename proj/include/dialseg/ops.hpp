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

#include <algorithm>
#include <cmath>

#include "dialseg/autodiff.hpp"
#include "dialseg/common.hpp"

namespace dialseg {

// ---------------------------------------------------------------------------
// Pointwise arithmetic
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return binary_ew(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T, T) { return T(1); },
      [](T, T, T) { return T(1); });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return binary_ew(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T, T) { return T(1); },
      [](T, T, T) { return T(-1); });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return binary_ew(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y, T) { return y; },
      [](T x, T, T) { return x; });
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  return binary_ew(
      a, b, "div", [](T x, T y) { return x / y; }, [](T, T y, T) { return T(1) / y; },
      [](T, T y, T out) { return -out / y; });
}

template <typename T>
Var<T> muls(const Var<T>& x, double c) {
  T tc = static_cast<T>(c);
  return unary_ew(
      x, "muls", [tc](T v) { return v * tc; }, [tc](T, T) { return tc; });
}

template <typename T>
Var<T> adds(const Var<T>& x, double c) {
  T tc = static_cast<T>(c);
  return unary_ew(
      x, "adds", [tc](T v) { return v + tc; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> neg(const Var<T>& x) {
  return muls(x, -1.0);
}

template <typename T>
Var<T> sq(const Var<T>& x) {
  return unary_ew(
      x, "sq", [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Var<T> vexp(const Var<T>& x) {
  return unary_ew(
      x, "exp", [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

/// log with a value floor; gradient is zero where the floor engages.
template <typename T>
Var<T> vlog(const Var<T>& x, double floor = 0.0) {
  T f = static_cast<T>(floor);
  return unary_ew(
      x, "log", [f](T v) { return std::log(v < f ? f : v); },
      [f](T v, T) { return v < f ? T(0) : T(1) / v; });
}

/// Clamp to [lo,hi]; pass-through gradient inside the closed interval, zero outside.
template <typename T>
Var<T> clamp_range(const Var<T>& x, double lo, double hi) {
  T l = static_cast<T>(lo), h = static_cast<T>(hi);
  return unary_ew(
      x, "clamp", [l, h](T v) { return v < l ? l : (v > h ? h : v); },
      [l, h](T v, T) { return (v >= l && v <= h) ? T(1) : T(0); });
}

/// Clamp to [0,1]; pass-through gradient inside the closed interval, zero outside.
template <typename T>
Var<T> clamp01(const Var<T>& x) {
  return clamp_range(x, 0.0, 1.0);
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, double slope) {
  T s = static_cast<T>(slope);
  return unary_ew(
      x, "leaky_relu", [s](T v) { return v >= T(0) ? v : s * v; },
      [s](T v, T) { return v >= T(0) ? T(1) : s; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return unary_ew(
      x, "sigmoid",
      [](T v) {
        return v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                         : std::exp(v) / (T(1) + std::exp(v));
      },
      [](T, T y) { return y * (T(1) - y); });
}

/// Elementwise product with a constant tensor (masks, one-hot weight maps).
template <typename T>
Var<T> mul_const(const Var<T>& x, Tensor<T> c) {
  require_same_shape(x.value(), c, "mul_const");
  Tensor<T> out(x.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * c[i];
  auto xn = x.node();
  auto cp = std::make_shared<Tensor<T>>(std::move(c));
  return make_var<T>(std::move(out), {x}, "mul_const", [xn, cp](Node<T>& self) {
    Tensor<T>& gx = xn->ensure_grad();
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * (*cp)[i];
  });
}

/// x scaled by a scalar graph variable.
template <typename T>
Var<T> scale(const Var<T>& x, const Var<T>& s) {
  if (s.size() != 1) throw InvalidArgument("scale: scalar variable expected");
  Tensor<T> out(x.shape());
  T sv = s.value()[0];
  for (size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * sv;
  auto xn = x.node();
  auto sn = s.node();
  return make_var<T>(std::move(out), {x, s}, "scale", [xn, sn](Node<T>& self) {
    if (xn->requires_grad) {
      Tensor<T>& gx = xn->ensure_grad();
      T sv = sn->value[0];
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * sv;
    }
    if (sn->requires_grad) {
      Tensor<T>& gs = sn->ensure_grad();
      T acc = 0;
      for (size_t i = 0; i < xn->value.size(); ++i) acc += self.grad[i] * xn->value[i];
      gs[0] += acc;
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions and indexing
// ---------------------------------------------------------------------------

template <typename T>
Var<T> sum(const Var<T>& x) {
  T acc = 0;
  for (size_t i = 0; i < x.size(); ++i) acc += x.value()[i];
  auto xn = x.node();
  return make_var<T>(Tensor<T>::scalar(acc), {x}, "sum", [xn](Node<T>& self) {
    Tensor<T>& gx = xn->ensure_grad();
    T up = self.grad[0];
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += up;
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  return muls(sum(x), 1.0 / static_cast<double>(x.size()));
}

/// Extract one element of a rank-1 tensor as a scalar variable.
template <typename T>
Var<T> index1(const Var<T>& x, int i) {
  if (x.value().rank() != 1 || i < 0 || i >= x.value().dim(0))
    throw InvalidArgument("index1: bad index");
  auto xn = x.node();
  size_t idx = static_cast<size_t>(i);
  return make_var<T>(Tensor<T>::scalar(x.value()[idx]), {x}, "index1",
                     [xn, idx](Node<T>& self) {
                       Tensor<T>& gx = xn->ensure_grad();
                       gx[idx] += self.grad[0];
                     });
}

/// Gather a subset of channels from a CHW tensor.
template <typename T>
Var<T> select_channels(const Var<T>& x, const std::vector<int>& channels) {
  if (x.value().rank() != 3) throw InvalidArgument("select_channels: CHW tensor expected");
  int h = x.value().dim(1), w = x.value().dim(2);
  size_t plane = static_cast<size_t>(h) * static_cast<size_t>(w);
  Tensor<T> out({static_cast<int>(channels.size()), h, w});
  for (size_t k = 0; k < channels.size(); ++k) {
    int c = channels[k];
    if (c < 0 || c >= x.value().dim(0)) throw InvalidArgument("select_channels: bad channel id");
    std::copy_n(x.value().data() + static_cast<size_t>(c) * plane, plane,
                out.data() + k * plane);
  }
  auto xn = x.node();
  auto idx = channels;
  return make_var<T>(std::move(out), {x}, "select_channels", [xn, idx, plane](Node<T>& self) {
    Tensor<T>& gx = xn->ensure_grad();
    for (size_t k = 0; k < idx.size(); ++k) {
      T* dst = gx.data() + static_cast<size_t>(idx[k]) * plane;
      const T* src = self.grad.data() + k * plane;
      for (size_t i = 0; i < plane; ++i) dst[i] += src[i];
    }
  });
}

/// Per-pixel softmax across the channel axis of a CHW tensor.
template <typename T>
Var<T> softmax_channels(const Var<T>& x) {
  if (x.value().rank() != 3) throw InvalidArgument("softmax_channels: CHW tensor expected");
  int k = x.value().dim(0), h = x.value().dim(1), w = x.value().dim(2);
  size_t plane = static_cast<size_t>(h) * static_cast<size_t>(w);
  Tensor<T> out(x.shape());
  const T* xv = x.value().data();
  T* ov = out.data();
  for (size_t p = 0; p < plane; ++p) {
    T mx = xv[p];
    for (int c = 1; c < k; ++c) mx = std::max(mx, xv[c * plane + p]);
    T z = 0;
    for (int c = 0; c < k; ++c) {
      T e = std::exp(xv[c * plane + p] - mx);
      ov[c * plane + p] = e;
      z += e;
    }
    for (int c = 0; c < k; ++c) ov[c * plane + p] /= z;
  }
  auto xn = x.node();
  return make_var<T>(std::move(out), {x}, "softmax", [xn, k, plane](Node<T>& self) {
    Tensor<T>& gx = xn->ensure_grad();
    const T* y = self.value.data();
    const T* up = self.grad.data();
    for (size_t p = 0; p < plane; ++p) {
      T dot = 0;
      for (int c = 0; c < k; ++c) dot += up[c * plane + p] * y[c * plane + p];
      for (int c = 0; c < k; ++c)
        gx[c * plane + p] += y[c * plane + p] * (up[c * plane + p] - dot);
    }
  });
}

/// CHW -> C spatial average.
template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  if (x.value().rank() != 3) throw InvalidArgument("global_avg_pool: CHW tensor expected");
  int c = x.value().dim(0);
  size_t plane = static_cast<size_t>(x.value().dim(1)) * static_cast<size_t>(x.value().dim(2));
  Tensor<T> out({c});
  for (int i = 0; i < c; ++i) {
    T acc = 0;
    const T* src = x.value().data() + static_cast<size_t>(i) * plane;
    for (size_t j = 0; j < plane; ++j) acc += src[j];
    out[static_cast<size_t>(i)] = acc / static_cast<T>(plane);
  }
  auto xn = x.node();
  return make_var<T>(std::move(out), {x}, "gap", [xn, c, plane](Node<T>& self) {
    Tensor<T>& gx = xn->ensure_grad();
    for (int i = 0; i < c; ++i) {
      T up = self.grad[static_cast<size_t>(i)] / static_cast<T>(plane);
      T* dst = gx.data() + static_cast<size_t>(i) * plane;
      for (size_t j = 0; j < plane; ++j) dst[j] += up;
    }
  });
}

/// Inverted dropout; identity when not training.
template <typename T>
Var<T> dropout(const Var<T>& x, double rate, bool training, Rng& rng) {
  if (!training || rate <= 0.0) return x;
  if (rate >= 1.0) throw InvalidArgument("dropout rate must be < 1");
  Tensor<T> mask(x.shape());
  T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::bernoulli_distribution keep(1.0 - rate);
  for (size_t i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? keep_scale : T(0);
  return mul_const(x, std::move(mask));
}

}  // namespace dialseg
