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

#include <array>
#include <cmath>
#include <string>

#include "dialseg/image.hpp"
#include "dialseg/ops.hpp"
#include "dialseg/spatial.hpp"

namespace dialseg {

// Differentiable image filters: exposure, gamma, contrast, sharpen. Every
// filter clamps its output to [0,1] and is differentiable w.r.t. both the
// image and its hyperparameter, so the whole pipeline trains end to end.

enum class FilterStage { Exposure, Gamma, Contrast, Sharpen };

template <typename T>
struct FilterRanges {
  struct Interval {
    T lo, hi;
  };
  Interval exposure{T(-2), T(2)};
  Interval gamma{T(1) / T(3), T(3)};
  Interval alpha{T(0), T(1)};
  Interval lambda{T(0), T(2)};

  void validate() const {
    auto check = [](const Interval& iv, T identity, const char* name) {
      if (!(iv.lo < iv.hi))
        throw InvalidArgument(std::string("FilterRanges: degenerate interval for ") + name);
      if (identity < iv.lo || identity > iv.hi)
        throw InvalidArgument(std::string("FilterRanges: identity value outside range of ") + name);
    };
    check(exposure, T(0), "E");
    check(gamma, T(1), "G");
    check(alpha, T(0), "alpha");
    check(lambda, T(0), "lambda");
  }
};

/// The four DIF hyperparameters as plain values.
template <typename T>
struct FilterParams {
  T exposure = 0;  // E, stops
  T gamma = 1;     // G, exponent
  T alpha = 0;     // contrast blend in [0,1]
  T lambda = 0;    // sharpen strength >= 0

  static FilterParams identity() { return {}; }
};

/// The same four hyperparameters as graph variables (scalar tensors).
template <typename T>
struct FilterParamVars {
  Var<T> exposure, gamma, alpha, lambda;

  static FilterParamVars constants(const FilterParams<T>& p) {
    return {Var<T>(Tensor<T>::scalar(p.exposure)), Var<T>(Tensor<T>::scalar(p.gamma)),
            Var<T>(Tensor<T>::scalar(p.alpha)), Var<T>(Tensor<T>::scalar(p.lambda))};
  }

  FilterParams<T> values() const {
    return {exposure.scalar_value(), gamma.scalar_value(), alpha.scalar_value(),
            lambda.scalar_value()};
  }
};

template <typename T>
struct DifConfig {
  std::array<FilterStage, 4> order{FilterStage::Exposure, FilterStage::Gamma,
                                   FilterStage::Contrast, FilterStage::Sharpen};
  double sharpen_sigma = 1.0;
  int sharpen_radius = 2;
};

// ---------------------------------------------------------------------------
// Individual filters
// ---------------------------------------------------------------------------

/// P_o = 2^E * P_i, clamped.
template <typename T>
Var<T> exposure_filter(const Var<T>& img, const Var<T>& exposure) {
  Var<T> gain = unary_ew(
      exposure, "pow2", [](T v) { return std::exp2(v); },
      [](T, T y) { return y * static_cast<T>(M_LN2); });
  return clamp01(scale(img, gain));
}

/// P_o = P_i^G, clamped. dP/dG uses P^G ln P with the value-0 case set to 0.
template <typename T>
Var<T> gamma_filter(const Var<T>& img, const Var<T>& gamma) {
  if (gamma.size() != 1) throw InvalidArgument("gamma_filter: scalar exponent expected");
  T g = gamma.scalar_value();
  Tensor<T> out(img.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::pow(img.value()[i], g);
  auto xn = img.node();
  auto gn = gamma.node();
  Var<T> raw = make_var<T>(std::move(out), {img, gamma}, "pow_gamma", [xn, gn](Node<T>& self) {
    T g = gn->value[0];
    if (xn->requires_grad) {
      Tensor<T>& gx = xn->ensure_grad();
      for (size_t i = 0; i < gx.size(); ++i) {
        T p = xn->value[i];
        gx[i] += self.grad[i] * (p > T(0) ? g * std::pow(p, g - T(1)) : T(0));
      }
    }
    if (gn->requires_grad) {
      Tensor<T>& gg = gn->ensure_grad();
      T acc = 0;
      for (size_t i = 0; i < self.value.size(); ++i) {
        T p = xn->value[i];
        if (p > T(0)) acc += self.grad[i] * self.value[i] * std::log(p);
      }
      gg[0] += acc;
    }
  });
  return clamp01(raw);
}

/// P_o = alpha * En(P_i) + (1-alpha) * P_i with
/// En(P) = P * EnLum(Lum(P)) / Lum(P), Lum = 0.27r + 0.67g + 0.06b and
/// EnLum(L) = (1 - cos(pi*L)) / 2. Zero-luminance pixels pass through.
template <typename T>
Var<T> contrast_filter(const Var<T>& img, const Var<T>& alpha) {
  if (img.value().rank() != 3 || img.value().dim(0) != 3)
    throw InvalidArgument("contrast_filter: [3,H,W] image expected");
  if (alpha.size() != 1) throw InvalidArgument("contrast_filter: scalar blend expected");
  constexpr double kWr = 0.27, kWg = 0.67, kWb = 0.06;
  const T a = alpha.scalar_value();
  size_t plane = static_cast<size_t>(img.value().dim(1)) * img.value().dim(2);
  const T* x = img.value().data();
  Tensor<T> out(img.shape());
  for (size_t p = 0; p < plane; ++p) {
    T r = x[p], g = x[plane + p], b = x[2 * plane + p];
    T lum = static_cast<T>(kWr) * r + static_cast<T>(kWg) * g + static_cast<T>(kWb) * b;
    T s = lum > T(0)
              ? static_cast<T>(0.5) * (T(1) - std::cos(static_cast<T>(M_PI) * lum)) / lum
              : T(1);
    T f = T(1) + a * (s - T(1));
    out[p] = r * f;
    out[plane + p] = g * f;
    out[2 * plane + p] = b * f;
  }
  auto xn = img.node();
  auto an = alpha.node();
  Var<T> raw = make_var<T>(std::move(out), {img, alpha}, "contrast", [xn, an, plane](Node<T>& self) {
    const T a = an->value[0];
    const T* x = xn->value.data();
    const T* up = self.grad.data();
    T* gx = xn->requires_grad ? xn->ensure_grad().data() : nullptr;
    T ga = 0;
    const T wr = static_cast<T>(0.27), wg = static_cast<T>(0.67), wb = static_cast<T>(0.06);
    for (size_t p = 0; p < plane; ++p) {
      T r = x[p], g = x[plane + p], b = x[2 * plane + p];
      T lum = wr * r + wg * g + wb * b;
      T ur = up[p], ug = up[plane + p], ub = up[2 * plane + p];
      T udotc = ur * r + ug * g + ub * b;
      if (lum > T(0)) {
        T en = static_cast<T>(0.5) * (T(1) - std::cos(static_cast<T>(M_PI) * lum));
        T s = en / lum;
        T ds = (static_cast<T>(0.5 * M_PI) * std::sin(static_cast<T>(M_PI) * lum) * lum - en) /
               (lum * lum);
        T f = T(1) + a * (s - T(1));
        if (gx) {
          T common = a * ds * udotc;
          gx[p] += ur * f + common * wr;
          gx[plane + p] += ug * f + common * wg;
          gx[2 * plane + p] += ub * f + common * wb;
        }
        ga += udotc * (s - T(1));
      } else if (gx) {
        gx[p] += ur;
        gx[plane + p] += ug;
        gx[2 * plane + p] += ub;
      }
    }
    if (an->requires_grad) an->ensure_grad()[0] += ga;
  });
  return clamp01(raw);
}

/// F(x, lambda) = I(x) + lambda * (I(x) - Gau(I(x))), clamped.
template <typename T>
Var<T> sharpen_filter(const Var<T>& img, const Var<T>& lambda, double sigma = 1.0,
                      int radius = 2) {
  Var<T> blurred = gaussian_blur(img, sigma, radius);
  Var<T> detail_mask = sub(img, blurred);
  return clamp01(add(img, scale(detail_mask, lambda)));
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

template <typename T>
void validate_params(const FilterParams<T>& p, const FilterRanges<T>& ranges) {
  auto check = [](T v, T lo, T hi, const char* name) {
    if (!(v >= lo && v <= hi))
      throw InvalidArgument(std::string("filter parameter ") + name + " out of range [" +
                            std::to_string(static_cast<double>(lo)) + ", " +
                            std::to_string(static_cast<double>(hi)) + "]: " +
                            std::to_string(static_cast<double>(v)));
  };
  check(p.exposure, ranges.exposure.lo, ranges.exposure.hi, "E");
  check(p.gamma, ranges.gamma.lo, ranges.gamma.hi, "G");
  check(p.alpha, ranges.alpha.lo, ranges.alpha.hi, "alpha");
  check(p.lambda, ranges.lambda.lo, ranges.lambda.hi, "lambda");
}

template <typename T>
Var<T> apply_filter_stage(FilterStage stage, const Var<T>& img, const FilterParamVars<T>& p,
                          const DifConfig<T>& cfg) {
  switch (stage) {
    case FilterStage::Exposure:
      return exposure_filter(img, p.exposure);
    case FilterStage::Gamma:
      return gamma_filter(img, p.gamma);
    case FilterStage::Contrast:
      return contrast_filter(img, p.alpha);
    case FilterStage::Sharpen:
      return sharpen_filter(img, p.lambda, cfg.sharpen_sigma, cfg.sharpen_radius);
  }
  throw InvalidArgument("unknown filter stage");
}

/// Full DIF pipeline in the configured stage order. Resolution independent:
/// the same parameters apply to an image of any size.
template <typename T>
Var<T> apply_dif(const Var<T>& img, const FilterParamVars<T>& p, const DifConfig<T>& cfg = {},
                 const FilterRanges<T>* ranges = nullptr) {
  if (ranges) validate_params(p.values(), *ranges);
  Var<T> cur = img;
  for (FilterStage stage : cfg.order) cur = apply_filter_stage(stage, cur, p, cfg);
  return cur;
}

/// Per-stage intermediates for operator-facing reports.
template <typename T>
struct DifStages {
  std::array<Var<T>, 4> after_stage;
  std::array<FilterStage, 4> order;
  Var<T> output;
};

template <typename T>
DifStages<T> apply_dif_stages(const Var<T>& img, const FilterParamVars<T>& p,
                              const DifConfig<T>& cfg = {},
                              const FilterRanges<T>* ranges = nullptr) {
  if (ranges) validate_params(p.values(), *ranges);
  DifStages<T> st;
  st.order = cfg.order;
  Var<T> cur = img;
  for (size_t i = 0; i < cfg.order.size(); ++i) {
    cur = apply_filter_stage(cfg.order[i], cur, p, cfg);
    st.after_stage[i] = cur;
  }
  st.output = cur;
  return st;
}

/// Smooth, strictly monotone map from 4 unconstrained reals onto the
/// parameter ranges. Raw 0 lands on the interval midpoint; the gamma channel
/// uses the log-space midpoint so raw 0 maps to G = 1.
template <typename T>
FilterParamVars<T> squash_params(const Var<T>& raw, const FilterRanges<T>& ranges) {
  if (raw.value().rank() != 1 || raw.value().dim(0) != 4)
    throw InvalidArgument("squash_params: 4 raw values expected");
  if (!raw.value().all_finite()) throw NumericFailure("squash_params: non-finite raw input");
  auto affine_sigmoid = [](const Var<T>& v, T lo, T hi) {
    return adds(muls(sigmoid(v), static_cast<double>(hi - lo)), static_cast<double>(lo));
  };
  // The sigmoid maps into the open interval; the final clamp only absorbs
  // floating-point rounding at saturation (e.g. exp(log(hi)) half an ulp out).
  auto pin = [](const Var<T>& v, T lo, T hi) {
    return clamp_range(v, static_cast<double>(lo), static_cast<double>(hi));
  };
  FilterParamVars<T> p;
  p.exposure = pin(affine_sigmoid(index1(raw, 0), ranges.exposure.lo, ranges.exposure.hi),
                   ranges.exposure.lo, ranges.exposure.hi);
  T llo = std::log(ranges.gamma.lo), lhi = std::log(ranges.gamma.hi);
  p.gamma = pin(vexp(affine_sigmoid(index1(raw, 1), llo, lhi)), ranges.gamma.lo, ranges.gamma.hi);
  p.alpha = pin(affine_sigmoid(index1(raw, 2), ranges.alpha.lo, ranges.alpha.hi), ranges.alpha.lo,
                ranges.alpha.hi);
  p.lambda = pin(affine_sigmoid(index1(raw, 3), ranges.lambda.lo, ranges.lambda.hi),
                 ranges.lambda.lo, ranges.lambda.hi);
  return p;
}

}  // namespace dialseg
