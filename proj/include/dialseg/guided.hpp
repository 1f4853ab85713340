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

#include "dialseg/image.hpp"
#include "dialseg/nn.hpp"
#include "dialseg/ops.hpp"

namespace dialseg {

// Learnable guided filter: a learned per-pixel guide transform F(I) followed
// by the guided-filter linear model, applied channel-wise to segmentation
// scores (channel c of the guide steers channel c of the scores).

template <typename T>
struct GuidedFilterConfig {
  int radius = 4;
  T epsilon = static_cast<T>(1e-2);

  void validate() const {
    if (radius < 1) throw InvalidArgument("GuidedFilterConfig: radius must be >= 1");
    if (!(epsilon > T(0))) throw InvalidArgument("GuidedFilterConfig: epsilon must be positive");
  }
};

/// Two 1x1 convolutions with bias, 3 -> 64 -> 19 channels (1,491 parameters),
/// leaky rectifier between.
template <typename T>
class GuideTransform {
 public:
  GuideTransform() = default;

  explicit GuideTransform(Rng& rng, int hidden = 64, int out = kNumCategories,
                          double leaky_slope = 0.01)
      : leaky_slope_(leaky_slope) {
    ConvGeom g;
    conv1_ = Conv2dLayer<T>(3, hidden, 1, g, rng);
    conv2_ = Conv2dLayer<T>(hidden, out, 1, g, rng);
  }

  /// Per-pixel transform of the enhanced image into a K-channel guide map.
  Var<T> forward(const Var<T>& img) const {
    return conv2_(leaky_relu(conv1_(img), leaky_slope_));
  }

  void collect(ParamList<T>& out, const std::string& prefix = "lgf") const {
    conv1_.collect(out, prefix + ".conv1");
    conv2_.collect(out, prefix + ".conv2");
  }

  ParamCountReport param_count() const {
    ParamCountReport rep;
    rep.add("conv1", conv1_.param_count());
    rep.add("conv2", conv2_.param_count());
    return rep;
  }

 private:
  double leaky_slope_ = 0.01;
  Conv2dLayer<T> conv1_, conv2_;
};

/// Guided-filter linear model. p and I must have the same shape (HW or CHW;
/// CHW inputs are filtered plane by plane). All window statistics are mean
/// filters with truncated, count-normalized border windows.
template <typename T>
Var<T> guided_filter(const Var<T>& p, const Var<T>& guide, const GuidedFilterConfig<T>& cfg) {
  cfg.validate();
  require_same_shape(p.value(), guide.value(), "guided_filter");
  int r = cfg.radius;
  Var<T> mean_i = box_mean_filter(guide, r);
  Var<T> mean_p = box_mean_filter(p, r);
  Var<T> corr_i = box_mean_filter(mul(guide, guide), r);
  Var<T> corr_ip = box_mean_filter(mul(guide, p), r);
  Var<T> var_i = sub(corr_i, mul(mean_i, mean_i));
  Var<T> cov_ip = sub(corr_ip, mul(mean_i, mean_p));
  Var<T> a = div(cov_ip, adds(var_i, static_cast<double>(cfg.epsilon)));
  Var<T> b = sub(mean_p, mul(a, mean_i));
  Var<T> mean_a = box_mean_filter(a, r);
  Var<T> mean_b = box_mean_filter(b, r);
  return add(mul(mean_a, guide), mean_b);
}

/// Filter segmentation logits with the guide produced from the enhanced
/// image: channel c of F(I) guides channel c of the logits.
template <typename T>
Var<T> apply_lgf(const Var<T>& logits, const Var<T>& enhanced_img, const GuideTransform<T>& t,
                 const GuidedFilterConfig<T>& cfg) {
  const auto& ls = logits.value();
  const auto& is = enhanced_img.value();
  if (ls.rank() != 3 || is.rank() != 3)
    throw InvalidArgument("apply_lgf: CHW tensors expected");
  if (ls.dim(1) != is.dim(1) || ls.dim(2) != is.dim(2))
    throw InvalidArgument("apply_lgf: logits and image resolutions differ");
  Var<T> guide = t.forward(enhanced_img);
  if (guide.value().dim(0) != ls.dim(0))
    throw InvalidArgument("apply_lgf: guide channel count does not match scores");
  return guided_filter(logits, guide, cfg);
}

}  // namespace dialseg
