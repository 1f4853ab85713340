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
#include <iostream>
#include <span>
#include <vector>

#include "dialseg/image.hpp"
#include "dialseg/nn.hpp"
#include "dialseg/ops.hpp"

namespace dialseg {

// Natural logarithm is used throughout. For the re-weighting scheme the
// choice of base cancels in the standardization, which the tests pin down.

inline constexpr double kLogFloor = 1e-30;

// ---------------------------------------------------------------------------
// Class re-weighting
// ---------------------------------------------------------------------------

template <typename T>
struct ClassWeights {
  std::vector<T> proportions;  // a_m over labeled pixels
  std::vector<T> raw;          // w'_m = -log(a_m)
  std::vector<T> weights;      // standardized: mean 1, population std e
  T spread = static_cast<T>(0.05);
};

/// Eqs: w'_m = -log(a_m); w_m = (w'_m - mean)/std * e + 1. Categories that
/// never occur get the largest observed w' and a warning. A zero spread of
/// the raw weights yields all-ones.
template <typename T>
ClassWeights<T> class_weights(std::span<const LabelMap> labels, T spread = static_cast<T>(0.05),
                              std::ostream* warn = &std::cerr) {
  std::array<size_t, kNumCategories> counts{};
  size_t total = 0;
  for (const LabelMap& lm : labels)
    for (uint8_t v : lm.ids)
      if (v != kIgnoreLabel) {
        counts[v]++;
        total++;
      }
  if (total == 0) throw InvalidArgument("class_weights: no labeled pixels");

  ClassWeights<T> cw;
  cw.spread = spread;
  cw.proportions.resize(kNumCategories, T(0));
  cw.raw.resize(kNumCategories, T(0));
  double max_raw = -std::numeric_limits<double>::infinity();
  for (int m = 0; m < kNumCategories; ++m)
    if (counts[static_cast<size_t>(m)] > 0) {
      double a = static_cast<double>(counts[static_cast<size_t>(m)]) / static_cast<double>(total);
      cw.proportions[static_cast<size_t>(m)] = static_cast<T>(a);
      cw.raw[static_cast<size_t>(m)] = static_cast<T>(-std::log(a));
      max_raw = std::max(max_raw, -std::log(a));
    }
  for (int m = 0; m < kNumCategories; ++m)
    if (counts[static_cast<size_t>(m)] == 0) {
      cw.raw[static_cast<size_t>(m)] = static_cast<T>(max_raw);
      if (warn)
        *warn << "class_weights: category " << m
              << " has no labeled pixels; assigning max raw weight\n";
    }

  double mean = 0;
  for (T v : cw.raw) mean += static_cast<double>(v);
  mean /= kNumCategories;
  double var = 0;
  for (T v : cw.raw) var += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
  var /= kNumCategories;  // population variance
  double sd = std::sqrt(var);

  cw.weights.resize(kNumCategories);
  for (int m = 0; m < kNumCategories; ++m)
    cw.weights[static_cast<size_t>(m)] =
        sd > 0 ? static_cast<T>((static_cast<double>(cw.raw[static_cast<size_t>(m)]) - mean) / sd *
                                    static_cast<double>(spread) +
                                1.0)
               : T(1);
  return cw;
}

// ---------------------------------------------------------------------------
// Weighted cross-entropy (segmentation loss)
// ---------------------------------------------------------------------------

/// L = -(1/(N*|K|)) sum_m w_m sum_i GT^(m)_i log P^(m)_i over valid pixels.
/// probs must be channel softmax output; ignore pixels contribute nothing.
template <typename T>
Var<T> weighted_ce_loss(const Var<T>& probs, const LabelMap& gt, const ClassWeights<T>& w,
                        std::ostream* warn = &std::cerr) {
  const auto& s = probs.value();
  if (s.rank() != 3 || s.dim(0) != kNumCategories)
    throw InvalidArgument("weighted_ce_loss: [19,H,W] probabilities expected");
  if (s.dim(1) != gt.height || s.dim(2) != gt.width)
    throw InvalidArgument("weighted_ce_loss: probability/label size mismatch");
  size_t plane = static_cast<size_t>(gt.height) * gt.width;
  size_t n_valid = gt.valid_pixel_count();
  if (n_valid == 0) {
    if (warn) *warn << "weighted_ce_loss: no valid pixels, returning 0\n";
    return Var<T>(Tensor<T>::scalar(T(0)));
  }
  Tensor<T> weight_map(s.shape());
  for (size_t i = 0; i < plane; ++i) {
    uint8_t c = gt.ids[i];
    if (c != kIgnoreLabel) weight_map[static_cast<size_t>(c) * plane + i] = w.weights[c];
  }
  Var<T> picked = mul_const(vlog(probs, kLogFloor), std::move(weight_map));
  return muls(sum(picked), -1.0 / (static_cast<double>(n_valid) * kNumCategories));
}

// ---------------------------------------------------------------------------
// Static loss with pseudo labels
// ---------------------------------------------------------------------------

struct StaticConfig {
  // road, sidewalk, wall, vegetation, terrain, sky in trainId space.
  std::vector<int> static_ids{0, 1, 3, 8, 9, 10};
  int window = 3;

  void validate() const {
    for (int c : static_ids)
      if (c < 0 || c >= kNumCategories) throw InvalidArgument("StaticConfig: bad category id");
    if (window != 3) throw InvalidArgument("StaticConfig: only a 3x3 match window is supported");
  }
};

/// F_td: per pixel argmax over static categories of w_m * P_td^(m).
template <typename T>
LabelMap build_pseudo_labels(const Tensor<T>& td_probs, const ClassWeights<T>& w,
                             const StaticConfig& cfg = {}) {
  cfg.validate();
  if (td_probs.rank() != 3 || td_probs.dim(0) != kNumCategories)
    throw InvalidArgument("build_pseudo_labels: [19,H,W] probabilities expected");
  int h = td_probs.dim(1), wd = td_probs.dim(2);
  size_t plane = static_cast<size_t>(h) * wd;
  LabelMap out(h, wd);
  for (size_t i = 0; i < plane; ++i) {
    T best = -std::numeric_limits<T>::infinity();
    int best_c = cfg.static_ids.front();
    for (int c : cfg.static_ids) {
      T v = w.weights[static_cast<size_t>(c)] * td_probs[static_cast<size_t>(c) * plane + i];
      if (v > best) {
        best = v;
        best_c = c;
      }
    }
    out.ids[i] = static_cast<uint8_t>(best_c);
  }
  return out;
}

/// L_static = -(1/N) sum (1 - P_tn^S) * log(tau), where tau(c,i) picks up
/// P_tn^S(c,i) whenever category c appears in the 3x3 pseudo-label window
/// around i and is masked out (contributes 0) otherwise.
template <typename T>
Var<T> static_loss(const Var<T>& tn_probs, const LabelMap& pseudo, const StaticConfig& cfg = {},
                   std::ostream* warn = &std::cerr) {
  cfg.validate();
  const auto& s = tn_probs.value();
  if (s.rank() != 3 || s.dim(0) != kNumCategories)
    throw InvalidArgument("static_loss: [19,H,W] probabilities expected");
  if (s.dim(1) != pseudo.height || s.dim(2) != pseudo.width)
    throw InvalidArgument("static_loss: probability/pseudo-label size mismatch");
  int h = pseudo.height, wd = pseudo.width;
  size_t n_valid = pseudo.valid_pixel_count();
  if (n_valid == 0) {
    if (warn) *warn << "static_loss: empty pseudo-label map, returning 0\n";
    return Var<T>(Tensor<T>::scalar(T(0)));
  }

  int ns = static_cast<int>(cfg.static_ids.size());
  Tensor<T> window_mask({ns, h, wd});
  for (int k = 0; k < ns; ++k) {
    uint8_t cat = static_cast<uint8_t>(cfg.static_ids[static_cast<size_t>(k)]);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < wd; ++x) {
        bool hit = false;
        for (int dy = -1; dy <= 1 && !hit; ++dy)
          for (int dx = -1; dx <= 1 && !hit; ++dx) {
            int yy = y + dy, xx = x + dx;
            if (yy >= 0 && yy < h && xx >= 0 && xx < wd && pseudo.at(yy, xx) == cat) hit = true;
          }
        window_mask[(static_cast<size_t>(k) * h + y) * wd + x] = hit ? T(1) : T(0);
      }
  }

  Var<T> restricted = select_channels(tn_probs, cfg.static_ids);
  Var<T> one_minus = adds(neg(restricted), 1.0);
  Var<T> term = mul_const(mul(one_minus, vlog(restricted, kLogFloor)), std::move(window_mask));
  return muls(sum(term), -1.0 / static_cast<double>(n_valid));
}

// ---------------------------------------------------------------------------
// Discriminator and least-squares adversarial losses
// ---------------------------------------------------------------------------

template <typename T>
struct DiscriminatorSpec {
  std::array<int, 5> channels{64, 128, 256, 256, 1};
  std::array<int, 5> strides{2, 2, 1, 1, 1};
  int kernel = 4;
  double leaky_slope = 0.2;
  int in_channels = kNumCategories;
};

/// Patch discriminator over segmentation probabilities; single-channel,
/// spatially downsampled score map (factor 4 from the two stride-2 blocks).
template <typename T>
class Discriminator {
 public:
  Discriminator() = default;

  Discriminator(const DiscriminatorSpec<T>& spec, Rng& rng) : spec_(spec) {
    int in = spec.in_channels;
    for (int i = 0; i < 5; ++i) {
      ConvGeom g;
      g.stride = spec.strides[static_cast<size_t>(i)];
      if (g.stride == 2) {
        g.pad_top = g.pad_left = g.pad_bottom = g.pad_right = 1;
      } else {
        // 4x4 stride-1 with size-preserving asymmetric padding.
        g.pad_top = g.pad_left = 1;
        g.pad_bottom = g.pad_right = 2;
      }
      blocks_[static_cast<size_t>(i)] =
          Conv2dLayer<T>(in, spec.channels[static_cast<size_t>(i)], spec.kernel, g, rng);
      in = spec.channels[static_cast<size_t>(i)];
    }
  }

  Var<T> forward(const Var<T>& probs) const {
    const auto& s = probs.value();
    if (s.rank() != 3 || s.dim(0) != spec_.in_channels)
      throw InvalidArgument("discriminator_forward: wrong channel count");
    Var<T> cur = probs;
    for (const auto& block : blocks_) cur = leaky_relu(block(cur), spec_.leaky_slope);
    return cur;
  }

  void collect(ParamList<T>& out, const std::string& prefix) const {
    for (size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].collect(out, prefix + ".block" + std::to_string(i + 1));
  }

  ParamCountReport param_count() const {
    ParamCountReport rep;
    for (size_t i = 0; i < blocks_.size(); ++i)
      rep.add("block" + std::to_string(i + 1), blocks_[i].param_count());
    return rep;
  }

 private:
  DiscriminatorSpec<T> spec_;
  std::array<Conv2dLayer<T>, 5> blocks_;
};

template <typename T>
struct LossWeights {
  T alpha1 = 1;
  T alpha2 = 1;
  T alpha3 = static_cast<T>(0.01);
  T source_label = 1;  // s
  T target_label = 0;  // t

  void validate() const {
    for (T v : {alpha1, alpha2, alpha3, source_label, target_label})
      if (!std::isfinite(static_cast<double>(v)))
        throw InvalidArgument("LossWeights: non-finite value");
    if (source_label == target_label)
      throw InvalidArgument("LossWeights: source and target labels must differ");
  }
};

/// Generator alignment term: (D_d(P_td)-s)^2 + (D_n(P_tn)-s)^2, patch means.
template <typename T>
Var<T> adv_generator_loss(const Var<T>& day_scores_td, const Var<T>& night_scores_tn,
                          const LossWeights<T>& lw) {
  double s = static_cast<double>(lw.source_label);
  return add(mean(sq(adds(day_scores_td, -s))), mean(sq(adds(night_scores_tn, -s))));
}

/// Discriminator term: 1/2 (D(P_s)-s)^2 + 1/2 (D(P_t)-t)^2, patch means.
template <typename T>
Var<T> adv_discriminator_loss(const Var<T>& source_scores, const Var<T>& target_scores,
                              const LossWeights<T>& lw) {
  double s = static_cast<double>(lw.source_label);
  double t = static_cast<double>(lw.target_label);
  return add(muls(mean(sq(adds(source_scores, -s))), 0.5),
             muls(mean(sq(adds(target_scores, -t))), 0.5));
}

template <typename T>
struct AdvLosses {
  Var<T> l_adv, l_d, l_n;
};

/// All three LSGAN terms. The generator term flows through the live score
/// maps; the discriminator terms take scores computed on detached inputs.
template <typename T>
AdvLosses<T> adversarial_losses(const Var<T>& dd_td, const Var<T>& dn_tn, const Var<T>& dd_src_det,
                                const Var<T>& dd_td_det, const Var<T>& dn_src_det,
                                const Var<T>& dn_tn_det, const LossWeights<T>& lw) {
  lw.validate();
  AdvLosses<T> out;
  out.l_adv = adv_generator_loss(dd_td, dn_tn, lw);
  out.l_d = adv_discriminator_loss(dd_src_det, dd_td_det, lw);
  out.l_n = adv_discriminator_loss(dn_src_det, dn_tn_det, lw);
  return out;
}

/// alpha1*L_seg + alpha2*L_static + alpha3*L_adv.
template <typename T>
Var<T> total_loss(const Var<T>& l_seg, const Var<T>& l_static, const Var<T>& l_adv,
                  const LossWeights<T>& lw) {
  auto check = [](const Var<T>& v, const char* name) {
    if (!v.value().all_finite())
      throw NumericFailure(std::string("total_loss: non-finite component ") + name);
  };
  check(l_seg, "L_seg");
  check(l_static, "L_static");
  check(l_adv, "L_adv");
  return add(add(muls(l_seg, static_cast<double>(lw.alpha1)),
                 muls(l_static, static_cast<double>(lw.alpha2))),
             muls(l_adv, static_cast<double>(lw.alpha3)));
}

}  // namespace dialseg
