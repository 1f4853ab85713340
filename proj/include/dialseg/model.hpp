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

#include "dialseg/backbone.hpp"
#include "dialseg/filters.hpp"
#include "dialseg/guided.hpp"
#include "dialseg/predictor.hpp"

namespace dialseg {

enum class DifMode { Adaptive, Fixed, Identity };

template <typename T>
struct ModelConfig {
  PredictorConfig<T> predictor;
  BackboneSpec<T> backbone;
  GuidedFilterConfig<T> guided;
  FilterRanges<T> ranges;
  DifConfig<T> dif;
  DifMode dif_mode = DifMode::Adaptive;
  FilterParams<T> fixed_params;  // used when dif_mode == Fixed
  bool use_iapm = true;
  bool use_lgf = true;
};

/// The full segmentation stack: IAPM (CNN-PP + DIF), backbone, LGF. One
/// parameter set regardless of how many streams share it in a step.
template <typename T>
class SegModel {
 public:
  ModelConfig<T> cfg;

  SegModel(const ModelConfig<T>& config, uint64_t seed) : cfg(config) {
    cfg.ranges.validate();
    cfg.guided.validate();
    Rng rng(seed);
    predictor = ParamPredictor<T>(cfg.predictor, rng);
    backbone = ToyBackbone<T>(cfg.backbone, rng);
    guide = GuideTransform<T>(rng);
  }

  struct ForwardOptions {
    bool training = false;
    Rng* dropout_rng = nullptr;
    bool use_iapm = true;
    bool use_lgf = true;
  };

  struct Forward {
    Var<T> enhanced;               // DIF output (input when bypassed)
    Var<T> logits_pre;             // backbone logits
    Var<T> logits;                 // post-LGF logits
    Var<T> probs;                  // softmax over categories
    FilterParams<T> params_used;   // resolved filter parameters
    bool adaptive = false;
  };

  Forward forward(const Var<T>& image, const ForwardOptions& opt) const {
    Forward f;
    Var<T> enhanced = image;
    f.params_used = FilterParams<T>::identity();
    if (opt.use_iapm && cfg.use_iapm && cfg.dif_mode != DifMode::Identity) {
      if (cfg.dif_mode == DifMode::Adaptive) {
        Var<T> down = bilinear_resize(image, cfg.predictor.input_size, cfg.predictor.input_size);
        Var<T> raw = predictor.forward(down, opt.training, opt.dropout_rng);
        FilterParamVars<T> params = squash_params(raw, cfg.ranges);
        enhanced = apply_dif(image, params, cfg.dif);
        f.params_used = params.values();
        f.adaptive = true;
      } else {
        validate_params(cfg.fixed_params, cfg.ranges);
        enhanced = apply_dif(image, FilterParamVars<T>::constants(cfg.fixed_params), cfg.dif);
        f.params_used = cfg.fixed_params;
      }
    }
    f.enhanced = enhanced;
    f.logits_pre = backbone.forward(enhanced);
    f.logits = (opt.use_lgf && cfg.use_lgf) ? apply_lgf(f.logits_pre, enhanced, guide, cfg.guided)
                                            : f.logits_pre;
    f.probs = softmax_channels(f.logits);
    return f;
  }

  Forward forward(const Tensor<T>& image_chw, const ForwardOptions& opt) const {
    return forward(Var<T>(image_chw, false), opt);
  }

  /// Parameters the generator optimizer trains under the current mode.
  ParamList<T> trainable_parameters() const {
    ParamList<T> out;
    if (cfg.use_iapm && cfg.dif_mode == DifMode::Adaptive) predictor.collect(out, "cnnpp");
    backbone.collect(out, "backbone");
    if (cfg.use_lgf) guide.collect(out, "lgf");
    return out;
  }

  /// Every parameter (checkpoint layout), independent of ablation flags.
  ParamList<T> all_parameters() const {
    ParamList<T> out;
    predictor.collect(out, "cnnpp");
    backbone.collect(out, "backbone");
    guide.collect(out, "lgf");
    return out;
  }

  ParamPredictor<T> predictor;
  ToyBackbone<T> backbone;
  GuideTransform<T> guide;
};

/// Per-pixel argmax over the category axis.
template <typename T>
LabelMap argmax_labels(const Tensor<T>& scores) {
  if (scores.rank() != 3) throw InvalidArgument("argmax_labels: CHW tensor expected");
  int k = scores.dim(0), h = scores.dim(1), w = scores.dim(2);
  size_t plane = static_cast<size_t>(h) * w;
  LabelMap out(h, w);
  for (size_t i = 0; i < plane; ++i) {
    T best = scores[i];
    int best_c = 0;
    for (int c = 1; c < k; ++c) {
      T v = scores[static_cast<size_t>(c) * plane + i];
      if (v > best) {
        best = v;
        best_c = c;
      }
    }
    out.ids[i] = static_cast<uint8_t>(best_c);
  }
  return out;
}

}  // namespace dialseg
