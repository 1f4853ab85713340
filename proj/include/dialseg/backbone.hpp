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
#include <string>

#include "dialseg/image.hpp"
#include "dialseg/nn.hpp"
#include "dialseg/ops.hpp"

namespace dialseg {

/// Pluggable segmentation backbone description. The shipped "toy"
/// encoder-decoder is sized for desk-scale training; heavier backbones can be
/// registered behind the same interface later.
template <typename T>
struct BackboneSpec {
  std::string id = "toy";
  std::array<int, 4> encoder_channels{16, 32, 64, 128};
  int decoder_channels1 = 64;
  int decoder_channels2 = 32;
  double leaky_slope = 0.01;
  int num_classes = kNumCategories;
};

/// Four stride-2 conv blocks, two transposed-conv upsampling blocks, a 1x1
/// head, and a bilinear upsample back to the input resolution.
template <typename T>
class ToyBackbone {
 public:
  ToyBackbone() = default;

  ToyBackbone(const BackboneSpec<T>& spec, Rng& rng) : spec_(spec) {
    if (spec.id != "toy") throw ConfigError("unsupported backbone id: " + spec.id);
    int in = 3;
    for (int i = 0; i < 4; ++i) {
      ConvGeom g;
      g.stride = 2;
      g.pad_top = g.pad_left = g.pad_bottom = g.pad_right = 1;
      enc_[static_cast<size_t>(i)] =
          Conv2dLayer<T>(in, spec.encoder_channels[static_cast<size_t>(i)], 3, g, rng);
      in = spec.encoder_channels[static_cast<size_t>(i)];
    }
    up1_ = ConvTranspose2dLayer<T>(in, spec.decoder_channels1, 2, 2, rng);
    up2_ = ConvTranspose2dLayer<T>(spec.decoder_channels1, spec.decoder_channels2, 2, 2, rng);
    ConvGeom g1x1;
    head_ = Conv2dLayer<T>(spec.decoder_channels2, spec.num_classes, 1, g1x1, rng);
  }

  const BackboneSpec<T>& spec() const { return spec_; }

  /// Logits [K,H,W] at the input resolution.
  Var<T> forward(const Var<T>& img) const {
    const auto& s = img.value();
    if (s.rank() != 3 || s.dim(0) != 3) throw InvalidArgument("backbone_forward: [3,H,W] expected");
    int h = s.dim(1), w = s.dim(2);
    Var<T> cur = img;
    for (const auto& block : enc_) cur = leaky_relu(block(cur), spec_.leaky_slope);
    cur = leaky_relu(up1_(cur), spec_.leaky_slope);
    cur = leaky_relu(up2_(cur), spec_.leaky_slope);
    cur = head_(cur);
    return bilinear_resize(cur, h, w);
  }

  void collect(ParamList<T>& out, const std::string& prefix = "backbone") const {
    for (size_t i = 0; i < enc_.size(); ++i)
      enc_[i].collect(out, prefix + ".enc" + std::to_string(i + 1));
    up1_.collect(out, prefix + ".up1");
    up2_.collect(out, prefix + ".up2");
    head_.collect(out, prefix + ".head");
  }

  ParamCountReport param_count() const {
    ParamCountReport rep;
    for (size_t i = 0; i < enc_.size(); ++i)
      rep.add("enc" + std::to_string(i + 1), enc_[i].param_count());
    rep.add("up1", up1_.param_count());
    rep.add("up2", up2_.param_count());
    rep.add("head", head_.param_count());
    return rep;
  }

 private:
  BackboneSpec<T> spec_;
  std::array<Conv2dLayer<T>, 4> enc_;
  ConvTranspose2dLayer<T> up1_, up2_;
  Conv2dLayer<T> head_;
};

}  // namespace dialseg
