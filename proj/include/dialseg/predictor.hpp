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

#include "dialseg/nn.hpp"
#include "dialseg/ops.hpp"

namespace dialseg {

/// CNN-PP: small parameter predictor consuming a fixed-size downsample of the
/// working image and emitting the 4 raw filter hyperparameters.
template <typename T>
struct PredictorConfig {
  std::array<int, 5> channels{16, 32, 64, 128, 128};
  int kernel = 3;
  int stride = 2;
  double leaky_slope = 0.01;
  double dropout_rate = 0.5;  // applied to the head input during training
  int input_size = 256;       // bilinear downsample target fed to the network
  int output_dim = 4;
};

template <typename T>
class ParamPredictor {
 public:
  ParamPredictor() = default;

  ParamPredictor(const PredictorConfig<T>& cfg, Rng& rng) : cfg_(cfg) {
    int in = 3;
    for (int i = 0; i < 5; ++i) {
      ConvGeom g;
      g.stride = cfg.stride;
      g.pad_top = g.pad_left = g.pad_bottom = g.pad_right = (cfg.kernel - 1) / 2;
      blocks_[static_cast<size_t>(i)] = Conv2dLayer<T>(in, cfg.channels[static_cast<size_t>(i)],
                                                       cfg.kernel, g, rng);
      in = cfg.channels[static_cast<size_t>(i)];
    }
    head_ = LinearLayer<T>(in, cfg.output_dim, rng);
    // Zero-initialized head: training starts from near-identity filtering.
    head_.zero_init();
  }

  const PredictorConfig<T>& config() const { return cfg_; }

  /// img must already be the bilinear downsample at cfg.input_size.
  Var<T> forward(const Var<T>& img, bool training = false, Rng* dropout_rng = nullptr) const {
    const auto& s = img.value();
    if (s.rank() != 3 || s.dim(0) != 3 || s.dim(1) != cfg_.input_size ||
        s.dim(2) != cfg_.input_size)
      throw InvalidArgument("predict_filter_params: input must be 3x" +
                            std::to_string(cfg_.input_size) + "x" +
                            std::to_string(cfg_.input_size));
    Var<T> cur = img;
    for (const auto& block : blocks_) cur = leaky_relu(block(cur), cfg_.leaky_slope);
    Var<T> pooled = global_avg_pool(cur);
    if (training && dropout_rng) pooled = dropout(pooled, cfg_.dropout_rate, true, *dropout_rng);
    Var<T> raw = head_(pooled);
    if (!raw.value().all_finite())
      throw NumericFailure("predict_filter_params: non-finite output");
    return raw;
  }

  void collect(ParamList<T>& out, const std::string& prefix = "cnnpp") const {
    for (size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].collect(out, prefix + ".block" + std::to_string(i + 1));
    head_.collect(out, prefix + ".head");
  }

  ParamCountReport param_count() const {
    ParamCountReport rep;
    for (size_t i = 0; i < blocks_.size(); ++i)
      rep.add("block" + std::to_string(i + 1), blocks_[i].param_count());
    rep.add("head", head_.param_count());
    return rep;
  }

  LinearLayer<T>& head() { return head_; }

 private:
  PredictorConfig<T> cfg_;
  std::array<Conv2dLayer<T>, 5> blocks_;
  LinearLayer<T> head_;
};

}  // namespace dialseg
