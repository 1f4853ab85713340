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

#include <cstdint>
#include <vector>

#include "dialseg/tensor.hpp"

namespace dialseg {

inline constexpr int kNumCategories = 19;
inline constexpr uint8_t kIgnoreLabel = 255;

/// RGB raster in [0,1], stored CHW with fixed channel order R,G,B.
template <typename T>
struct Image {
  Tensor<T> chw;  // [3, H, W]

  Image() = default;
  Image(int height, int width, T fill = T(0)) : chw(Tensor<T>({3, height, width}, fill)) {}

  static Image from_tensor(Tensor<T> t) {
    if (t.rank() != 3 || t.dim(0) != 3) throw InvalidArgument("Image: [3,H,W] tensor expected");
    Image img;
    img.chw = std::move(t);
    img.clamp_unit();
    return img;
  }

  int height() const { return chw.dim(1); }
  int width() const { return chw.dim(2); }
  bool empty() const { return chw.empty(); }

  T& at(int c, int y, int x) { return chw.at3(c, y, x); }
  T at(int c, int y, int x) const { return chw.at3(c, y, x); }

  void clamp_unit() {
    for (size_t i = 0; i < chw.size(); ++i)
      chw[i] = chw[i] < T(0) ? T(0) : (chw[i] > T(1) ? T(1) : chw[i]);
  }

  T mean_intensity() const { return chw.sum_value() / static_cast<T>(chw.size()); }
};

/// Per-pixel category ids in trainId space: {0..18} or 255 (ignore).
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> ids;

  LabelMap() = default;
  LabelMap(int h, int w, uint8_t fill = kIgnoreLabel)
      : height(h), width(w), ids(static_cast<size_t>(h) * w, fill) {}

  uint8_t& at(int y, int x) { return ids[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return ids[static_cast<size_t>(y) * width + x]; }
  size_t size() const { return ids.size(); }

  void validate() const {
    for (uint8_t v : ids)
      if (v >= kNumCategories && v != kIgnoreLabel)
        throw DataError("label map has invalid category id " + std::to_string(int(v)));
  }

  size_t valid_pixel_count() const {
    size_t n = 0;
    for (uint8_t v : ids) n += (v != kIgnoreLabel);
    return n;
  }
};

}  // namespace dialseg
