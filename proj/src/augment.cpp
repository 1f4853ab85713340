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

#include <algorithm>
#include <cmath>

#include "dialseg/trainer.hpp"

namespace dialseg {

namespace {

int scaled_extent(int v, double scale) {
  return std::max(1, static_cast<int>(std::lround(v * scale)));
}

}  // namespace

AugmentParams draw_augment(const AugmentCfg& cfg, int height, int width, Rng& rng) {
  AugmentParams p;
  p.scale = uniform(rng, cfg.scale_min, cfg.scale_max);
  int rh = std::max(scaled_extent(height, p.scale), cfg.crop);
  int rw = std::max(scaled_extent(width, p.scale), cfg.crop);
  p.y0 = uniform_int(rng, 0, rh - cfg.crop);
  p.x0 = uniform_int(rng, 0, rw - cfg.crop);
  p.flip = cfg.flip && uniform_int(rng, 0, 1) == 1;
  return p;
}

Image<float> apply_augment_image(const Image<float>& img, const AugmentParams& p, int crop) {
  int rh = scaled_extent(img.height(), p.scale);
  int rw = scaled_extent(img.width(), p.scale);
  Tensor<float> scaled =
      bilinear_resize(Var<float>(img.chw, false), rh, rw).value();
  Image<float> out(crop, crop);
  for (int y = 0; y < crop; ++y)
    for (int x = 0; x < crop; ++x) {
      int sy = std::clamp(p.y0 + y, 0, rh - 1);  // edge replication when short
      int sx = std::clamp(p.x0 + x, 0, rw - 1);
      int dx = p.flip ? crop - 1 - x : x;
      for (int c = 0; c < 3; ++c) out.at(c, y, dx) = scaled.at3(c, sy, sx);
    }
  return out;
}

LabelMap apply_augment_labels(const LabelMap& labels, const AugmentParams& p, int crop) {
  int rh = scaled_extent(labels.height, p.scale);
  int rw = scaled_extent(labels.width, p.scale);
  LabelMap out(crop, crop);
  for (int y = 0; y < crop; ++y)
    for (int x = 0; x < crop; ++x) {
      int sy = std::clamp(p.y0 + y, 0, rh - 1);
      int sx = std::clamp(p.x0 + x, 0, rw - 1);
      // Nearest-neighbor back to the source grid, matching the image centers.
      int oy = std::clamp(static_cast<int>((sy + 0.5) * labels.height / rh), 0, labels.height - 1);
      int ox = std::clamp(static_cast<int>((sx + 0.5) * labels.width / rw), 0, labels.width - 1);
      int dx = p.flip ? crop - 1 - x : x;
      out.at(y, dx) = labels.at(oy, ox);
    }
  return out;
}

AugmentedSample augment(const Image<float>& img, const std::optional<LabelMap>& labels,
                        const AugmentCfg& cfg, Rng& rng) {
  AugmentParams p = draw_augment(cfg, img.height(), img.width(), rng);
  AugmentedSample out;
  out.image = apply_augment_image(img, p, cfg.crop);
  if (labels) out.labels = apply_augment_labels(*labels, p, cfg.crop);
  return out;
}

}  // namespace dialseg
