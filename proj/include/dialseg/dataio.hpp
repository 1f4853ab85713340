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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dialseg/image.hpp"
#include "dialseg/nn.hpp"

namespace dialseg {

// ---------------------------------------------------------------------------
// Manifests and samples
// ---------------------------------------------------------------------------

enum class DatasetRole { Source, TargetDay, TargetNight, Eval };

/// One tab-separated manifest line: image-path, label-path-or-dash,
/// pair-key-or-dash. Paths are resolved against the manifest's directory.
struct ManifestEntry {
  std::string image_path;
  std::string label_path;  // empty when absent
  std::string pair_key;    // empty when absent
};

struct DatasetManifest {
  std::string root;
  std::string split;
  DatasetRole role = DatasetRole::Source;
  std::vector<ManifestEntry> entries;
};

DatasetManifest load_manifest(const std::string& path, DatasetRole role);
void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

struct Sample {
  Image<float> image;
  std::optional<LabelMap> labels;
};

/// Decode one entry; image scaled to [0,1], labels passed through unchanged.
Sample load_sample(const ManifestEntry& entry);

/// Standard Cityscapes raw-id -> trainId remapping (unlisted ids -> 255).
LabelMap remap_cityscapes_ids(const LabelMap& raw);

// ---------------------------------------------------------------------------
// Synthetic desk-scale dataset
// ---------------------------------------------------------------------------

struct SynthPaths {
  std::string dir;
  std::string source;        // day images with labels
  std::string target_day;    // day images, pair keys
  std::string target_night;  // night images, pair keys
  std::string eval_day;      // day images with labels
  std::string eval_night;    // night images with labels
  std::string eval_mixed;    // alternating day/night with labels
};

/// Procedurally renders n paired day/night scenes with shared labels over the
/// 19-category taxonomy and writes images plus the manifests above.
SynthPaths synth_dataset(int n, uint64_t seed, const std::string& dir, int size = 128);

// ---------------------------------------------------------------------------
// Metric
// ---------------------------------------------------------------------------

struct MiouResult {
  std::array<double, kNumCategories> iou{};
  std::array<bool, kNumCategories> present{};  // in prediction or GT
  double mean = 0.0;
};

/// IoU_m = TP/(TP+FP+FN) with ignore pixels excluded; categories absent from
/// both prediction and ground truth are excluded from the mean.
MiouResult compute_miou(std::span<const LabelMap> preds, std::span<const LabelMap> gts);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'D', 'I', 'A', 'L', 'C', 'K', 'P', 'T'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointRecord {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

struct CheckpointData {
  std::vector<CheckpointRecord> records;
  size_t total_params() const {
    size_t n = 0;
    for (const auto& r : records) n += r.data.size();
    return n;
  }
  const CheckpointRecord* find(const std::string& name) const {
    for (const auto& r : records)
      if (r.name == name) return &r;
    return nullptr;
  }
};

void save_checkpoint(const std::string& path, const ParamList<float>& params);
CheckpointData read_checkpoint(const std::string& path);

/// Strict load: every model tensor must be present with a matching shape.
/// The model is only mutated after the whole file validates.
void load_checkpoint(const std::string& path, ParamList<float>& params);

// ---------------------------------------------------------------------------
// Overlay palette (fixed 19-color table, documented in the README)
// ---------------------------------------------------------------------------

struct Rgb8 {
  uint8_t r, g, b;
};

const std::array<Rgb8, kNumCategories>& category_palette();
const std::array<const char*, kNumCategories>& category_names();

/// Prediction blended over the input (alpha = blend weight of the palette).
Image<float> make_overlay(const Image<float>& base, const LabelMap& pred, float alpha = 0.55f);

}  // namespace dialseg
