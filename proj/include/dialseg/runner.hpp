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

#include <string>
#include <vector>

#include "dialseg/dataio.hpp"
#include "dialseg/trainer.hpp"

namespace dialseg {

// Training-run orchestration shared by the CLI and the test suites: loads
// manifests, runs either training scheme deterministically for a seed, and
// emits metrics log, loss-curve image, and checkpoints.

struct RunnerConfig {
  enum class Mode { Supervised, Uda };
  Mode mode = Mode::Supervised;
  ModelConfig<float> model;
  TrainConfig<float> train;
  LossWeights<float> loss_weights;
  StaticConfig static_cfg;
  std::string source_manifest;
  std::string target_day_manifest;   // uda only
  std::string target_night_manifest; // uda only
  std::string out_dir;
};

struct RunResult {
  std::vector<LossRecord<float>> records;
  std::string final_checkpoint;
  ClassWeights<float> class_weights;
  // UDA only: mean discriminator score on source minus target streams,
  // measured at the end of training on center crops at the training size.
  std::optional<float> disc_gap_day, disc_gap_night;
};

RunResult run_training(const RunnerConfig& rc);

std::string format_metrics_line(const LossRecord<float>& r);
void write_metrics_log(const std::string& path, const std::vector<LossRecord<float>>& records);
void render_loss_curve(const std::string& path, const std::vector<LossRecord<float>>& records);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalFlags {
  bool use_iapm = true;
  bool use_lgf = true;
};

struct EvalOutput {
  MiouResult miou;
  std::vector<LabelMap> predictions;
  std::vector<FilterParams<float>> params;  // resolved DIF parameters per image
};

/// Full-image forward passes in evaluation mode; mIoU against the sample
/// labels (which must be present).
EvalOutput evaluate_model(const SegModel<float>& model, const std::vector<Sample>& samples,
                          EvalFlags flags = {});

std::vector<Sample> load_samples(const DatasetManifest& manifest);

SegModel<float> model_from_checkpoint(const ModelConfig<float>& cfg, const std::string& path);

/// Per-category table, one row per category plus the mean.
std::string format_miou_table(const MiouResult& r);

}  // namespace dialseg
