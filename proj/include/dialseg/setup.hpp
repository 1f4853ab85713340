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

#include "dialseg/config.hpp"
#include "dialseg/runner.hpp"

namespace dialseg {

/// Bind a parsed config file onto the runner structures. Every
/// TrainConfig / FilterRanges / GuidedFilterConfig field is addressable;
/// unknown keys raise ConfigError (checked by the caller via
/// require_all_consumed after both model and train sections are bound).
ModelConfig<float> bind_model_config(const ConfigFile& cfg);
void bind_train_config(const ConfigFile& cfg, TrainConfig<float>& train);
void bind_loss_config(const ConfigFile& cfg, LossWeights<float>& lw);
void bind_data_config(const ConfigFile& cfg, RunnerConfig& rc);

/// Full training setup: model + train + loss + data, with strict key checking.
RunnerConfig parse_runner_config(const std::string& path);

/// Model-only setup (enhance/eval); strict key checking over model sections.
ModelConfig<float> parse_model_config_file(const std::string& path);

}  // namespace dialseg
