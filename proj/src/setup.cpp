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

#include "dialseg/setup.hpp"

#include <filesystem>
#include <sstream>

namespace dialseg {

namespace {

float fnum(const ConfigFile& cfg, const char* sec, const char* key, float dflt) {
  const std::string* v = cfg.find(sec, key);
  return v ? static_cast<float>(config_to_double(std::string(sec) + "." + key, *v)) : dflt;
}

long inum(const ConfigFile& cfg, const char* sec, const char* key, long dflt) {
  const std::string* v = cfg.find(sec, key);
  return v ? config_to_int(std::string(sec) + "." + key, *v) : dflt;
}

bool bnum(const ConfigFile& cfg, const char* sec, const char* key, bool dflt) {
  const std::string* v = cfg.find(sec, key);
  return v ? config_to_bool(std::string(sec) + "." + key, *v) : dflt;
}

std::string snum(const ConfigFile& cfg, const char* sec, const char* key,
                 const std::string& dflt) {
  const std::string* v = cfg.find(sec, key);
  return v ? *v : dflt;
}

FilterStage parse_stage(const std::string& name) {
  if (name == "exposure") return FilterStage::Exposure;
  if (name == "gamma") return FilterStage::Gamma;
  if (name == "contrast") return FilterStage::Contrast;
  if (name == "sharpen") return FilterStage::Sharpen;
  throw ConfigError("dif.order: unknown filter stage '" + name + "'");
}

}  // namespace

ModelConfig<float> bind_model_config(const ConfigFile& cfg) {
  ModelConfig<float> mc;

  if (const std::string* v = cfg.find("predictor", "channels")) {
    auto list = config_to_list("predictor.channels", *v);
    if (list.size() != 5) throw ConfigError("predictor.channels: exactly five blocks expected");
    for (int i = 0; i < 5; ++i) mc.predictor.channels[static_cast<size_t>(i)] = static_cast<int>(list[static_cast<size_t>(i)]);
  }
  mc.predictor.input_size = static_cast<int>(inum(cfg, "predictor", "input_size", 256));
  mc.predictor.dropout_rate = fnum(cfg, "predictor", "dropout", 0.5f);
  mc.predictor.leaky_slope = fnum(cfg, "predictor", "leaky_slope", 0.01f);

  mc.backbone.id = snum(cfg, "backbone", "id", "toy");
  if (const std::string* v = cfg.find("backbone", "encoder_channels")) {
    auto list = config_to_list("backbone.encoder_channels", *v);
    if (list.size() != 4) throw ConfigError("backbone.encoder_channels: four blocks expected");
    for (int i = 0; i < 4; ++i)
      mc.backbone.encoder_channels[static_cast<size_t>(i)] = static_cast<int>(list[static_cast<size_t>(i)]);
  }
  if (const std::string* v = cfg.find("backbone", "decoder_channels")) {
    auto list = config_to_list("backbone.decoder_channels", *v);
    if (list.size() != 2) throw ConfigError("backbone.decoder_channels: two blocks expected");
    mc.backbone.decoder_channels1 = static_cast<int>(list[0]);
    mc.backbone.decoder_channels2 = static_cast<int>(list[1]);
  }
  mc.backbone.leaky_slope = fnum(cfg, "backbone", "leaky_slope", 0.01f);

  mc.guided.radius = static_cast<int>(inum(cfg, "guided", "radius", 4));
  mc.guided.epsilon = fnum(cfg, "guided", "epsilon", 1e-2f);

  mc.ranges.exposure = {fnum(cfg, "ranges", "e_min", -2.0f), fnum(cfg, "ranges", "e_max", 2.0f)};
  mc.ranges.gamma = {fnum(cfg, "ranges", "g_min", 1.0f / 3.0f), fnum(cfg, "ranges", "g_max", 3.0f)};
  mc.ranges.alpha = {fnum(cfg, "ranges", "alpha_min", 0.0f), fnum(cfg, "ranges", "alpha_max", 1.0f)};
  mc.ranges.lambda = {fnum(cfg, "ranges", "lambda_min", 0.0f),
                      fnum(cfg, "ranges", "lambda_max", 2.0f)};

  if (const std::string* v = cfg.find("dif", "order")) {
    std::array<FilterStage, 4> order{};
    std::stringstream ss(*v);
    std::string tok;
    int i = 0;
    while (std::getline(ss, tok, ',')) {
      if (i >= 4) throw ConfigError("dif.order: exactly four stages expected");
      order[static_cast<size_t>(i++)] = parse_stage(tok);
    }
    if (i != 4) throw ConfigError("dif.order: exactly four stages expected");
    mc.dif.order = order;
  }
  mc.dif.sharpen_sigma = fnum(cfg, "dif", "sharpen_sigma", 1.0f);
  mc.dif.sharpen_radius = static_cast<int>(inum(cfg, "dif", "sharpen_radius", 2));

  std::string mode = snum(cfg, "model", "dif_mode", "adaptive");
  if (mode == "adaptive")
    mc.dif_mode = DifMode::Adaptive;
  else if (mode == "fixed")
    mc.dif_mode = DifMode::Fixed;
  else if (mode == "identity")
    mc.dif_mode = DifMode::Identity;
  else
    throw ConfigError("model.dif_mode: expected adaptive|fixed|identity");
  if (const std::string* v = cfg.find("model", "fixed_params")) {
    auto list = config_to_list("model.fixed_params", *v);
    if (list.size() != 4) throw ConfigError("model.fixed_params: expected E,G,alpha,lambda");
    mc.fixed_params = {static_cast<float>(list[0]), static_cast<float>(list[1]),
                       static_cast<float>(list[2]), static_cast<float>(list[3])};
  }
  mc.use_lgf = bnum(cfg, "model", "use_lgf", true);
  mc.use_iapm = bnum(cfg, "model", "use_iapm", true);
  return mc;
}

void bind_train_config(const ConfigFile& cfg, TrainConfig<float>& t) {
  t.base_lr = fnum(cfg, "train", "base_lr", t.base_lr);
  t.poly_power = fnum(cfg, "train", "poly_power", t.poly_power);
  t.momentum = fnum(cfg, "train", "momentum", t.momentum);
  t.weight_decay = fnum(cfg, "train", "weight_decay", t.weight_decay);
  t.batch_size = static_cast<int>(inum(cfg, "train", "batch_size", t.batch_size));
  t.max_steps = static_cast<int>(inum(cfg, "train", "max_steps", t.max_steps));
  t.seed = static_cast<uint64_t>(inum(cfg, "train", "seed", static_cast<long>(t.seed)));
  t.gen_optimizer = snum(cfg, "train", "gen_optimizer", t.gen_optimizer);
  t.disc_optimizer = snum(cfg, "train", "disc_optimizer", t.disc_optimizer);
  t.disc_lr = fnum(cfg, "train", "disc_lr", t.disc_lr);
  t.adam_beta1 = fnum(cfg, "train", "adam_beta1", t.adam_beta1);
  t.adam_beta2 = fnum(cfg, "train", "adam_beta2", t.adam_beta2);
  t.checkpoint_every = static_cast<int>(inum(cfg, "train", "checkpoint_every", t.checkpoint_every));
  t.spread_e = fnum(cfg, "train", "spread_e", t.spread_e);
  t.source_aug.crop = static_cast<int>(inum(cfg, "train", "source_crop", t.source_aug.crop));
  t.source_aug.scale_min = fnum(cfg, "train", "source_scale_min", static_cast<float>(t.source_aug.scale_min));
  t.source_aug.scale_max = fnum(cfg, "train", "source_scale_max", static_cast<float>(t.source_aug.scale_max));
  t.source_aug.flip = bnum(cfg, "train", "source_flip", t.source_aug.flip);
  t.target_aug.crop = static_cast<int>(inum(cfg, "train", "target_crop", t.target_aug.crop));
  t.target_aug.scale_min = fnum(cfg, "train", "target_scale_min", static_cast<float>(t.target_aug.scale_min));
  t.target_aug.scale_max = fnum(cfg, "train", "target_scale_max", static_cast<float>(t.target_aug.scale_max));
  t.target_aug.flip = bnum(cfg, "train", "target_flip", t.target_aug.flip);
}

void bind_loss_config(const ConfigFile& cfg, LossWeights<float>& lw) {
  lw.alpha1 = fnum(cfg, "loss", "alpha1", lw.alpha1);
  lw.alpha2 = fnum(cfg, "loss", "alpha2", lw.alpha2);
  lw.alpha3 = fnum(cfg, "loss", "alpha3", lw.alpha3);
  lw.source_label = fnum(cfg, "loss", "source_label", lw.source_label);
  lw.target_label = fnum(cfg, "loss", "target_label", lw.target_label);
}

void bind_data_config(const ConfigFile& cfg, RunnerConfig& rc) {
  rc.source_manifest = snum(cfg, "data", "source_manifest", "");
  rc.target_day_manifest = snum(cfg, "data", "target_day_manifest", "");
  rc.target_night_manifest = snum(cfg, "data", "target_night_manifest", "");
}

RunnerConfig parse_runner_config(const std::string& path) {
  ConfigFile cfg = ConfigFile::parse_file(path);
  RunnerConfig rc;
  rc.model = bind_model_config(cfg);
  bind_train_config(cfg, rc.train);
  bind_loss_config(cfg, rc.loss_weights);
  bind_data_config(cfg, rc);
  // Unknown keys are reported before any semantic validation.
  cfg.require_all_consumed();
  rc.train.validate();
  rc.loss_weights.validate();
  if (rc.source_manifest.empty()) throw ConfigError("data.source_manifest is required");
  // Manifest paths resolve relative to the config file.
  auto resolve = [&](std::string& p) {
    if (!p.empty() && p.front() != '/')
      p = (std::filesystem::path(path).parent_path() / p).string();
  };
  resolve(rc.source_manifest);
  resolve(rc.target_day_manifest);
  resolve(rc.target_night_manifest);
  return rc;
}

ModelConfig<float> parse_model_config_file(const std::string& path) {
  ConfigFile cfg = ConfigFile::parse_file(path);
  ModelConfig<float> mc = bind_model_config(cfg);
  // A training config doubles as the model config at eval/enhance time; the
  // extra sections belong to the trainer and are validated there.
  TrainConfig<float> ignored_train;
  bind_train_config(cfg, ignored_train);
  LossWeights<float> ignored_loss;
  bind_loss_config(cfg, ignored_loss);
  cfg.find("data", "source_manifest");
  cfg.find("data", "target_day_manifest");
  cfg.find("data", "target_night_manifest");
  cfg.require_all_consumed();
  return mc;
}

}  // namespace dialseg
