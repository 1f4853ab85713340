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

// Training-dynamics checks on the 10-image synthetic set: the backbone
// overfit floor, the supervised loss-decrease example, the dark-vs-bright
// exposure direction, and discriminator separation on a frozen generator.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>

#include "dialseg/runner.hpp"
#include "oracles.hpp"

using namespace dialseg;
namespace fs = std::filesystem;

#ifndef DIALSEG_CLI_PATH
#define DIALSEG_CLI_PATH "dialseg"
#endif

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& rel = "") const { return (path / rel).string(); }
};

int cli(const std::string& args, const std::string& log) {
  std::string cmd = std::string(DIALSEG_CLI_PATH) + " " + args + " >" + log + " 2>&1";
  int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

double pixel_accuracy(const LabelMap& pred, const LabelMap& gt) {
  size_t hit = 0, total = 0;
  for (size_t i = 0; i < gt.ids.size(); ++i) {
    if (gt.ids[i] == kIgnoreLabel) continue;
    total++;
    hit += pred.ids[i] == gt.ids[i];
  }
  return total ? static_cast<double>(hit) / total : 0.0;
}

}  // namespace

TEST_CASE("toy backbone overfits 10 images to >= 95% pixel accuracy within 500 steps") {
  TempDir dir("dialseg_overfit");
  SynthPaths data = synth_dataset(10, 21, dir.str("data"), 128);

  RunnerConfig rc;
  rc.mode = RunnerConfig::Mode::Supervised;
  rc.model.dif_mode = DifMode::Identity;
  rc.model.use_lgf = false;
  rc.model.use_iapm = false;
  rc.train.base_lr = 2.0f;  // from-scratch toy scale; decay would starve it
  rc.train.weight_decay = 0.0f;
  rc.train.max_steps = 500;
  rc.train.batch_size = 4;
  rc.train.seed = 2;
  // Pure memorization: full frames, no scale/crop/flip jitter.
  rc.train.source_aug = {128, 1.0, 1.0, false};
  rc.train.checkpoint_every = 0;
  rc.source_manifest = data.eval_day;
  rc.out_dir = dir.str("run");
  RunResult res = run_training(rc);

  SegModel<float> model = model_from_checkpoint(rc.model, res.final_checkpoint);
  DatasetManifest m = load_manifest(data.eval_day, DatasetRole::Eval);
  std::vector<Sample> samples = load_samples(m);
  double acc = 0;
  SegModel<float>::ForwardOptions fwd;
  fwd.use_iapm = false;
  fwd.use_lgf = false;
  for (const auto& s : samples) {
    auto f = model.forward(s.image.chw, fwd);
    acc += pixel_accuracy(argmax_labels(f.logits.value()), *s.labels);
  }
  acc /= static_cast<double>(samples.size());
  INFO("training-set pixel accuracy ", acc);
  CHECK(acc >= 0.95);
}

TEST_CASE("cmd_train supervised on 10 images: final loss < 0.5x initial") {
  TempDir dir("dialseg_decrease");
  SynthPaths data = synth_dataset(10, 31, dir.str("data"), 128);
  {
    std::ofstream cfg(dir.str("run.cfg"));
    cfg << "[data]\nsource_manifest = " << data.eval_mixed << "\n"
        << "[train]\nmax_steps = 200\nbatch_size = 4\nseed = 3\nbase_lr = 1.0\n"
        << "weight_decay = 0\nsource_crop = 64\ncheckpoint_every = 0\n"
        << "[predictor]\ninput_size = 64\ndropout = 0.15\n";
  }
  REQUIRE(cli("train --mode supervised --config " + dir.str("run.cfg") + " --out " +
                  dir.str("out"),
              dir.str("train.log")) == 0);
  std::ifstream log(dir.str("out/metrics.log"));
  REQUIRE(log.good());
  double first_loss = -1, last_loss = -1;
  std::string line;
  while (std::getline(log, line)) {
    std::istringstream ss(line);
    long step;
    double lr, l;
    ss >> step >> lr >> l;
    if (first_loss < 0) first_loss = l;
    last_loss = l;
  }
  INFO("initial ", first_loss, " final ", last_loss);
  CHECK(last_loss < 0.5 * first_loss);
}

TEST_CASE("trained predictor brightens dark inputs more than bright inputs") {
  TempDir dir("dialseg_edir");
  SynthPaths data = synth_dataset(12, 41, dir.str("data"), 128);
  RunnerConfig rc;
  rc.mode = RunnerConfig::Mode::Supervised;
  rc.model.predictor.input_size = 64;
  rc.model.predictor.dropout_rate = 0.15f;
  rc.train.base_lr = 1.0f;
  rc.train.weight_decay = 0.0f;
  rc.train.max_steps = 400;
  rc.train.batch_size = 4;
  rc.train.seed = 5;
  rc.train.source_aug = {64, 0.5, 1.0, true};
  rc.train.checkpoint_every = 0;
  rc.source_manifest = data.eval_mixed;
  rc.out_dir = dir.str("run");
  RunResult res = run_training(rc);

  SegModel<float> model = model_from_checkpoint(rc.model, res.final_checkpoint);
  auto mean_e = [&](const std::string& manifest) {
    DatasetManifest m = load_manifest(manifest, DatasetRole::Eval);
    std::vector<Sample> samples = load_samples(m);
    EvalOutput out = evaluate_model(model, samples);
    double acc = 0;
    for (const auto& p : out.params) acc += static_cast<double>(p.exposure);
    return acc / static_cast<double>(out.params.size());
  };
  double e_night = mean_e(data.eval_night);
  double e_day = mean_e(data.eval_day);
  INFO("mean E night ", e_night, " day ", e_day);
  CHECK(e_night > e_day);
}

TEST_CASE("discriminator trained on a frozen generator separates source from night") {
  TempDir dir("dialseg_dsep");
  SynthPaths data = synth_dataset(8, 51, dir.str("data"), 64);
  Rng rng(6);
  ModelConfig<float> mc;
  mc.predictor.input_size = 64;
  SegModel<float> model(mc, 77);  // frozen, untrained generator

  DatasetManifest src_m = load_manifest(data.source, DatasetRole::Source);
  DatasetManifest tn_m = load_manifest(data.target_night, DatasetRole::TargetNight);
  std::vector<Sample> src = load_samples(src_m);
  std::vector<Sample> tn = load_samples(tn_m);

  // Precompute probabilities once; the generator never updates.
  std::vector<Tensor<float>> src_probs, tn_probs;
  for (const auto& s : src) src_probs.push_back(model.forward(s.image.chw, {}).probs.value());
  for (const auto& s : tn) tn_probs.push_back(model.forward(s.image.chw, {}).probs.value());

  Discriminator<float> disc(DiscriminatorSpec<float>{}, rng);
  ParamList<float> dp;
  disc.collect(dp, "d");
  AdamOptimizer<float> opt;
  LossWeights<float> lw;

  auto mean_gap = [&] {
    double s_mean = 0, t_mean = 0;
    for (const auto& p : src_probs) {
      Var<float> sc = disc.forward(Var<float>(p));
      s_mean += sc.value().sum_value() / sc.value().size();
    }
    for (const auto& p : tn_probs) {
      Var<float> sc = disc.forward(Var<float>(p));
      t_mean += sc.value().sum_value() / sc.value().size();
    }
    return s_mean / src_probs.size() - t_mean / tn_probs.size();
  };

  double gap_before = mean_gap();
  for (int step = 0; step < 100; ++step) {
    zero_grads(dp);
    size_t i = static_cast<size_t>(step) % src_probs.size();
    Var<float> loss = adv_discriminator_loss(disc.forward(Var<float>(src_probs[i])),
                                             disc.forward(Var<float>(tn_probs[i % tn_probs.size()])),
                                             lw);
    loss.backward();
    opt.step(dp, 2.5e-4f, 0.9f, 0.99f);
  }
  double gap_after = mean_gap();
  INFO("gap before ", gap_before, " after ", gap_after);
  CHECK(gap_after > gap_before);
  CHECK(gap_after > 0.0);
}
