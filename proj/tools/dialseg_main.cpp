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

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dialseg/gradsuite.hpp"
#include "dialseg/imageio.hpp"
#include "dialseg/runner.hpp"
#include "dialseg/setup.hpp"

namespace fs = std::filesystem;
using namespace dialseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

void write_text_atomic(const std::string& path, const std::string& text) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp + " for writing");
    out << text;
    if (!out) throw DataError("failed writing " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move temp file onto " + path);
}

const char* stage_name(FilterStage s) {
  switch (s) {
    case FilterStage::Exposure: return "exposure";
    case FilterStage::Gamma: return "gamma";
    case FilterStage::Contrast: return "contrast";
    case FilterStage::Sharpen: return "sharpen";
  }
  return "?";
}

FilterParams<float> parse_params_csv(const std::string& csv) {
  auto list = config_to_list("--params", csv);
  if (list.size() != 4) throw InvalidArgument("--params expects E,G,alpha,lambda");
  return {static_cast<float>(list[0]), static_cast<float>(list[1]), static_cast<float>(list[2]),
          static_cast<float>(list[3])};
}

std::vector<fs::path> list_images(const std::string& dir) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    if (ext == ".ppm" || ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .ppm/.png images in " + dir);
  return files;
}

int cmd_enhance(const std::string& input_dir, const std::string& output_dir,
                const std::string& checkpoint, const std::string& params_csv,
                const std::string& config_path) {
  ModelConfig<float> mc =
      config_path.empty() ? ModelConfig<float>{} : parse_model_config_file(config_path);
  bool fixed = !params_csv.empty();
  if (fixed) {
    mc.dif_mode = DifMode::Fixed;
    mc.fixed_params = parse_params_csv(params_csv);
    validate_params(mc.fixed_params, mc.ranges);
  }
  SegModel<float> model =
      fixed ? SegModel<float>(mc, 0) : model_from_checkpoint(mc, checkpoint);

  fs::create_directories(output_dir);
  std::vector<fs::path> files = list_images(input_dir);
  double sum_e = 0;
  for (const fs::path& file : files) {
    Image<float> img = read_image(file.string());
    Var<float> input(img.chw, false);

    FilterParamVars<float> params;
    if (mc.dif_mode == DifMode::Adaptive) {
      Var<float> down = bilinear_resize(input, mc.predictor.input_size, mc.predictor.input_size);
      params = squash_params(model.predictor.forward(down), mc.ranges);
    } else {
      params = FilterParamVars<float>::constants(mc.fixed_params);
    }
    DifStages<float> stages = apply_dif_stages(input, params, mc.dif, &mc.ranges);

    std::string stem = file.stem().string();
    for (size_t i = 0; i < stages.order.size(); ++i) {
      Image<float> stage_img = Image<float>::from_tensor(stages.after_stage[i].value());
      write_ppm((fs::path(output_dir) / (stem + "_" + std::to_string(i + 1) + "_" +
                                         stage_name(stages.order[i]) + ".ppm"))
                    .string(),
                stage_img);
    }
    Image<float> enhanced = Image<float>::from_tensor(stages.output.value());
    write_ppm((fs::path(output_dir) / (stem + "_enhanced.ppm")).string(), enhanced);

    FilterParams<float> v = params.values();
    sum_e += v.exposure;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "E %.6f\nG %.6f\nalpha %.6f\nlambda %.6f\n",
                  static_cast<double>(v.exposure), static_cast<double>(v.gamma),
                  static_cast<double>(v.alpha), static_cast<double>(v.lambda));
    std::ofstream rec((fs::path(output_dir) / (stem + "_params.txt")).string(), std::ios::trunc);
    rec << buf;
    std::printf("%s  E=%.4f G=%.4f alpha=%.4f lambda=%.4f\n", file.filename().string().c_str(),
                static_cast<double>(v.exposure), static_cast<double>(v.gamma),
                static_cast<double>(v.alpha), static_cast<double>(v.lambda));
  }
  std::printf("enhanced %zu images; mean E = %.4f\n", files.size(),
              sum_e / static_cast<double>(files.size()));
  return kExitOk;
}

int cmd_train(const std::string& mode, const std::string& config_path, const std::string& out) {
  RunnerConfig rc = parse_runner_config(config_path);
  if (mode == "supervised")
    rc.mode = RunnerConfig::Mode::Supervised;
  else if (mode == "uda")
    rc.mode = RunnerConfig::Mode::Uda;
  else
    throw ConfigError("--mode expects supervised|uda");
  rc.out_dir = out;
  RunResult res = run_training(rc);
  const LossRecord<float>& last = res.records.back();
  std::printf("trained %zu steps; final %s\n", res.records.size(),
              format_metrics_line(last).c_str());
  std::printf("checkpoint: %s\n", res.final_checkpoint.c_str());
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& manifest, const std::string& out,
             bool no_lgf, bool no_iapm, const std::string& config_path) {
  ModelConfig<float> mc =
      config_path.empty() ? ModelConfig<float>{} : parse_model_config_file(config_path);
  SegModel<float> model = model_from_checkpoint(mc, checkpoint);
  DatasetManifest m = load_manifest(manifest, DatasetRole::Eval);
  std::vector<Sample> samples = load_samples(m);
  EvalFlags flags;
  flags.use_lgf = !no_lgf;
  flags.use_iapm = !no_iapm;
  EvalOutput res = evaluate_model(model, samples, flags);

  std::string table = format_miou_table(res.miou);
  std::fputs(table.c_str(), stdout);
  fs::create_directories(out);
  {
    std::ofstream f((fs::path(out) / "miou.txt").string(), std::ios::trunc);
    f << table;
  }
  for (size_t i = 0; i < samples.size(); ++i) {
    std::string stem = fs::path(m.entries[i].image_path).stem().string();
    write_ppm((fs::path(out) / ("overlay_" + stem + ".ppm")).string(),
              make_overlay(samples[i].image, res.predictions[i]));
  }
  return kExitOk;
}

int cmd_gradcheck(const std::string& module, const std::string& corrupt) {
  std::vector<GradSuiteEntry> results = run_grad_suite(module, corrupt);
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("%-16s worst %.3e  tol %.0e  %s\n", r.op.c_str(), r.worst, r.tolerance,
                r.passed ? "PASS" : "FAIL");
    all_pass = all_pass && r.passed;
  }
  if (!all_pass) {
    for (const auto& r : results)
      if (!r.passed) std::fprintf(stderr, "gradcheck failed: %s\n", r.op.c_str());
    return kExitNumeric;
  }
  return kExitOk;
}

int cmd_synth(const std::string& out, int count, long seed, int size) {
  SynthPaths p = synth_dataset(count, static_cast<uint64_t>(seed), out, size);
  std::printf("wrote %d day/night pairs under %s\n", count, p.dir.c_str());
  std::printf("manifests: %s %s %s\n", p.source.c_str(), p.target_day.c_str(),
              p.target_night.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dialseg: image-adaptive differentiable filtering for driving-scene segmentation"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate the synthetic day/night dataset");
  std::string synth_out;
  int synth_count = 20;
  long synth_seed = 1;
  int synth_size = 128;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--count", synth_count, "number of day/night pairs");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--size", synth_size, "image side length");

  auto* enhance = app.add_subcommand("enhance", "run the image filters over a directory");
  std::string enh_in, enh_out, enh_ckpt, enh_params, enh_cfg;
  enhance->add_option("--input", enh_in, "input image directory")->required();
  enhance->add_option("--output", enh_out, "output directory")->required();
  enhance->add_option("--checkpoint", enh_ckpt, "checkpoint with predictor weights");
  enhance->add_option("--params", enh_params, "fixed E,G,alpha,lambda (bypasses the predictor)");
  enhance->add_option("--config", enh_cfg, "model config file");

  auto* train = app.add_subcommand("train", "train supervised or unsupervised");
  std::string train_mode, train_cfg, train_out;
  train->add_option("--mode", train_mode, "supervised|uda")->required();
  train->add_option("--config", train_cfg, "run config file")->required();
  train->add_option("--out", train_out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
  std::string eval_ckpt, eval_manifest, eval_out, eval_cfg;
  bool no_lgf = false, no_iapm = false;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--manifest", eval_manifest, "evaluation manifest")->required();
  eval->add_option("--out", eval_out, "output directory")->required();
  eval->add_flag("--no-lgf", no_lgf, "bypass the guided filter");
  eval->add_flag("--no-iapm", no_iapm, "bypass the adaptive filters");
  eval->add_option("--config", eval_cfg, "model config file");

  auto* gradcheck = app.add_subcommand("gradcheck", "verify analytic gradients (double precision)");
  std::string gc_module = "all", gc_corrupt;
  gradcheck->add_option("--module", gc_module, "all|dif|lgf|losses|nets");
  gradcheck->add_option("--corrupt", gc_corrupt, "test hook: poison the named op's gradient")
      ->group("");  // hidden

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_out, synth_count, synth_seed, synth_size);
    if (enhance->parsed()) {
      if (enh_ckpt.empty() && enh_params.empty()) {
        std::fprintf(stderr, "enhance: either --checkpoint or --params is required\n");
        return kExitUsage;
      }
      return cmd_enhance(enh_in, enh_out, enh_ckpt, enh_params, enh_cfg);
    }
    if (train->parsed()) return cmd_train(train_mode, train_cfg, train_out);
    if (eval->parsed())
      return cmd_eval(eval_ckpt, eval_manifest, eval_out, no_lgf, no_iapm, eval_cfg);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_module, gc_corrupt);
  } catch (const NumericFailure& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
