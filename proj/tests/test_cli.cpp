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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "dialseg/dataio.hpp"
#include "dialseg/imageio.hpp"

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

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("exit codes: usage, data, and numeric failures") {
  TempDir dir("dialseg_cli_codes");
  // Unknown subcommand / missing required options -> usage (1).
  CHECK(cli("frobnicate", dir.str("a.log")) == 1);
  CHECK(cli("train --mode supervised", dir.str("b.log")) == 1);
  // enhance without checkpoint or params -> usage.
  fs::create_directories(dir.str("imgs"));
  write_ppm(dir.str("imgs/x.ppm"), Image<float>(8, 8, 0.5f));
  CHECK(cli("enhance --input " + dir.str("imgs") + " --output " + dir.str("out"),
            dir.str("c.log")) == 1);
  // Missing config file -> data/config error (2).
  CHECK(cli("train --mode supervised --config /nonexistent.cfg --out " + dir.str("out"),
            dir.str("d.log")) == 2);
  // Unknown config key -> config error (2).
  {
    std::ofstream cfg(dir.str("bad.cfg"));
    cfg << "[train]\nmax_stepz = 5\n";
  }
  CHECK(cli("train --mode supervised --config " + dir.str("bad.cfg") + " --out " + dir.str("out"),
            dir.str("e.log")) == 2);
  CHECK(read_all(dir.str("e.log")).find("max_stepz") != std::string::npos);
  // Out-of-range fixed params -> invalid argument (2).
  CHECK(cli("enhance --input " + dir.str("imgs") + " --output " + dir.str("out") +
                " --params 9,1,0,0",
            dir.str("f.log")) == 2);
  // Corrupted analytic gradient -> numeric failure (3).
  CHECK(cli("gradcheck --module dif --corrupt gamma", dir.str("g.log")) == 3);
  CHECK(read_all(dir.str("g.log")).find("gamma") != std::string::npos);
}

TEST_CASE("gradcheck report lists every operation exactly once") {
  TempDir dir("dialseg_cli_gc");
  CHECK(cli("gradcheck --module all", dir.str("gc.log")) == 0);
  std::string log = read_all(dir.str("gc.log"));
  for (const char* op :
       {"exposure", "gamma", "contrast", "sharpen", "squash", "guide_transform", "guided_filter",
        "apply_lgf", "weighted_ce", "static_loss", "adv_generator", "adv_disc_day",
        "adv_disc_night", "cnn_pp", "backbone", "discriminator"}) {
    size_t first = log.find(std::string(op) + " ");
    CHECK(first != std::string::npos);
    if (first != std::string::npos)
      CHECK(log.find(std::string(op) + " ", first + 1) == std::string::npos);
  }
}

TEST_CASE("enhance with identity params round-trips images byte-exactly") {
  TempDir dir("dialseg_cli_enhance");
  fs::create_directories(dir.str("imgs"));
  Rng rng(5);
  Image<float> img(24, 24);
  for (size_t i = 0; i < img.chw.size(); ++i)
    img.chw[i] = static_cast<float>(uniform_int(rng, 0, 255)) / 255.0f;
  write_ppm(dir.str("imgs/scene.ppm"), img);

  CHECK(cli("enhance --input " + dir.str("imgs") + " --output " + dir.str("out") +
                " --params 0,1,0,0",
            dir.str("enh.log")) == 0);
  // Final image and every intermediate stage are byte-identical to the input.
  std::string original = read_all(dir.str("imgs/scene.ppm"));
  CHECK(read_all(dir.str("out/scene_enhanced.ppm")) == original);
  for (const char* stage : {"scene_1_exposure.ppm", "scene_2_gamma.ppm", "scene_3_contrast.ppm",
                            "scene_4_sharpen.ppm"})
    CHECK(read_all(dir.str(std::string("out/") + stage)) == original);

  // The parameter report carries the four values.
  std::string rec = read_all(dir.str("out/scene_params.txt"));
  CHECK(rec.find("E 0.000000") != std::string::npos);
  CHECK(rec.find("G 1.000000") != std::string::npos);
  CHECK(rec.find("alpha 0.000000") != std::string::npos);
  CHECK(rec.find("lambda 0.000000") != std::string::npos);
}

TEST_CASE("train, eval, and idempotent re-run produce identical artifacts") {
  TempDir dir("dialseg_cli_train");
  synth_dataset(6, 3, dir.str("data"), 64);
  {
    std::ofstream cfg(dir.str("run.cfg"));
    cfg << "[data]\nsource_manifest = " << dir.str("data/eval_mixed.tsv") << "\n"
        << "[train]\nmax_steps = 30\nbatch_size = 2\nseed = 4\nbase_lr = 0.3\n"
        << "source_crop = 32\ncheckpoint_every = 0\n"
        << "[predictor]\ninput_size = 32\n";
  }
  CHECK(cli("train --mode supervised --config " + dir.str("run.cfg") + " --out " + dir.str("run1"),
            dir.str("t1.log")) == 0);
  CHECK(fs::exists(dir.str("run1/metrics.log")));
  CHECK(fs::exists(dir.str("run1/loss_curve.ppm")));
  CHECK(fs::exists(dir.str("run1/ckpt_final.dialckpt")));

  // Metrics log format: step lr L_seg with dashes for inactive losses.
  {
    std::ifstream log(dir.str("run1/metrics.log"));
    std::string step, lr, lseg, lstatic, ladv, ld, ln;
    log >> step >> lr >> lseg >> lstatic >> ladv >> ld >> ln;
    CHECK(step == "0");
    CHECK(lstatic == "-");
    CHECK(ladv == "-");
    CHECK(ld == "-");
    CHECK(ln == "-");
  }

  CHECK(cli("train --mode supervised --config " + dir.str("run.cfg") + " --out " + dir.str("run2"),
            dir.str("t2.log")) == 0);
  CHECK(read_all(dir.str("run1/metrics.log")) == read_all(dir.str("run2/metrics.log")));
  CHECK(read_all(dir.str("run1/ckpt_final.dialckpt")) == read_all(dir.str("run2/ckpt_final.dialckpt")));

  // Evaluation: table with 19 category rows plus the mean, overlays emitted.
  CHECK(cli("eval --checkpoint " + dir.str("run1/ckpt_final.dialckpt") + " --manifest " +
                dir.str("data/eval_mixed.tsv") + " --out " + dir.str("eval") + " --config " +
                dir.str("run.cfg"),
            dir.str("ev.log")) == 0);
  std::string table = read_all(dir.str("eval/miou.txt"));
  int rows = 0;
  for (size_t pos = 0; (pos = table.find('\n', pos)) != std::string::npos; ++pos) rows++;
  CHECK(rows == kNumCategories + 1);
  CHECK(table.find("mean") != std::string::npos);
  CHECK(fs::exists(dir.str("eval/overlay_day_0000.ppm")));

  // Ablation flags run the identity substitutions.
  CHECK(cli("eval --checkpoint " + dir.str("run1/ckpt_final.dialckpt") + " --manifest " +
                dir.str("data/eval_mixed.tsv") + " --out " + dir.str("eval2") + " --config " +
                dir.str("run.cfg") + " --no-lgf --no-iapm",
            dir.str("ev2.log")) == 0);
  CHECK(fs::exists(dir.str("eval2/miou.txt")));

  // uda without pairing keys (day manifest lacking keys) -> config error.
  {
    std::ofstream cfg(dir.str("uda.cfg"));
    cfg << "[data]\nsource_manifest = " << dir.str("data/eval_mixed.tsv") << "\n"
        << "target_day_manifest = " << dir.str("data/source.tsv") << "\n"
        << "target_night_manifest = " << dir.str("data/target_night.tsv") << "\n"
        << "[train]\nmax_steps = 2\nbatch_size = 1\nsource_crop = 32\n"
        << "[predictor]\ninput_size = 32\n";
  }
  CHECK(cli("train --mode uda --config " + dir.str("uda.cfg") + " --out " + dir.str("udarun"),
            dir.str("u.log")) == 2);
}
