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

#include "dialseg/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "dialseg/imageio.hpp"

namespace fs = std::filesystem;

namespace dialseg {

namespace {

std::string fmt_value(float v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.8g", static_cast<double>(v));
  return buf;
}

std::string checkpoint_name(long step) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "ckpt_step%06ld.dialckpt", step);
  return buf;
}

std::vector<std::pair<Tensor<float>, LabelMap>> make_source_batch(
    const std::vector<Sample>& samples, const AugmentCfg& aug, int batch_size, Rng& order_rng,
    Rng& aug_rng) {
  std::vector<std::pair<Tensor<float>, LabelMap>> batch;
  batch.reserve(static_cast<size_t>(batch_size));
  for (int b = 0; b < batch_size; ++b) {
    size_t idx = static_cast<size_t>(order_rng() % samples.size());
    const Sample& s = samples[idx];
    if (!s.labels) throw DataError("source sample lacks labels: cannot train");
    AugmentedSample a = augment(s.image, s.labels, aug, aug_rng);
    batch.emplace_back(a.image.chw, *a.labels);
  }
  return batch;
}

}  // namespace

std::string format_metrics_line(const LossRecord<float>& r) {
  std::string line = std::to_string(r.step) + " " + fmt_value(r.lr) + " " + fmt_value(r.l_seg);
  auto opt = [&](const std::optional<float>& v) {
    line += " ";
    line += v ? fmt_value(*v) : "-";
  };
  opt(r.l_static);
  opt(r.l_adv);
  opt(r.l_d);
  opt(r.l_n);
  return line;
}

void write_metrics_log(const std::string& path, const std::vector<LossRecord<float>>& records) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp + " for writing");
    for (const auto& r : records) out << format_metrics_line(r) << "\n";
    if (!out) throw DataError("failed writing " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move temp metrics log onto " + path);
}

void render_loss_curve(const std::string& path, const std::vector<LossRecord<float>>& records) {
  const int w = 720, h = 400, margin = 32;
  Image<float> canvas(h, w, 1.0f);

  struct Series {
    std::vector<std::pair<long, float>> pts;
    float r, g, b;
  };
  std::vector<Series> series(5);
  const float colors[5][3] = {{0.85f, 0.15f, 0.15f},
                              {0.15f, 0.45f, 0.85f},
                              {0.1f, 0.6f, 0.25f},
                              {0.8f, 0.55f, 0.1f},
                              {0.55f, 0.2f, 0.7f}};
  for (int i = 0; i < 5; ++i) {
    series[static_cast<size_t>(i)].r = colors[i][0];
    series[static_cast<size_t>(i)].g = colors[i][1];
    series[static_cast<size_t>(i)].b = colors[i][2];
  }
  for (const auto& rec : records) {
    series[0].pts.emplace_back(rec.step, rec.l_seg);
    if (rec.l_static) series[1].pts.emplace_back(rec.step, *rec.l_static);
    if (rec.l_adv) series[2].pts.emplace_back(rec.step, *rec.l_adv);
    if (rec.l_d) series[3].pts.emplace_back(rec.step, *rec.l_d);
    if (rec.l_n) series[4].pts.emplace_back(rec.step, *rec.l_n);
  }

  float lo = 0.0f, hi = 1e-6f;
  long step_hi = 1;
  for (const auto& s : series)
    for (auto [st, v] : s.pts) {
      hi = std::max(hi, v);
      lo = std::min(lo, v);
      step_hi = std::max(step_hi, st);
    }
  auto to_x = [&](long st) {
    return margin + static_cast<int>((w - 2 * margin) * static_cast<double>(st) / step_hi);
  };
  auto to_y = [&](float v) {
    double t = (static_cast<double>(v) - lo) / (hi - lo + 1e-12);
    return h - margin - static_cast<int>((h - 2 * margin) * t);
  };
  auto put = [&](int y, int x, float r, float g, float b) {
    if (y < 0 || y >= h || x < 0 || x >= w) return;
    canvas.at(0, y, x) = r;
    canvas.at(1, y, x) = g;
    canvas.at(2, y, x) = b;
  };
  // Axes.
  for (int x = margin; x < w - margin; ++x) put(h - margin, x, 0.2f, 0.2f, 0.2f);
  for (int y = margin; y < h - margin; ++y) put(y, margin, 0.2f, 0.2f, 0.2f);

  auto line = [&](int y0, int x0, int y1, int x1, const Series& s) {
    int steps = std::max({std::abs(y1 - y0), std::abs(x1 - x0), 1});
    for (int i = 0; i <= steps; ++i) {
      int y = y0 + (y1 - y0) * i / steps;
      int x = x0 + (x1 - x0) * i / steps;
      put(y, x, s.r, s.g, s.b);
    }
  };
  for (const auto& s : series)
    for (size_t i = 1; i < s.pts.size(); ++i)
      line(to_y(s.pts[i - 1].second), to_x(s.pts[i - 1].first), to_y(s.pts[i].second),
           to_x(s.pts[i].first), s);

  write_ppm(path, canvas);
}

std::vector<Sample> load_samples(const DatasetManifest& manifest) {
  std::vector<Sample> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) out.push_back(load_sample(e));
  return out;
}

RunResult run_training(const RunnerConfig& rc) {
  rc.train.validate();
  fs::create_directories(rc.out_dir);

  DatasetManifest src_manifest = load_manifest(rc.source_manifest, DatasetRole::Source);
  std::vector<Sample> src_samples = load_samples(src_manifest);

  std::vector<LabelMap> src_labels;
  for (const auto& s : src_samples) src_labels.push_back(*s.labels);
  ClassWeights<float> weights = class_weights(std::span<const LabelMap>(src_labels), rc.train.spread_e);

  SegModel<float> model(rc.model, rc.train.seed);
  SgdOptimizer<float> gen_opt;

  // Independent deterministic streams so draw counts never interact.
  Rng order_rng(rc.train.seed * 0x9e3779b97f4a7c15ull + 1);
  Rng aug_rng(rc.train.seed * 0x9e3779b97f4a7c15ull + 2);
  Rng dropout_rng(rc.train.seed * 0x9e3779b97f4a7c15ull + 3);

  RunResult result;
  result.class_weights = weights;

  if (rc.mode == RunnerConfig::Mode::Supervised) {
    for (long step = 0; step < rc.train.max_steps; ++step) {
      auto batch = make_source_batch(src_samples, rc.train.source_aug, rc.train.batch_size,
                                     order_rng, aug_rng);
      float loss = supervised_step(batch, model, weights, rc.train, gen_opt, step, dropout_rng);
      LossRecord<float> rec;
      rec.step = step;
      rec.lr = poly_lr(step, static_cast<long>(rc.train.max_steps), rc.train.base_lr,
                       rc.train.poly_power);
      rec.l_seg = loss;
      result.records.push_back(rec);
      if (rc.train.checkpoint_every > 0 && (step + 1) % rc.train.checkpoint_every == 0 &&
          step + 1 < rc.train.max_steps) {
        ParamList<float> all = model.all_parameters();
        save_checkpoint((fs::path(rc.out_dir) / checkpoint_name(step + 1)).string(), all);
      }
    }
  } else {
    if (rc.target_day_manifest.empty() || rc.target_night_manifest.empty())
      throw ConfigError("uda training needs target-day and target-night manifests");
    DatasetManifest td_manifest = load_manifest(rc.target_day_manifest, DatasetRole::TargetDay);
    DatasetManifest tn_manifest = load_manifest(rc.target_night_manifest, DatasetRole::TargetNight);
    std::vector<Sample> td_samples = load_samples(td_manifest);
    std::vector<Sample> tn_samples = load_samples(tn_manifest);

    // Join the day/night streams on the pairing key.
    std::map<std::string, size_t> night_by_key;
    for (size_t i = 0; i < tn_manifest.entries.size(); ++i)
      night_by_key[tn_manifest.entries[i].pair_key] = i;
    std::vector<std::pair<size_t, size_t>> pairs;
    for (size_t i = 0; i < td_manifest.entries.size(); ++i) {
      auto it = night_by_key.find(td_manifest.entries[i].pair_key);
      if (it == night_by_key.end())
        throw ConfigError("uda training: day entry has no matching night pair key: " +
                          td_manifest.entries[i].pair_key);
      pairs.emplace_back(i, it->second);
    }

    Discriminator<float> d_day(DiscriminatorSpec<float>{}, order_rng);
    Discriminator<float> d_night(DiscriminatorSpec<float>{}, order_rng);
    AdamOptimizer<float> day_opt, night_opt;

    for (long step = 0; step < rc.train.max_steps; ++step) {
      auto src_batch = make_source_batch(src_samples, rc.train.source_aug, rc.train.batch_size,
                                         order_rng, aug_rng);
      std::vector<Tensor<float>> td_batch, tn_batch;
      for (int b = 0; b < rc.train.batch_size; ++b) {
        auto [di, ni] = pairs[static_cast<size_t>(order_rng() % pairs.size())];
        const Image<float>& day = td_samples[di].image;
        const Image<float>& night = tn_samples[ni].image;
        if (day.height() != night.height() || day.width() != night.width())
          throw DataError("paired day/night images disagree in size");
        // One shared geometric transform keeps the pair pixel-aligned.
        AugmentParams ap = draw_augment(rc.train.target_aug, day.height(), day.width(), aug_rng);
        td_batch.push_back(apply_augment_image(day, ap, rc.train.target_aug.crop).chw);
        tn_batch.push_back(apply_augment_image(night, ap, rc.train.target_aug.crop).chw);
      }
      LossRecord<float> rec =
          uda_step(src_batch, td_batch, tn_batch, model, d_day, d_night, weights, rc.static_cfg,
                   rc.loss_weights, rc.train, gen_opt, day_opt, night_opt, step, dropout_rng);
      result.records.push_back(rec);
      if (rc.train.checkpoint_every > 0 && (step + 1) % rc.train.checkpoint_every == 0 &&
          step + 1 < rc.train.max_steps) {
        ParamList<float> all = model.all_parameters();
        save_checkpoint((fs::path(rc.out_dir) / checkpoint_name(step + 1)).string(), all);
      }
    }

    // Final source-vs-target separation of the trained discriminators,
    // measured on deterministic center crops at the training resolution.
    auto center_crop = [&](const Image<float>& img) {
      AugmentParams p;
      p.scale = 1.0;
      int crop = rc.train.target_aug.crop;
      p.y0 = std::max(0, (img.height() - crop) / 2);
      p.x0 = std::max(0, (img.width() - crop) / 2);
      p.flip = false;
      return apply_augment_image(img, p, crop);
    };
    auto mean_score = [&](Discriminator<float>& d, const std::vector<Sample>& samples,
                          size_t limit) {
      double acc = 0;
      size_t n = std::min(limit, samples.size());
      for (size_t i = 0; i < n; ++i) {
        auto f = model.forward(center_crop(samples[i].image).chw, {});
        Var<float> scores = d.forward(f.probs.detach());
        acc += static_cast<double>(scores.value().sum_value()) / scores.value().size();
      }
      return static_cast<float>(acc / static_cast<double>(n));
    };
    float src_day_score = mean_score(d_day, src_samples, 8);
    float src_night_score = mean_score(d_night, src_samples, 8);
    result.disc_gap_day = src_day_score - mean_score(d_day, td_samples, 8);
    result.disc_gap_night = src_night_score - mean_score(d_night, tn_samples, 8);
  }

  ParamList<float> all = model.all_parameters();
  result.final_checkpoint = (fs::path(rc.out_dir) / "ckpt_final.dialckpt").string();
  save_checkpoint(result.final_checkpoint, all);
  write_metrics_log((fs::path(rc.out_dir) / "metrics.log").string(), result.records);
  render_loss_curve((fs::path(rc.out_dir) / "loss_curve.ppm").string(), result.records);
  return result;
}

EvalOutput evaluate_model(const SegModel<float>& model, const std::vector<Sample>& samples,
                          EvalFlags flags) {
  if (samples.empty()) throw InvalidArgument("evaluate_model: no samples");
  EvalOutput out;
  std::vector<LabelMap> gts;
  SegModel<float>::ForwardOptions fwd;
  fwd.training = false;
  fwd.use_iapm = flags.use_iapm;
  fwd.use_lgf = flags.use_lgf;
  for (const auto& s : samples) {
    if (!s.labels) throw DataError("evaluation sample lacks labels");
    auto f = model.forward(s.image.chw, fwd);
    out.predictions.push_back(argmax_labels(f.logits.value()));
    out.params.push_back(f.params_used);
    gts.push_back(*s.labels);
  }
  out.miou = compute_miou(out.predictions, gts);
  return out;
}

SegModel<float> model_from_checkpoint(const ModelConfig<float>& cfg, const std::string& path) {
  SegModel<float> model(cfg, 0);
  ParamList<float> params = model.all_parameters();
  load_checkpoint(path, params);
  return model;
}

std::string format_miou_table(const MiouResult& r) {
  std::string out;
  const auto& names = category_names();
  char buf[96];
  for (int m = 0; m < kNumCategories; ++m) {
    if (r.present[static_cast<size_t>(m)])
      std::snprintf(buf, sizeof(buf), "%-14s %.4f\n", names[static_cast<size_t>(m)],
                    r.iou[static_cast<size_t>(m)]);
    else
      std::snprintf(buf, sizeof(buf), "%-14s absent\n", names[static_cast<size_t>(m)]);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "%-14s %.4f\n", "mean", r.mean);
  out += buf;
  return out;
}

}  // namespace dialseg
