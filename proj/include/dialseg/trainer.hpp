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

#include <optional>
#include <string>

#include "dialseg/losses.hpp"
#include "dialseg/model.hpp"

namespace dialseg {

// ---------------------------------------------------------------------------
// Schedules and optimizers
// ---------------------------------------------------------------------------

/// Poly policy: base_lr * (1 - step/max_steps)^power.
template <typename T>
T poly_lr(long step, long max_steps, T base_lr, T power) {
  if (max_steps <= 0) throw InvalidArgument("poly_lr: max_steps must be positive");
  if (step < 0 || step > max_steps) throw InvalidArgument("poly_lr: step out of range");
  double frac = 1.0 - static_cast<double>(step) / static_cast<double>(max_steps);
  return static_cast<T>(static_cast<double>(base_lr) * std::pow(frac, static_cast<double>(power)));
}

struct AugmentCfg {
  int crop = 64;
  double scale_min = 0.5;
  double scale_max = 1.0;
  bool flip = true;
};

template <typename T>
struct TrainConfig {
  T base_lr = static_cast<T>(2.5e-4);
  T poly_power = static_cast<T>(0.9);
  T momentum = static_cast<T>(0.9);
  T weight_decay = static_cast<T>(5e-4);
  int batch_size = 4;
  int max_steps = 2000;
  uint64_t seed = 1;
  std::string gen_optimizer = "sgd";
  std::string disc_optimizer = "adam";
  T disc_lr = static_cast<T>(2.5e-4);
  T adam_beta1 = static_cast<T>(0.9);
  T adam_beta2 = static_cast<T>(0.99);
  AugmentCfg source_aug{64, 0.5, 1.0, true};
  AugmentCfg target_aug{64, 0.9, 1.1, true};
  int checkpoint_every = 1000;
  T spread_e = static_cast<T>(0.05);

  void validate() const {
    if (!(base_lr > T(0)) || !(disc_lr > T(0))) throw ConfigError("learning rate must be positive");
    if (!(momentum >= T(0) && momentum < T(1))) throw ConfigError("momentum must be in [0,1)");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
    if (gen_optimizer != "sgd") throw ConfigError("unsupported generator optimizer: " + gen_optimizer);
    if (disc_optimizer != "adam")
      throw ConfigError("unsupported discriminator optimizer: " + disc_optimizer);
  }
};

namespace detail {

template <typename T>
const Tensor<T>* grad_or_null(const Var<T>& v) {
  return v.has_grad() ? &v.grad() : nullptr;
}

template <typename T>
void check_finite_grad(const Tensor<T>* g, const std::string& name) {
  if (g && !g->all_finite()) throw NumericFailure("optimizer: non-finite gradient for " + name);
}

}  // namespace detail

/// SGD with momentum and decoupled-from-nothing classic weight decay:
/// v <- momentum*v + g + wd*p;  p <- p - lr*v.
template <typename T>
class SgdOptimizer {
 public:
  void step(ParamList<T>& params, T lr, T momentum, T weight_decay) {
    if (velocity_.empty()) {
      velocity_.reserve(params.size());
      for (auto& p : params) velocity_.emplace_back(p.var.value().shape());
    }
    if (velocity_.size() != params.size())
      throw InvalidArgument("SgdOptimizer: parameter list changed size");
    for (size_t i = 0; i < params.size(); ++i) {
      const Tensor<T>* g = detail::grad_or_null(params[i].var);
      detail::check_finite_grad(g, params[i].name);
      Tensor<T>& v = velocity_[i];
      Tensor<T>& p = params[i].var.value_mut();
      for (size_t j = 0; j < p.size(); ++j) {
        T gj = (g ? (*g)[j] : T(0)) + weight_decay * p[j];
        v[j] = momentum * v[j] + gj;
        p[j] -= lr * v[j];
      }
    }
  }

 private:
  std::vector<Tensor<T>> velocity_;
};

/// Adam with bias correction; no weight decay.
template <typename T>
class AdamOptimizer {
 public:
  void step(ParamList<T>& params, T lr, T beta1, T beta2, T eps = static_cast<T>(1e-8)) {
    if (m_.empty()) {
      for (auto& p : params) {
        m_.emplace_back(p.var.value().shape());
        v_.emplace_back(p.var.value().shape());
      }
    }
    if (m_.size() != params.size()) throw InvalidArgument("AdamOptimizer: parameter list changed size");
    ++t_;
    double bc1 = 1.0 - std::pow(static_cast<double>(beta1), static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(static_cast<double>(beta2), static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      const Tensor<T>* g = detail::grad_or_null(params[i].var);
      detail::check_finite_grad(g, params[i].name);
      Tensor<T>& m = m_[i];
      Tensor<T>& v = v_[i];
      Tensor<T>& p = params[i].var.value_mut();
      for (size_t j = 0; j < p.size(); ++j) {
        T gj = g ? (*g)[j] : T(0);
        m[j] = beta1 * m[j] + (T(1) - beta1) * gj;
        v[j] = beta2 * v[j] + (T(1) - beta2) * gj * gj;
        T mhat = static_cast<T>(m[j] / bc1);
        T vhat = static_cast<T>(v[j] / bc2);
        p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

 private:
  std::vector<Tensor<T>> m_, v_;
  long t_ = 0;
};

template <typename T>
void zero_grads(ParamList<T>& params) {
  for (auto& p : params) p.var.zero_grad();
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

struct AugmentParams {
  double scale = 1.0;
  int y0 = 0, x0 = 0;
  bool flip = false;
};

/// Draw the shared geometric transform. The draw order is fixed so a given
/// seed replays byte-identically whether or not labels are present.
AugmentParams draw_augment(const AugmentCfg& cfg, int height, int width, Rng& rng);

/// Apply the transform: bilinear for the image, nearest for labels, edge
/// replication when the scaled image is smaller than the crop.
Image<float> apply_augment_image(const Image<float>& img, const AugmentParams& p, int crop);
LabelMap apply_augment_labels(const LabelMap& labels, const AugmentParams& p, int crop);

struct AugmentedSample {
  Image<float> image;
  std::optional<LabelMap> labels;
};

AugmentedSample augment(const Image<float>& img, const std::optional<LabelMap>& labels,
                        const AugmentCfg& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Training steps
// ---------------------------------------------------------------------------

template <typename T>
struct LossRecord {
  long step = 0;
  T lr = 0;
  T l_seg = 0;
  std::optional<T> l_static, l_adv, l_d, l_n;
};

/// One supervised step: pipeline forward on every sample, weighted CE, one
/// SGD update over CNN-PP + backbone + LGF jointly.
template <typename T>
T supervised_step(const std::vector<std::pair<Tensor<T>, LabelMap>>& batch, SegModel<T>& model,
                  const ClassWeights<T>& weights, const TrainConfig<T>& cfg,
                  SgdOptimizer<T>& opt, long step, Rng& dropout_rng) {
  if (batch.empty()) throw InvalidArgument("supervised_step: empty batch");
  ParamList<T> params = model.trainable_parameters();
  zero_grads(params);
  typename SegModel<T>::ForwardOptions fwd;
  fwd.training = true;
  fwd.dropout_rng = &dropout_rng;
  Var<T> loss;
  for (size_t i = 0; i < batch.size(); ++i) {
    auto f = model.forward(batch[i].first, fwd);
    Var<T> l = weighted_ce_loss(f.probs, batch[i].second, weights);
    loss = i == 0 ? l : add(loss, l);
  }
  loss = muls(loss, 1.0 / static_cast<double>(batch.size()));
  loss.backward();
  T lr = poly_lr(step, static_cast<long>(cfg.max_steps), cfg.base_lr, cfg.poly_power);
  opt.step(params, lr, cfg.momentum, cfg.weight_decay);
  return loss.scalar_value();
}

/// One unsupervised adaptation step over the three weight-sharing circuits:
/// generator update (segmentation + static + adversarial terms), then one
/// update per discriminator on detached probabilities.
template <typename T>
LossRecord<T> uda_step(const std::vector<std::pair<Tensor<T>, LabelMap>>& src_batch,
                       const std::vector<Tensor<T>>& td_batch,
                       const std::vector<Tensor<T>>& tn_batch, SegModel<T>& model,
                       Discriminator<T>& d_day, Discriminator<T>& d_night,
                       const ClassWeights<T>& weights, const StaticConfig& static_cfg,
                       const LossWeights<T>& lw, const TrainConfig<T>& cfg,
                       SgdOptimizer<T>& gen_opt, AdamOptimizer<T>& day_opt,
                       AdamOptimizer<T>& night_opt, long step, Rng& dropout_rng) {
  if (src_batch.empty() || td_batch.empty() || tn_batch.empty())
    throw ConfigError("uda_step: all three streams need samples");
  if (td_batch.size() != tn_batch.size())
    throw ConfigError("uda_step: day/night streams must be paired");
  lw.validate();

  ParamList<T> gen_params = model.trainable_parameters();
  ParamList<T> dd_params, dn_params;
  d_day.collect(dd_params, "d_day");
  d_night.collect(dn_params, "d_night");
  zero_grads(gen_params);
  zero_grads(dd_params);
  zero_grads(dn_params);

  typename SegModel<T>::ForwardOptions fwd;
  fwd.training = true;
  fwd.dropout_rng = &dropout_rng;

  // Shared-weight forward on all three streams.
  Var<T> l_seg;
  std::vector<Var<T>> src_probs;
  for (size_t i = 0; i < src_batch.size(); ++i) {
    auto f = model.forward(src_batch[i].first, fwd);
    src_probs.push_back(f.probs);
    Var<T> l = weighted_ce_loss(f.probs, src_batch[i].second, weights);
    l_seg = i == 0 ? l : add(l_seg, l);
  }
  l_seg = muls(l_seg, 1.0 / static_cast<double>(src_batch.size()));

  Var<T> l_static, l_adv;
  std::vector<Var<T>> td_probs, tn_probs;
  for (size_t i = 0; i < td_batch.size(); ++i) {
    auto ftd = model.forward(td_batch[i], fwd);
    auto ftn = model.forward(tn_batch[i], fwd);
    td_probs.push_back(ftd.probs);
    tn_probs.push_back(ftn.probs);
    LabelMap pseudo = build_pseudo_labels(ftd.probs.value(), weights, static_cfg);
    Var<T> ls = static_loss(ftn.probs, pseudo, static_cfg);
    Var<T> la = adv_generator_loss(d_day.forward(ftd.probs), d_night.forward(ftn.probs), lw);
    l_static = i == 0 ? ls : add(l_static, ls);
    l_adv = i == 0 ? la : add(l_adv, la);
  }
  l_static = muls(l_static, 1.0 / static_cast<double>(td_batch.size()));
  l_adv = muls(l_adv, 1.0 / static_cast<double>(td_batch.size()));

  Var<T> l_total = total_loss(l_seg, l_static, l_adv, lw);
  l_total.backward();
  T lr = poly_lr(step, static_cast<long>(cfg.max_steps), cfg.base_lr, cfg.poly_power);
  gen_opt.step(gen_params, lr, cfg.momentum, cfg.weight_decay);
  // The adversarial term also deposited gradients in the discriminators;
  // those belong to the generator update only.
  zero_grads(dd_params);
  zero_grads(dn_params);

  // Discriminator updates on detached probabilities (one step each).
  size_t pairs = td_batch.size();
  Var<T> l_d, l_n;
  for (size_t i = 0; i < pairs; ++i) {
    const Var<T>& src = src_probs[i % src_probs.size()];
    Var<T> ld = adv_discriminator_loss(d_day.forward(src.detach()),
                                       d_day.forward(td_probs[i].detach()), lw);
    Var<T> ln = adv_discriminator_loss(d_night.forward(src.detach()),
                                       d_night.forward(tn_probs[i].detach()), lw);
    l_d = i == 0 ? ld : add(l_d, ld);
    l_n = i == 0 ? ln : add(l_n, ln);
  }
  l_d = muls(l_d, 1.0 / static_cast<double>(pairs));
  l_n = muls(l_n, 1.0 / static_cast<double>(pairs));
  l_d.backward();
  T dlr = poly_lr(step, static_cast<long>(cfg.max_steps), cfg.disc_lr, cfg.poly_power);
  day_opt.step(dd_params, dlr, cfg.adam_beta1, cfg.adam_beta2);
  l_n.backward();
  night_opt.step(dn_params, dlr, cfg.adam_beta1, cfg.adam_beta2);

  LossRecord<T> rec;
  rec.step = step;
  rec.lr = lr;
  rec.l_seg = l_seg.scalar_value();
  rec.l_static = l_static.scalar_value();
  rec.l_adv = l_adv.scalar_value();
  rec.l_d = l_d.scalar_value();
  rec.l_n = l_n.scalar_value();
  return rec;
}

}  // namespace dialseg
