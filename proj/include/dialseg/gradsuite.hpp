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

#include "dialseg/backbone.hpp"
#include "dialseg/filters.hpp"
#include "dialseg/gradcheck.hpp"
#include "dialseg/guided.hpp"
#include "dialseg/losses.hpp"
#include "dialseg/predictor.hpp"

namespace dialseg {

// Double-precision gradient verification of every differentiable operation,
// grouped by module. Shared between the CLI command and the acceptance suite.

struct GradSuiteEntry {
  std::string op;
  double worst = 0;
  double tolerance = 1e-4;
  bool passed = false;
};

namespace gradsuite_detail {

/// Identity-valued node whose backward adds a constant bias to the gradient.
/// Used as a negative control: wiring it into an op must fail the check.
template <typename T>
Var<T> corrupt_gradient(const Var<T>& x) {
  Tensor<T> out = x.value();
  auto xn = x.node();
  return make_var<T>(std::move(out), {x}, "corrupt", [xn](Node<T>& self) {
    Tensor<T>& gx = xn->ensure_grad();
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] + T(0.5);
  });
}

}  // namespace gradsuite_detail

/// Run the per-module gradient suites. module: all|dif|lgf|losses|nets.
/// corrupt_op (test hook) injects a broken analytic gradient into the named
/// operation so the negative-control path can be exercised end to end.
inline std::vector<GradSuiteEntry> run_grad_suite(const std::string& module,
                                                  const std::string& corrupt_op = "") {
  using T = double;
  // Small enough that leaky-rectifier kink crossings are vanishingly rare,
  // large enough that double-precision roundoff stays far below tolerance.
  const T eps = 1e-5;
  std::vector<GradSuiteEntry> results;
  Rng rng(20260810);

  auto rnd = [&rng](std::vector<int> shape, double lo, double hi) {
    Tensor<T> t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t[i] = uniform(rng, lo, hi);
    return t;
  };

  auto record = [&](const std::string& op, double worst, double tol = 1e-4) {
    results.push_back({op, worst, tol, worst <= tol});
  };

  // Wraps an op output so the corrupt hook can poison one named op.
  auto maybe_corrupt = [&corrupt_op](const std::string& op, Var<T> v) {
    return op == corrupt_op ? gradsuite_detail::corrupt_gradient(v) : v;
  };

  bool all = module == "all";
  if (module != "all" && module != "dif" && module != "lgf" && module != "losses" &&
      module != "nets")
    throw ConfigError("gradcheck: unknown module '" + module + "'");

  if (all || module == "dif") {
    double worst_exposure = 0, worst_gamma = 0, worst_contrast = 0, worst_sharpen = 0,
           worst_squash = 0;
    FilterRanges<T> ranges;
    for (int rep = 0; rep < 10; ++rep) {
      Tensor<T> img = rnd({3, 6, 6}, 0.25, 0.7);
      Tensor<T> e = Tensor<T>::scalar(uniform(rng, -0.3, 0.3));
      Tensor<T> g = Tensor<T>::scalar(uniform(rng, 0.8, 1.25));
      Tensor<T> al = Tensor<T>::scalar(uniform(rng, 0.2, 0.8));
      Tensor<T> la = Tensor<T>::scalar(uniform(rng, 0.1, 0.35));
      Tensor<T> raw = rnd({4}, -1.5, 1.5);

      auto img_and_param = [&](auto&& f, const Tensor<T>& param, double& worst) {
        worst = std::max(worst, grad_check([&](Var<T> v) { return f(v, Var<T>(param)); }, img, eps));
        worst = std::max(worst, grad_check([&](Var<T> v) { return f(Var<T>(img), v); }, param, eps));
      };
      img_and_param(
          [&](Var<T> a, Var<T> b) {
            return mean(sq(maybe_corrupt("exposure", exposure_filter(a, b))));
          },
          e, worst_exposure);
      img_and_param(
          [&](Var<T> a, Var<T> b) { return mean(sq(maybe_corrupt("gamma", gamma_filter(a, b)))); },
          g, worst_gamma);
      img_and_param(
          [&](Var<T> a, Var<T> b) {
            return mean(sq(maybe_corrupt("contrast", contrast_filter(a, b))));
          },
          al, worst_contrast);
      img_and_param(
          [&](Var<T> a, Var<T> b) {
            return mean(sq(maybe_corrupt("sharpen", sharpen_filter(a, b))));
          },
          la, worst_sharpen);
      worst_squash = std::max(
          worst_squash, grad_check(
                            [&](Var<T> v) {
                              FilterParamVars<T> p = squash_params(v, ranges);
                              return maybe_corrupt(
                                  "squash",
                                  add(add(p.exposure, p.gamma), add(p.alpha, p.lambda)));
                            },
                            raw, eps));
    }
    record("exposure", worst_exposure);
    record("gamma", worst_gamma);
    record("contrast", worst_contrast);
    record("sharpen", worst_sharpen);
    record("squash", worst_squash);
  }

  if (all || module == "lgf") {
    GuidedFilterConfig<T> gcfg;
    gcfg.radius = 2;
    GuideTransform<T> transform(rng);
    double worst_gt = 0, worst_gf = 0, worst_lgf = 0;
    for (int rep = 0; rep < 4; ++rep) {
      Tensor<T> img = rnd({3, 6, 6}, 0.1, 0.9);
      Tensor<T> p = rnd({1, 7, 7}, 0.0, 1.0);
      Tensor<T> g = rnd({1, 7, 7}, 0.0, 1.0);
      Tensor<T> logits = rnd({kNumCategories, 6, 6}, -1.0, 1.0);

      worst_gt = std::max(
          worst_gt,
          grad_check(
              [&](Var<T> v) { return mean(sq(maybe_corrupt("guide_transform", transform.forward(v)))); },
              img, eps));
      ParamList<T> tp;
      transform.collect(tp, "t");
      for (auto& entry : tp)
        worst_gt = std::max(
            worst_gt, param_grad_check(
                          entry.var,
                          [&] {
                            return mean(sq(maybe_corrupt("guide_transform",
                                                         transform.forward(Var<T>(img)))));
                          },
                          eps, size_t(12), rng));
      worst_gf = std::max(
          worst_gf,
          grad_check(
              [&](Var<T> v) {
                return mean(sq(maybe_corrupt("guided_filter", guided_filter(v, Var<T>(g), gcfg))));
              },
              p, eps));
      worst_gf = std::max(
          worst_gf,
          grad_check(
              [&](Var<T> v) {
                return mean(sq(maybe_corrupt("guided_filter", guided_filter(Var<T>(p), v, gcfg))));
              },
              g, eps));
      worst_lgf = std::max(
          worst_lgf,
          grad_check(
              [&](Var<T> v) {
                return mean(sq(maybe_corrupt("apply_lgf", apply_lgf(v, Var<T>(img), transform, gcfg))));
              },
              logits, eps));
      worst_lgf = std::max(
          worst_lgf,
          grad_check(
              [&](Var<T> v) {
                return mean(
                    sq(maybe_corrupt("apply_lgf", apply_lgf(Var<T>(logits), v, transform, gcfg))));
              },
              img, eps));
    }
    record("guide_transform", worst_gt);
    record("guided_filter", worst_gf);
    record("apply_lgf", worst_lgf);
  }

  if (all || module == "losses") {
    StaticConfig static_cfg;
    ClassWeights<T> w;
    w.weights.resize(kNumCategories);
    for (auto& v : w.weights) v = uniform(rng, 0.9, 1.1);
    LossWeights<T> lw;
    double worst_ce = 0, worst_static = 0;
    for (int rep = 0; rep < 6; ++rep) {
      Tensor<T> probs = rnd({kNumCategories, 4, 4}, 0.05, 0.95);
      LabelMap gt(4, 4);
      for (auto& v : gt.ids)
        v = uniform(rng, 0.0, 1.0) < 0.1 ? kIgnoreLabel
                                         : static_cast<uint8_t>(uniform_int(rng, 0, 18));
      worst_ce = std::max(
          worst_ce, grad_check(
                        [&](Var<T> v) {
                          return maybe_corrupt("weighted_ce", weighted_ce_loss(v, gt, w, nullptr));
                        },
                        probs, eps));
      LabelMap pseudo(4, 4);
      for (auto& v : pseudo.ids)
        v = static_cast<uint8_t>(
            static_cfg.static_ids[static_cast<size_t>(uniform_int(rng, 0, 5))]);
      worst_static = std::max(
          worst_static, grad_check(
                            [&](Var<T> v) {
                              return maybe_corrupt("static_loss",
                                                   static_loss(v, pseudo, static_cfg, nullptr));
                            },
                            probs, eps));
    }
    record("weighted_ce", worst_ce);
    record("static_loss", worst_static);

    DiscriminatorSpec<T> dspec;
    Discriminator<T> d_day(dspec, rng), d_night(dspec, rng);
    Tensor<T> td = rnd({kNumCategories, 8, 8}, 0.01, 0.1);
    Tensor<T> tn = rnd({kNumCategories, 8, 8}, 0.01, 0.1);
    double worst_adv = grad_check_sampled(
        [&](Var<T> v) {
          return maybe_corrupt(
              "adv_generator",
              adv_generator_loss(d_day.forward(v), d_night.forward(Var<T>(tn)), lw));
        },
        td, eps, size_t(160), rng);
    record("adv_generator", worst_adv);

    Tensor<T> s_src = rnd({1, 4, 4}, -1.0, 2.0);
    Tensor<T> s_tgt = rnd({1, 4, 4}, -1.0, 2.0);
    double worst_ld = std::max(
        grad_check(
            [&](Var<T> v) {
              return maybe_corrupt("adv_disc_day",
                                   adv_discriminator_loss(v, Var<T>(s_tgt), lw));
            },
            s_src, eps),
        grad_check(
            [&](Var<T> v) {
              return maybe_corrupt("adv_disc_day",
                                   adv_discriminator_loss(Var<T>(s_src), v, lw));
            },
            s_tgt, eps));
    record("adv_disc_day", worst_ld);
    double worst_ln = grad_check(
        [&](Var<T> v) {
          return maybe_corrupt("adv_disc_night", adv_discriminator_loss(Var<T>(s_src), v, lw));
        },
        s_tgt, eps);
    record("adv_disc_night", worst_ln);
  }

  if (all || module == "nets") {
    PredictorConfig<T> pcfg;
    pcfg.channels = {4, 6, 8, 10, 12};
    pcfg.input_size = 16;
    ParamPredictor<T> predictor(pcfg, rng);
    ParamList<T> pp;
    predictor.collect(pp);
    for (auto& p : pp)  // randomized head makes the check non-trivial
      if (p.name.find("head") != std::string::npos)
        for (size_t i = 0; i < p.var.size(); ++i) p.var.value_mut()[i] = uniform(rng, -0.2, 0.2);
    Tensor<T> img16 = rnd({3, 16, 16}, 0.1, 0.9);
    double worst_pp = grad_check(
        [&](Var<T> v) { return mean(sq(maybe_corrupt("cnn_pp", predictor.forward(v)))); }, img16,
        eps);
    for (auto& p : pp)
      worst_pp = std::max(
          worst_pp,
          param_grad_check(
              p.var,
              [&] { return mean(sq(maybe_corrupt("cnn_pp", predictor.forward(Var<T>(img16))))); },
              eps, size_t(10), rng));
    record("cnn_pp", worst_pp);

    BackboneSpec<T> bspec;
    bspec.encoder_channels = {4, 6, 8, 10};
    bspec.decoder_channels1 = 6;
    bspec.decoder_channels2 = 4;
    ToyBackbone<T> backbone(bspec, rng);
    double worst_bb = grad_check(
        [&](Var<T> v) { return muls(sum(maybe_corrupt("backbone", backbone.forward(v))), 1e-2); },
        img16, eps);
    ParamList<T> bp;
    backbone.collect(bp);
    for (auto& p : bp)
      worst_bb = std::max(
          worst_bb, param_grad_check(
                        p.var,
                        [&] {
                          return muls(
                              sum(sq(maybe_corrupt("backbone", backbone.forward(Var<T>(img16))))),
                              1e-2);
                        },
                        eps, size_t(8), rng));
    record("backbone", worst_bb);

    DiscriminatorSpec<T> dspec;
    Discriminator<T> disc(dspec, rng);
    Tensor<T> probs8 = rnd({kNumCategories, 8, 8}, 0.01, 0.1);
    double worst_d = grad_check_sampled(
        [&](Var<T> v) { return muls(sum(maybe_corrupt("discriminator", disc.forward(v))), 1e-2); },
        probs8, eps, size_t(250), rng);
    record("discriminator", worst_d);
  }

  return results;
}

}  // namespace dialseg
