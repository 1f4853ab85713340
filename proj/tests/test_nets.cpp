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

#include "dialseg/backbone.hpp"
#include "dialseg/gradcheck.hpp"
#include "dialseg/losses.hpp"
#include "dialseg/predictor.hpp"
#include "oracles.hpp"

using namespace dialseg;

TEST_CASE("default CNN-PP parameter count is exactly 245540") {
  Rng rng(1);
  ParamPredictor<float> net(PredictorConfig<float>{}, rng);
  ParamCountReport rep = net.param_count();
  CHECK(rep.total == 245540);
  CHECK(rep.layers[0].count == 448);
  CHECK(rep.layers[1].count == 4640);
  CHECK(rep.layers[2].count == 18496);
  CHECK(rep.layers[3].count == 73856);
  CHECK(rep.layers[4].count == 147584);
  CHECK(rep.layers[5].count == 516);
  // Empty parameter list counts zero.
  ParamList<float> empty;
  CHECK(total_param_count(empty) == 0);
}

TEST_CASE("zero-initialized head forces raw (0,0,0,0)") {
  Rng rng(2);
  PredictorConfig<double> cfg;
  cfg.input_size = 32;
  ParamPredictor<double> net(cfg, rng);
  Tensor<double> img = oracle::random_tensor<double>({3, 32, 32}, rng);
  Var<double> raw = net.forward(Var<double>(img));
  for (int i = 0; i < 4; ++i) CHECK(raw.value()[static_cast<size_t>(i)] == 0.0);
}

TEST_CASE("evaluation-mode prediction is deterministic and dropout-seed invariant") {
  Rng rng(3);
  PredictorConfig<double> cfg;
  cfg.input_size = 32;
  ParamPredictor<double> net(cfg, rng);
  // Randomize the head so outputs are informative.
  ParamList<double> params;
  net.collect(params);
  for (auto& p : params)
    if (p.name.find("head") != std::string::npos)
      for (size_t i = 0; i < p.var.size(); ++i)
        p.var.value_mut()[i] = uniform(rng, -0.1, 0.1);
  Tensor<double> img = oracle::random_tensor<double>({3, 32, 32}, rng);
  Var<double> a = net.forward(Var<double>(img));
  Var<double> b = net.forward(Var<double>(img));
  for (int i = 0; i < 4; ++i) CHECK(a.value()[static_cast<size_t>(i)] == b.value()[static_cast<size_t>(i)]);

  // Dropout only acts in training mode; eval ignores the seed entirely.
  Rng d1(111), d2(999);
  Var<double> e1 = net.forward(Var<double>(img), false, &d1);
  Var<double> e2 = net.forward(Var<double>(img), false, &d2);
  for (int i = 0; i < 4; ++i) CHECK(e1.value()[static_cast<size_t>(i)] == e2.value()[static_cast<size_t>(i)]);

  // Wrong input size is rejected.
  Tensor<double> bad = oracle::random_tensor<double>({3, 16, 16}, rng);
  CHECK_THROWS_AS(net.forward(Var<double>(bad)), InvalidArgument);
}

TEST_CASE("CNN-PP gradient flows to input and weights") {
  Rng rng(4);
  PredictorConfig<double> cfg;
  cfg.channels = {4, 6, 8, 10, 12};
  cfg.input_size = 16;
  ParamPredictor<double> net(cfg, rng);
  ParamList<double> params;
  net.collect(params);
  for (auto& p : params)  // random head so the check is non-trivial
    if (p.name.find("head") != std::string::npos)
      for (size_t i = 0; i < p.var.size(); ++i) p.var.value_mut()[i] = uniform(rng, -0.2, 0.2);

  Tensor<double> img = oracle::random_tensor<double>({3, 16, 16}, rng, 0.1, 0.9);
  CHECK(grad_check([&](Var<double> v) { return sum(sq(net.forward(v))); }, img, 1e-5) <= 1e-4);
  auto rebuild = [&] { return sum(sq(net.forward(Var<double>(img)))); };
  for (auto& p : params) CHECK(param_grad_check(p.var, rebuild, 1e-5, 16, rng) <= 1e-4);
}

TEST_CASE("backbone output contract and determinism") {
  Rng rng(5);
  BackboneSpec<float> spec;
  ToyBackbone<float> net(spec, rng);
  Tensor<float> img = oracle::random_tensor<float>({3, 64, 48}, rng);
  Var<float> logits = net.forward(Var<float>(img));
  CHECK(logits.value().dim(0) == kNumCategories);
  CHECK(logits.value().dim(1) == 64);
  CHECK(logits.value().dim(2) == 48);
  Var<float> again = net.forward(Var<float>(img));
  for (size_t i = 0; i < logits.size(); ++i) CHECK(logits.value()[i] == again.value()[i]);

  BackboneSpec<float> bad;
  bad.id = "resnet101";
  CHECK_THROWS_AS(ToyBackbone<float>(bad, rng), ConfigError);
}

TEST_CASE("backbone gradients through the logits sum") {
  Rng rng(6);
  BackboneSpec<double> spec;
  spec.encoder_channels = {4, 6, 8, 10};
  spec.decoder_channels1 = 6;
  spec.decoder_channels2 = 4;
  ToyBackbone<double> net(spec, rng);
  Tensor<double> img = oracle::random_tensor<double>({3, 16, 16}, rng, 0.1, 0.9);
  CHECK(grad_check([&](Var<double> v) { return muls(sum(net.forward(v)), 1e-2); }, img, 1e-5) <=
        1e-4);
  ParamList<double> params;
  net.collect(params);
  auto rebuild = [&] { return muls(sum(sq(net.forward(Var<double>(img)))), 1e-2); };
  for (auto& p : params) CHECK(param_grad_check(p.var, rebuild, 1e-5, 12, rng) <= 1e-4);
}

TEST_CASE("discriminator contract: one channel, factor-4 downsampling") {
  Rng rng(7);
  DiscriminatorSpec<float> spec;
  Discriminator<float> d(spec, rng);
  Tensor<float> probs = oracle::random_tensor<float>({kNumCategories, 32, 32}, rng, 0.0, 0.2);
  Var<float> scores = d.forward(Var<float>(probs));
  CHECK(scores.value().dim(0) == 1);
  CHECK(scores.value().dim(1) == 8);
  CHECK(scores.value().dim(2) == 8);

  ParamCountReport rep = d.param_count();
  CHECK(rep.layers.size() == 5);
  CHECK(rep.layers[0].count == 64u * 19 * 16 + 64);
  CHECK(rep.layers[4].count == 1u * 256 * 16 + 1);

  Tensor<float> wrong = oracle::random_tensor<float>({4, 32, 32}, rng);
  CHECK_THROWS_AS(d.forward(Var<float>(wrong)), InvalidArgument);
}

TEST_CASE("discriminator gradient through the score sum") {
  Rng rng(8);
  DiscriminatorSpec<double> spec;
  Discriminator<double> d(spec, rng);
  Tensor<double> probs = oracle::random_tensor<double>({kNumCategories, 8, 8}, rng, 0.01, 0.1);
  CHECK(grad_check([&](Var<double> v) { return muls(sum(d.forward(v)), 1e-2); }, probs, 1e-5) <=
        1e-4);
}
