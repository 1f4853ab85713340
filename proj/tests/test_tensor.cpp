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

#include "dialseg/gradcheck.hpp"
#include "dialseg/ops.hpp"
#include "dialseg/spatial.hpp"
#include "oracles.hpp"

using namespace dialseg;

namespace {
constexpr double kEps = 1e-5;
constexpr double kTolDouble = 1e-6;
}  // namespace

TEST_CASE("tensor basics") {
  Tensor<double> t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.at2(1, 2) == 1.5);
  CHECK_THROWS_AS(Tensor<double>({0, 3}), InvalidArgument);
  CHECK_THROWS_AS(Tensor<double>::from({2, 2}, {1.0, 2.0}), InvalidArgument);
}

TEST_CASE("backward of sum of squares is exact") {
  Rng rng(7);
  Tensor<double> x = oracle::random_tensor<double>({4, 5}, rng, -1.0, 1.0);
  Var<double> leaf = Var<double>::leaf(x);
  Var<double> y = sum(mul(leaf, leaf));
  y.backward();
  for (size_t i = 0; i < x.size(); ++i) CHECK(leaf.grad()[i] == doctest::Approx(2 * x[i]).epsilon(1e-12));
}

TEST_CASE("grad_check on quadratic and constant functions") {
  Rng rng(11);
  Tensor<double> x = oracle::random_tensor<double>({3, 3}, rng, -1.0, 1.0);
  double err = grad_check([](Var<double> v) { return sum(mul(v, v)); }, x, kEps);
  CHECK(err <= 1e-6);
  // Constant function: both gradients identically zero.
  double cerr = grad_check([](Var<double>) { return Var<double>(Tensor<double>::scalar(3.0)); },
                           x, kEps);
  CHECK(cerr == 0.0);
}

TEST_CASE("grad_check flags non-finite values naming the coordinate") {
  Tensor<double> x = Tensor<double>::from({2}, {1.0, 0.0});
  auto f = [](Var<double> v) { return sum(vlog(v)); };  // log 0 at coordinate 1
  CHECK_THROWS_AS(grad_check(f, x, 1e-5), NumericFailure);
}

TEST_CASE("pointwise and reduction op gradients") {
  Rng rng(23);
  for (int rep = 0; rep < 10; ++rep) {
    Tensor<double> a = oracle::random_tensor<double>({2, 3, 3}, rng, 0.2, 0.8);
    Tensor<double> b = oracle::random_tensor<double>({2, 3, 3}, rng, 0.3, 0.9);
    Var<double> vb(b, false);

    CHECK(grad_check([&](Var<double> v) { return sum(add(v, vb)); }, a, kEps) <= kTolDouble);
    CHECK(grad_check([&](Var<double> v) { return sum(mul(v, vb)); }, a, kEps) <= kTolDouble);
    CHECK(grad_check([&](Var<double> v) { return sum(div(v, vb)); }, a, kEps) <= kTolDouble);
    CHECK(grad_check([&](Var<double> v) { return mean(sq(v)); }, a, kEps) <= kTolDouble);
    CHECK(grad_check([&](Var<double> v) { return sum(vexp(muls(v, 0.5))); }, a, kEps) <= kTolDouble);
    CHECK(grad_check([&](Var<double> v) { return sum(vlog(v)); }, a, kEps) <= kTolDouble);
    CHECK(grad_check([&](Var<double> v) { return sum(leaky_relu(adds(v, -0.5), 0.01)); }, a,
                     1e-6) <= 1e-4);  // kink at 0; tiny step keeps crossings rare
    CHECK(grad_check([&](Var<double> v) { return sum(sigmoid(v)); }, a, kEps) <= kTolDouble);
    CHECK(grad_check([&](Var<double> v) { return sum(softmax_channels(v)); }, a, kEps) <= kTolDouble);
    CHECK(grad_check([&](Var<double> v) { return sum(global_avg_pool(v)); }, a, kEps) <= kTolDouble);
    CHECK(grad_check([&](Var<double> v) { return sum(select_channels(v, {1, 0})); }, a, kEps) <=
          kTolDouble);
  }
}

TEST_CASE("softmax normalizes per pixel") {
  Rng rng(5);
  Tensor<double> x = oracle::random_tensor<double>({19, 4, 4}, rng, -3.0, 3.0);
  Var<double> probs = softmax_channels(Var<double>(x));
  size_t plane = 16;
  for (size_t p = 0; p < plane; ++p) {
    double s = 0;
    for (int c = 0; c < 19; ++c) s += probs.value()[static_cast<size_t>(c) * plane + p];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("bilinear resize fixed points and oracle row") {
  // Constant image stays constant at any size.
  Tensor<double> c({3, 5, 7}, 0.7);
  Var<double> rc = bilinear_resize(Var<double>(c), 9, 4);
  for (size_t i = 0; i < rc.size(); ++i) CHECK(rc.value()[i] == doctest::Approx(0.7).epsilon(1e-12));

  // Identity resize is bit-identical.
  Rng rng(3);
  Tensor<double> x = oracle::random_tensor<double>({3, 6, 5}, rng);
  Var<double> same = bilinear_resize(Var<double>(x), 6, 5);
  for (size_t i = 0; i < x.size(); ++i) CHECK(same.value()[i] == x[i]);

  // 1x2 row [0,1] -> 1x4 under the center-aligned convention with edge clamp.
  Tensor<double> row = Tensor<double>::from({1, 1, 2}, {0.0, 1.0});
  Var<double> up = bilinear_resize(Var<double>(row), 1, 4);
  const double expected[4] = {0.0, 0.25, 0.75, 1.0};
  for (int i = 0; i < 4; ++i) CHECK(up.value()[static_cast<size_t>(i)] == doctest::Approx(expected[i]).epsilon(1e-12));

  CHECK_THROWS_AS(bilinear_resize(Var<double>(x), 0, 4), InvalidArgument);
}

TEST_CASE("bilinear resize matches the naive oracle and stays in the envelope") {
  Rng rng(17);
  for (int rep = 0; rep < 8; ++rep) {
    int h = uniform_int(rng, 1, 9), w = uniform_int(rng, 1, 9);
    int oh = uniform_int(rng, 1, 12), ow = uniform_int(rng, 1, 12);
    Tensor<double> plane = oracle::random_tensor<double>({h, w}, rng);
    Tensor<double> chw({1, h, w});
    std::copy(plane.data(), plane.data() + plane.size(), chw.data());
    Var<double> out = bilinear_resize(Var<double>(chw), oh, ow);
    Tensor<double> ref = oracle::bilinear_resize_plane(plane, oh, ow);
    for (size_t i = 0; i < ref.size(); ++i)
      CHECK(out.value()[i] == doctest::Approx(ref[i]).epsilon(1e-9));
    CHECK(out.value().min_value() >= plane.min_value() - 1e-12);
    CHECK(out.value().max_value() <= plane.max_value() + 1e-12);
  }
}

TEST_CASE("bilinear resize gradient") {
  Rng rng(29);
  Tensor<double> x = oracle::random_tensor<double>({2, 4, 5}, rng);
  CHECK(grad_check([](Var<double> v) { return sum(sq(bilinear_resize(v, 7, 3))); }, x, kEps) <=
        kTolDouble);
}

TEST_CASE("box mean filter fixed points, oracle, gradient") {
  // Constant input -> constant output (count normalization exact at borders).
  Tensor<double> c({1, 4, 6}, 0.3);
  Var<double> bc = box_mean_filter(Var<double>(c), 2);
  for (size_t i = 0; i < bc.size(); ++i) CHECK(bc.value()[i] == doctest::Approx(0.3).epsilon(1e-12));

  // 3x3 input, r=1: center equals the mean of all nine values.
  Rng rng(31);
  Tensor<double> m = oracle::random_tensor<double>({1, 3, 3}, rng);
  Var<double> bm = box_mean_filter(Var<double>(m), 1);
  CHECK(bm.value()[4] == doctest::Approx(m.sum_value() / 9.0).epsilon(1e-12));

  // Random planes vs the O(r^2) oracle.
  for (int rep = 0; rep < 10; ++rep) {
    int h = uniform_int(rng, 1, 12), w = uniform_int(rng, 1, 12);
    int r = uniform_int(rng, 1, 3);
    Tensor<double> plane = oracle::random_tensor<double>({h, w}, rng);
    Var<double> got = box_mean_filter(Var<double>(plane), r);
    Tensor<double> ref = oracle::box_mean_plane(plane, r);
    for (size_t i = 0; i < ref.size(); ++i)
      CHECK(got.value()[i] == doctest::Approx(ref[i]).epsilon(1e-6));
  }

  Tensor<double> x = oracle::random_tensor<double>({2, 5, 4}, rng);
  CHECK(grad_check([](Var<double> v) { return sum(sq(box_mean_filter(v, 2))); }, x, kEps) <=
        kTolDouble);
  CHECK_THROWS_AS(box_mean_filter(Var<double>(x), 0), InvalidArgument);
}

TEST_CASE("gaussian blur kernel normalization and impulse response") {
  Tensor<double> c({3, 6, 6}, 0.42);
  Var<double> bc = gaussian_blur(Var<double>(c), 1.0, 2);
  for (size_t i = 0; i < bc.size(); ++i) CHECK(bc.value()[i] == doctest::Approx(0.42).epsilon(1e-12));

  // Unit impulse at the center of a large plane: response = center weight^2.
  Tensor<double> imp({1, 11, 11});
  imp.at3(0, 5, 5) = 1.0;
  Var<double> resp = gaussian_blur(Var<double>(imp), 1.0, 2);
  double denom = 1.0 + 2 * std::exp(-0.5) + 2 * std::exp(-2.0);
  double expect = 1.0 / (denom * denom);
  CHECK(expect == doctest::Approx(0.16210).epsilon(1e-4));
  CHECK(resp.value().at3(0, 5, 5) == doctest::Approx(expect).epsilon(1e-12));

  CHECK_THROWS_AS(gaussian_blur(Var<double>(imp), 0.0, 2), InvalidArgument);
  CHECK_THROWS_AS(gaussian_blur(Var<double>(imp), -1.0, 2), InvalidArgument);
}

TEST_CASE("gaussian blur commutes with horizontal flip and matches the 2-D oracle") {
  Rng rng(37);
  Tensor<double> x = oracle::random_tensor<double>({1, 6, 8}, rng);
  Var<double> blurred = gaussian_blur(Var<double>(x), 1.3, 2);

  Tensor<double> flipped({1, 6, 8});
  for (int y = 0; y < 6; ++y)
    for (int xx = 0; xx < 8; ++xx) flipped.at3(0, y, xx) = x.at3(0, y, 7 - xx);
  Var<double> blurred_flipped = gaussian_blur(Var<double>(flipped), 1.3, 2);
  for (int y = 0; y < 6; ++y)
    for (int xx = 0; xx < 8; ++xx)
      CHECK(blurred.value().at3(0, y, xx) ==
            doctest::Approx(blurred_flipped.value().at3(0, y, 7 - xx)).epsilon(1e-12));

  Tensor<double> plane({6, 8});
  std::copy(x.data(), x.data() + x.size(), plane.data());
  Tensor<double> ref = oracle::gaussian_plane(plane, 1.3, 2);
  for (size_t i = 0; i < ref.size(); ++i)
    CHECK(blurred.value()[i] == doctest::Approx(ref[i]).epsilon(1e-12));

  CHECK(grad_check([](Var<double> v) { return sum(sq(gaussian_blur(v, 1.0, 2))); }, x, kEps) <=
        kTolDouble);
}

TEST_CASE("conv2d forward against direct loops and gradients") {
  Rng rng(41);
  Tensor<double> x = oracle::random_tensor<double>({3, 6, 7}, rng, -1.0, 1.0);
  Tensor<double> w = oracle::random_tensor<double>({4, 3, 3, 3}, rng, -0.5, 0.5);
  Tensor<double> b = oracle::random_tensor<double>({4}, rng, -0.2, 0.2);
  ConvGeom g;
  g.stride = 2;
  g.pad_top = g.pad_left = g.pad_bottom = g.pad_right = 1;
  Var<double> vw(w, false), vb(b, false);
  Var<double> out = conv2d(Var<double>(x), vw, vb, g);
  CHECK(out.value().dim(0) == 4);
  CHECK(out.value().dim(1) == 3);
  CHECK(out.value().dim(2) == 4);

  // Direct evaluation.
  for (int o = 0; o < 4; ++o)
    for (int oy = 0; oy < 3; ++oy)
      for (int ox = 0; ox < 4; ++ox) {
        double acc = b[static_cast<size_t>(o)];
        for (int c = 0; c < 3; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              int iy = oy * 2 - 1 + ky, ix = ox * 2 - 1 + kx;
              if (iy < 0 || iy >= 6 || ix < 0 || ix >= 7) continue;
              acc += w[((static_cast<size_t>(o) * 3 + c) * 3 + ky) * 3 + kx] * x.at3(c, iy, ix);
            }
        CHECK(out.value().at3(o, oy, ox) == doctest::Approx(acc).epsilon(1e-12));
      }

  CHECK(grad_check([&](Var<double> v) { return sum(sq(conv2d(v, vw, vb, g))); }, x, kEps) <=
        kTolDouble);
  Var<double> vx(x, false);
  CHECK(grad_check([&](Var<double> v) { return sum(sq(conv2d(vx, v, vb, g))); }, w, kEps) <=
        kTolDouble);
  CHECK(grad_check([&](Var<double> v) { return sum(sq(conv2d(vx, vw, v, g))); }, b, kEps) <=
        kTolDouble);
}

TEST_CASE("conv_transpose2d doubles resolution and has exact gradients") {
  Rng rng(43);
  Tensor<double> x = oracle::random_tensor<double>({3, 4, 5}, rng, -1.0, 1.0);
  Tensor<double> w = oracle::random_tensor<double>({3, 2, 2, 2}, rng, -0.5, 0.5);
  Tensor<double> b = oracle::random_tensor<double>({2}, rng, -0.2, 0.2);
  Var<double> vw(w, false), vb(b, false);
  Var<double> out = conv_transpose2d(Var<double>(x), vw, vb, 2);
  CHECK(out.value().dim(0) == 2);
  CHECK(out.value().dim(1) == 8);
  CHECK(out.value().dim(2) == 10);

  // Direct evaluation via the scatter definition.
  Tensor<double> ref({2, 8, 10});
  for (int o = 0; o < 2; ++o)
    for (size_t i = 0; i < 80; ++i) ref[static_cast<size_t>(o) * 80 + i] = b[static_cast<size_t>(o)];
  for (int c = 0; c < 3; ++c)
    for (int o = 0; o < 2; ++o)
      for (int iy = 0; iy < 4; ++iy)
        for (int ix = 0; ix < 5; ++ix)
          for (int ky = 0; ky < 2; ++ky)
            for (int kx = 0; kx < 2; ++kx)
              ref.at3(o, iy * 2 + ky, ix * 2 + kx) +=
                  w[((static_cast<size_t>(c) * 2 + o) * 2 + ky) * 2 + kx] * x.at3(c, iy, ix);
  for (size_t i = 0; i < ref.size(); ++i)
    CHECK(out.value()[i] == doctest::Approx(ref[i]).epsilon(1e-12));

  CHECK(grad_check([&](Var<double> v) { return sum(sq(conv_transpose2d(v, vw, vb, 2))); }, x,
                   kEps) <= kTolDouble);
  Var<double> vx(x, false);
  CHECK(grad_check([&](Var<double> v) { return sum(sq(conv_transpose2d(vx, v, vb, 2))); }, w,
                   kEps) <= kTolDouble);
}

TEST_CASE("linear layer gradients") {
  Rng rng(47);
  Tensor<double> x = oracle::random_tensor<double>({6}, rng, -1.0, 1.0);
  Tensor<double> w = oracle::random_tensor<double>({3, 6}, rng, -0.5, 0.5);
  Tensor<double> b = oracle::random_tensor<double>({3}, rng, -0.2, 0.2);
  Var<double> vw(w, false), vb(b, false), vx(x, false);
  CHECK(grad_check([&](Var<double> v) { return sum(sq(linear(v, vw, vb))); }, x, kEps) <= kTolDouble);
  CHECK(grad_check([&](Var<double> v) { return sum(sq(linear(vx, v, vb))); }, w, kEps) <= kTolDouble);
  CHECK(grad_check([&](Var<double> v) { return sum(sq(linear(vx, vw, v))); }, b, kEps) <= kTolDouble);
}

TEST_CASE("clamp01 gradient is pass-through inside and zero outside") {
  Tensor<double> x = Tensor<double>::from({4}, {-0.5, 0.3, 0.9, 1.7});
  Var<double> leaf = Var<double>::leaf(x);
  Var<double> y = sum(clamp01(leaf));
  y.backward();
  CHECK(leaf.grad()[0] == 0.0);
  CHECK(leaf.grad()[1] == 1.0);
  CHECK(leaf.grad()[2] == 1.0);
  CHECK(leaf.grad()[3] == 0.0);
}

TEST_CASE("detach cuts the graph") {
  Tensor<double> x({3}, 2.0);
  Var<double> leaf = Var<double>::leaf(x);
  Var<double> d = mul(leaf, leaf).detach();
  Var<double> y = sum(d);
  y.backward();
  CHECK_FALSE(leaf.has_grad());
}
