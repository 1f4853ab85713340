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
#include <utility>
#include <vector>

#include "dialseg/spatial.hpp"

namespace dialseg {

template <typename T>
struct NamedParam {
  std::string name;
  Var<T> var;
};

/// Ordered parameter registry; ordering defines serialization layout and
/// optimizer state slots.
template <typename T>
using ParamList = std::vector<NamedParam<T>>;

template <typename T>
size_t total_param_count(const ParamList<T>& params) {
  size_t n = 0;
  for (const auto& p : params) n += p.var.size();
  return n;
}

namespace detail {

template <typename T>
Tensor<T> kaiming_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor<T> t(std::move(shape));
  double bound = std::sqrt(6.0 / fan_in);
  for (size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(uniform(rng, -bound, bound));
  return t;
}

}  // namespace detail

template <typename T>
struct Conv2dLayer {
  int in_ch = 0, out_ch = 0, kernel = 0;
  ConvGeom geom;
  Var<T> weight, bias;

  Conv2dLayer() = default;
  Conv2dLayer(int in, int out, int k, ConvGeom g, Rng& rng)
      : in_ch(in), out_ch(out), kernel(k), geom(g) {
    weight = Var<T>::leaf(detail::kaiming_uniform<T>({out, in, k, k}, in * k * k, rng));
    bias = Var<T>::leaf(Tensor<T>({out}));
  }

  Var<T> operator()(const Var<T>& x) const { return conv2d(x, weight, bias, geom); }

  size_t param_count() const { return weight.size() + bias.size(); }

  void collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }
};

template <typename T>
struct ConvTranspose2dLayer {
  int in_ch = 0, out_ch = 0, kernel = 0, stride = 1;
  Var<T> weight, bias;

  ConvTranspose2dLayer() = default;
  ConvTranspose2dLayer(int in, int out, int k, int s, Rng& rng)
      : in_ch(in), out_ch(out), kernel(k), stride(s) {
    weight = Var<T>::leaf(detail::kaiming_uniform<T>({in, out, k, k}, in * k * k, rng));
    bias = Var<T>::leaf(Tensor<T>({out}));
  }

  Var<T> operator()(const Var<T>& x) const { return conv_transpose2d(x, weight, bias, stride); }

  size_t param_count() const { return weight.size() + bias.size(); }

  void collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }
};

template <typename T>
struct LinearLayer {
  int in_dim = 0, out_dim = 0;
  Var<T> weight, bias;

  LinearLayer() = default;
  LinearLayer(int in, int out, Rng& rng) : in_dim(in), out_dim(out) {
    weight = Var<T>::leaf(detail::kaiming_uniform<T>({out, in}, in, rng));
    bias = Var<T>::leaf(Tensor<T>({out}));
  }

  void zero_init() {
    weight.value_mut().fill(T(0));
    bias.value_mut().fill(T(0));
  }

  Var<T> operator()(const Var<T>& x) const { return linear(x, weight, bias); }

  size_t param_count() const { return weight.size() + bias.size(); }

  void collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }
};

/// Per-layer parameter count report.
struct ParamCountEntry {
  std::string name;
  size_t count;
};

struct ParamCountReport {
  std::vector<ParamCountEntry> layers;
  size_t total = 0;

  void add(const std::string& name, size_t count) {
    layers.push_back({name, count});
    total += count;
  }
};

}  // namespace dialseg
