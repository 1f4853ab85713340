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

#include <cmath>
#include <string>
#include <vector>

#include "dialseg/autodiff.hpp"

namespace dialseg {

/// Compare the recorded analytic gradient of f against central differences at
/// the listed coordinates. Returns the max of
/// |analytic - numeric| / max(1, |numeric|).
/// f must map a leaf Var to a scalar Var and be re-evaluable at perturbed x.
template <typename T, typename F>
T grad_check_at(F&& f, const Tensor<T>& x, T eps, const std::vector<size_t>& coords) {
  Var<T> leaf = Var<T>::leaf(x, true);
  Var<T> y = f(leaf);
  if (!y.value().all_finite()) throw NumericFailure("grad_check: non-finite function value");
  y.backward();
  Tensor<T> analytic = leaf.has_grad() ? leaf.grad() : Tensor<T>(x.shape());

  T worst = 0;
  Tensor<T> probe = x;
  for (size_t i : coords) {
    T orig = probe[i];
    probe[i] = orig + eps;
    T fp = f(Var<T>(probe, false)).scalar_value();
    probe[i] = orig - eps;
    T fm = f(Var<T>(probe, false)).scalar_value();
    probe[i] = orig;
    if (!std::isfinite(static_cast<double>(fp)) || !std::isfinite(static_cast<double>(fm)))
      throw NumericFailure("grad_check: non-finite function value at coordinate " +
                           std::to_string(i));
    T numeric = (fp - fm) / (2 * eps);
    T rel = std::abs(analytic[i] - numeric) / std::max(T(1), std::abs(numeric));
    worst = std::max(worst, rel);
  }
  return worst;
}

/// Full check over every coordinate of x.
template <typename T, typename F>
T grad_check(F&& f, const Tensor<T>& x, T eps) {
  std::vector<size_t> coords(x.size());
  for (size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  return grad_check_at(std::forward<F>(f), x, eps, coords);
}

/// Check a deterministic subsample of coordinates (for large parameter blocks).
template <typename T, typename F>
T grad_check_sampled(F&& f, const Tensor<T>& x, T eps, size_t max_coords, Rng& rng) {
  std::vector<size_t> coords;
  if (x.size() <= max_coords) {
    coords.resize(x.size());
    for (size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  } else {
    coords.reserve(max_coords);
    for (size_t i = 0; i < max_coords; ++i)
      coords.push_back(static_cast<size_t>(rng() % x.size()));
  }
  return grad_check_at(std::forward<F>(f), x, eps, coords);
}

/// Gradient check against a persistent parameter leaf owned by a module.
/// rebuild() must construct a fresh scalar loss graph from the module's
/// current state. At most max_coords coordinates are probed.
template <typename T, typename F>
T param_grad_check(Var<T> param, F&& rebuild, T eps, size_t max_coords, Rng& rng) {
  param.zero_grad();
  Var<T> y = rebuild();
  if (!y.value().all_finite()) throw NumericFailure("param_grad_check: non-finite value");
  y.backward();
  Tensor<T> analytic = param.has_grad() ? param.grad() : Tensor<T>(param.value().shape());

  std::vector<size_t> coords;
  if (param.size() <= max_coords) {
    coords.resize(param.size());
    for (size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  } else {
    coords.reserve(max_coords);
    for (size_t i = 0; i < max_coords; ++i)
      coords.push_back(static_cast<size_t>(rng() % param.size()));
  }

  T worst = 0;
  for (size_t i : coords) {
    T orig = param.value()[i];
    param.value_mut()[i] = orig + eps;
    T fp = rebuild().scalar_value();
    param.value_mut()[i] = orig - eps;
    T fm = rebuild().scalar_value();
    param.value_mut()[i] = orig;
    if (!std::isfinite(static_cast<double>(fp)) || !std::isfinite(static_cast<double>(fm)))
      throw NumericFailure("param_grad_check: non-finite value at coordinate " +
                           std::to_string(i));
    T numeric = (fp - fm) / (2 * eps);
    T rel = std::abs(analytic[i] - numeric) / std::max(T(1), std::abs(numeric));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace dialseg
