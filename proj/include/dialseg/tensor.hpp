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
#include <cstddef>
#include <sstream>
#include <utility>
#include <vector>

#include "dialseg/common.hpp"

namespace dialseg {

/// Dense row-major tensor. Rank-3 tensors are CHW throughout the project.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape, T fill = T(0)) : shape_(std::move(shape)) {
    size_t n = 1;
    for (int d : shape_) {
      if (d <= 0) throw InvalidArgument("tensor extents must be positive");
      n *= static_cast<size_t>(d);
    }
    data_.assign(n, fill);
  }

  static Tensor from(std::vector<int> shape, std::vector<T> data) {
    Tensor t;
    t.shape_ = std::move(shape);
    size_t n = 1;
    for (int d : t.shape_) {
      if (d <= 0) throw InvalidArgument("tensor extents must be positive");
      n *= static_cast<size_t>(d);
    }
    if (n != data.size()) throw InvalidArgument("tensor data length does not match shape");
    t.data_ = std::move(data);
    return t;
  }

  static Tensor scalar(T v) { return from({1}, {v}); }

  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  const std::vector<int>& shape() const { return shape_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](size_t i) { return data_[i]; }
  T operator[](size_t i) const { return data_[i]; }

  // CHW addressing for rank-3 tensors.
  size_t idx3(int c, int y, int x) const {
    return (static_cast<size_t>(c) * static_cast<size_t>(shape_[1]) + static_cast<size_t>(y)) *
               static_cast<size_t>(shape_[2]) +
           static_cast<size_t>(x);
  }
  T& at3(int c, int y, int x) { return data_[idx3(c, y, x)]; }
  T at3(int c, int y, int x) const { return data_[idx3(c, y, x)]; }

  size_t idx2(int y, int x) const {
    return static_cast<size_t>(y) * static_cast<size_t>(shape_[1]) + static_cast<size_t>(x);
  }
  T& at2(int y, int x) { return data_[idx2(y, x)]; }
  T at2(int y, int x) const { return data_[idx2(y, x)]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  void fill(T v) {
    for (auto& x : data_) x = v;
  }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  T min_value() const {
    T m = data_.empty() ? T(0) : data_[0];
    for (T v : data_) m = v < m ? v : m;
    return m;
  }

  T max_value() const {
    T m = data_.empty() ? T(0) : data_[0];
    for (T v : data_) m = v > m ? v : m;
    return m;
  }

  T sum_value() const {
    T s = 0;
    for (T v : data_) s += v;
    return s;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ")";
    return os.str();
  }

 private:
  std::vector<int> shape_;
  std::vector<T> data_;
};

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* ctx) {
  if (!a.same_shape(b))
    throw InvalidArgument(std::string(ctx) + ": shape mismatch " + a.shape_str() + " vs " +
                          b.shape_str());
}

}  // namespace dialseg
