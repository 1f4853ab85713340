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

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace dialseg {

// Error taxonomy. The CLI maps these onto process exit codes:
// usage errors -> 1, data/config/argument errors -> 2, numeric failures -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad caller-supplied value (shape mismatch, out-of-range parameter, ...).
struct InvalidArgument : Error {
  using Error::Error;
};

// NaN/Inf or other numeric breakdown inside a computation.
struct NumericFailure : Error {
  using Error::Error;
};

// Unreadable/ill-formed external data (files, checkpoints, labels).
struct DataError : Error {
  using Error::Error;
};

// Bad run configuration (missing manifest, unknown key, unsupported id).
struct ConfigError : Error {
  using Error::Error;
};

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {  // inclusive bounds
  std::uniform_int_distribution<int> dist(lo, hi);
  return dist(rng);
}

inline double normal(Rng& rng, double mean, double stddev) {
  std::normal_distribution<double> dist(mean, stddev);
  return dist(rng);
}

}  // namespace dialseg
