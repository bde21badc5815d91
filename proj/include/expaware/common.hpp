// Copyright 2026 The expaware Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace expaware {

/// Seconds in a Julian year; fine timestamps are expressed in these years.
inline constexpr double kSecondsPerYear = 365.25 * 86400.0;

/// Floor on fine time (years) so the log-normal at a user's first review is
/// never a point mass.
inline constexpr double kEpsTime = 1.0 / 365.0;

/// Floor applied to every Gaussian variance that can otherwise reach zero.
inline constexpr double kEpsVar = 1e-6;

/// Lower clamp on GBM volatility.
inline constexpr double kSigmaMin = 1e-3;

/// Initial Kalman prediction error.
inline constexpr double kKalmanP0 = 1.0;

using Rng = std::mt19937_64;

// Error categories. The CLI maps each to a distinct exit code.

struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Broken internal invariant or non-finite numerics.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input data (bad JSON line, missing field, unusable corpus).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Checkpoint format or model/corpus identity mismatch.
struct VersionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

/// log N(x; mean, variance)
inline double log_normal_density(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - d * d / (2.0 * variance);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ArgumentError(what);
}

/// Runs fn(i) for i in [0, n) over `threads` workers in contiguous blocks.
/// Callers must only write disjoint state per index.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  threads = std::min(threads, n);
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t k = 0; k < threads; ++k) {
    pool.emplace_back([&, k] {
      const std::size_t begin = n * k / threads, end = n * (k + 1) / threads;
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
}

}  // namespace expaware
