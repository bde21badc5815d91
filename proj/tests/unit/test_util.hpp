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
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "expaware/corpus.hpp"

namespace expaware::testing {

/// Kolmogorov-Smirnov statistic of `samples` against `cdf`.
inline double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
  }
  return d;
}

inline double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

/// Builds a corpus directly from (user, epoch, tokens) triples. Timestamps
/// are one day apart in input order; t_fine is days since the user's first
/// review, floored at eps_t.
struct ToyReview {
  std::uint32_t user;
  std::uint32_t epoch;
  std::vector<std::uint32_t> tokens;
  double rating = 3.0;
  std::uint32_t item = 0;
};

inline Corpus toy_corpus(std::size_t V, const std::vector<ToyReview>& reviews) {
  Corpus c;
  for (std::size_t w = 0; w < V; ++w) c.vocabulary.push_back("w" + std::to_string(w));
  std::uint32_t max_user = 0, max_item = 0;
  std::vector<std::int64_t> first;
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    const auto& t = reviews[i];
    Review r;
    r.user = t.user;
    r.item = t.item;
    r.epoch = t.epoch;
    r.rating = t.rating;
    r.tokens = t.tokens;
    r.timestamp = 1000000000 + static_cast<std::int64_t>(i) * 86400;
    max_user = std::max(max_user, t.user);
    max_item = std::max(max_item, t.item);
    c.n_epochs = std::max(c.n_epochs, t.epoch + 1);
    c.reviews.push_back(std::move(r));
  }
  for (std::uint32_t u = 0; u <= max_user; ++u) c.users.push_back("u" + std::to_string(u));
  for (std::uint32_t i = 0; i <= max_item; ++i) c.items.push_back("i" + std::to_string(i));
  assign_fine_times(c);
  return c;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("expaware_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace expaware::testing
