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

// Synthetic corpora drawn from the full generative process, with the
// latent variables kept as ground truth.
//
// Words and the language model are mutually dependent within an epoch: l_t
// needs the words, and beta_t needs l_t. Each epoch first draws provisional
// words from pi(beta_{t-1}), computes l_t from them, draws beta_t, then
// redraws the words from pi(beta_t). The recorded l is recomputed from the
// final words.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "expaware/common.hpp"
#include "expaware/corpus.hpp"
#include "expaware/language_model.hpp"
#include "expaware/stochastic.hpp"

namespace expaware {

struct SynthConfig {
  std::size_t n_users = 20;
  std::size_t reviews_per_user = 30;
  std::size_t tokens_per_review = 30;
  std::size_t n_items = 50;
  std::size_t Z = 3;
  std::size_t V = 100;
  std::size_t T = 5;  // epochs of one calendar year each
  std::vector<GbmParams> users;  // one per user; empty means GbmParams{} for all
  double alpha = 0.5;
  double sigma_lm = 1.0;
  double beta0_scale = 1.0;        // sd of the random initial beta
  double block_strength = 0.0;     // > 0: facet z favors words w with w % Z == z
  std::optional<std::size_t> drift_word;
  double drift_per_epoch = 0.0;    // added to beta of drift_word in every facet, per epoch
  // rating = clip(rating_base + rating_a * log e + rating_b * theta_{d,0} + N(0, rating_noise^2), 1, 5)
  double rating_base = 2.5;
  double rating_a = 0.5;
  double rating_b = 1.0;
  double rating_noise = 0.1;
  std::int64_t start_timestamp = 1262304000;  // 2010-01-01T00:00:00Z
  std::uint64_t seed = 7;

  void check() const {
    require(n_users >= 1 && reviews_per_user >= 1 && tokens_per_review >= 1 && n_items >= 1,
            "synth counts must be >= 1");
    require(Z >= 1 && V >= 2 && T >= 1, "synth requires Z >= 1, V >= 2, T >= 1");
    require(users.empty() || users.size() == n_users, "synth: one GBM per user expected");
    for (const auto& u : users) require(u.valid(), "synth: invalid GBM parameters");
    require(alpha > 0.0 && sigma_lm >= 0.0, "synth: alpha must be positive and sigma_lm non-negative");
    require(!drift_word || *drift_word + 1 < V, "synth: drift word must not be the reference word");
    require(reviews_per_user + 2 < T * 365, "synth: too many reviews per user for the time span");
  }

  GbmParams user_params(std::size_t u) const { return users.empty() ? GbmParams{} : users[u]; }
};

struct GroundTruth {
  std::vector<double> e;                          // per review, corpus order
  std::vector<std::vector<std::uint32_t>> z;      // per review token
  std::vector<double> beta;                       // T x Z x V
  std::vector<double> theta;                      // D x Z
  std::vector<double> l;                          // T x V, 0 where absent
  std::vector<GbmParams> users;
  std::size_t T = 0, Z = 0, V = 0;

  double beta_at(std::size_t t, std::size_t z, std::size_t w) const { return beta[(t * Z + z) * V + w]; }

  /// Experience of each user's latest review.
  std::vector<double> final_user_experience(const Corpus& corpus) const {
    std::vector<double> out(corpus.n_users(), 0.0);
    for (std::size_t d = 0; d < corpus.reviews.size(); ++d) out[corpus.reviews[d].user] = e[d];
    return out;
  }

  nlohmann::json to_json(const Corpus& corpus) const {
    nlohmann::json users_json = nlohmann::json::array();
    for (std::size_t u = 0; u < users.size(); ++u)
      users_json.push_back({{"user", corpus.users[u]}, {"mu", users[u].mu}, {"sigma", users[u].sigma}, {"s0", users[u].s0}});
    return {{"dims", {{"T", T}, {"Z", Z}, {"V", V}}},
            {"vocabulary", corpus.vocabulary},
            {"users", users_json},
            {"e", e},
            {"z", z},
            {"theta", theta},
            {"beta", beta},
            {"l", l}};
  }
};

struct SyntheticData {
  Corpus corpus;
  GroundTruth truth;
};

namespace detail {

inline std::vector<double> sample_dirichlet(std::size_t k, double alpha, Rng& rng) {
  std::vector<double> x(k);
  double sum = 0.0;
  for (auto& v : x) sum += v = std::gamma_distribution<double>(alpha, 1.0)(rng);
  if (!(sum > 0.0)) {
    // All draws underflowed; fall back to a uniformly chosen vertex.
    std::fill(x.begin(), x.end(), 0.0);
    x[std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)] = 1.0;
    return x;
  }
  for (auto& v : x) v /= sum;
  return x;
}

inline std::uint32_t sample_index(std::span<const double> p, Rng& rng) {
  return static_cast<std::uint32_t>(std::discrete_distribution<std::size_t>(p.begin(), p.end())(rng));
}

}  // namespace detail

inline SyntheticData generate(const SynthConfig& cfg) {
  cfg.check();
  Rng rng(cfg.seed);
  const std::size_t Z = cfg.Z, V = cfg.V, T = cfg.T;

  // Skeleton: per-user review days, binned with the same rules as ingestion.
  Corpus c;
  c.epoch_width = EpochWidth{1, EpochWidth::Unit::kYear};
  for (std::size_t w = 0; w < V; ++w) c.vocabulary.push_back("w" + std::to_string(w));
  for (std::size_t u = 0; u < cfg.n_users; ++u) c.users.push_back("u" + std::to_string(u));
  for (std::size_t i = 0; i < cfg.n_items; ++i) c.items.push_back("i" + std::to_string(i));
  const auto last_day = static_cast<std::int64_t>(T * 365 - 1);
  std::uniform_int_distribution<std::uint32_t> pick_item(0, static_cast<std::uint32_t>(cfg.n_items - 1));
  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    const std::int64_t start = std::uniform_int_distribution<std::int64_t>(0, std::min<std::int64_t>(180, last_day - static_cast<std::int64_t>(cfg.reviews_per_user)))(rng);
    std::vector<std::int64_t> pool(static_cast<std::size_t>(last_day - start - 1));
    std::iota(pool.begin(), pool.end(), start + 2);
    std::vector<std::int64_t> days{start};
    std::sample(pool.begin(), pool.end(), std::back_inserter(days), cfg.reviews_per_user - 1, rng);
    for (auto day : days) {
      Review r;
      r.user = static_cast<std::uint32_t>(u);
      r.item = pick_item(rng);
      r.timestamp = cfg.start_timestamp + day * 86400 + 43200;
      c.reviews.push_back(std::move(r));
    }
  }
  std::stable_sort(c.reviews.begin(), c.reviews.end(),
                   [](const Review& a, const Review& b) { return a.timestamp < b.timestamp; });
  bin_timestamps(c, c.epoch_width);
  if (c.n_epochs != T) throw DataError("synth: generated timestamps do not cover every epoch");
  const std::size_t D = c.reviews.size();

  GroundTruth g;
  g.T = T, g.Z = Z, g.V = V;
  for (std::size_t u = 0; u < cfg.n_users; ++u) g.users.push_back(cfg.user_params(u));

  // Experiences: one GBM path per user over that user's fine times.
  g.e.assign(D, 0.0);
  {
    std::vector<std::vector<std::size_t>> by_user(cfg.n_users);
    for (std::size_t d = 0; d < D; ++d) by_user[c.reviews[d].user].push_back(d);
    for (std::size_t u = 0; u < cfg.n_users; ++u) {
      std::vector<double> times;
      for (auto d : by_user[u]) times.push_back(c.reviews[d].t_fine);
      const auto path = simulate_gbm_path(g.users[u], times, rng);
      for (std::size_t i = 0; i < path.size(); ++i) g.e[by_user[u][i]] = path[i];
    }
  }

  // Facet proportions and token facets.
  g.theta.assign(D * Z, 0.0);
  g.z.resize(D);
  for (std::size_t d = 0; d < D; ++d) {
    const auto theta = Z == 1 ? std::vector<double>{1.0} : detail::sample_dirichlet(Z, cfg.alpha, rng);
    std::copy(theta.begin(), theta.end(), g.theta.begin() + static_cast<std::ptrdiff_t>(d * Z));
    g.z[d].resize(cfg.tokens_per_review);
    for (auto& z : g.z[d]) z = Z == 1 ? 0 : detail::sample_index(theta, rng);
  }

  std::vector<std::vector<std::size_t>> epoch_docs(T);
  for (std::size_t d = 0; d < D; ++d) epoch_docs[c.reviews[d].epoch].push_back(d);

  g.beta.assign(T * Z * V, 0.0);
  g.l.assign(T * V, 0.0);
  auto beta_row = [&](std::size_t t, std::size_t z) {
    return std::span<double>(g.beta.data() + (t * Z + z) * V, V);
  };
  auto draw_words = [&](std::size_t t) {
    std::vector<std::vector<double>> probs(Z);
    for (std::size_t z = 0; z < Z; ++z) probs[z] = softmax_map(beta_row(t, z));
    for (auto d : epoch_docs[t]) {
      auto& tokens = c.reviews[d].tokens;
      tokens.resize(cfg.tokens_per_review);
      for (std::size_t j = 0; j < tokens.size(); ++j) tokens[j] = detail::sample_index(probs[g.z[d][j]], rng);
    }
  };
  auto epoch_l = [&](std::size_t t) {
    WordExperienceAccumulator acc(V);
    for (auto d : epoch_docs[t]) acc.add(c.reviews[d].tokens, g.e[d]);
    return acc.result();
  };

  for (std::size_t z = 0; z < Z; ++z) {
    auto row = beta_row(0, z);
    for (std::size_t w = 0; w + 1 < V; ++w) {
      row[w] = cfg.beta0_scale * standard_normal(rng);
      if (cfg.block_strength > 0.0 && w % Z == z) row[w] += cfg.block_strength;
    }
  }
  draw_words(0);
  std::vector<double> l_prev = epoch_l(0);
  std::copy(l_prev.begin(), l_prev.end(), g.l.begin());

  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t z = 0; z < Z; ++z) {
      const auto prev = beta_row(t - 1, z);
      std::copy(prev.begin(), prev.end(), beta_row(t, z).begin());
    }
    draw_words(t);  // provisional
    const auto l_now = epoch_l(t);
    for (std::size_t z = 0; z < Z; ++z) {
      auto row = beta_row(t, z);
      for (std::size_t w = 0; w + 1 < V; ++w) {
        const double var = cfg.sigma_lm * std::abs(l_now[w] - l_prev[w]);
        if (var > 0.0) row[w] += std::sqrt(var) * standard_normal(rng);
        if (cfg.drift_word && w == *cfg.drift_word) row[w] += cfg.drift_per_epoch;
      }
    }
    draw_words(t);  // final
    l_prev = epoch_l(t);
    std::copy(l_prev.begin(), l_prev.end(), g.l.begin() + static_cast<std::ptrdiff_t>(t * V));
  }

  for (std::size_t d = 0; d < D; ++d) {
    const double noise = cfg.rating_noise * standard_normal(rng);
    const double rating = cfg.rating_base + cfg.rating_a * std::log(g.e[d]) + cfg.rating_b * g.theta[d * Z] + noise;
    c.reviews[d].rating = std::clamp(rating, 1.0, 5.0);
  }
  return {std::move(c), std::move(g)};
}

/// Raw reviews equivalent to the synthetic corpus, for JSON-lines export.
inline std::vector<RawReview> to_raw_reviews(const Corpus& c) {
  std::vector<RawReview> out;
  out.reserve(c.reviews.size());
  for (const auto& r : c.reviews) {
    RawReview raw{c.users[r.user], c.items[r.item], r.timestamp, r.rating, {}};
    for (auto w : r.tokens) {
      if (!raw.text.empty()) raw.text += ' ';
      raw.text += c.vocabulary[w];
    }
    out.push_back(std::move(raw));
  }
  return out;
}

struct SynthFixture {
  std::string name;
  SynthConfig config;
};

/// S1: two groups of ten users with slow (0.05/yr) and fast (0.6/yr) drift.
inline SynthConfig fixture_s1() {
  SynthConfig c;
  c.n_users = 20;
  c.reviews_per_user = 30;
  c.tokens_per_review = 30;
  c.Z = 3;
  c.V = 100;
  c.T = 5;
  for (std::size_t u = 0; u < c.n_users; ++u) c.users.push_back({u < 10 ? 0.05 : 0.6, 0.2, 1.0});
  c.seed = 101;
  return c;
}

/// S2: three facets concentrated on disjoint word blocks.
inline SynthConfig fixture_s2() {
  SynthConfig c;
  c.n_users = 20;
  c.reviews_per_user = 20;
  c.tokens_per_review = 40;
  c.Z = 3;
  c.V = 200;
  c.T = 4;
  c.alpha = 0.3;
  c.beta0_scale = 0.5;
  c.block_strength = 4.0;
  c.sigma_lm = 0.5;
  c.seed = 202;
  return c;
}

/// S3: word w0 gains mass in every facet across five epochs.
inline SynthConfig fixture_s3() {
  SynthConfig c;
  c.n_users = 10;
  c.reviews_per_user = 20;
  c.tokens_per_review = 30;
  c.Z = 2;
  c.V = 50;
  c.T = 5;
  c.sigma_lm = 0.01;
  c.drift_word = 0;
  c.drift_per_epoch = 1.0;
  c.seed = 303;
  return c;
}

inline std::vector<SynthFixture> standard_fixtures() {
  return {{"S1", fixture_s1()}, {"S2", fixture_s2()}, {"S3", fixture_s3()}};
}

inline std::vector<SyntheticData> standard_suite() {
  std::vector<SyntheticData> out;
  for (const auto& f : standard_fixtures()) out.push_back(generate(f.config));
  return out;
}

inline SynthConfig fixture_by_name(const std::string& name) {
  for (const auto& f : standard_fixtures())
    if (f.name == name || (f.name[0] == 'S' && name == std::string("s") + f.name[1])) return f.config;
  throw ArgumentError("unknown fixture '" + name + "' (expected S1, S2 or S3)");
}

}  // namespace expaware
