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

// Metropolis-Hastings over per-review experience. The proposal is the
// user's GBM marginal at the review's fine time, so it cancels and the
// acceptance ratio only compares the fine-grained language transitions into
// and out of the review under the old and candidate experience.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "expaware/common.hpp"
#include "expaware/corpus.hpp"
#include "expaware/facet_sampler.hpp"
#include "expaware/language_model.hpp"
#include "expaware/stochastic.hpp"

namespace expaware {

enum class MhScope {
  kActive,  // (w, z) pairs of the tokens of the neighbor triple
  kFull,    // every (w, z)
};

enum class MhNeighbors {
  kGlobal,  // adjacent reviews in global timestamp order
  kUser,    // adjacent reviews of the same user
};

enum class GbmFit {
  kPath,     // increment MLE over the user's review times
  kLiteral,  // sample moments of log e at the mean inter-review gap
};

struct ExperienceState {
  std::vector<double> e;          // per review, corpus order
  std::vector<GbmParams> users;  // per user

  static ExperienceState initial(const Corpus& corpus, double s0 = 1.0) {
    ExperienceState s;
    s.e.assign(corpus.reviews.size(), s0);
    s.users.assign(corpus.n_users(), GbmParams::initial(0.5, s0));
    return s;
  }
};

inline double propose_experience(const GbmParams& user, double t_fine, Rng& rng) {
  return sample_experience(user, t_fine, rng);
}

/// Fine-grained beta at a review: the epoch-level block beta_{t_d, ., .}
/// (Z x V), constant within an epoch.
inline std::span<const double> fine_grained_beta(const LanguageModel& lm, const Review& review) {
  if (review.epoch >= lm.T) throw ArgumentError("fine_grained_beta: review epoch beyond trained epochs");
  return {lm.beta.data() + lm.index(review.epoch, 0, 0), lm.Z * lm.V};
}

/// log Q summed over the given (z * V + w) offsets. beta_a / e_a (beta_c /
/// e_c) are absent when b has no predecessor (successor); the corresponding
/// factor is dropped. Variances are sigma * |delta e| + eps.
inline double log_acceptance_ratio(std::span<const std::size_t> offsets, std::span<const double> beta_a,
                                   std::span<const double> beta_b, std::span<const double> beta_c,
                                   std::optional<double> e_a, double e_b, std::optional<double> e_c,
                                   double candidate, double sigma, double eps = kEpsVar) {
  if (candidate == e_b) return 0.0;
  double log_q = 0.0;
  if (e_a) {
    const double v_new = sigma * std::abs(candidate - *e_a) + eps;
    const double v_old = sigma * std::abs(e_b - *e_a) + eps;
    for (auto i : offsets)
      log_q += log_normal_density(beta_b[i], beta_a[i], v_new) - log_normal_density(beta_b[i], beta_a[i], v_old);
  }
  if (e_c) {
    const double v_new = sigma * std::abs(*e_c - candidate) + eps;
    const double v_old = sigma * std::abs(*e_c - e_b) + eps;
    for (auto i : offsets)
      log_q += log_normal_density(beta_c[i], beta_b[i], v_new) - log_normal_density(beta_c[i], beta_b[i], v_old);
  }
  if (std::isnan(log_q)) throw NumericalError("MH acceptance ratio is not a number");
  return log_q;
}

struct MhConfig {
  double fraction = 0.2;
  MhScope scope = MhScope::kActive;
  MhNeighbors neighbors = MhNeighbors::kGlobal;
};

/// Predecessor/successor of each review under the chosen neighbor rule.
struct NeighborIndex {
  std::vector<std::optional<std::size_t>> prev, next;

  NeighborIndex(const Corpus& corpus, MhNeighbors mode) {
    const std::size_t D = corpus.reviews.size();
    prev.resize(D);
    next.resize(D);
    if (mode == MhNeighbors::kGlobal) {
      for (std::size_t d = 0; d < D; ++d) {
        if (d > 0) prev[d] = d - 1;
        if (d + 1 < D) next[d] = d + 1;
      }
      return;
    }
    std::vector<std::optional<std::size_t>> last(corpus.n_users());
    for (std::size_t d = 0; d < D; ++d) {
      auto& l = last[corpus.reviews[d].user];
      if (l) {
        prev[d] = *l;
        next[*l] = d;
      }
      l = d;
    }
  }
};

/// Distinct (z * V + w) offsets of the tokens of reviews a, b and c.
inline std::vector<std::size_t> active_offsets(const Corpus& corpus, const FacetState& facets,
                                               std::span<const std::size_t> docs) {
  std::vector<std::size_t> out;
  for (auto d : docs) {
    const auto& tokens = corpus.reviews[d].tokens;
    for (std::size_t j = 0; j < tokens.size(); ++j)
      out.push_back(facets.assignments[d][j] * facets.V + tokens[j]);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Q for review b against its neighbors under the current experiences.
inline double acceptance_ratio(const Corpus& corpus, const FacetState& facets, const LanguageModel& lm,
                               std::span<const double> e, std::optional<std::size_t> a, std::size_t b,
                               std::optional<std::size_t> c, double candidate, MhScope scope) {
  std::vector<std::size_t> docs{b};
  if (a) docs.push_back(*a);
  if (c) docs.push_back(*c);
  std::vector<std::size_t> offsets;
  if (scope == MhScope::kActive) {
    offsets = active_offsets(corpus, facets, docs);
  } else {
    offsets.resize(lm.Z * lm.V);
    std::iota(offsets.begin(), offsets.end(), std::size_t{0});
  }
  const auto beta_b = fine_grained_beta(lm, corpus.reviews[b]);
  const auto beta_a = a ? fine_grained_beta(lm, corpus.reviews[*a]) : std::span<const double>{};
  const auto beta_c = c ? fine_grained_beta(lm, corpus.reviews[*c]) : std::span<const double>{};
  const auto e_a = a ? std::optional<double>(e[*a]) : std::nullopt;
  const auto e_c = c ? std::optional<double>(e[*c]) : std::nullopt;
  return std::exp(log_acceptance_ratio(offsets, beta_a, beta_b, beta_c, e_a, e[b], e_c, candidate, lm.sigma_lm));
}

/// Resamples a uniformly random subset of ceil(fraction * D) reviews, in
/// timestamp order. beta stays frozen for the whole sweep. Returns the
/// acceptance rate.
inline double mh_sweep(const Corpus& corpus, const FacetState& facets, const LanguageModel& lm,
                       ExperienceState& state, const MhConfig& config, Rng& rng) {
  require(config.fraction > 0.0 && config.fraction <= 1.0, "mh fraction must be in (0, 1]");
  const std::size_t D = corpus.reviews.size();
  if (D == 0) return 0.0;
  const auto k = std::min(D, static_cast<std::size_t>(std::ceil(config.fraction * static_cast<double>(D))));
  std::vector<std::size_t> all(D), subset;
  std::iota(all.begin(), all.end(), std::size_t{0});
  subset.reserve(k);
  std::sample(all.begin(), all.end(), std::back_inserter(subset), k, rng);

  const NeighborIndex neighbors(corpus, config.neighbors);
  std::vector<std::size_t> full;
  if (config.scope == MhScope::kFull) {
    full.resize(lm.Z * lm.V);
    std::iota(full.begin(), full.end(), std::size_t{0});
  }
  std::size_t accepted = 0;
  for (auto b : subset) {
    const auto& review = corpus.reviews[b];
    const double candidate = propose_experience(state.users[review.user], review.t_fine, rng);
    if (!(candidate > 0.0) || !std::isfinite(candidate)) {
      // Under- or overflowed draw from an extreme GBM; the uniform is still
      // consumed so the stream does not depend on the outcome.
      uniform01(rng);
      continue;
    }
    const auto a = neighbors.prev[b];
    const auto c = neighbors.next[b];
    std::vector<std::size_t> docs{b};
    if (a) docs.push_back(*a);
    if (c) docs.push_back(*c);
    const auto offsets = config.scope == MhScope::kActive ? active_offsets(corpus, facets, docs) : full;
    const auto e_a = a ? std::optional<double>(state.e[*a]) : std::nullopt;
    const auto e_c = c ? std::optional<double>(state.e[*c]) : std::nullopt;
    const double log_q = log_acceptance_ratio(
        offsets, a ? fine_grained_beta(lm, corpus.reviews[*a]) : std::span<const double>{},
        fine_grained_beta(lm, review), c ? fine_grained_beta(lm, corpus.reviews[*c]) : std::span<const double>{},
        e_a, state.e[b], e_c, candidate, lm.sigma_lm);
    const double u = uniform01(rng);
    if (std::log(u) < log_q) {
      state.e[b] = candidate;
      ++accepted;
    }
  }
  return static_cast<double>(accepted) / static_cast<double>(subset.size());
}

/// Re-estimates every user's GBM from their current experiences. Users with
/// fewer than two reviews keep their parameters.
inline void refit_gbm_params(const Corpus& corpus, ExperienceState& state, GbmFit fit = GbmFit::kPath) {
  std::vector<std::vector<double>> times(corpus.n_users()), values(corpus.n_users());
  std::vector<std::vector<std::int64_t>> stamps(corpus.n_users());
  for (std::size_t d = 0; d < corpus.reviews.size(); ++d) {
    const auto& r = corpus.reviews[d];
    times[r.user].push_back(r.t_fine);
    values[r.user].push_back(state.e[d]);
    stamps[r.user].push_back(r.timestamp);
  }
  for (std::size_t u = 0; u < corpus.n_users(); ++u) {
    auto& params = state.users[u];
    std::optional<GbmEstimate> est;
    if (fit == GbmFit::kPath) {
      est = estimate_gbm_params_from_path(times[u], values[u], params.s0);
    } else if (values[u].size() >= 2) {
      const double span = static_cast<double>(stamps[u].back() - stamps[u].front()) / kSecondsPerYear;
      const double delta = std::max(span / static_cast<double>(values[u].size() - 1), kEpsTime);
      est = estimate_gbm_params(values[u], params.s0, delta);
    }
    if (est) {
      params.mu = est->mu;
      params.sigma = est->sigma;
    }
  }
}

}  // namespace expaware
