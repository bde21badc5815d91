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

#include <cstdint>
#include <span>
#include <vector>

#include "expaware/common.hpp"
#include "expaware/corpus.hpp"
#include "expaware/language_model.hpp"

namespace expaware {

/// Token facet assignments with theta collapsed out. Counts are kept per
/// document and per (epoch, facet, word); the language model is a
/// parameter, so the word term of the conditional is pi(beta) rather than a
/// collapsed Dirichlet ratio.
struct FacetState {
  std::size_t Z = 0;
  std::size_t V = 0;
  std::size_t T = 0;
  double alpha = 0.0;
  std::vector<std::vector<std::uint32_t>> assignments;
  std::vector<std::uint32_t> doc_topic;          // D x Z
  std::vector<std::uint32_t> epoch_topic_word;   // T x Z x V
  std::vector<std::uint32_t> epoch_topic_total;  // T x Z

  std::size_t n_docs() const { return assignments.size(); }

  std::uint32_t n_dz(std::size_t d, std::size_t z) const { return doc_topic[d * Z + z]; }
  std::uint32_t n_tzw(std::size_t t, std::size_t z, std::size_t w) const {
    return epoch_topic_word[(t * Z + z) * V + w];
  }

  /// n(t, ., .) as a Z x V row-major block.
  std::span<const std::uint32_t> epoch_block(std::size_t t) const {
    return {epoch_topic_word.data() + t * Z * V, Z * V};
  }

  /// Rebuilds all counts from `assignments`.
  void rebuild_counts(const Corpus& corpus) {
    doc_topic.assign(corpus.reviews.size() * Z, 0);
    epoch_topic_word.assign(T * Z * V, 0);
    epoch_topic_total.assign(T * Z, 0);
    for (std::size_t d = 0; d < corpus.reviews.size(); ++d) {
      const auto& r = corpus.reviews[d];
      for (std::size_t j = 0; j < r.tokens.size(); ++j) {
        const auto z = assignments[d][j];
        ++doc_topic[d * Z + z];
        ++epoch_topic_word[(r.epoch * Z + z) * V + r.tokens[j]];
        ++epoch_topic_total[r.epoch * Z + z];
      }
    }
  }

  static FacetState from_assignments(const Corpus& corpus, std::size_t facets, double alpha,
                                     std::vector<std::vector<std::uint32_t>> assignments) {
    require(facets >= 1, "number of facets must be >= 1");
    require(assignments.size() == corpus.reviews.size(), "assignment table does not match corpus");
    FacetState s;
    s.Z = facets;
    s.V = corpus.vocab_size();
    s.T = corpus.n_epochs;
    s.alpha = alpha;
    for (std::size_t d = 0; d < assignments.size(); ++d) {
      require(assignments[d].size() == corpus.reviews[d].tokens.size(), "assignment row length mismatch");
      for (auto z : assignments[d]) require(z < facets, "assignment out of range");
    }
    s.assignments = std::move(assignments);
    s.rebuild_counts(corpus);
    return s;
  }

  /// Uniformly random assignments.
  static FacetState random(const Corpus& corpus, std::size_t facets, double alpha, Rng& rng) {
    require(facets >= 1, "number of facets must be >= 1");
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(facets - 1));
    std::vector<std::vector<std::uint32_t>> z(corpus.reviews.size());
    for (std::size_t d = 0; d < z.size(); ++d) {
      z[d].resize(corpus.reviews[d].tokens.size());
      for (auto& v : z[d]) v = pick(rng);
    }
    return from_assignments(corpus, facets, alpha, std::move(z));
  }

  /// True when the stored counts equal counts rebuilt from assignments.
  bool consistent(const Corpus& corpus) const {
    FacetState copy = *this;
    copy.rebuild_counts(corpus);
    return copy.doc_topic == doc_topic && copy.epoch_topic_word == epoch_topic_word &&
           copy.epoch_topic_total == epoch_topic_total;
  }
};

/// Normalized P(z = k | rest) for word w in epoch t given the document's
/// facet counts with the current token already removed.
inline std::vector<double> facet_posterior(std::span<const std::uint32_t> doc_counts_minus_j, double alpha,
                                           const LanguageModel& lm, std::size_t t, std::size_t w) {
  const std::size_t Z = doc_counts_minus_j.size();
  double n_total = 0.0;
  for (auto c : doc_counts_minus_j) n_total += c;
  const double denom = n_total + static_cast<double>(Z) * alpha;
  std::vector<double> p(Z);
  double sum = 0.0;
  for (std::size_t k = 0; k < Z; ++k)
    sum += p[k] = (doc_counts_minus_j[k] + alpha) / denom * lm.prob(t, k, w);
  if (!(sum > 0.0) || !std::isfinite(sum))
    throw NumericalError("facet conditional has no finite positive mass");
  for (double& v : p) v /= sum;
  return p;
}

/// Conditional for token j of review d. The token's own assignment is
/// excluded here; callers pass the state as-is.
inline std::vector<double> conditional_facet_distribution(const Corpus& corpus, std::size_t d, std::size_t j,
                                                          const FacetState& state, const LanguageModel& lm) {
  const auto& r = corpus.reviews[d];
  require(j < r.tokens.size(), "token index out of range");
  std::vector<std::uint32_t> counts(state.doc_topic.begin() + static_cast<std::ptrdiff_t>(d * state.Z),
                                    state.doc_topic.begin() + static_cast<std::ptrdiff_t>((d + 1) * state.Z));
  --counts[state.assignments[d][j]];
  return facet_posterior(counts, state.alpha, lm, r.epoch, r.tokens[j]);
}

/// One sequential sweep in document then token order. beta is held fixed;
/// every count is kept in step with the assignments.
inline void gibbs_sweep(const Corpus& corpus, FacetState& state, const LanguageModel& lm, Rng& rng) {
  const std::size_t Z = state.Z;
  if (Z == 1) return;
  std::vector<double> cumulative(Z);
  for (std::size_t d = 0; d < corpus.reviews.size(); ++d) {
    const auto& r = corpus.reviews[d];
    std::uint32_t* nd = state.doc_topic.data() + d * Z;
    for (std::size_t j = 0; j < r.tokens.size(); ++j) {
      const auto w = r.tokens[j];
      const auto old = state.assignments[d][j];
      --nd[old];
      --state.epoch_topic_word[(r.epoch * Z + old) * state.V + w];
      --state.epoch_topic_total[r.epoch * Z + old];

      double sum = 0.0;
      for (std::size_t k = 0; k < Z; ++k) {
        sum += (nd[k] + state.alpha) * lm.prob(r.epoch, k, w);
        cumulative[k] = sum;
      }
      if (!(sum > 0.0) || !std::isfinite(sum))
        throw NumericalError("gibbs: facet conditional has no finite positive mass");
      const double u = uniform01(rng) * sum;
      std::size_t k = 0;
      while (k + 1 < Z && cumulative[k] <= u) ++k;

      state.assignments[d][j] = static_cast<std::uint32_t>(k);
      ++nd[k];
      ++state.epoch_topic_word[(r.epoch * Z + k) * state.V + w];
      ++state.epoch_topic_total[r.epoch * Z + k];
    }
  }
}

/// Posterior-mean facet proportions (n(d,z) + alpha) / (n(d,.) + Z alpha).
inline std::vector<double> estimate_theta(const FacetState& state, std::size_t d) {
  double total = 0.0;
  for (std::size_t z = 0; z < state.Z; ++z) total += state.n_dz(d, z);
  const double denom = total + static_cast<double>(state.Z) * state.alpha;
  std::vector<double> theta(state.Z);
  for (std::size_t z = 0; z < state.Z; ++z) theta[z] = (state.n_dz(d, z) + state.alpha) / denom;
  return theta;
}

}  // namespace expaware
