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

// Per-(epoch, facet) multinomials in natural parameters, chained over epochs
// by a scalar Kalman filter per (facet, word) whose noise follows the change
// in word experience.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "expaware/common.hpp"
#include "expaware/corpus.hpp"

namespace expaware {

enum class KalmanNoise {
  kLiteral,  // q from |l_{t-1} - l_{t-2}|, r from |l_t - l_{t-1}|
  kAligned,  // q = r from |l_t - l_{t-1}|
};

enum class KalmanError {
  kReset,  // each epoch predicts from the initial error P0
  kCarry,  // standard recursion p_t -> p_{t+1}
};

/// Softmax over natural parameters whose reference coordinate is 0.
inline std::vector<double> softmax_map(std::span<const double> beta) {
  double max = -std::numeric_limits<double>::infinity();
  for (double b : beta) {
    if (!std::isfinite(b)) throw ArgumentError("softmax_map: non-finite natural parameter");
    max = std::max(max, b);
  }
  std::vector<double> out(beta.size());
  double sum = 0.0;
  for (std::size_t w = 0; w < beta.size(); ++w) sum += out[w] = std::exp(beta[w] - max);
  for (double& p : out) p /= sum;
  return out;
}

/// beta_w = log p_w - log p_ref, reference = last coordinate.
inline std::vector<double> inverse_map(std::span<const double> prob) {
  require(!prob.empty(), "inverse_map: empty vector");
  double sum = 0.0;
  for (double p : prob) {
    if (!(p > 0.0) || !std::isfinite(p))
      throw ArgumentError("inverse_map: probabilities must be strictly positive");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ArgumentError("inverse_map: probabilities must sum to 1");
  const double log_ref = std::log(prob.back());
  std::vector<double> out(prob.size());
  for (std::size_t w = 0; w < prob.size(); ++w) out[w] = std::log(prob[w]) - log_ref;
  out.back() = 0.0;
  return out;
}

/// pi^{-1} of the gamma-smoothed relative frequencies of one (epoch, facet)
/// count row. Computed directly as log(n_w + g) - log(n_ref + g), which is
/// the same quantity without forming the normalizer.
template <typename Count>
std::vector<double> infer_measurement(std::span<const Count> counts, double gamma) {
  require(gamma > 0.0, "infer_measurement: gamma must be positive");
  require(!counts.empty(), "infer_measurement: empty count row");
  const double log_ref = std::log(static_cast<double>(counts.back()) + gamma);
  std::vector<double> out(counts.size());
  for (std::size_t w = 0; w < counts.size(); ++w)
    out[w] = std::log(static_cast<double>(counts[w]) + gamma) - log_ref;
  out.back() = 0.0;
  return out;
}

template <typename Count>
std::vector<double> infer_measurement(const std::vector<Count>& counts, double gamma) {
  return infer_measurement(std::span<const Count>(counts), gamma);
}

struct KalmanStep {
  double beta = 0.0;
  double p = 0.0;
  double gain = 0.0;
};

/// One predict/update step; q and r are floored at eps_var.
inline KalmanStep kalman_chain_step(double beta_prev, double p_prev, double beta_inf, double q,
                                    double r) {
  q = std::max(q, kEpsVar);
  r = std::max(r, kEpsVar);
  const double p_hat = p_prev + q;
  const double gain = p_hat / (p_hat + r);
  return {beta_prev + gain * (beta_inf - beta_prev), (1.0 - gain) * p_hat, gain};
}

/// Average experience of each word over the reviews of one epoch that
/// contain it (0 for absent words). The normalizer counts only reviews
/// containing the word.
class WordExperienceAccumulator {
 public:
  explicit WordExperienceAccumulator(std::size_t vocab)
      : sum_(vocab, 0.0), docs_(vocab, 0), stamp_(vocab, 0) {}

  void add(std::span<const std::uint32_t> tokens, double experience) {
    ++doc_;
    for (auto w : tokens) {
      if (stamp_[w] == doc_) continue;
      stamp_[w] = doc_;
      sum_[w] += experience;
      ++docs_[w];
    }
  }

  std::vector<double> result() const {
    std::vector<double> l(sum_.size(), 0.0);
    for (std::size_t w = 0; w < l.size(); ++w)
      if (docs_[w] > 0) l[w] = sum_[w] / static_cast<double>(docs_[w]);
    return l;
  }

  const std::vector<std::size_t>& doc_counts() const { return docs_; }

 private:
  std::vector<double> sum_;
  std::vector<std::size_t> docs_;
  std::vector<std::size_t> stamp_;
  std::size_t doc_ = 0;
};

inline std::vector<double> word_experience(const std::vector<std::vector<std::uint32_t>>& docs,
                                           std::span<const double> experiences, std::size_t vocab) {
  require(docs.size() == experiences.size(), "word_experience: length mismatch");
  WordExperienceAccumulator acc(vocab);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (!(experiences[d] > 0.0)) throw DomainError("word_experience: experiences must be positive");
    acc.add(docs[d], experiences[d]);
  }
  return acc.result();
}

/// Word experience table l_{t,w} for all epochs. `raw` is 0 where the word
/// is absent from the epoch; `carried` repeats the last observed value
/// (0 before the first occurrence) and drives the Kalman noise.
struct WordExperience {
  std::size_t T = 0;
  std::size_t V = 0;
  std::vector<double> raw;
  std::vector<double> carried;

  double l(std::size_t t, std::size_t w) const { return raw[t * V + w]; }
  double l_carried(std::size_t t, std::size_t w) const { return carried[t * V + w]; }
};

inline WordExperience compute_word_experience(const Corpus& corpus, std::span<const double> experiences) {
  require(experiences.size() == corpus.reviews.size(), "compute_word_experience: length mismatch");
  WordExperience out;
  out.T = corpus.n_epochs;
  out.V = corpus.vocab_size();
  out.raw.assign(out.T * out.V, 0.0);
  out.carried.assign(out.T * out.V, 0.0);
  std::vector<WordExperienceAccumulator> acc(out.T, WordExperienceAccumulator(out.V));
  for (std::size_t d = 0; d < corpus.reviews.size(); ++d)
    acc[corpus.reviews[d].epoch].add(corpus.reviews[d].tokens, experiences[d]);
  for (std::size_t t = 0; t < out.T; ++t) {
    const auto row = acc[t].result();
    const auto& docs = acc[t].doc_counts();
    for (std::size_t w = 0; w < out.V; ++w) {
      out.raw[t * out.V + w] = row[w];
      if (docs[w] > 0) out.carried[t * out.V + w] = row[w];
      else if (t > 0) out.carried[t * out.V + w] = out.carried[(t - 1) * out.V + w];
    }
  }
  return out;
}

struct LanguageModel {
  std::size_t T = 0;
  std::size_t Z = 0;
  std::size_t V = 0;
  std::vector<double> beta;          // T x Z x V
  std::vector<double> kalman_error;  // T x Z x V
  std::vector<double> probs;         // pi(beta), derived
  double sigma_lm = 1.0;
  double gamma = 0.01;
  KalmanNoise noise = KalmanNoise::kLiteral;
  KalmanError error_mode = KalmanError::kReset;

  LanguageModel() = default;
  LanguageModel(std::size_t epochs, std::size_t facets, std::size_t vocab, double sigma, double smoothing)
      : T(epochs), Z(facets), V(vocab), beta(epochs * facets * vocab, 0.0),
        kalman_error(epochs * facets * vocab, kKalmanP0), probs(epochs * facets * vocab, 0.0),
        sigma_lm(sigma), gamma(smoothing) {
    refresh_probs();
  }

  std::size_t reference_word() const { return V - 1; }

  std::size_t index(std::size_t t, std::size_t z, std::size_t w) const { return (t * Z + z) * V + w; }

  std::span<const double> beta_row(std::size_t t, std::size_t z) const {
    return {beta.data() + index(t, z, 0), V};
  }
  std::span<const double> prob_row(std::size_t t, std::size_t z) const {
    return {probs.data() + index(t, z, 0), V};
  }
  double prob(std::size_t t, std::size_t z, std::size_t w) const { return probs[index(t, z, w)]; }

  void refresh_probs(std::size_t t, std::size_t z) {
    const auto p = softmax_map(beta_row(t, z));
    std::copy(p.begin(), p.end(), probs.begin() + static_cast<std::ptrdiff_t>(index(t, z, 0)));
  }

  void refresh_probs() {
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t z = 0; z < Z; ++z) refresh_probs(t, z);
  }

  /// Sets beta_t to the inferred measurement of each count row.
  template <typename Count>
  void set_from_counts(std::size_t t, std::span<const Count> counts_zv) {
    for (std::size_t z = 0; z < Z; ++z) {
      const auto m = infer_measurement(counts_zv.subspan(z * V, V), gamma);
      std::copy(m.begin(), m.end(), beta.begin() + static_cast<std::ptrdiff_t>(index(t, z, 0)));
      std::fill_n(kalman_error.begin() + static_cast<std::ptrdiff_t>(index(t, z, 0)), V, kKalmanP0);
      refresh_probs(t, z);
    }
  }
};

/// Kalman-filters epoch t given its count block n(t, z, w) (Z x V, row-major)
/// and the word experience table. Epoch 0 takes the measurement as-is with
/// error P0. A (t, z) row with no assigned tokens is predict-only.
template <typename Count>
void smooth_epoch(LanguageModel& lm, std::size_t t, std::span<const Count> counts_zv,
                  const WordExperience& l, std::size_t threads = 1) {
  require(t < lm.T, "smooth_epoch: epoch out of range");
  require(counts_zv.size() == lm.Z * lm.V, "smooth_epoch: count block has wrong size");
  const std::size_t ref = lm.reference_word();
  parallel_for(lm.Z, threads, [&](std::size_t z) {
    const auto row = counts_zv.subspan(z * lm.V, lm.V);
    const bool observed = std::any_of(row.begin(), row.end(), [](Count c) { return c > 0; });
    const auto measured = infer_measurement(row, lm.gamma);
    for (std::size_t w = 0; w < lm.V; ++w) {
      const std::size_t i = lm.index(t, z, w);
      if (w == ref) {
        lm.beta[i] = 0.0;
        lm.kalman_error[i] = t == 0 ? kKalmanP0 : lm.kalman_error[lm.index(t - 1, z, w)];
        continue;
      }
      if (t == 0) {
        lm.beta[i] = observed ? measured[w] : 0.0;
        lm.kalman_error[i] = kKalmanP0;
        continue;
      }
      const double l0 = l.l_carried(t, w);
      const double l1 = l.l_carried(t - 1, w);
      const double l2 = t >= 2 ? l.l_carried(t - 2, w) : l1;
      const double r = lm.sigma_lm * std::abs(l0 - l1);
      const double q = lm.noise == KalmanNoise::kLiteral ? lm.sigma_lm * std::abs(l1 - l2) : r;
      const std::size_t prev = lm.index(t - 1, z, w);
      const double p_prev = lm.error_mode == KalmanError::kReset ? kKalmanP0 : lm.kalman_error[prev];
      if (!observed) {
        lm.beta[i] = lm.beta[prev];
        lm.kalman_error[i] = p_prev + std::max(q, kEpsVar);
        continue;
      }
      const auto step = kalman_chain_step(lm.beta[prev], p_prev, measured[w], q, r);
      lm.beta[i] = step.beta;
      lm.kalman_error[i] = step.p;
    }
    lm.refresh_probs(t, z);
  });
}

struct WordScore {
  std::uint32_t word = 0;
  double score = 0.0;
};

/// Top-k words of (t, z) by pi(beta), ties broken by word index.
inline std::vector<WordScore> top_words(const LanguageModel& lm, std::size_t t, std::size_t z, std::size_t k) {
  std::vector<WordScore> all(lm.V);
  for (std::size_t w = 0; w < lm.V; ++w) all[w] = {static_cast<std::uint32_t>(w), lm.prob(t, z, w)};
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    [](const WordScore& a, const WordScore& b) {
                      return a.score != b.score ? a.score > b.score : a.word < b.word;
                    });
  all.resize(k);
  return all;
}

}  // namespace expaware
