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


#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "expaware/facet_sampler.hpp"
#include "test_util.hpp"

namespace expaware {
namespace {

/// Single-epoch model whose facet rows are the given probability vectors.
LanguageModel model_from_probs(const std::vector<std::vector<double>>& rows) {
  LanguageModel lm(1, rows.size(), rows.front().size(), 1.0, 0.01);
  for (std::size_t z = 0; z < rows.size(); ++z) {
    const auto b = inverse_map(rows[z]);
    std::copy(b.begin(), b.end(), lm.beta.begin() + lm.index(0, z, 0));
  }
  lm.refresh_probs();
  return lm;
}

TEST(FacetPosterior, HandComputed) {
  const auto lm = model_from_probs({{0.2, 0.8}, {0.1, 0.9}});
  const std::vector<std::uint32_t> counts{3, 1};
  const auto p = facet_posterior(counts, 0.5, lm, 0, 0);
  EXPECT_NEAR(p[0], 0.14 / 0.17, 1e-12);
  EXPECT_NEAR(p[0], 0.8235, 1e-4);
  EXPECT_NEAR(p[1], 0.1765, 1e-4);
}

TEST(FacetPosterior, ExcludesOwnAssignment) {
  const auto lm = model_from_probs({{0.2, 0.8}, {0.1, 0.9}});
  const auto corpus = testing::toy_corpus(2, {{0, 0, {1, 1, 1, 1, 0}}});
  const auto state = FacetState::from_assignments(corpus, 2, 0.5, {{0, 0, 0, 1, 0}});
  const auto p = conditional_facet_distribution(corpus, 0, 4, state, lm);
  EXPECT_NEAR(p[0], 0.14 / 0.17, 1e-12);
}

TEST(FacetPosterior, SingleFacetAndSymmetry) {
  const auto one = model_from_probs({{0.3, 0.7}});
  const std::vector<std::uint32_t> c1{4};
  EXPECT_DOUBLE_EQ(facet_posterior(c1, 1.0, one, 0, 0)[0], 1.0);
  const auto uniform = model_from_probs({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}});
  const std::vector<std::uint32_t> c3{2, 2, 2};
  for (double p : facet_posterior(c3, 0.1, uniform, 0, 1)) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
}

TEST(EstimateTheta, Values) {
  const auto corpus = testing::toy_corpus(2, {{0, 0, {0, 0, 0, 1}}, {0, 0, {}}});
  const auto s = FacetState::from_assignments(corpus, 2, 0.5, {{0, 0, 0, 1}, {}});
  const auto t = estimate_theta(s, 0);
  EXPECT_NEAR(t[0], 0.7, 1e-15);
  EXPECT_NEAR(t[1], 0.3, 1e-15);
  const auto empty = estimate_theta(s, 1);
  EXPECT_DOUBLE_EQ(empty[0], 0.5);
  EXPECT_DOUBLE_EQ(empty[1], 0.5);
}

Corpus random_corpus(std::size_t D, std::size_t V, std::size_t T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<testing::ToyReview> reviews;
  for (std::size_t d = 0; d < D; ++d) {
    testing::ToyReview r{static_cast<std::uint32_t>(rng() % 3), static_cast<std::uint32_t>(d * T / D), {}};
    for (std::size_t j = 0; j < 1 + rng() % 12; ++j) r.tokens.push_back(static_cast<std::uint32_t>(rng() % V));
    reviews.push_back(r);
  }
  return testing::toy_corpus(V, reviews);
}

TEST(GibbsSweep, KeepsCountsConsistent) {
  const auto corpus = random_corpus(40, 15, 3, 5);
  Rng rng(6);
  auto state = FacetState::random(corpus, 4, 0.3, rng);
  LanguageModel lm(3, 4, 15, 1.0, 0.01);
  for (std::size_t t = 0; t < 3; ++t) lm.set_from_counts(t, state.epoch_block(t));
  for (int s = 0; s < 10; ++s) {
    gibbs_sweep(corpus, state, lm, rng);
    ASSERT_TRUE(state.consistent(corpus));
  }
  for (std::size_t d = 0; d < corpus.reviews.size(); ++d) {
    std::uint32_t n = 0;
    for (std::size_t z = 0; z < 4; ++z) n += state.n_dz(d, z);
    EXPECT_EQ(n, corpus.reviews[d].tokens.size());
  }
}

TEST(GibbsSweep, SingleFacetIsNoOp) {
  const auto corpus = random_corpus(10, 5, 1, 7);
  Rng rng(8);
  auto state = FacetState::random(corpus, 1, 1.0, rng);
  const auto before = state.assignments;
  LanguageModel lm(1, 1, 5, 1.0, 0.01);
  gibbs_sweep(corpus, state, lm, rng);
  EXPECT_EQ(state.assignments, before);
}

TEST(GibbsSweep, SeparatedFacetsAttractTheirWords) {
  const auto corpus = testing::toy_corpus(3, {{0, 0, std::vector<std::uint32_t>(20, 0)},
                                              {0, 0, std::vector<std::uint32_t>(20, 1)}});
  const auto lm = model_from_probs({{0.90, 0.01, 0.09}, {0.01, 0.90, 0.09}});
  Rng rng(9);
  auto state = FacetState::random(corpus, 2, 0.1, rng);
  for (int s = 0; s < 20; ++s) gibbs_sweep(corpus, state, lm, rng);
  std::size_t hits = 0, total = 0;
  for (std::size_t d = 0; d < 2; ++d)
    for (std::size_t j = 0; j < 20; ++j, ++total) hits += state.assignments[d][j] == corpus.reviews[d].tokens[j];
  EXPECT_GE(static_cast<double>(hits) / total, 0.95);
}

TEST(GibbsSweep, MatchesEnumeratedPosterior) {
  const auto corpus = testing::toy_corpus(2, {{0, 0, {0, 1}}});
  const auto lm = model_from_probs({{0.6, 0.4}, {0.25, 0.75}});
  const double alpha = 0.7;
  // Exact joint over (z0, z1) under the collapsed Dirichlet prior.
  std::map<std::pair<int, int>, double> exact;
  double norm = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const int n0 = (a == 0) + (b == 0), n1 = 2 - n0;
      const double prior = std::tgamma(n0 + alpha) * std::tgamma(n1 + alpha);
      norm += exact[{a, b}] = prior * lm.prob(0, a, 0) * lm.prob(0, b, 1);
    }
  for (auto& [k, v] : exact) v /= norm;

  Rng rng(10);
  auto state = FacetState::random(corpus, 2, alpha, rng);
  std::map<std::pair<int, int>, double> freq;
  const int sweeps = 100000;
  for (int s = 0; s < sweeps; ++s) {
    gibbs_sweep(corpus, state, lm, rng);
    freq[{state.assignments[0][0], state.assignments[0][1]}] += 1.0 / sweeps;
  }
  for (const auto& [k, p] : exact) EXPECT_NEAR(freq[k], p, 0.02 * p) << k.first << k.second;
}

TEST(GibbsSweep, DeterministicUnderSeed) {
  const auto corpus = random_corpus(30, 10, 2, 12);
  LanguageModel lm(2, 3, 10, 1.0, 0.01);
  auto run = [&] {
    Rng rng(13);
    auto s = FacetState::random(corpus, 3, 0.5, rng);
    for (int i = 0; i < 5; ++i) gibbs_sweep(corpus, s, lm, rng);
    return s.assignments;
  };
  EXPECT_EQ(run(), run());
}

TEST(FacetState, RejectsBadAssignments) {
  const auto corpus = testing::toy_corpus(2, {{0, 0, {0, 1}}});
  EXPECT_THROW(FacetState::from_assignments(corpus, 2, 0.5, {{0, 2}}), ArgumentError);
  EXPECT_THROW(FacetState::from_assignments(corpus, 2, 0.5, {{0}}), ArgumentError);
}

}  // namespace
}  // namespace expaware
