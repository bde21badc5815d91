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

#include <gtest/gtest.h>

#include "expaware/synthesizer.hpp"
#include "test_util.hpp"

namespace expaware {
namespace {

SynthConfig tiny() {
  SynthConfig c;
  c.n_users = 4;
  c.reviews_per_user = 10;
  c.tokens_per_review = 8;
  c.Z = 2;
  c.V = 20;
  c.T = 3;
  c.seed = 5;
  return c;
}

TEST(Generate, DimensionsAndInvariants) {
  const auto [c, g] = generate(tiny());
  const std::size_t D = 40;
  ASSERT_EQ(c.reviews.size(), D);
  EXPECT_EQ(c.n_epochs, 3u);
  EXPECT_EQ(g.e.size(), D);
  EXPECT_EQ(g.z.size(), D);
  EXPECT_EQ(g.theta.size(), D * 2);
  EXPECT_EQ(g.beta.size(), 3u * 2 * 20);
  EXPECT_EQ(g.l.size(), 3u * 20);
  for (std::size_t d = 0; d < D; ++d) {
    const auto& r = c.reviews[d];
    if (d) {
      EXPECT_LE(c.reviews[d - 1].timestamp, r.timestamp);
    }
    EXPECT_EQ(r.tokens.size(), 8u);
    EXPECT_EQ(g.z[d].size(), 8u);
    EXPECT_GT(g.e[d], 0.0);
    EXPECT_GE(r.rating, 1.0);
    EXPECT_LE(r.rating, 5.0);
    EXPECT_GE(r.t_fine, kEpsTime);
    EXPECT_NEAR(g.theta[d * 2] + g.theta[d * 2 + 1], 1.0, 1e-12);
    for (auto w : r.tokens) EXPECT_LT(w, 20u);
  }
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t z = 0; z < 2; ++z) EXPECT_EQ(g.beta_at(t, z, 19), 0.0);
  // Ground-truth l agrees with a recount from the emitted corpus.
  std::vector<std::vector<std::uint32_t>> docs;
  std::vector<double> es;
  for (std::size_t d = 0; d < D; ++d)
    if (c.reviews[d].epoch == 2) {
      docs.push_back(c.reviews[d].tokens);
      es.push_back(g.e[d]);
    }
  const auto l2 = word_experience(docs, es, 20);
  for (std::size_t w = 0; w < 20; ++w) EXPECT_NEAR(g.l[2 * 20 + w], l2[w], 1e-12);
}

TEST(Generate, SingleFacet) {
  auto cfg = tiny();
  cfg.Z = 1;
  const auto [c, g] = generate(cfg);
  for (const auto& zs : g.z)
    for (auto z : zs) EXPECT_EQ(z, 0u);
  for (double th : g.theta) EXPECT_EQ(th, 1.0);
}

TEST(Generate, ZeroNoiseKeepsBeta) {
  auto cfg = tiny();
  cfg.sigma_lm = 0.0;
  const auto [c, g] = generate(cfg);
  for (std::size_t t = 1; t < 3; ++t)
    for (std::size_t z = 0; z < 2; ++z)
      for (std::size_t w = 0; w < 20; ++w) EXPECT_EQ(g.beta_at(t, z, w), g.beta_at(0, z, w));
}

TEST(Generate, WordFrequenciesMatchModel) {
  SynthConfig cfg;
  cfg.n_users = 10;
  cfg.reviews_per_user = 100;
  cfg.tokens_per_review = 100;
  cfg.Z = 1;
  cfg.V = 50;
  cfg.T = 1;
  cfg.seed = 9;
  const auto [c, g] = generate(cfg);
  std::vector<double> freq(50, 0.0);
  double n = 0;
  for (const auto& r : c.reviews)
    for (auto w : r.tokens) freq[w] += 1.0, n += 1.0;
  ASSERT_EQ(n, 1e5);
  const auto p = softmax_map(std::span<const double>(g.beta.data(), 50));
  double tv = 0.0;
  for (std::size_t w = 0; w < 50; ++w) tv += 0.5 * std::abs(freq[w] / n - p[w]);
  EXPECT_LT(tv, 0.05);
}

TEST(Generate, BitExactUnderSeed) {
  const auto a = generate(fixture_s2());
  const auto b = generate(fixture_s2());
  EXPECT_EQ(serialize_corpus(a.corpus), serialize_corpus(b.corpus));
  EXPECT_EQ(a.truth.to_json(a.corpus).dump(), b.truth.to_json(b.corpus).dump());
  auto other = fixture_s2();
  other.seed = 203;
  EXPECT_NE(serialize_corpus(generate(other).corpus), serialize_corpus(a.corpus));
}

TEST(Fixtures, S1GroupsSeparate) {
  const auto s1 = generate(fixture_s1());
  const auto e = s1.truth.final_user_experience(s1.corpus);
  double slow = 0.0, fast = 0.0;
  for (std::size_t u = 0; u < 20; ++u) (u < 10 ? slow : fast) += e[u] / 10.0;
  EXPECT_GE(fast, 3.0 * slow);
}

TEST(Fixtures, S3DriftWordIncreases) {
  const auto s3 = generate(fixture_s3());
  const auto& g = s3.truth;
  for (std::size_t z = 0; z < g.Z; ++z)
    for (std::size_t t = 1; t < g.T; ++t) {
      const auto prev = softmax_map(std::span<const double>(g.beta.data() + ((t - 1) * g.Z + z) * g.V, g.V));
      const auto now = softmax_map(std::span<const double>(g.beta.data() + (t * g.Z + z) * g.V, g.V));
      EXPECT_GT(now[0], prev[0]) << "facet " << z << " epoch " << t;
    }
}

TEST(Fixtures, LookupAndValidation) {
  EXPECT_EQ(fixture_by_name("s2").V, 200u);
  EXPECT_THROW(fixture_by_name("S4"), ArgumentError);
  auto bad = tiny();
  bad.V = 1;
  EXPECT_THROW(generate(bad), ArgumentError);
  bad = tiny();
  bad.users.resize(2);
  EXPECT_THROW(generate(bad), ArgumentError);
}

TEST(Fixtures, RawExportReingests) {
  const auto s = generate(tiny());
  CorpusConfig cfg;
  cfg.min_df = 1;
  cfg.min_reviews_background = 0;
  const auto back = build_corpus(to_raw_reviews(s.corpus), cfg);
  ASSERT_EQ(back.reviews.size(), s.corpus.reviews.size());
  for (std::size_t d = 0; d < back.reviews.size(); ++d) {
    EXPECT_EQ(back.reviews[d].epoch, s.corpus.reviews[d].epoch);
    EXPECT_EQ(back.reviews[d].rating, s.corpus.reviews[d].rating);
    EXPECT_EQ(back.reviews[d].tokens.size(), s.corpus.reviews[d].tokens.size());
  }
}

}  // namespace
}  // namespace expaware
