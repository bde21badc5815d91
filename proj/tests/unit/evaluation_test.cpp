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


#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "expaware/evaluation.hpp"
#include "test_util.hpp"

namespace expaware {
namespace {

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::vector<std::vector<std::string>> parse_csv(const std::string& s) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

TEST(Features, LogOfMaxProbability) {
  ModelCheckpoint m;
  m.corpus = testing::toy_corpus(2, {{0, 0, {0, 1}}});
  m.lm = LanguageModel(1, 2, 2, 1.0, 0.01);
  // Probabilities set directly per facet.
  m.lm.probs = {0.2, 0.1, 0.4, 0.3};
  const Biases b = compute_biases(m.corpus);
  const std::vector<double> e{1.7};
  const auto f = build_features(m.corpus.reviews[0], m, b, e, FeatureMode::kPi);
  ASSERT_EQ(f.word_scores.size(), 2u);
  EXPECT_DOUBLE_EQ(f.word_scores[0].second, std::log(0.4));
  EXPECT_DOUBLE_EQ(f.word_scores[1].second, std::log(0.3));
  EXPECT_EQ(f.experience, 1.7);
  const auto row = design_row(f, 2, true);
  ASSERT_EQ(row.size(), 6u);
  EXPECT_DOUBLE_EQ(row[4], std::log(0.4));
  EXPECT_DOUBLE_EQ(row[3], std::log(1.7));
}

TEST(Features, EmptyReviewKeepsBiases) {
  ModelCheckpoint m;
  m.corpus = testing::toy_corpus(3, {{0, 0, {}, 4.0}, {1, 0, {1}, 2.0}});
  m.lm = LanguageModel(1, 2, 3, 1.0, 0.01);
  const Biases b = compute_biases(m.corpus);
  const std::vector<double> e{1.0, 2.0};
  const auto f = build_features(m.corpus.reviews[0], m, b, e, FeatureMode::kPi);
  EXPECT_TRUE(f.word_scores.empty());
  const auto row = design_row(f, 3, true);
  for (std::size_t i = 4; i < row.size(); ++i) EXPECT_EQ(row[i], 0.0);
  EXPECT_DOUBLE_EQ(f.gamma_g, 3.0);
  EXPECT_DOUBLE_EQ(f.gamma_u, 1.0);
  EXPECT_EQ(build_features(m.corpus.reviews[0], m, b, e, FeatureMode::kPi).word_scores, f.word_scores);
}

TEST(Features, RawModeLogsOnlyPositiveMaxima) {
  LanguageModel lm(1, 2, 3, 1.0, 0.01);
  lm.beta = {2.0, -1.0, 0.0, 0.5, -3.0, 0.0};
  EXPECT_DOUBLE_EQ(word_feature(lm, 0, 0, FeatureMode::kRaw), std::log(2.0));
  EXPECT_DOUBLE_EQ(word_feature(lm, 0, 1, FeatureMode::kRaw), -1.0);
  EXPECT_THROW(parse_feature_mode("log"), ArgumentError);
}

TEST(Biases, HandArithmetic) {
  const auto c = testing::toy_corpus(1, {{0, 0, {0}, 4.0, 0}, {0, 0, {0}, 4.0, 1}, {1, 0, {0}, 2.0, 1}});
  const auto b = compute_biases(c);
  EXPECT_NEAR(b.global, 10.0 / 3.0, 1e-15);
  EXPECT_NEAR(b.user[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(b.user[1], -4.0 / 3.0, 1e-15);
  EXPECT_EQ(b.item_offset(99), 0.0);
  const auto flat = compute_biases(testing::toy_corpus(1, {{0, 0, {0}, 3.5}, {1, 0, {0}, 3.5}}));
  EXPECT_EQ(flat.global, 3.5);
  EXPECT_EQ(flat.user[0], 0.0);
  EXPECT_EQ(flat.user[1], 0.0);
}

TEST(Ridge, ExactLinearFit) {
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  for (int i = 0; i < 10; ++i) {
    X.push_back({static_cast<double>(i)});
    y.push_back(2.0 * i);
  }
  const auto m = fit_regressor(X, y, {0.0});
  EXPECT_NEAR(m.weights[0], 2.0, 1e-6);
  EXPECT_NEAR(m.intercept, 0.0, 1e-6);
}

TEST(Ridge, HugePenaltyShrinksToMean) {
  std::vector<std::vector<double>> X{{1.0, 0.0}, {2.0, 1.0}, {3.0, 5.0}};
  std::vector<double> y{1.0, 4.0, 7.0};
  const auto m = fit_regressor(X, y, {1e12});
  EXPECT_NEAR(m.weights[0], 0.0, 1e-9);
  EXPECT_NEAR(m.weights[1], 0.0, 1e-9);
  EXPECT_NEAR(m.intercept, 4.0, 1e-9);
}

void random_problem(std::size_t n, std::size_t p, std::uint64_t seed, std::vector<std::vector<double>>& X,
                    std::vector<double>& y) {
  Rng rng(seed);
  X.assign(n, std::vector<double>(p));
  y.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : X[i]) v = standard_normal(rng);
    y[i] = 0.5 + standard_normal(rng);
    for (std::size_t j = 0; j < p; ++j) y[i] += X[i][j] * static_cast<double>(j % 3);
  }
}

TEST(Ridge, MatchesNormalEquationsOracle) {
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  random_problem(80, 6, 1, X, y);
  const double lambda = 0.7;
  // Augmented system with an unpenalized intercept column.
  Eigen::MatrixXd A(80, 7);
  Eigen::VectorXd b(80);
  for (int i = 0; i < 80; ++i) {
    A(i, 0) = 1.0;
    for (int j = 0; j < 6; ++j) A(i, j + 1) = X[i][j];
    b(i) = y[i];
  }
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(7, 7) * lambda;
  P(0, 0) = 0.0;
  const Eigen::VectorXd sol = (A.transpose() * A + P).colPivHouseholderQr().solve(A.transpose() * b);
  for (auto solver : {RidgeSolver::kDirect, RidgeSolver::kConjugateGradient}) {
    const auto m = fit_regressor(X, y, {lambda, solver});
    EXPECT_NEAR(m.intercept, sol(0), 1e-6);
    for (int j = 0; j < 6; ++j) EXPECT_NEAR(m.weights[j], sol(j + 1), 1e-6);
  }
}

TEST(Ridge, SingularWithoutPenalty) {
  std::vector<std::vector<double>> X{{0.0, 1.0}, {0.0, 2.0}, {0.0, 4.0}};
  std::vector<double> y{1.0, 2.0, 3.0};
  EXPECT_THROW(fit_regressor(X, y, {0.0}), NumericalError);
  EXPECT_THROW(fit_regressor(X, y, {0.0, RidgeSolver::kConjugateGradient}), NumericalError);
  EXPECT_NO_THROW(fit_regressor(X, y, {0.1}));
}

TEST(Ridge, ConjugateGradientObjectiveNonIncreasing) {
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  random_problem(60, 30, 2, X, y);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= 30; ++it) {
    RidgeOptions opt{0.5, RidgeSolver::kConjugateGradient};
    opt.cg_max_iterations = it;
    opt.cg_tolerance = 1e-14;
    const double obj = ridge_objective(fit_regressor(X, y, opt), X, y, 0.5);
    EXPECT_LE(obj, prev * (1.0 + 1e-12)) << "iteration " << it;
    prev = obj;
  }
}

TEST(Mse, Values) {
  const std::vector<double> a{1.0, 3.0}, b{2.0, 5.0};
  EXPECT_DOUBLE_EQ(mse(a, b), 2.5);
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_THROW(mse(a, std::vector<double>{1.0}), ArgumentError);
  Rng rng(3);
  std::vector<double> p(50), t(50), ps(50), ts(50);
  double oracle = 0.0;
  for (int i = 0; i < 50; ++i) {
    p[i] = standard_normal(rng);
    t[i] = standard_normal(rng);
    ps[i] = p[i] + 7.25;
    ts[i] = t[i] + 7.25;
    oracle += (p[i] - t[i]) * (p[i] - t[i]) / 50.0;
  }
  EXPECT_NEAR(mse(p, t), oracle, 1e-12);
  EXPECT_NEAR(mse(ps, ts), mse(p, t), 1e-12);
}

TEST(Ndcg, Values) {
  const std::vector<double> ranked{0, 1, 1}, ideal{1, 1, 0};
  EXPECT_NEAR(dcg(ranked), 1.0 + 1.0 / std::log2(3.0), 1e-15);
  EXPECT_NEAR(ndcg(ranked, ideal), 0.8155, 1e-4);
  EXPECT_DOUBLE_EQ(ndcg(ideal, ideal), 1.0);
  const std::vector<double> zeros{0, 0, 0};
  EXPECT_EQ(ndcg(zeros, zeros), 0.0);
}

TEST(Kendall, Values) {
  const std::vector<int> a{1, 2, 3};
  EXPECT_EQ(kendall_tau_distance(a, a), 0.0);
  EXPECT_DOUBLE_EQ(kendall_tau_distance(a, std::vector<int>{3, 2, 1}), 1.0);
  EXPECT_NEAR(kendall_tau_distance(a, std::vector<int>{2, 1, 3}), 1.0 / 3.0, 1e-15);
  EXPECT_THROW(kendall_tau_distance(a, std::vector<int>{1, 2, 4}), ArgumentError);
  EXPECT_THROW(kendall_tau_distance(a, std::vector<int>{1, 2}), ArgumentError);
}

TEST(Ranking, BruteForceOverAllPermutations) {
  for (int n = 1; n <= 5; ++n) {
    std::vector<int> base(n);
    std::iota(base.begin(), base.end(), 0);
    auto perm = base;
    do {
      std::size_t disc = 0;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) disc += perm[i] > perm[j];
      const double expected = n < 2 ? 0.0 : static_cast<double>(disc) / (n * (n - 1) / 2.0);
      EXPECT_NEAR(kendall_tau_distance(base, perm), expected, 1e-15);

      // Relevance 1 for even ids.
      std::vector<double> rel(n), ideal(n);
      for (int i = 0; i < n; ++i) rel[i] = perm[i] % 2 == 0;
      ideal = rel;
      std::sort(ideal.begin(), ideal.end(), std::greater<>());
      double num = 0.0, den = 0.0;
      for (int i = 1; i <= n; ++i) {
        const double disc_i = std::max(1.0, std::log2(static_cast<double>(i)));
        num += rel[i - 1] / disc_i;
        den += ideal[i - 1] / disc_i;
      }
      EXPECT_NEAR(ndcg(rel, ideal), den > 0 ? num / den : 0.0, 1e-14);
      EXPECT_GE(ndcg(rel, ideal), 0.0);
      EXPECT_LE(ndcg(rel, ideal), 1.0 + 1e-15);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

Corpus random_corpus(std::size_t D, std::size_t users, std::size_t V, std::size_t T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<testing::ToyReview> reviews;
  for (std::size_t d = 0; d < D; ++d) {
    testing::ToyReview r{static_cast<std::uint32_t>(d % users), static_cast<std::uint32_t>(d * T / D), {}};
    r.rating = 1.0 + static_cast<double>(rng() % 5);
    r.item = static_cast<std::uint32_t>(rng() % 4);
    // Words 0..V-2 only, so the last word never occurs.
    for (std::size_t j = 0; j < 2 + rng() % 6; ++j) r.tokens.push_back(static_cast<std::uint32_t>(rng() % (V - 1)));
    reviews.push_back(r);
  }
  return testing::toy_corpus(V, reviews);
}

ModelCheckpoint small_model(const Corpus& corpus) {
  TrainConfig cfg;
  cfg.Z = 2;
  cfg.iterations = 3;
  cfg.seed = 4;
  return train(corpus, cfg);
}

TEST(Reports, ShapesAndRecomputedScores) {
  const auto corpus = random_corpus(40, 5, 9, 3, 5);
  const auto m = small_model(corpus);
  const std::size_t k = 3;
  const auto r = export_reports(m, 1, k);
  EXPECT_EQ(count_lines(r.users_csv), 1 + m.corpus.n_users());
  EXPECT_EQ(count_lines(r.trajectories_csv), 1 + m.corpus.reviews.size());
  EXPECT_EQ(count_lines(r.word_frequency_csv), 1 + m.lm.V);
  EXPECT_EQ(count_lines(r.word_scores_csv), 1 + m.lm.V);
  EXPECT_EQ(count_lines(r.most_experienced_csv), 1 + m.lm.T * k);
  EXPECT_EQ(count_lines(r.least_experienced_csv), 1 + m.lm.T * k);
  EXPECT_EQ(r.top_words.size(), m.lm.T * m.lm.Z);

  const auto rows = parse_csv(r.word_scores_csv);
  for (std::size_t w = 0; w < m.lm.V; ++w) {
    const auto& row = rows[w + 1];
    ASSERT_EQ(row.size(), 2 + m.lm.T);
    const auto z = std::stoul(row[1]);
    for (std::size_t t = 0; t < m.lm.T; ++t) {
      const double l = m.word_experience.raw[t * m.lm.V + w];
      EXPECT_EQ(std::stod(row[2 + t]), m.lm.beta[m.lm.index(t, z, w)] * l);
      if (w == m.lm.V - 1) {
        EXPECT_EQ(std::stod(row[2 + t]), 0.0);
      }
    }
  }
  const auto freq = parse_csv(r.word_frequency_csv);
  std::size_t count0 = 0;
  for (const auto& rev : m.corpus.reviews)
    if (rev.epoch == 1) count0 += static_cast<std::size_t>(std::count(rev.tokens.begin(), rev.tokens.end(), 0u));
  EXPECT_EQ(std::stoul(freq[1][1]), count0);
  EXPECT_THROW(export_reports(m, 3), ArgumentError);
}

TEST(Holdout, RecentReviewsPerUser) {
  const auto corpus = random_corpus(30, 3, 5, 2, 6);
  const auto split = holdout_recent(corpus, 3);
  EXPECT_EQ(split.test.reviews.size(), 9u);
  EXPECT_EQ(split.train.reviews.size(), 21u);
  for (std::uint32_t u = 0; u < 3; ++u) {
    std::int64_t last_train = 0, first_test = std::numeric_limits<std::int64_t>::max();
    for (const auto& r : split.train.reviews)
      if (r.user == u) last_train = std::max(last_train, r.timestamp);
    for (const auto& r : split.test.reviews)
      if (r.user == u) first_test = std::min(first_test, r.timestamp);
    EXPECT_LT(last_train, first_test);
  }
}

TEST(Prediction, SameUserSharesExperience) {
  const auto corpus = random_corpus(40, 4, 7, 2, 7);
  const auto split = holdout_recent(corpus, 3);
  const auto m = small_model(split.train);
  const auto b = compute_biases(m.corpus);
  const auto e = prediction_experience(m);
  const auto& test = split.test.reviews;
  EXPECT_EQ(build_features(test[0], m, b, e, FeatureMode::kPi).experience,
            build_features(test[4], m, b, e, FeatureMode::kPi).experience);
  EXPECT_EQ(test[0].user, test[4].user);
  const auto res = predict_ratings(m, split.test, FeatureMode::kPi);
  EXPECT_EQ(res.rows.size(), test.size());
  EXPECT_TRUE(std::isfinite(res.mse));
  EXPECT_EQ(res.n_train, m.corpus.reviews.size());
}

TEST(Ranking, RankUsersByExperience) {
  const auto corpus = random_corpus(30, 3, 6, 2, 8);
  auto m = small_model(corpus);
  // Force the final experiences: u2 > u0 > u1.
  for (std::size_t d = 0; d < m.corpus.reviews.size(); ++d)
    m.experience.e[d] = std::vector<double>{2.0, 1.0, 3.0}[m.corpus.reviews[d].user];
  const auto r = rank_users(m, {{"u0", 1.0}, {"u1", 1.0}, {"u2", 0.0}, {"nobody", 1.0}});
  EXPECT_EQ(r.ranked_users, (std::vector<std::string>{"u2", "u0", "u1"}));
  EXPECT_NEAR(r.ndcg, (1.0 / std::log2(2.0) + 1.0 / std::log2(3.0)) / 2.0, 1e-12);
  EXPECT_NEAR(r.kendall, 2.0 / 3.0, 1e-12);
  EXPECT_THROW(rank_users(m, {{"nobody", 1.0}}), ArgumentError);
}

}  // namespace
}  // namespace expaware
