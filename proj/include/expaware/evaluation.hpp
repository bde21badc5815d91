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
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>

#include "json.hpp"

#include "expaware/common.hpp"
#include "expaware/corpus.hpp"
#include "expaware/language_model.hpp"
#include "expaware/trainer.hpp"

namespace expaware {

// ---------------------------------------------------------------------------
// Holdout

struct HoldoutSplit {
  Corpus train;
  Corpus test;
};

/// Moves each user's `k` most recent reviews into the test corpus. Both
/// halves keep the source vocabulary, id tables and epoch binning.
inline HoldoutSplit holdout_recent(const Corpus& corpus, std::size_t k) {
  HoldoutSplit out;
  out.train = corpus;
  out.test = corpus;
  out.train.reviews.clear();
  out.test.reviews.clear();
  std::vector<std::size_t> remaining(corpus.n_users(), 0);
  for (const auto& r : corpus.reviews) ++remaining[r.user];
  // Reviews are ascending by timestamp, so the last k per user are the most recent.
  std::vector<std::size_t> seen(corpus.n_users(), 0);
  for (const auto& r : corpus.reviews) {
    const bool held = seen[r.user]++ + k >= remaining[r.user];
    (held ? out.test : out.train).reviews.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rating features

enum class FeatureMode {
  kPi,   // log max_z pi(beta)
  kRaw,  // max_z beta, logged only when positive
};

inline std::string feature_mode_name(FeatureMode m) { return m == FeatureMode::kPi ? "pi" : "raw"; }

inline FeatureMode parse_feature_mode(const std::string& s) {
  if (s == "pi") return FeatureMode::kPi;
  if (s == "raw") return FeatureMode::kRaw;
  throw ArgumentError("invalid feature mode '" + s + "' (expected pi|raw)");
}

struct Biases {
  double global = 0.0;
  std::vector<double> user;  // offsets, 0 for users without ratings
  std::vector<double> item;

  double user_offset(std::size_t u) const { return u < user.size() ? user[u] : 0.0; }
  double item_offset(std::size_t i) const { return i < item.size() ? item[i] : 0.0; }
};

inline Biases compute_biases(const Corpus& train) {
  require(!train.reviews.empty(), "compute_biases: no training ratings");
  Biases b;
  double sum = 0.0;
  for (const auto& r : train.reviews) sum += r.rating;
  b.global = sum / static_cast<double>(train.reviews.size());
  auto offsets = [&](std::size_t n, auto key) {
    std::vector<double> s(n, 0.0), c(n, 0.0), out(n, 0.0);
    for (const auto& r : train.reviews) {
      s[key(r)] += r.rating;
      c[key(r)] += 1.0;
    }
    for (std::size_t i = 0; i < n; ++i)
      if (c[i] > 0.0) out[i] = s[i] / c[i] - b.global;
    return out;
  };
  b.user = offsets(train.n_users(), [](const Review& r) { return r.user; });
  b.item = offsets(train.items.size(), [](const Review& r) { return r.item; });
  return b;
}

struct RatingFeatures {
  std::vector<std::pair<std::uint32_t, double>> word_scores;  // sparse, ascending word index
  double experience = 0.0;
  double gamma_g = 0.0;
  double gamma_u = 0.0;
  double gamma_i = 0.0;
};

/// Per-user experience used at prediction time: the user's last training
/// experience, falling back to the background user and then to the mean.
inline std::vector<double> prediction_experience(const ModelCheckpoint& m) {
  auto e = m.last_user_experience();
  std::vector<bool> seen(e.size(), false);
  for (const auto& r : m.corpus.reviews) seen[r.user] = true;
  double fallback = 0.0;
  std::size_t n = 0;
  for (std::size_t u = 0; u < e.size(); ++u)
    if (seen[u]) fallback += e[u], ++n;
  fallback = n ? fallback / static_cast<double>(n) : m.config.s0;
  if (m.corpus.background_user && seen[*m.corpus.background_user]) fallback = e[*m.corpus.background_user];
  for (std::size_t u = 0; u < e.size(); ++u)
    if (!seen[u]) e[u] = fallback;
  return e;
}

inline double word_feature(const LanguageModel& lm, std::size_t t, std::size_t w, FeatureMode mode) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t z = 0; z < lm.Z; ++z)
    best = std::max(best, mode == FeatureMode::kPi ? lm.prob(t, z, w) : lm.beta[lm.index(t, z, w)]);
  if (mode == FeatureMode::kPi || best > 0.0) return std::log(best);
  return best;
}

/// Features of one review. `experience` overrides the user's stored value
/// (training rows use the review's own inferred experience).
inline RatingFeatures build_features(const Review& review, const ModelCheckpoint& m, const Biases& biases,
                                     std::span<const double> user_experience, FeatureMode mode,
                                     std::optional<double> experience = std::nullopt) {
  RatingFeatures f;
  const std::size_t t = std::min<std::size_t>(review.epoch, m.lm.T - 1);
  std::vector<std::uint32_t> words(review.tokens.begin(), review.tokens.end());
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  for (auto w : words)
    if (w < m.lm.V) f.word_scores.emplace_back(w, word_feature(m.lm, t, w, mode));
  std::size_t user = review.user;
  if (user >= user_experience.size() && m.corpus.background_user) user = *m.corpus.background_user;
  f.experience = experience ? *experience : user < user_experience.size() ? user_experience[user] : m.config.s0;
  f.gamma_g = biases.global;
  f.gamma_u = biases.user_offset(review.user);
  f.gamma_i = biases.item_offset(review.item);
  return f;
}

/// Dense design row: [gamma_u, gamma_i] for the bias-only model, followed
/// by [e, log e, F_0 .. F_{V-1}] for the full model. gamma_g is the intercept.
inline std::vector<double> design_row(const RatingFeatures& f, std::size_t V, bool full) {
  std::vector<double> row{f.gamma_u, f.gamma_i};
  if (!full) return row;
  row.push_back(f.experience);
  row.push_back(std::log(f.experience));
  row.resize(4 + V, 0.0);
  for (const auto& [w, s] : f.word_scores) row[4 + w] = s;
  return row;
}

// ---------------------------------------------------------------------------
// Ridge regression

struct RidgeModel {
  std::vector<double> weights;
  double intercept = 0.0;

  double predict(std::span<const double> x) const {
    double y = intercept;
    for (std::size_t i = 0; i < weights.size(); ++i) y += weights[i] * x[i];
    return y;
  }
};

enum class RidgeSolver { kAuto, kDirect, kConjugateGradient };

struct RidgeOptions {
  double lambda = 1.0;
  RidgeSolver solver = RidgeSolver::kAuto;
  std::size_t cg_max_iterations = 0;  // 0: solver default
  double cg_tolerance = 1e-8;
  std::size_t direct_limit = 2000;  // kAuto switches to CG above this many features
};

/// Minimizes sum (y - Xw - b)^2 + lambda |w|^2 with an unpenalized
/// intercept, by centering and solving the normal equations.
inline RidgeModel fit_regressor(const std::vector<std::vector<double>>& X, std::span<const double> y,
                                const RidgeOptions& opt = {}) {
  require(opt.lambda >= 0.0, "ridge penalty must be non-negative");
  require(!X.empty() && X.size() == y.size(), "fit_regressor: need >= 1 sample and matching targets");
  const auto n = static_cast<Eigen::Index>(X.size());
  const auto p = static_cast<Eigen::Index>(X.front().size());
  Eigen::MatrixXd A(n, p);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    require(static_cast<Eigen::Index>(X[i].size()) == p, "fit_regressor: ragged design matrix");
    for (Eigen::Index j = 0; j < p; ++j) A(i, j) = X[i][j];
    b(i) = y[i];
  }
  const Eigen::RowVectorXd x_mean = A.colwise().mean();
  const double y_mean = b.mean();
  A.rowwise() -= x_mean;
  b.array() -= y_mean;

  RidgeModel model;
  model.weights.assign(p, 0.0);
  model.intercept = y_mean;
  if (p == 0) return model;

  Eigen::MatrixXd gram = A.transpose() * A;
  gram.diagonal().array() += opt.lambda;
  const Eigen::VectorXd rhs = A.transpose() * b;
  const double scale = std::max(gram.diagonal().cwiseAbs().maxCoeff(), 1.0);

  Eigen::VectorXd w;
  const bool use_cg = opt.solver == RidgeSolver::kConjugateGradient ||
                      (opt.solver == RidgeSolver::kAuto && p > static_cast<Eigen::Index>(opt.direct_limit));
  if (use_cg) {
    if (gram.diagonal().minCoeff() <= 1e-12 * scale)
      throw NumericalError("ridge system is singular (a feature is constant and lambda is 0)");
    Eigen::ConjugateGradient<Eigen::MatrixXd, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(opt.cg_tolerance);
    if (opt.cg_max_iterations) cg.setMaxIterations(static_cast<Eigen::Index>(opt.cg_max_iterations));
    cg.compute(gram);
    w = cg.solve(rhs);
  } else {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    const auto d = ldlt.vectorD();
    if (ldlt.info() != Eigen::Success || d.minCoeff() <= 1e-12 * scale)
      throw NumericalError("ridge system is singular (collinear or constant features with lambda 0)");
    w = ldlt.solve(rhs);
  }
  for (Eigen::Index j = 0; j < p; ++j) model.weights[j] = w(j);
  model.intercept = y_mean - x_mean.dot(w);
  return model;
}

/// Value of the ridge objective for a fitted model.
inline double ridge_objective(const RidgeModel& m, const std::vector<std::vector<double>>& X,
                              std::span<const double> y, double lambda) {
  double obj = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double r = y[i] - m.predict(X[i]);
    obj += r * r;
  }
  for (double w : m.weights) obj += lambda * w * w;
  return obj;
}

// ---------------------------------------------------------------------------
// Metrics

inline double mse(std::span<const double> predictions, std::span<const double> truth) {
  require(predictions.size() == truth.size(), "mse: length mismatch");
  require(!truth.empty(), "mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = predictions[i] - truth[i];
    s += d * d;
  }
  return s / static_cast<double>(truth.size());
}

/// DCG = rel_1 + sum_{i >= 2} rel_i / log2(i).
inline double dcg(std::span<const double> relevances) {
  double s = 0.0;
  for (std::size_t i = 0; i < relevances.size(); ++i)
    s += i == 0 ? relevances[i] : relevances[i] / std::log2(static_cast<double>(i + 1));
  return s;
}

inline double ndcg(std::span<const double> ranked, std::span<const double> ideal) {
  const double idcg = dcg(ideal);
  return idcg > 0.0 ? dcg(ranked) / idcg : 0.0;
}

namespace detail {

inline std::uint64_t count_inversions(std::vector<std::size_t>& v, std::vector<std::size_t>& buf, std::size_t lo,
                                      std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t n = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      n += mid - i;
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return n;
}

}  // namespace detail

/// Discordant pairs over n(n-1)/2 between two orderings of the same ids.
template <typename Id>
double kendall_tau_distance(std::span<const Id> rank_a, std::span<const Id> rank_b) {
  require(rank_a.size() == rank_b.size(), "kendall_tau_distance: rankings differ in length");
  std::map<Id, std::size_t> pos;
  for (std::size_t i = 0; i < rank_a.size(); ++i)
    require(pos.emplace(rank_a[i], i).second, "kendall_tau_distance: duplicate id");
  std::vector<std::size_t> seq;
  seq.reserve(rank_b.size());
  for (const auto& id : rank_b) {
    const auto it = pos.find(id);
    require(it != pos.end(), "kendall_tau_distance: id sets differ");
    seq.push_back(it->second);
  }
  std::vector<std::size_t> sorted = seq;
  std::sort(sorted.begin(), sorted.end());
  require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "kendall_tau_distance: duplicate id");
  const std::size_t n = seq.size();
  if (n < 2) return 0.0;
  std::vector<std::size_t> buf(n);
  const auto inv = detail::count_inversions(seq, buf, 0, n);
  return static_cast<double>(inv) / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

template <typename Id>
double kendall_tau_distance(const std::vector<Id>& a, const std::vector<Id>& b) {
  return kendall_tau_distance(std::span<const Id>(a), std::span<const Id>(b));
}

// ---------------------------------------------------------------------------
// Rating prediction and user ranking drivers

struct PredictionRow {
  std::size_t review = 0;  // index into the test corpus
  double y_true = 0.0;
  double y_pred = 0.0;
  double y_bias_only = 0.0;
};

struct PredictionResult {
  std::vector<PredictionRow> rows;
  double mse = 0.0;
  double mse_bias_only = 0.0;
  std::size_t n_train = 0;
};

/// Fits the full and bias-only ridge models on the training corpus and
/// scores the test corpus. Both corpora share the model's index space.
inline PredictionResult predict_ratings(const ModelCheckpoint& m, const Corpus& test, FeatureMode mode,
                                        const RidgeOptions& ridge = {}) {
  const auto& train = m.corpus;
  require(!test.reviews.empty(), "predict: empty test set");
  const Biases biases = compute_biases(train);
  const auto user_e = prediction_experience(m);
  const auto review_e = m.experience_estimate();

  std::vector<std::vector<double>> X_full, X_bias;
  std::vector<double> y;
  for (std::size_t d = 0; d < train.reviews.size(); ++d) {
    const auto f = build_features(train.reviews[d], m, biases, user_e, mode, review_e[d]);
    X_full.push_back(design_row(f, m.lm.V, true));
    X_bias.push_back(design_row(f, m.lm.V, false));
    y.push_back(train.reviews[d].rating);
  }
  const auto full = fit_regressor(X_full, y, ridge);
  const auto bias_only = fit_regressor(X_bias, y, ridge);

  PredictionResult out;
  out.n_train = y.size();
  std::vector<double> truth, pred, pred_bias;
  for (std::size_t d = 0; d < test.reviews.size(); ++d) {
    const auto f = build_features(test.reviews[d], m, biases, user_e, mode);
    PredictionRow row{d, test.reviews[d].rating, full.predict(design_row(f, m.lm.V, true)),
                      bias_only.predict(design_row(f, m.lm.V, false))};
    truth.push_back(row.y_true);
    pred.push_back(row.y_pred);
    pred_bias.push_back(row.y_bias_only);
    out.rows.push_back(row);
  }
  out.mse = mse(pred, truth);
  out.mse_bias_only = mse(pred_bias, truth);
  return out;
}

struct RankingResult {
  std::vector<std::string> ranked_users;
  std::vector<double> scores;
  std::vector<double> relevance;
  double ndcg = 0.0;
  double kendall = 0.0;
};

/// Ranks labelled users by inferred experience (descending, ties by user
/// index) and keeps the top `top_n`. NDCG compares against the ideal
/// ordering of the same list; Kendall distance compares against the list
/// stably re-sorted by label.
inline RankingResult rank_users(const ModelCheckpoint& m, const std::unordered_map<std::string, double>& labels,
                                std::size_t top_n = 100) {
  const auto e = m.last_user_experience();
  std::vector<bool> seen(e.size(), false);
  for (const auto& r : m.corpus.reviews) seen[r.user] = true;
  std::vector<std::size_t> users;
  for (std::size_t u = 0; u < m.corpus.n_users(); ++u)
    if (seen[u] && labels.count(m.corpus.users[u])) users.push_back(u);
  require(!users.empty(), "rank-users: no labelled user appears in the model");
  std::stable_sort(users.begin(), users.end(), [&](std::size_t a, std::size_t b) { return e[a] > e[b]; });
  if (users.size() > top_n) users.resize(top_n);

  RankingResult out;
  for (auto u : users) {
    out.ranked_users.push_back(m.corpus.users[u]);
    out.scores.push_back(e[u]);
    out.relevance.push_back(labels.at(m.corpus.users[u]));
  }
  std::vector<double> ideal = out.relevance;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  out.ndcg = ndcg(out.relevance, ideal);
  std::vector<std::size_t> order(users.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> reference = order;
  std::stable_sort(reference.begin(), reference.end(),
                   [&](std::size_t a, std::size_t b) { return out.relevance[a] > out.relevance[b]; });
  out.kendall = kendall_tau_distance(order, reference);
  return out;
}

// ---------------------------------------------------------------------------
// Reports

inline std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct ReportBundle {
  std::string users_csv;            // (a)
  std::string trajectories_csv;     // per review: user, timestamp, e
  std::string word_frequency_csv;   // (b)
  std::string word_scores_csv;      // (c)
  std::string most_experienced_csv;   // (d)
  std::string least_experienced_csv;  // (d)
  nlohmann::json top_words;
};

/// Facet with the largest total count of word w across epochs (lowest
/// index on ties).
inline std::size_t dominant_facet(const FacetState& facets, std::size_t w) {
  std::size_t best = 0;
  std::uint64_t best_count = 0;
  for (std::size_t z = 0; z < facets.Z; ++z) {
    std::uint64_t c = 0;
    for (std::size_t t = 0; t < facets.T; ++t) c += facets.n_tzw(t, z, w);
    if (c > best_count) best = z, best_count = c;
  }
  return best;
}

inline ReportBundle export_reports(const ModelCheckpoint& m, std::size_t frequency_epoch = 0, std::size_t k = 10) {
  const auto& c = m.corpus;
  const auto& lm = m.lm;
  require(frequency_epoch < lm.T, "report epoch out of range");
  const auto& l = m.word_experience;
  ReportBundle out;

  const auto e = m.last_user_experience();
  std::vector<std::size_t> reviews(c.n_users(), 0);
  std::vector<std::int64_t> first(c.n_users(), 0), last(c.n_users(), 0);
  for (const auto& r : c.reviews) {
    if (reviews[r.user]++ == 0) first[r.user] = r.timestamp;
    last[r.user] = r.timestamp;
  }
  out.users_csv = "user,final_experience,reviews,years_active,mu,sigma\n";
  for (std::size_t u = 0; u < c.n_users(); ++u) {
    const double years = static_cast<double>(last[u] - first[u]) / kSecondsPerYear;
    out.users_csv += csv_field(c.users[u]) + "," + csv_number(e[u]) + "," + std::to_string(reviews[u]) + "," +
                     csv_number(years) + "," + csv_number(m.experience.users[u].mu) + "," +
                     csv_number(m.experience.users[u].sigma) + "\n";
  }

  const auto review_e = m.experience_estimate();
  out.trajectories_csv = "user,timestamp,experience\n";
  for (std::size_t d = 0; d < c.reviews.size(); ++d)
    out.trajectories_csv += csv_field(c.users[c.reviews[d].user]) + "," + std::to_string(c.reviews[d].timestamp) + "," +
                            csv_number(review_e[d]) + "\n";

  std::vector<std::size_t> freq(lm.V, 0);
  for (const auto& r : c.reviews)
    if (r.epoch == frequency_epoch)
      for (auto w : r.tokens) ++freq[w];
  out.word_frequency_csv = "word,frequency,word_experience\n";
  for (std::size_t w = 0; w < lm.V; ++w)
    out.word_frequency_csv += csv_field(c.vocabulary[w]) + "," + std::to_string(freq[w]) + "," +
                              csv_number(l.l(frequency_epoch, w)) + "\n";

  out.word_scores_csv = "word,facet";
  for (std::size_t t = 0; t < lm.T; ++t) out.word_scores_csv += ",epoch_" + std::to_string(t);
  out.word_scores_csv += "\n";
  for (std::size_t w = 0; w < lm.V; ++w) {
    const auto z = dominant_facet(m.facets, w);
    out.word_scores_csv += csv_field(c.vocabulary[w]) + "," + std::to_string(z);
    for (std::size_t t = 0; t < lm.T; ++t)
      out.word_scores_csv += "," + csv_number(lm.beta[lm.index(t, z, w)] * l.l(t, w));
    out.word_scores_csv += "\n";
  }

  const std::string header = "epoch,rank,word,word_experience\n";
  out.most_experienced_csv = header;
  out.least_experienced_csv = header;
  for (std::size_t t = 0; t < lm.T; ++t) {
    std::vector<std::size_t> present;
    for (std::size_t w = 0; w < lm.V; ++w)
      if (l.l(t, w) > 0.0) present.push_back(w);
    auto emit = [&](std::string& dst, auto cmp) {
      auto words = present;
      std::stable_sort(words.begin(), words.end(), cmp);
      for (std::size_t i = 0; i < std::min(k, words.size()); ++i)
        dst += std::to_string(t) + "," + std::to_string(i + 1) + "," + csv_field(c.vocabulary[words[i]]) + "," +
               csv_number(l.l(t, words[i])) + "\n";
    };
    emit(out.most_experienced_csv, [&](std::size_t a, std::size_t b) { return l.l(t, a) > l.l(t, b); });
    emit(out.least_experienced_csv, [&](std::size_t a, std::size_t b) { return l.l(t, a) < l.l(t, b); });
  }

  out.top_words = nlohmann::json::array();
  for (std::size_t t = 0; t < lm.T; ++t)
    for (std::size_t z = 0; z < lm.Z; ++z) {
      nlohmann::json words = nlohmann::json::array();
      for (const auto& s : top_words(lm, t, z, k)) words.push_back({{"word", c.vocabulary[s.word]}, {"prob", s.score}});
      out.top_words.push_back({{"epoch", t}, {"facet", z}, {"words", words}});
    }
  return out;
}

}  // namespace expaware
