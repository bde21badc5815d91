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

// Joint inference loop. Each iteration runs, in order:
//   1. collapsed Gibbs sweep(s) over token facets,
//   2. Kalman smoothing of beta over epochs,
//   3. Metropolis-Hastings over a random subset of review experiences,
//   4. recomputation of word experience l from the new experiences,
//   5. per-user GBM re-estimation,
// then records the data log-likelihood.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "expaware/common.hpp"
#include "expaware/container.hpp"
#include "expaware/corpus.hpp"
#include "expaware/experience_sampler.hpp"
#include "expaware/facet_sampler.hpp"
#include "expaware/language_model.hpp"
#include "expaware/stochastic.hpp"

namespace expaware {

namespace detail {

template <typename E>
struct EnumNames;

template <>
struct EnumNames<KalmanNoise> {
  static constexpr std::pair<KalmanNoise, const char*> values[] = {{KalmanNoise::kLiteral, "literal"},
                                                                   {KalmanNoise::kAligned, "aligned"}};
};
template <>
struct EnumNames<KalmanError> {
  static constexpr std::pair<KalmanError, const char*> values[] = {{KalmanError::kReset, "reset"},
                                                                   {KalmanError::kCarry, "carry"}};
};
template <>
struct EnumNames<MhScope> {
  static constexpr std::pair<MhScope, const char*> values[] = {{MhScope::kActive, "active"},
                                                               {MhScope::kFull, "full"}};
};
template <>
struct EnumNames<MhNeighbors> {
  static constexpr std::pair<MhNeighbors, const char*> values[] = {{MhNeighbors::kGlobal, "global"},
                                                                   {MhNeighbors::kUser, "user"}};
};
template <>
struct EnumNames<GbmFit> {
  static constexpr std::pair<GbmFit, const char*> values[] = {{GbmFit::kPath, "path"},
                                                              {GbmFit::kLiteral, "literal"}};
};

}  // namespace detail

template <typename E>
std::string enum_name(E value) {
  for (const auto& [v, name] : detail::EnumNames<E>::values)
    if (v == value) return name;
  throw ArgumentError("unknown enum value");
}

template <typename E>
E parse_enum(const std::string& text) {
  for (const auto& [v, name] : detail::EnumNames<E>::values)
    if (text == name) return v;
  std::string options;
  for (const auto& [v, name] : detail::EnumNames<E>::values) options += std::string(options.empty() ? "" : "|") + name;
  throw ArgumentError("invalid value '" + text + "' (expected " + options + ")");
}

struct TrainConfig {
  std::size_t Z = 5;
  std::optional<double> alpha;  // default 50 / Z
  double gamma = 0.01;
  double sigma_lm = 1.0;
  std::size_t iterations = 200;
  double mh_fraction = 0.2;
  std::size_t gibbs_sweeps_per_iter = 1;
  std::uint64_t seed = 1;
  double s0 = 1.0;
  KalmanNoise kalman_noise = KalmanNoise::kLiteral;
  KalmanError kalman_error = KalmanError::kReset;
  MhScope mh_scope = MhScope::kActive;
  MhNeighbors mh_neighbors = MhNeighbors::kGlobal;
  GbmFit gbm_fit = GbmFit::kPath;
  double early_stop_tol = 1e-5;  // 0 disables
  std::size_t early_stop_window = 10;
  std::size_t burn_in = 0;
  std::size_t thin = 1;
  bool validate = false;
  std::size_t threads = 1;

  double resolved_alpha() const { return alpha.value_or(50.0 / static_cast<double>(Z)); }

  void check() const {
    require(Z >= 1, "Z must be >= 1");
    require(iterations >= 1, "iterations must be >= 1");
    require(resolved_alpha() > 0.0, "alpha must be positive");
    require(gamma > 0.0, "gamma must be positive");
    require(sigma_lm >= 0.0 && std::isfinite(sigma_lm), "sigma_lm must be a finite non-negative number");
    require(mh_fraction > 0.0 && mh_fraction <= 1.0, "mh_fraction must be in (0, 1]");
    require(gibbs_sweeps_per_iter >= 1, "gibbs_sweeps_per_iter must be >= 1");
    require(s0 > 0.0, "s0 must be positive");
    require(thin >= 1, "thin must be >= 1");
    require(early_stop_tol >= 0.0, "early_stop_tol must be non-negative");
  }

  nlohmann::json to_json() const {
    return {{"Z", Z},
            {"alpha", resolved_alpha()},
            {"gamma", gamma},
            {"sigma_lm", sigma_lm},
            {"iterations", iterations},
            {"mh_fraction", mh_fraction},
            {"gibbs_sweeps_per_iter", gibbs_sweeps_per_iter},
            {"seed", seed},
            {"s0", s0},
            {"kalman_noise", enum_name(kalman_noise)},
            {"kalman_error", enum_name(kalman_error)},
            {"mh_scope", enum_name(mh_scope)},
            {"mh_neighbors", enum_name(mh_neighbors)},
            {"gbm_fit", enum_name(gbm_fit)},
            {"early_stop_tol", early_stop_tol},
            {"early_stop_window", early_stop_window},
            {"burn_in", burn_in},
            {"thin", thin},
            {"validate", validate},
            {"threads", threads}};
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.Z = j.at("Z").get<std::size_t>();
    c.alpha = j.at("alpha").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.sigma_lm = j.at("sigma_lm").get<double>();
    c.iterations = j.at("iterations").get<std::size_t>();
    c.mh_fraction = j.at("mh_fraction").get<double>();
    c.gibbs_sweeps_per_iter = j.at("gibbs_sweeps_per_iter").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.s0 = j.at("s0").get<double>();
    c.kalman_noise = parse_enum<KalmanNoise>(j.at("kalman_noise").get<std::string>());
    c.kalman_error = parse_enum<KalmanError>(j.at("kalman_error").get<std::string>());
    c.mh_scope = parse_enum<MhScope>(j.at("mh_scope").get<std::string>());
    c.mh_neighbors = parse_enum<MhNeighbors>(j.at("mh_neighbors").get<std::string>());
    c.gbm_fit = parse_enum<GbmFit>(j.at("gbm_fit").get<std::string>());
    c.early_stop_tol = j.at("early_stop_tol").get<double>();
    c.early_stop_window = j.at("early_stop_window").get<std::size_t>();
    c.burn_in = j.at("burn_in").get<std::size_t>();
    c.thin = j.at("thin").get<std::size_t>();
    c.validate = j.at("validate").get<bool>();
    c.threads = j.at("threads").get<std::size_t>();
    return c;
  }
};

/// Complete sampler state; enough to resume training bit-exactly.
struct ModelCheckpoint {
  TrainConfig config;
  Corpus corpus;                   // the corpus the model was trained on
  std::string source_fingerprint;  // corpus handed to the trainer before any holdout
  std::size_t holdout_recent = 0;
  LanguageModel lm;
  FacetState facets;
  ExperienceState experience;
  WordExperience word_experience;
  std::size_t iteration = 0;
  std::vector<double> ll_history;
  std::vector<double> acceptance_history;
  std::vector<double> e_sum;  // running sum of kept experience samples
  std::size_t e_samples = 0;
  Rng rng;

  /// Current experiences by default. With burn-in or thinning configured,
  /// the mean over kept samples (iterations >= burn_in, every `thin`).
  std::vector<double> experience_estimate() const {
    if (e_samples == 0 || (config.burn_in == 0 && config.thin == 1)) return experience.e;
    std::vector<double> out(e_sum.size());
    for (std::size_t d = 0; d < out.size(); ++d) out[d] = e_sum[d] / static_cast<double>(e_samples);
    return out;
  }

  /// Experience of each user's latest training review (0 when absent).
  std::vector<double> last_user_experience() const {
    const auto e = experience_estimate();
    std::vector<double> out(corpus.n_users(), 0.0);
    for (std::size_t d = 0; d < corpus.reviews.size(); ++d) out[corpus.reviews[d].user] = e[d];
    return out;
  }
};

/// LL = sum_d sum_j log sum_z theta_hat(d, z) pi(beta_{t_d, z, w_dj}).
inline double log_likelihood(const Corpus& corpus, const FacetState& facets, const LanguageModel& lm) {
  double ll = 0.0;
  for (std::size_t d = 0; d < corpus.reviews.size(); ++d) {
    const auto& r = corpus.reviews[d];
    if (r.tokens.empty()) continue;
    const auto theta = estimate_theta(facets, d);
    for (auto w : r.tokens) {
      double p = 0.0;
      for (std::size_t z = 0; z < lm.Z; ++z) p += theta[z] * lm.prob(r.epoch, z, w);
      ll += std::log(p);
    }
  }
  return ll;
}

inline double log_likelihood(const ModelCheckpoint& m, const Corpus& corpus) {
  return log_likelihood(corpus, m.facets, m.lm);
}

namespace detail {

inline void check_finite(std::span<const double> values, const char* phase) {
  for (double v : values)
    if (!std::isfinite(v)) throw NumericalError(std::string("non-finite value after ") + phase);
}

inline void validate_state(const ModelCheckpoint& m, const char* phase) {
  auto fail = [&](const std::string& what) { throw NumericalError(std::string(phase) + ": " + what); };
  if (!m.facets.consistent(m.corpus)) fail("facet counts disagree with assignments");
  for (std::size_t t = 0; t < m.lm.T; ++t)
    for (std::size_t z = 0; z < m.lm.Z; ++z)
      if (m.lm.beta[m.lm.index(t, z, m.lm.reference_word())] != 0.0) fail("reference word beta is not 0");
  for (double p : m.lm.kalman_error)
    if (!(p > 0.0)) fail("Kalman error is not positive");
  for (double e : m.experience.e)
    if (!(e > 0.0)) fail("experience is not positive");
  for (const auto& u : m.experience.users)
    if (!u.valid()) fail("invalid GBM parameters");
}

}  // namespace detail

/// Random facets, unit experiences, neutral GBMs, beta from the initial
/// counts, and l from the initial experiences.
inline ModelCheckpoint initialize(const Corpus& corpus, const TrainConfig& config) {
  config.check();
  if (corpus.reviews.empty()) throw DataError("cannot train on an empty corpus");
  if (corpus.vocabulary.empty()) throw DataError("cannot train with an empty vocabulary");
  ModelCheckpoint m;
  m.config = config;
  m.config.alpha = config.resolved_alpha();
  m.corpus = corpus;
  m.rng.seed(config.seed);
  m.facets = FacetState::random(corpus, config.Z, m.config.resolved_alpha(), m.rng);
  m.lm = LanguageModel(corpus.n_epochs, config.Z, corpus.vocab_size(), config.sigma_lm, config.gamma);
  m.lm.noise = config.kalman_noise;
  m.lm.error_mode = config.kalman_error;
  for (std::size_t t = 0; t < m.lm.T; ++t) m.lm.set_from_counts(t, m.facets.epoch_block(t));
  m.experience = ExperienceState::initial(corpus, config.s0);
  m.word_experience = compute_word_experience(corpus, m.experience.e);
  m.e_sum.assign(corpus.reviews.size(), 0.0);
  return m;
}

/// Runs one full iteration of the inference loop.
inline void run_iteration(ModelCheckpoint& m) {
  const auto& cfg = m.config;
  const auto& corpus = m.corpus;
  auto check = [&](const char* phase) {
    if (cfg.validate) detail::validate_state(m, phase);
  };

  for (std::size_t s = 0; s < cfg.gibbs_sweeps_per_iter; ++s) gibbs_sweep(corpus, m.facets, m.lm, m.rng);
  check("gibbs");

  for (std::size_t t = 0; t < m.lm.T; ++t) smooth_epoch(m.lm, t, m.facets.epoch_block(t), m.word_experience, cfg.threads);
  detail::check_finite(m.lm.beta, "kalman smoothing");
  check("kalman smoothing");

  const MhConfig mh{cfg.mh_fraction, cfg.mh_scope, cfg.mh_neighbors};
  m.acceptance_history.push_back(mh_sweep(corpus, m.facets, m.lm, m.experience, mh, m.rng));
  detail::check_finite(m.experience.e, "experience sampling");
  check("experience sampling");

  m.word_experience = compute_word_experience(corpus, m.experience.e);
  detail::check_finite(m.word_experience.raw, "word experience");

  refit_gbm_params(corpus, m.experience, cfg.gbm_fit);
  for (const auto& u : m.experience.users)
    if (!u.valid()) throw NumericalError("non-finite value after GBM estimation");
  check("GBM estimation");

  const double ll = log_likelihood(corpus, m.facets, m.lm);
  if (!std::isfinite(ll)) throw NumericalError("non-finite log-likelihood");
  m.ll_history.push_back(ll);

  if (m.iteration >= cfg.burn_in && (m.iteration - cfg.burn_in) % cfg.thin == 0) {
    for (std::size_t d = 0; d < m.e_sum.size(); ++d) m.e_sum[d] += m.experience.e[d];
    ++m.e_samples;
  }
  ++m.iteration;
}

inline bool converged(const ModelCheckpoint& m) {
  const auto& h = m.ll_history;
  const auto window = m.config.early_stop_window;
  if (m.config.early_stop_tol <= 0.0 || window == 0 || h.size() <= window) return false;
  const double now = h.back(), then = h[h.size() - 1 - window];
  return std::abs(now - then) / std::abs(now) < m.config.early_stop_tol;
}

using IterationCallback = std::function<void(const ModelCheckpoint&)>;

/// Continues `m` until config.iterations total iterations or convergence.
inline void resume(ModelCheckpoint& m, const IterationCallback& on_iteration = {}) {
  while (m.iteration < m.config.iterations) {
    run_iteration(m);
    if (on_iteration) on_iteration(m);
    if (converged(m)) break;
  }
}

inline ModelCheckpoint train(const Corpus& corpus, const TrainConfig& config,
                             const IterationCallback& on_iteration = {}) {
  ModelCheckpoint m = initialize(corpus, config);
  m.source_fingerprint = corpus_fingerprint(corpus);
  resume(m, on_iteration);
  return m;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

inline constexpr std::uint32_t kModelVersion = 1;

inline std::string serialize_model(const ModelCheckpoint& m) {
  ContainerWriter out("model", kModelVersion);
  std::ostringstream rng;
  rng << m.rng;
  out.meta() = {{"config", m.config.to_json()},
                {"corpus", corpus_meta(m.corpus)},
                {"source_fingerprint", m.source_fingerprint},
                {"holdout_recent", m.holdout_recent},
                {"iteration", m.iteration},
                {"ll_history", m.ll_history},
                {"acceptance_history", m.acceptance_history},
                {"e_samples", m.e_samples},
                {"rng_state", rng.str()},
                {"dims", {{"T", m.lm.T}, {"Z", m.lm.Z}, {"V", m.lm.V}}},
                {"reference_word", m.lm.reference_word()}};
  write_corpus_sections(out, m.corpus);
  out.add("lm.beta", m.lm.beta);
  out.add("lm.kalman_error", m.lm.kalman_error);
  std::vector<std::uint32_t> z;
  for (const auto& row : m.facets.assignments) z.insert(z.end(), row.begin(), row.end());
  out.add("facets.assignments", z);
  out.add("experience.e", m.experience.e);
  out.add("experience.e_sum", m.e_sum);
  std::vector<double> mu, sigma, s0;
  for (const auto& u : m.experience.users) {
    mu.push_back(u.mu);
    sigma.push_back(u.sigma);
    s0.push_back(u.s0);
  }
  out.add("gbm.mu", mu);
  out.add("gbm.sigma", sigma);
  out.add("gbm.s0", s0);
  out.add("word_experience.raw", m.word_experience.raw);
  out.add("word_experience.carried", m.word_experience.carried);
  return out.bytes();
}

inline ModelCheckpoint deserialize_model(std::string_view bytes) {
  Container in(bytes, "model", kModelVersion);
  const auto& meta = in.meta();
  ModelCheckpoint m;
  m.config = TrainConfig::from_json(meta.at("config"));
  m.corpus = read_corpus_sections(in, meta.at("corpus"));
  m.source_fingerprint = meta.at("source_fingerprint").get<std::string>();
  m.holdout_recent = meta.at("holdout_recent").get<std::size_t>();
  m.iteration = meta.at("iteration").get<std::size_t>();
  m.ll_history = meta.at("ll_history").get<std::vector<double>>();
  m.acceptance_history = meta.at("acceptance_history").get<std::vector<double>>();
  m.e_samples = meta.at("e_samples").get<std::size_t>();
  std::istringstream rng(meta.at("rng_state").get<std::string>());
  rng >> m.rng;

  const auto& c = m.corpus;
  m.lm = LanguageModel(c.n_epochs, m.config.Z, c.vocab_size(), m.config.sigma_lm, m.config.gamma);
  m.lm.noise = m.config.kalman_noise;
  m.lm.error_mode = m.config.kalman_error;
  m.lm.beta = in.get<double>("lm.beta");
  m.lm.kalman_error = in.get<double>("lm.kalman_error");
  if (m.lm.beta.size() != m.lm.T * m.lm.Z * m.lm.V || m.lm.kalman_error.size() != m.lm.beta.size())
    throw VersionError("model tensors do not match the stored dimensions");
  m.lm.refresh_probs();

  const auto z = in.get<std::uint32_t>("facets.assignments");
  std::vector<std::vector<std::uint32_t>> rows(c.reviews.size());
  std::size_t pos = 0;
  for (std::size_t d = 0; d < rows.size(); ++d) {
    const auto n = c.reviews[d].tokens.size();
    if (pos + n > z.size()) throw VersionError("assignment table is truncated");
    rows[d].assign(z.begin() + static_cast<std::ptrdiff_t>(pos), z.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
  }
  m.facets = FacetState::from_assignments(c, m.config.Z, m.config.resolved_alpha(), std::move(rows));

  m.experience.e = in.get<double>("experience.e");
  m.e_sum = in.get<double>("experience.e_sum");
  const auto mu = in.get<double>("gbm.mu");
  const auto sigma = in.get<double>("gbm.sigma");
  const auto s0 = in.get<double>("gbm.s0");
  if (m.experience.e.size() != c.reviews.size() || mu.size() != c.n_users())
    throw VersionError("experience state does not match the stored corpus");
  for (std::size_t u = 0; u < mu.size(); ++u) m.experience.users.push_back({mu[u], sigma[u], s0[u]});

  m.word_experience.T = c.n_epochs;
  m.word_experience.V = c.vocab_size();
  m.word_experience.raw = in.get<double>("word_experience.raw");
  m.word_experience.carried = in.get<double>("word_experience.carried");
  return m;
}

}  // namespace expaware
