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

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "expaware/common.hpp"
#include "expaware/container.hpp"
#include "expaware/corpus.hpp"
#include "expaware/evaluation.hpp"
#include "expaware/synthesizer.hpp"
#include "expaware/trainer.hpp"

namespace expaware::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfig = 2,
  kIo = 3,
  kVersion = 4,
  kData = 5,
  kNumerical = 6,
};

/// Records inputs, outputs and timings of one command; written next to the
/// primary output.
class Manifest {
 public:
  explicit Manifest(std::string command) : start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["inputs"] = nlohmann::json::object();
    doc_["outputs"] = nlohmann::json::object();
    doc_["timings_s"] = nlohmann::json::object();
  }

  nlohmann::json& config() { return doc_["config"]; }

  void input(const std::string& role, const std::filesystem::path& path, std::string_view bytes) {
    doc_["inputs"][role] = {{"path", path.string()}, {"fnv1a64", hex64(fnv1a64(bytes))}};
  }

  /// Writes `bytes` atomically and records it.
  void output(const std::string& role, const std::filesystem::path& path, std::string_view bytes) {
    write_file_atomic(path, bytes);
    doc_["outputs"][role] = {{"path", path.string()}, {"fnv1a64", hex64(fnv1a64(bytes))}};
  }

  void phase(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    doc_["timings_s"][name] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }

  void write(const std::filesystem::path& primary_output) {
    doc_["timings_s"]["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_file_atomic(primary_output.string() + ".manifest.json", doc_.dump(2) + "\n");
  }

 private:
  nlohmann::json doc_;
  std::chrono::steady_clock::time_point start_;
  std::chrono::steady_clock::time_point last_ = start_;
};

inline Corpus load_corpus(const std::filesystem::path& path, std::string* bytes_out = nullptr) {
  auto bytes = read_file(path);
  auto corpus = deserialize_corpus(bytes);
  if (bytes_out) *bytes_out = std::move(bytes);
  return corpus;
}

inline ModelCheckpoint load_model(const std::filesystem::path& path, std::string* bytes_out = nullptr) {
  auto bytes = read_file(path);
  auto model = deserialize_model(bytes);
  if (bytes_out) *bytes_out = std::move(bytes);
  return model;
}

// ---------------------------------------------------------------------------
// Commands

struct IngestOptions {
  std::string input;
  std::string output;
  std::string stats;
  std::size_t min_df = 5;
  std::string epoch_width = "1y";
  std::size_t min_user_reviews = 50;
  std::size_t min_token_length = 1;
  bool english_stopwords = false;
  bool continue_on_error = false;
};

inline int cmd_ingest(const IngestOptions& o) {
  Manifest manifest("ingest");
  const auto text = read_file(o.input);
  manifest.input("reviews", o.input, text);
  CorpusConfig cfg;
  cfg.min_df = o.min_df;
  cfg.epoch_width = EpochWidth::parse(o.epoch_width);
  cfg.min_reviews_background = o.min_user_reviews;
  cfg.tokenizer.min_len = o.min_token_length;
  if (o.english_stopwords) cfg.tokenizer.stopwords = english_stopwords();
  manifest.config() = {{"min_df", o.min_df},
                       {"epoch_width", cfg.epoch_width.str()},
                       {"min_user_reviews", o.min_user_reviews},
                       {"min_token_length", o.min_token_length},
                       {"english_stopwords", o.english_stopwords},
                       {"continue_on_error", o.continue_on_error}};

  std::istringstream in(text);
  std::vector<IngestError> errors;
  auto raw = read_jsonl(in, o.continue_on_error, &errors);
  for (const auto& e : errors) std::cerr << "skipped line " << e.line << ": " << e.message << "\n";
  if (raw.empty()) throw DataError("no valid reviews in " + o.input);
  const auto corpus = build_corpus(std::move(raw), cfg);
  manifest.phase("build");

  auto stats = corpus_stats(corpus).to_json();
  stats["skipped_lines"] = errors.size();
  manifest.output("corpus", o.output, serialize_corpus(corpus));
  const std::string stats_path = o.stats.empty() ? o.output + ".stats.json" : o.stats;
  manifest.output("stats", stats_path, stats.dump(2) + "\n");
  manifest.write(o.output);
  std::cout << stats.dump(2) << "\n";
  return kOk;
}

struct TrainOptions {
  std::string corpus;
  std::string output;
  std::string ll_csv;
  std::string resume;
  std::size_t holdout = 0;
  std::string epoch_width;      // empty: keep the corpus binning
  long min_user_reviews = -1;   // < 0: keep the corpus folding
  std::size_t checkpoint_every = 0;
  std::optional<double> alpha;
  std::string kalman_noise = "literal";
  std::string kalman_error = "reset";
  std::string mh_scope = "active";
  std::string mh_neighbors = "global";
  std::string gbm_fit = "path";
  TrainConfig config;
};

inline std::string ll_csv(const ModelCheckpoint& m) {
  std::string out = "iteration,log_likelihood,mh_acceptance\n";
  for (std::size_t i = 0; i < m.ll_history.size(); ++i)
    out += std::to_string(i + 1) + "," + csv_number(m.ll_history[i]) + "," + csv_number(m.acceptance_history[i]) + "\n";
  return out;
}

inline int cmd_train(TrainOptions o) {
  Manifest manifest("train");
  std::string corpus_bytes;
  Corpus source = load_corpus(o.corpus, &corpus_bytes);
  manifest.input("corpus", o.corpus, corpus_bytes);

  ModelCheckpoint model;
  if (!o.resume.empty()) {
    std::string model_bytes;
    model = load_model(o.resume, &model_bytes);
    manifest.input("resume", o.resume, model_bytes);
    if (model.source_fingerprint != corpus_fingerprint(source))
      throw VersionError("resume checkpoint was trained on a different corpus");
    // Only the iteration budget may change on resume.
    model.config.iterations = o.config.iterations;
  } else {
    if (o.min_user_reviews >= 0) source = fold_background_users(std::move(source), static_cast<std::size_t>(o.min_user_reviews));
    if (!o.epoch_width.empty()) bin_timestamps(source, EpochWidth::parse(o.epoch_width));
    auto cfg = o.config;
    cfg.alpha = o.alpha;
    cfg.kalman_noise = parse_enum<KalmanNoise>(o.kalman_noise);
    cfg.kalman_error = parse_enum<KalmanError>(o.kalman_error);
    cfg.mh_scope = parse_enum<MhScope>(o.mh_scope);
    cfg.mh_neighbors = parse_enum<MhNeighbors>(o.mh_neighbors);
    cfg.gbm_fit = parse_enum<GbmFit>(o.gbm_fit);
    const auto fingerprint = corpus_fingerprint(source);
    const Corpus train = o.holdout ? holdout_recent(source, o.holdout).train : source;
    model = initialize(train, cfg);
    model.source_fingerprint = fingerprint;
    model.holdout_recent = o.holdout;
  }
  manifest.config() = model.config.to_json();
  manifest.config()["holdout"] = model.holdout_recent;
  manifest.phase("initialize");

  resume(model, [&](const ModelCheckpoint& m) {
    std::cerr << "iteration " << m.iteration << " ll " << csv_number(m.ll_history.back()) << " mh_accept "
              << csv_number(m.acceptance_history.back()) << "\n";
    if (o.checkpoint_every && m.iteration % o.checkpoint_every == 0) write_file_atomic(o.output, serialize_model(m));
  });
  manifest.phase("train");

  manifest.output("model", o.output, serialize_model(model));
  manifest.output("ll_csv", o.ll_csv.empty() ? o.output + ".ll.csv" : o.ll_csv, ll_csv(model));
  manifest.write(o.output);
  return kOk;
}

struct PredictOptions {
  std::string model;
  std::string corpus;
  std::string predictions;
  std::string metrics;
  std::string feature_mode = "pi";
  double lambda = 1.0;
};

inline int cmd_predict(const PredictOptions& o) {
  Manifest manifest("predict");
  std::string model_bytes, corpus_bytes;
  const auto model = load_model(o.model, &model_bytes);
  const auto corpus = load_corpus(o.corpus, &corpus_bytes);
  manifest.input("model", o.model, model_bytes);
  manifest.input("corpus", o.corpus, corpus_bytes);
  manifest.config() = {{"feature_mode", o.feature_mode}, {"lambda", o.lambda}, {"holdout", model.holdout_recent}};

  if (corpus_fingerprint(corpus) != model.source_fingerprint)
    throw VersionError("model was not trained on this corpus");
  if (model.holdout_recent == 0) throw ArgumentError("model was trained without a holdout; retrain with --holdout");
  const auto split = holdout_recent(corpus, model.holdout_recent);
  if (corpus_fingerprint(split.train) != corpus_fingerprint(model.corpus))
    throw VersionError("holdout split does not reproduce the model's training corpus");

  RidgeOptions ridge;
  ridge.lambda = o.lambda;
  const auto result = predict_ratings(model, split.test, parse_feature_mode(o.feature_mode), ridge);
  manifest.phase("predict");

  std::string csv = "review_id,user,item,y_true,y_pred,y_pred_bias_only\n";
  for (const auto& row : result.rows) {
    const auto& r = split.test.reviews[row.review];
    csv += std::to_string(row.review) + "," + csv_field(corpus.users[r.user]) + "," + csv_field(corpus.items[r.item]) +
           "," + csv_number(row.y_true) + "," + csv_number(row.y_pred) + "," + csv_number(row.y_bias_only) + "\n";
  }
  const nlohmann::json metrics = {{"mse", result.mse},
                                  {"mse_bias_only", result.mse_bias_only},
                                  {"n_test", result.rows.size()},
                                  {"n_train", result.n_train},
                                  {"feature_mode", o.feature_mode}};
  const std::string pred_path = o.predictions.empty() ? o.model + ".predictions.csv" : o.predictions;
  manifest.output("predictions", pred_path, csv);
  manifest.output("metrics", o.metrics.empty() ? o.model + ".metrics.json" : o.metrics, metrics.dump(2) + "\n");
  manifest.write(pred_path);
  std::cout << metrics.dump(2) << "\n";
  return kOk;
}

/// Labels file: JSON object {user: label} or CSV lines "user,label" (an
/// optional header line is skipped).
inline std::unordered_map<std::string, double> parse_labels(const std::string& text) {
  std::unordered_map<std::string, double> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw DataError("labels: malformed JSON object");
    for (const auto& [k, v] : j.items()) {
      if (!v.is_number()) throw DataError("labels: non-numeric label for user " + k);
      out[k] = v.get<double>();
    }
    return out;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw DataError("labels line " + std::to_string(n) + ": expected user,label");
    try {
      out[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      if (n == 1) continue;  // header
      throw DataError("labels line " + std::to_string(n) + ": label is not a number");
    }
  }
  return out;
}

struct RankUsersOptions {
  std::string model;
  std::string labels;
  std::string output;
  std::size_t top = 100;
};

inline int cmd_rank_users(const RankUsersOptions& o) {
  Manifest manifest("rank-users");
  std::string model_bytes;
  const auto model = load_model(o.model, &model_bytes);
  const auto labels_text = read_file(o.labels);
  manifest.input("model", o.model, model_bytes);
  manifest.input("labels", o.labels, labels_text);
  manifest.config() = {{"top", o.top}};
  const auto result = rank_users(model, parse_labels(labels_text), o.top);
  const nlohmann::json out = {{"ndcg", result.ndcg},
                              {"kendall", result.kendall},
                              {"n", result.ranked_users.size()},
                              {"ranking", result.ranked_users},
                              {"scores", result.scores},
                              {"relevance", result.relevance}};
  const std::string path = o.output.empty() ? o.model + ".ranking.json" : o.output;
  manifest.output("ranking", path, out.dump(2) + "\n");
  manifest.write(path);
  std::cout << nlohmann::json{{"ndcg", result.ndcg}, {"kendall", result.kendall}}.dump(2) << "\n";
  return kOk;
}

struct SynthOptions {
  std::string fixture = "S1";
  std::string output;
  std::string truth;
  std::string corpus_output;
  std::optional<std::uint64_t> seed;
};

inline int cmd_synth(const SynthOptions& o) {
  Manifest manifest("synth");
  auto cfg = fixture_by_name(o.fixture);
  if (o.seed) cfg.seed = *o.seed;
  manifest.config() = {{"fixture", o.fixture}, {"seed", cfg.seed}};
  const auto data = generate(cfg);
  std::string jsonl;
  for (const auto& r : to_raw_reviews(data.corpus)) jsonl += review_to_json(r) + "\n";
  manifest.output("reviews", o.output, jsonl);
  manifest.output("truth", o.truth.empty() ? o.output + ".truth.json" : o.truth,
                  data.truth.to_json(data.corpus).dump() + "\n");
  if (!o.corpus_output.empty()) manifest.output("corpus", o.corpus_output, serialize_corpus(data.corpus));
  manifest.write(o.output);
  return kOk;
}

struct ReportOptions {
  std::string model;
  std::string output_dir;
  std::size_t epoch = 0;
  std::size_t top_k = 10;
};

inline int cmd_report(const ReportOptions& o) {
  Manifest manifest("report");
  std::string model_bytes;
  const auto model = load_model(o.model, &model_bytes);
  manifest.input("model", o.model, model_bytes);
  manifest.config() = {{"epoch", o.epoch}, {"top_k", o.top_k}};
  const auto bundle = export_reports(model, o.epoch, o.top_k);
  const std::filesystem::path dir = o.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  manifest.output("users", dir / "users.csv", bundle.users_csv);
  manifest.output("trajectories", dir / "experience_trajectories.csv", bundle.trajectories_csv);
  manifest.output("word_frequency", dir / "word_frequency.csv", bundle.word_frequency_csv);
  manifest.output("word_scores", dir / "word_scores.csv", bundle.word_scores_csv);
  manifest.output("most_experienced_words", dir / "most_experienced_words.csv", bundle.most_experienced_csv);
  manifest.output("least_experienced_words", dir / "least_experienced_words.csv", bundle.least_experienced_csv);
  manifest.output("top_words", dir / "top_words.json", bundle.top_words.dump(2) + "\n");
  manifest.write(dir / "report");
  return kOk;
}

// ---------------------------------------------------------------------------
// Entry point

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ArgumentError*>(&e)) return kConfig;
  if (dynamic_cast<const IoError*>(&e)) return kIo;
  if (dynamic_cast<const VersionError*>(&e)) return kVersion;
  if (dynamic_cast<const DataError*>(&e)) return kData;
  if (dynamic_cast<const NumericalError*>(&e) || dynamic_cast<const DomainError*>(&e)) return kNumerical;
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return kVersion;
  return kFailure;
}

inline int run(int argc, const char* const* argv) {
  CLI::App app{"Continuous experience-aware review modeling"};
  app.set_config("--config", "", "TOML/INI file with option defaults (command-line flags take precedence)");
  app.require_subcommand(1);

  IngestOptions ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Build a corpus checkpoint from JSON-lines reviews");
  c_ingest->add_option("-i,--input", ingest.input, "JSON-lines review file")->required();
  c_ingest->add_option("-o,--output", ingest.output, "corpus checkpoint path")->required();
  c_ingest->add_option("--stats", ingest.stats, "stats JSON path (default <output>.stats.json)");
  c_ingest->add_option("--min-df", ingest.min_df, "minimum document frequency")->capture_default_str();
  c_ingest->add_option("--epoch-width", ingest.epoch_width, "epoch width: Ny, Nmo or Nd")->capture_default_str();
  c_ingest->add_option("--min-user-reviews", ingest.min_user_reviews, "users below this fold into the background user")
      ->capture_default_str();
  c_ingest->add_option("--min-token-length", ingest.min_token_length)->capture_default_str();
  c_ingest->add_flag("--english-stopwords", ingest.english_stopwords, "drop common English stopwords");
  c_ingest->add_flag("--continue-on-error", ingest.continue_on_error, "skip malformed lines");

  TrainOptions train;
  auto& tc = train.config;
  auto* c_train = app.add_subcommand("train", "Train a model on a corpus checkpoint");
  c_train->add_option("-c,--corpus", train.corpus)->required();
  c_train->add_option("-o,--output", train.output, "model checkpoint path")->required();
  c_train->add_option("--ll-csv", train.ll_csv, "log-likelihood trace (default <output>.ll.csv)");
  c_train->add_option("--resume", train.resume, "continue from this model checkpoint");
  c_train->add_option("--holdout", train.holdout, "hold out each user's N most recent reviews")->capture_default_str();
  c_train->add_option("--z", tc.Z, "number of facets")->capture_default_str();
  c_train->add_option("--alpha", train.alpha, "Dirichlet prior (default 50/Z)");
  c_train->add_option("--gamma", tc.gamma, "count smoothing")->capture_default_str();
  c_train->add_option("--sigma-lm", tc.sigma_lm, "language model volatility")->capture_default_str();
  c_train->add_option("--iters", tc.iterations, "iterations")->capture_default_str();
  c_train->add_option("--gibbs-sweeps", tc.gibbs_sweeps_per_iter)->capture_default_str();
  c_train->add_option("--mh-fraction", tc.mh_fraction, "fraction of reviews resampled per iteration")
      ->capture_default_str();
  c_train->add_option("--epoch-width", train.epoch_width, "re-bin the corpus before training");
  c_train->add_option("--min-user-reviews", train.min_user_reviews, "re-fold users below this review count");
  c_train->add_option("--seed", tc.seed)->capture_default_str();
  c_train->add_option("--s0", tc.s0, "initial experience")->capture_default_str();
  c_train->add_option("--threads", tc.threads)->capture_default_str();
  c_train->add_option("--kalman-noise", train.kalman_noise)->check(CLI::IsMember({"literal", "aligned"}))
      ->capture_default_str();
  c_train->add_option("--kalman-error", train.kalman_error)->check(CLI::IsMember({"reset", "carry"}))
      ->capture_default_str();
  c_train->add_option("--mh-scope", train.mh_scope)->check(CLI::IsMember({"active", "full"}))->capture_default_str();
  c_train->add_option("--mh-neighbors", train.mh_neighbors)->check(CLI::IsMember({"global", "user"}))
      ->capture_default_str();
  c_train->add_option("--gbm-fit", train.gbm_fit)->check(CLI::IsMember({"path", "literal"}))->capture_default_str();
  c_train->add_option("--early-stop-tol", tc.early_stop_tol, "0 disables")->capture_default_str();
  c_train->add_option("--early-stop-window", tc.early_stop_window)->capture_default_str();
  c_train->add_option("--burn-in", tc.burn_in)->capture_default_str();
  c_train->add_option("--thin", tc.thin)->capture_default_str();
  c_train->add_option("--checkpoint-every", train.checkpoint_every, "write the model every N iterations");
  c_train->add_flag("--validate", tc.validate, "check invariants after every phase");

  PredictOptions predict;
  auto* c_predict = app.add_subcommand("predict", "Rating prediction on the held-out reviews");
  c_predict->add_option("-m,--model", predict.model)->required();
  c_predict->add_option("-c,--corpus", predict.corpus)->required();
  c_predict->add_option("--predictions", predict.predictions, "default <model>.predictions.csv");
  c_predict->add_option("--metrics", predict.metrics, "default <model>.metrics.json");
  c_predict->add_option("--feature-mode", predict.feature_mode)->check(CLI::IsMember({"pi", "raw"}))
      ->capture_default_str();
  c_predict->add_option("--lambda", predict.lambda, "ridge penalty")->capture_default_str();

  RankUsersOptions rank;
  auto* c_rank = app.add_subcommand("rank-users", "Rank users by inferred experience against labels");
  c_rank->add_option("-m,--model", rank.model)->required();
  c_rank->add_option("-l,--labels", rank.labels, "JSON object or user,label CSV")->required();
  c_rank->add_option("-o,--output", rank.output, "default <model>.ranking.json");
  c_rank->add_option("--top", rank.top)->capture_default_str();

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic fixture");
  c_synth->add_option("--fixture", synth.fixture)->check(CLI::IsMember({"S1", "S2", "S3"}))->capture_default_str();
  c_synth->add_option("-o,--output", synth.output, "JSON-lines reviews")->required();
  c_synth->add_option("--truth", synth.truth, "ground truth JSON (default <output>.truth.json)");
  c_synth->add_option("--corpus-output", synth.corpus_output, "also write the corpus checkpoint");
  c_synth->add_option("--seed", synth.seed, "override the fixture seed");

  ReportOptions report;
  auto* c_report = app.add_subcommand("report", "Export report CSVs for a trained model");
  c_report->add_option("-m,--model", report.model)->required();
  c_report->add_option("-o,--output-dir", report.output_dir)->required();
  c_report->add_option("--epoch", report.epoch, "epoch for the word frequency report")->capture_default_str();
  c_report->add_option("--top-k", report.top_k)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*c_ingest) return cmd_ingest(ingest);
    if (*c_train) return cmd_train(train);
    if (*c_predict) return cmd_predict(predict);
    if (*c_rank) return cmd_rank_users(rank);
    if (*c_synth) return cmd_synth(synth);
    if (*c_report) return cmd_report(report);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kFailure;
}

}  // namespace expaware::cli
