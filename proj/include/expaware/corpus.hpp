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

// Review ingestion: JSON-lines parsing, tokenization, vocabulary, and the
// two time scales (coarse epochs for language models, fine per-user years
// for experience).

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "expaware/common.hpp"
#include "expaware/container.hpp"

namespace expaware {

inline constexpr std::string_view kBackgroundUserId = "__background__";

struct RawReview {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;  // UTC seconds
  double rating = 0.0;
  std::string text;
};

struct TokenizerConfig {
  std::unordered_set<std::string> stopwords;
  std::size_t min_len = 1;
};

/// Coarse epoch width. Years and months are calendar-aligned; days are
/// fixed 86400 s bins aligned to UTC midnight.
struct EpochWidth {
  enum class Unit { kYear, kMonth, kDay };
  std::uint32_t count = 1;
  Unit unit = Unit::kYear;

  /// Accepts "2y", "6mo", "30d"; a bare integer means years.
  static EpochWidth parse(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') ++i;
    require(i > 0, "epoch width must start with a positive integer: '" + std::string(text) + "'");
    EpochWidth w;
    w.count = static_cast<std::uint32_t>(std::stoul(std::string(text.substr(0, i))));
    require(w.count > 0, "epoch width must be positive");
    const auto unit = text.substr(i);
    if (unit.empty() || unit == "y") w.unit = Unit::kYear;
    else if (unit == "mo") w.unit = Unit::kMonth;
    else if (unit == "d") w.unit = Unit::kDay;
    else throw ArgumentError("unknown epoch width unit '" + std::string(unit) + "' (use y, mo or d)");
    return w;
  }

  std::string str() const {
    const char* suffix = unit == Unit::kYear ? "y" : unit == Unit::kMonth ? "mo" : "d";
    return std::to_string(count) + suffix;
  }

  bool operator==(const EpochWidth&) const = default;
};

struct Review {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::int64_t timestamp = 0;
  double t_fine = kEpsTime;  // years since the user's first review
  std::uint32_t epoch = 0;
  double rating = 0.0;
  std::vector<std::uint32_t> tokens;
};

struct Corpus {
  std::vector<Review> reviews;  // ascending by timestamp
  std::vector<std::string> vocabulary;
  std::vector<std::string> users;
  std::vector<std::string> items;
  std::uint32_t n_epochs = 0;
  EpochWidth epoch_width;
  std::int64_t epoch_origin = 0;
  std::optional<std::uint32_t> background_user;

  std::size_t n_users() const { return users.size(); }
  std::size_t vocab_size() const { return vocabulary.size(); }
  std::size_t n_tokens() const {
    std::size_t n = 0;
    for (const auto& r : reviews) n += r.tokens.size();
    return n;
  }
};

// ---------------------------------------------------------------------------
// Tokenization and vocabulary

namespace detail {
inline bool is_token_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '_' || c >= 0x80;
}

inline std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](unsigned char c) { return (c & 0xC0) != 0x80; }));
}
}  // namespace detail

/// Lowercases ASCII, splits on anything that is not alphanumeric, '_' or a
/// non-ASCII byte, then drops stopwords and terms shorter than min_len code
/// points. Underscores are kept so pre-joined phrases survive.
inline std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& config) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty() && detail::utf8_length(current) >= config.min_len &&
        !config.stopwords.contains(current))
      out.push_back(current);
    current.clear();
  };
  for (unsigned char c : text) {
    if (detail::is_token_byte(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

inline std::unordered_set<std::string> english_stopwords() {
  return {"a",     "about", "above", "after", "again", "against", "all",   "am",    "an",
          "and",   "any",   "are",   "as",    "at",    "be",      "been",  "before", "being",
          "below", "between", "both", "but",   "by",    "can",     "could", "did",   "do",
          "does",  "doing", "down",  "during", "each", "few",     "for",   "from",  "further",
          "had",   "has",   "have",  "having", "he",   "her",     "here",  "hers",  "herself",
          "him",   "himself", "his", "how",   "i",     "if",      "in",    "into",  "is",
          "it",    "its",   "itself", "just", "me",    "more",    "most",  "my",    "myself",
          "no",    "nor",   "not",   "now",   "of",    "off",     "on",    "once",  "only",
          "or",    "other", "our",   "ours",  "ourselves", "out", "over",  "own",   "s",
          "same",  "she",   "should", "so",   "some",  "such",    "t",     "than",  "that",
          "the",   "their", "theirs", "them", "themselves", "then", "there", "these", "they",
          "this",  "those", "through", "to",  "too",   "under",   "until", "up",    "very",
          "was",   "we",    "were",  "what",  "when",  "where",   "which", "while", "who",
          "whom",  "why",   "will",  "with",  "would", "you",     "your",  "yours", "yourself",
          "yourselves"};
}

struct Vocabulary {
  static constexpr std::uint32_t kDropped = std::numeric_limits<std::uint32_t>::max();

  std::vector<std::string> terms;
  std::unordered_map<std::string, std::uint32_t> index;

  std::uint32_t lookup(const std::string& term) const {
    auto it = index.find(term);
    return it == index.end() ? kDropped : it->second;
  }
  std::size_t size() const { return terms.size(); }
};

/// Keeps terms that occur in at least `min_df` distinct documents, indexed
/// in order of first appearance. Throws DataError if nothing survives.
inline Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& docs,
                                   std::size_t min_df) {
  require(min_df >= 1, "min_df must be >= 1");
  std::vector<std::string> order;
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& doc : docs) {
    std::unordered_set<std::string_view> seen;
    for (const auto& term : doc) {
      if (!seen.insert(term).second) continue;
      auto [it, inserted] = df.try_emplace(term, 0);
      if (inserted) order.push_back(term);
      ++it->second;
    }
  }
  Vocabulary vocab;
  for (const auto& term : order) {
    if (df[term] >= min_df) {
      vocab.index.emplace(term, static_cast<std::uint32_t>(vocab.terms.size()));
      vocab.terms.push_back(term);
    }
  }
  if (vocab.terms.empty())
    throw DataError("vocabulary is empty after min_df=" + std::to_string(min_df) + " filtering");
  return vocab;
}

// ---------------------------------------------------------------------------
// Time handling

namespace detail {

inline std::chrono::sys_days to_days(std::int64_t seconds) {
  using namespace std::chrono;
  return floor<days>(sys_seconds{seconds * 1s});
}

inline std::int64_t to_seconds(std::chrono::sys_days d) {
  return std::chrono::duration_cast<std::chrono::seconds>(d.time_since_epoch()).count();
}

inline bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  out = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    out = out * 10 + (s[i] - '0');
  }
  return true;
}

}  // namespace detail

/// Parses "YYYY-MM-DD", optionally followed by "THH:MM[:SS[.fff]]" and a
/// "Z" or "+HH:MM" offset. Returns UTC seconds; nullopt on malformed input.
inline std::optional<std::int64_t> parse_iso8601(std::string_view s) {
  using namespace std::chrono;
  int y = 0, mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
  if (!detail::parse_fixed_int(s, 0, 4, y) || s.size() < 10 || s[4] != '-' ||
      !detail::parse_fixed_int(s, 5, 2, mo) || s[7] != '-' || !detail::parse_fixed_int(s, 8, 2, d))
    return std::nullopt;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  std::size_t pos = 10;
  if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
    if (!detail::parse_fixed_int(s, pos + 1, 2, hh) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
        !detail::parse_fixed_int(s, pos + 4, 2, mm))
      return std::nullopt;
    pos += 6;
    if (pos < s.size() && s[pos] == ':') {
      if (!detail::parse_fixed_int(s, pos + 1, 2, ss)) return std::nullopt;
      pos += 3;
      if (pos < s.size() && s[pos] == '.') {
        ++pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
      }
    }
    if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  }
  std::int64_t offset = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' && pos + 1 == s.size()) {
      ++pos;
    } else if ((s[pos] == '+' || s[pos] == '-') && pos + 6 == s.size() && s[pos + 3] == ':') {
      int oh = 0, om = 0;
      if (!detail::parse_fixed_int(s, pos + 1, 2, oh) || !detail::parse_fixed_int(s, pos + 4, 2, om))
        return std::nullopt;
      offset = (oh * 3600 + om * 60) * (s[pos] == '+' ? 1 : -1);
      pos = s.size();
    } else {
      return std::nullopt;
    }
  }
  if (pos != s.size()) return std::nullopt;
  return detail::to_seconds(sys_days{ymd}) + hh * 3600 + mm * 60 + ss - offset;
}

/// Start of the bin grid: UTC midnight on Jan 1 (years), the 1st (months) or
/// the same day (days) of the earliest timestamp.
inline std::int64_t epoch_origin(std::int64_t min_timestamp, const EpochWidth& width) {
  using namespace std::chrono;
  const year_month_day ymd{detail::to_days(min_timestamp)};
  switch (width.unit) {
    case EpochWidth::Unit::kYear:
      return detail::to_seconds(sys_days{ymd.year() / January / 1});
    case EpochWidth::Unit::kMonth:
      return detail::to_seconds(sys_days{ymd.year() / ymd.month() / 1});
    case EpochWidth::Unit::kDay:
      break;
  }
  return detail::to_seconds(sys_days{ymd});
}

inline std::uint32_t epoch_index(std::int64_t timestamp, std::int64_t origin, const EpochWidth& width) {
  using namespace std::chrono;
  require(timestamp >= origin, "timestamp precedes the epoch origin");
  const year_month_day a{detail::to_days(origin)};
  const year_month_day b{detail::to_days(timestamp)};
  std::int64_t units = 0;
  switch (width.unit) {
    case EpochWidth::Unit::kYear:
      units = static_cast<int>(b.year()) - static_cast<int>(a.year());
      break;
    case EpochWidth::Unit::kMonth:
      units = (static_cast<int>(b.year()) - static_cast<int>(a.year())) * 12 +
              static_cast<int>(static_cast<unsigned>(b.month())) -
              static_cast<int>(static_cast<unsigned>(a.month()));
      break;
    case EpochWidth::Unit::kDay:
      units = (timestamp - origin) / 86400;
      break;
  }
  return static_cast<std::uint32_t>(units / width.count);
}

/// t_fine = max(eps_t, years since the user's first review).
inline void assign_fine_times(Corpus& corpus) {
  std::vector<std::optional<std::int64_t>> first(corpus.n_users());
  for (auto& r : corpus.reviews) {
    if (!first[r.user]) first[r.user] = r.timestamp;
    r.t_fine = std::max(kEpsTime, static_cast<double>(r.timestamp - *first[r.user]) / kSecondsPerYear);
  }
}

/// Assigns coarse epochs (and recomputes fine times) for a sorted corpus.
inline void bin_timestamps(Corpus& corpus, const EpochWidth& width) {
  corpus.epoch_width = width;
  corpus.n_epochs = 0;
  if (corpus.reviews.empty()) return;
  corpus.epoch_origin = epoch_origin(corpus.reviews.front().timestamp, width);
  for (auto& r : corpus.reviews) {
    r.epoch = epoch_index(r.timestamp, corpus.epoch_origin, width);
    corpus.n_epochs = std::max(corpus.n_epochs, r.epoch + 1);
  }
  assign_fine_times(corpus);
}

/// Merges every user with fewer than `min_reviews` reviews into one shared
/// background user (appended last, or the existing one if present).
inline Corpus fold_background_users(Corpus corpus, std::size_t min_reviews) {
  std::vector<std::size_t> count(corpus.n_users(), 0);
  for (const auto& r : corpus.reviews) ++count[r.user];
  std::vector<bool> fold(corpus.n_users(), false);
  bool any = false;
  for (std::size_t u = 0; u < count.size(); ++u) {
    fold[u] = count[u] < min_reviews || (corpus.background_user && *corpus.background_user == u);
    any = any || (count[u] < min_reviews);
  }
  if (!any) return corpus;

  std::vector<std::uint32_t> remap(corpus.n_users());
  std::vector<std::string> users;
  for (std::size_t u = 0; u < count.size(); ++u) {
    if (fold[u]) continue;
    remap[u] = static_cast<std::uint32_t>(users.size());
    users.push_back(corpus.users[u]);
  }
  const auto background = static_cast<std::uint32_t>(users.size());
  users.emplace_back(kBackgroundUserId);
  for (std::size_t u = 0; u < count.size(); ++u)
    if (fold[u]) remap[u] = background;
  for (auto& r : corpus.reviews) r.user = remap[r.user];
  corpus.users = std::move(users);
  corpus.background_user = background;
  assign_fine_times(corpus);
  return corpus;
}

// ---------------------------------------------------------------------------
// JSON-lines ingestion

/// Parses one review record; throws DataError naming `line_no`.
inline RawReview parse_review_line(std::string_view line, std::size_t line_no) {
  auto fail = [&](const std::string& what) -> DataError {
    return DataError("line " + std::to_string(line_no) + ": " + what);
  };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("malformed JSON (") + e.what() + ")");
  }
  if (!j.is_object()) throw fail("record is not a JSON object");
  RawReview r;
  for (const char* key : {"user_id", "item_id", "timestamp", "rating", "text"})
    if (!j.contains(key) || j[key].is_null()) throw fail(std::string("missing field '") + key + "'");
  if (!j["user_id"].is_string() || !j["item_id"].is_string() || !j["text"].is_string())
    throw fail("user_id, item_id and text must be strings");
  r.user_id = j["user_id"].get<std::string>();
  r.item_id = j["item_id"].get<std::string>();
  r.text = j["text"].get<std::string>();
  if (!j["rating"].is_number()) throw fail("rating must be a number");
  r.rating = j["rating"].get<double>();
  if (!std::isfinite(r.rating)) throw fail("rating is not finite");
  const auto& ts = j["timestamp"];
  if (ts.is_number_integer()) {
    r.timestamp = ts.get<std::int64_t>();
  } else if (ts.is_string()) {
    auto parsed = parse_iso8601(ts.get<std::string>());
    if (!parsed) throw fail("unparseable timestamp '" + ts.get<std::string>() + "'");
    r.timestamp = *parsed;
  } else {
    throw fail("timestamp must be integer epoch seconds or an ISO-8601 string");
  }
  return r;
}

struct IngestError {
  std::size_t line = 0;
  std::string message;
};

/// Reads JSON-lines records. With `continue_on_error` bad lines are
/// collected in `errors` instead of aborting. Blank lines are skipped.
inline std::vector<RawReview> read_jsonl(std::istream& in, bool continue_on_error = false,
                                         std::vector<IngestError>* errors = nullptr) {
  std::vector<RawReview> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_review_line(line, line_no));
    } catch (const DataError& e) {
      if (!continue_on_error) throw;
      if (errors) errors->push_back({line_no, e.what()});
    }
  }
  return out;
}

inline std::string review_to_json(const RawReview& r) {
  nlohmann::json j = {{"user_id", r.user_id},
                      {"item_id", r.item_id},
                      {"timestamp", r.timestamp},
                      {"rating", r.rating},
                      {"text", r.text}};
  return j.dump();
}

struct CorpusConfig {
  TokenizerConfig tokenizer;
  std::size_t min_df = 5;
  EpochWidth epoch_width;
  std::size_t min_reviews_background = 50;
};

/// Full ingestion: sort, tokenize, build the vocabulary, index users/items,
/// fold sparse users into the background user and bin timestamps.
inline Corpus build_corpus(std::vector<RawReview> raw, const CorpusConfig& config) {
  if (raw.empty()) throw DataError("no reviews to ingest");
  std::stable_sort(raw.begin(), raw.end(),
                   [](const RawReview& a, const RawReview& b) { return a.timestamp < b.timestamp; });
  std::vector<std::vector<std::string>> docs;
  docs.reserve(raw.size());
  for (const auto& r : raw) docs.push_back(tokenize(r.text, config.tokenizer));
  Vocabulary vocab = build_vocabulary(docs, config.min_df);

  Corpus corpus;
  std::unordered_map<std::string, std::uint32_t> users, items;
  auto intern = [](std::unordered_map<std::string, std::uint32_t>& map,
                   std::vector<std::string>& names, const std::string& id) {
    auto [it, inserted] = map.try_emplace(id, static_cast<std::uint32_t>(names.size()));
    if (inserted) names.push_back(id);
    return it->second;
  };
  corpus.reviews.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    Review r;
    r.user = intern(users, corpus.users, raw[i].user_id);
    r.item = intern(items, corpus.items, raw[i].item_id);
    r.timestamp = raw[i].timestamp;
    r.rating = raw[i].rating;
    for (const auto& term : docs[i]) {
      const auto w = vocab.lookup(term);
      if (w != Vocabulary::kDropped) r.tokens.push_back(w);
    }
    corpus.reviews.push_back(std::move(r));
  }
  corpus.vocabulary = std::move(vocab.terms);
  corpus = fold_background_users(std::move(corpus), config.min_reviews_background);
  bin_timestamps(corpus, config.epoch_width);
  return corpus;
}

struct CorpusStats {
  std::size_t users = 0;  // excluding the background user
  std::size_t background_user_reviews = 0;
  std::size_t items = 0;
  std::size_t ratings = 0;
  std::size_t epochs = 0;
  std::size_t vocabulary = 0;
  std::size_t tokens = 0;
  double years = 0.0;

  nlohmann::json to_json() const {
    return {{"users", users},       {"background_user_reviews", background_user_reviews},
            {"items", items},       {"ratings", ratings},
            {"epochs", epochs},     {"vocabulary", vocabulary},
            {"tokens", tokens},     {"years", years}};
  }
};

inline CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  std::set<std::uint32_t> users, items;
  for (const auto& r : corpus.reviews) {
    if (corpus.background_user && r.user == *corpus.background_user) ++s.background_user_reviews;
    else users.insert(r.user);
    items.insert(r.item);
    s.tokens += r.tokens.size();
  }
  s.users = users.size();
  s.items = items.size();
  s.ratings = corpus.reviews.size();
  s.epochs = corpus.n_epochs;
  s.vocabulary = corpus.vocab_size();
  if (!corpus.reviews.empty())
    s.years = static_cast<double>(corpus.reviews.back().timestamp - corpus.reviews.front().timestamp) /
              kSecondsPerYear;
  return s;
}

// ---------------------------------------------------------------------------
// Checkpoint

inline constexpr std::uint32_t kCorpusVersion = 1;

inline void write_corpus_sections(ContainerWriter& out, const Corpus& corpus) {
  const std::size_t n = corpus.reviews.size();
  std::vector<std::uint32_t> user(n), item(n), epoch(n), tokens;
  std::vector<std::int64_t> timestamp(n), offsets(n + 1, 0);
  std::vector<double> t_fine(n), rating(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = corpus.reviews[i];
    user[i] = r.user;
    item[i] = r.item;
    epoch[i] = r.epoch;
    timestamp[i] = r.timestamp;
    t_fine[i] = r.t_fine;
    rating[i] = r.rating;
    tokens.insert(tokens.end(), r.tokens.begin(), r.tokens.end());
    offsets[i + 1] = static_cast<std::int64_t>(tokens.size());
  }
  out.add("corpus.user", user);
  out.add("corpus.item", item);
  out.add("corpus.timestamp", timestamp);
  out.add("corpus.t_fine", t_fine);
  out.add("corpus.epoch", epoch);
  out.add("corpus.rating", rating);
  out.add("corpus.token_offsets", offsets);
  out.add("corpus.tokens", tokens);
}

inline nlohmann::json corpus_meta(const Corpus& corpus) {
  return {{"vocabulary", corpus.vocabulary},
          {"users", corpus.users},
          {"items", corpus.items},
          {"n_epochs", corpus.n_epochs},
          {"epoch_width", corpus.epoch_width.str()},
          {"epoch_origin", corpus.epoch_origin},
          {"background_user", corpus.background_user ? nlohmann::json(*corpus.background_user)
                                                     : nlohmann::json(nullptr)}};
}

inline Corpus read_corpus_sections(const Container& in, const nlohmann::json& meta) {
  Corpus c;
  c.vocabulary = meta.at("vocabulary").get<std::vector<std::string>>();
  c.users = meta.at("users").get<std::vector<std::string>>();
  c.items = meta.at("items").get<std::vector<std::string>>();
  c.n_epochs = meta.at("n_epochs").get<std::uint32_t>();
  c.epoch_width = EpochWidth::parse(meta.at("epoch_width").get<std::string>());
  c.epoch_origin = meta.at("epoch_origin").get<std::int64_t>();
  if (!meta.at("background_user").is_null())
    c.background_user = meta.at("background_user").get<std::uint32_t>();
  const auto user = in.get<std::uint32_t>("corpus.user");
  const auto item = in.get<std::uint32_t>("corpus.item");
  const auto timestamp = in.get<std::int64_t>("corpus.timestamp");
  const auto t_fine = in.get<double>("corpus.t_fine");
  const auto epoch = in.get<std::uint32_t>("corpus.epoch");
  const auto rating = in.get<double>("corpus.rating");
  const auto offsets = in.get<std::int64_t>("corpus.token_offsets");
  const auto tokens = in.get<std::uint32_t>("corpus.tokens");
  const std::size_t n = user.size();
  if (offsets.size() != n + 1 || item.size() != n || timestamp.size() != n || t_fine.size() != n ||
      epoch.size() != n || rating.size() != n)
    throw VersionError("corpus sections have inconsistent lengths");
  c.reviews.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = c.reviews[i];
    r.user = user[i];
    r.item = item[i];
    r.timestamp = timestamp[i];
    r.t_fine = t_fine[i];
    r.epoch = epoch[i];
    r.rating = rating[i];
    r.tokens.assign(tokens.begin() + offsets[i], tokens.begin() + offsets[i + 1]);
  }
  return c;
}

inline std::string serialize_corpus(const Corpus& corpus) {
  ContainerWriter out("corpus", kCorpusVersion);
  out.meta() = corpus_meta(corpus);
  write_corpus_sections(out, corpus);
  return out.bytes();
}

inline Corpus deserialize_corpus(std::string_view bytes) {
  Container in(bytes, "corpus", kCorpusVersion);
  return read_corpus_sections(in, in.meta());
}

/// Identity hash used to tie a model to the corpus it was trained from.
inline std::string corpus_fingerprint(const Corpus& corpus) {
  return hex64(fnv1a64(serialize_corpus(corpus)));
}

}  // namespace expaware
