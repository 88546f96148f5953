#pragma once

// Scoring backends map premise/hypothesis pairs to entailment logits.
//
// Score files (replay and recording) are JSON:
//   {"scores": {"<sha256 hex of pair>": {"entailment": 1.5, "not_entailment": -0.5}, ...}}
// The pair digest is SHA-256 over: premise length as 8 bytes little-endian,
// premise bytes, hypothesis bytes.

#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <openssl/evp.h>

#include "core.hpp"
#include "rng.hpp"

namespace entail {

struct TextPair {
  std::string premise;
  std::string hypothesis;

  friend bool operator==(const TextPair&, const TextPair&) = default;
  friend auto operator<=>(const TextPair&, const TextPair&) = default;
};

struct BackendCaps {
  std::size_t max_batch_size = 0;  // 0 = unlimited
  bool concurrent = true;          // false: the engine sends one batch at a time
};

class ScoringBackend {
 public:
  virtual ~ScoringBackend() = default;
  // One score per pair, index-aligned.
  virtual std::vector<PairScore> score(std::span<const TextPair> pairs) = 0;
  virtual BackendCaps caps() const { return {}; }
  virtual std::string identity() const = 0;
};

inline std::string describe_pair(const TextPair& p) {
  return "(premise \"" + p.premise + "\", hypothesis \"" + p.hypothesis + "\")";
}

inline std::string pair_digest(std::string_view premise, std::string_view hypothesis) {
  std::array<unsigned char, 8> len{};
  auto n = static_cast<std::uint64_t>(premise.size());
  for (auto& b : len) {
    b = static_cast<unsigned char>(n & 0xff);
    n >>= 8;
  }
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int md_len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), len.data(), len.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), premise.data(), premise.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), hypothesis.data(), hypothesis.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &md_len) != 1)
    throw Error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * md_len);
  for (unsigned int i = 0; i < md_len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

inline std::string pair_digest(const TextPair& p) { return pair_digest(p.premise, p.hypothesis); }

// True when `word` occurs in `text` delimited by non-alphanumeric characters
// or the string ends.
inline bool contains_word(std::string_view text, std::string_view word) {
  if (word.empty()) return false;
  auto is_word_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  for (auto pos = text.find(word); pos != std::string_view::npos; pos = text.find(word, pos + 1)) {
    const bool left = pos == 0 || !is_word_char(text[pos - 1]);
    const auto end = pos + word.size();
    const bool right = end == text.size() || !is_word_char(text[end]);
    if (left && right) return true;
  }
  return false;
}

// --- mock --------------------------------------------------------------------

enum class MockMode {
  hash,      // logits derived from a stable hash of the pair
  table,     // explicit lookup; a miss is an error
  planted,   // entailment high iff the hypothesis names the text's true label
  inverted,  // planted, with the logits swapped
};

struct MockSpec {
  MockMode mode = MockMode::hash;
  std::map<TextPair, PairScore> table;
  std::map<std::string, std::string> truth;  // premise -> true label word
  double margin = 4.0;                       // |logit| used by planted modes
};

class MockBackend final : public ScoringBackend {
 public:
  explicit MockBackend(MockSpec spec) : spec_(std::move(spec)) {}

  std::vector<PairScore> score(std::span<const TextPair> pairs) override {
    std::vector<PairScore> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(score_one(p));
    return out;
  }

  std::string identity() const override {
    switch (spec_.mode) {
      case MockMode::hash: return "mock:hash";
      case MockMode::table: return "mock:table";
      case MockMode::planted: return "mock:planted";
      case MockMode::inverted: return "mock:inverted";
    }
    return "mock";
  }

 private:
  PairScore score_one(const TextPair& p) const {
    switch (spec_.mode) {
      case MockMode::hash: {
        const auto h = splitmix64(fnv1a64(p.premise) ^ splitmix64(fnv1a64(p.hypothesis)));
        auto unit = [](std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; };
        return {unit(h) * 10.0 - 5.0, unit(splitmix64(h)) * 10.0 - 5.0};
      }
      case MockMode::table: {
        auto it = spec_.table.find(p);
        if (it == spec_.table.end()) throw DataError("mock table has no score for " + describe_pair(p));
        return it->second;
      }
      case MockMode::planted:
      case MockMode::inverted: {
        auto it = spec_.truth.find(p.premise);
        if (it == spec_.truth.end()) throw DataError("planted mock has no truth for " + describe_pair(p));
        bool match = contains_word(p.hypothesis, it->second);
        if (spec_.mode == MockMode::inverted) match = !match;
        return match ? PairScore{spec_.margin, -spec_.margin} : PairScore{-spec_.margin, spec_.margin};
      }
    }
    throw Error("unreachable");
  }

  MockSpec spec_;
};

// Planted-truth spec from a labeled dataset: each text's true label word is
// its label_text.
inline MockSpec planted_spec(const LabeledDataset& ds, MockMode mode = MockMode::planted) {
  MockSpec spec;
  spec.mode = mode;
  for (const auto& ex : ds.examples) spec.truth[ex.text] = ex.label_text;
  return spec;
}

// --- score files -------------------------------------------------------------

using ScoreTable = std::map<std::string, PairScore>;  // digest -> score

inline ScoreTable score_table_from_json(const json& j) {
  ScoreTable table;
  try {
    for (const auto& [digest, s] : j.at("scores").items())
      table[digest] = {s.at("entailment").get<double>(), s.at("not_entailment").get<double>()};
  } catch (const json::exception& e) {
    throw DataError(std::string("score file: ") + e.what());
  }
  return table;
}

inline ordered_json score_table_to_json(const ScoreTable& table) {
  ordered_json j;
  j["scores"] = ordered_json::object();
  for (const auto& [digest, s] : table)
    j["scores"][digest] = {{"entailment", s.entailment_logit}, {"not_entailment", s.not_entailment_logit}};
  return j;
}

// Replays scores recorded earlier, keyed by pair digest.
class FileBackend final : public ScoringBackend {
 public:
  explicit FileBackend(ScoreTable table, std::string source = "memory")
      : table_(std::move(table)), source_(std::move(source)) {}

  static FileBackend load(const std::filesystem::path& path) {
    try {
      return FileBackend(score_table_from_json(read_json_file(path)), path.string());
    } catch (const DataError& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }

  std::vector<PairScore> score(std::span<const TextPair> pairs) override {
    std::vector<PairScore> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
      auto it = table_.find(pair_digest(p));
      if (it == table_.end()) throw DataError("score file " + source_ + " has no entry for " + describe_pair(p));
      out.push_back(it->second);
    }
    return out;
  }

  std::string identity() const override { return "file:" + source_; }

 private:
  ScoreTable table_;
  std::string source_;
};

// Forwards to another backend and keeps every score it sees, so a session can
// be replayed later through FileBackend.
class RecordingBackend final : public ScoringBackend {
 public:
  explicit RecordingBackend(std::shared_ptr<ScoringBackend> inner) : inner_(std::move(inner)) {}

  std::vector<PairScore> score(std::span<const TextPair> pairs) override {
    auto scores = inner_->score(pairs);
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < pairs.size() && i < scores.size(); ++i) recorded_[pair_digest(pairs[i])] = scores[i];
    return scores;
  }

  BackendCaps caps() const override { return inner_->caps(); }
  std::string identity() const override { return inner_->identity(); }

  ScoreTable recorded() const {
    std::lock_guard lock(mutex_);
    return recorded_;
  }

  void save(const std::filesystem::path& path) const { write_json_file(score_table_to_json(recorded()), path); }

 private:
  std::shared_ptr<ScoringBackend> inner_;
  mutable std::mutex mutex_;
  ScoreTable recorded_;
};

// Scores pairs in chunks of the backend's max batch size. Batches run on a
// small worker pool when the backend allows concurrency; each batch writes its
// own slice of the output, so results never depend on scheduling.
inline std::vector<PairScore> score_pairs(ScoringBackend& backend, std::span<const TextPair> pairs,
                                          std::size_t batch_size_override = 0) {
  const auto caps = backend.caps();
  std::size_t batch = batch_size_override ? batch_size_override : caps.max_batch_size;
  if (batch == 0 || batch > pairs.size()) batch = std::max<std::size_t>(pairs.size(), 1);
  const std::size_t batches = (pairs.size() + batch - 1) / batch;

  std::vector<PairScore> out(pairs.size());
  auto run = [&](std::size_t b) {
    const auto begin = b * batch;
    const auto len = std::min(batch, pairs.size() - begin);
    auto part = backend.score(pairs.subspan(begin, len));
    if (part.size() != len)
      throw LengthMismatchError("backend " + backend.identity() + " returned " + std::to_string(part.size()) +
                                " scores for " + std::to_string(len) + " pairs");
    for (std::size_t i = 0; i < len; ++i) {
      const auto& s = part[i];
      if (!std::isfinite(s.entailment_logit) || !std::isfinite(s.not_entailment_logit))
        throw DataError("non-finite logits for " + describe_pair(pairs[begin + i]));
      out[begin + i] = s;
    }
  };

  const auto workers = caps.concurrent
                           ? std::min<std::size_t>(batches, std::max(1u, std::thread::hardware_concurrency()))
                           : std::size_t{1};
  if (workers <= 1) {
    for (std::size_t b = 0; b < batches; ++b) run(b);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w)
    jobs.push_back(std::async(std::launch::async, [&] {
      for (auto b = next++; b < batches; b = next++) run(b);
    }));
  std::exception_ptr first_error;
  for (auto& j : jobs) {
    try {
      j.get();
    } catch (...) {
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

}  // namespace entail
