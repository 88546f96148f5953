#pragma once

#include <cctype>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "rng.hpp"

namespace entail {

// n x d, one row per text.
using FeatureMatrix = Eigen::MatrixXd;

// Lowercased words. A word is a maximal run of ASCII letters/digits or
// non-ASCII bytes (so UTF-8 words stay whole); only ASCII is case-folded.
inline std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    const bool word = (c >= 0x80) || std::isalnum(c);
    if (word) {
      cur += (c < 0x80) ? static_cast<char>(std::tolower(c)) : static_cast<char>(c);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual FeatureMatrix embed(const std::vector<std::string>& texts) const = 0;
  virtual std::string identity() const = 0;
};

// Hashed TF-IDF. Feature index = fnv1a64(token) mod dims; tf = 1 + ln(count);
// idf = ln((1 + n) / (1 + df)) + 1 with df counted over the embedded batch;
// rows L2-normalized (rows without tokens stay zero).
class HashedTfidfEmbedder final : public Embedder {
 public:
  explicit HashedTfidfEmbedder(std::size_t dims = 256) : dims_(dims) {
    if (dims_ == 0) throw UsageError("embedding dimension must be positive");
  }

  std::size_t dims() const { return dims_; }

  std::size_t feature_index(std::string_view token) const {
    return static_cast<std::size_t>(fnv1a64(token) % dims_);
  }

  FeatureMatrix embed(const std::vector<std::string>& texts) const override {
    if (texts.empty()) throw UsageError("embed: no texts");
    const auto n = static_cast<Eigen::Index>(texts.size());
    const auto d = static_cast<Eigen::Index>(dims_);
    FeatureMatrix counts = FeatureMatrix::Zero(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
      for (const auto& tok : tokenize_words(texts[static_cast<std::size_t>(i)]))
        counts(i, static_cast<Eigen::Index>(feature_index(tok))) += 1.0;

    Eigen::VectorXd idf(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double df = static_cast<double>((counts.col(j).array() > 0.0).count());
      idf(j) = std::log((1.0 + static_cast<double>(n)) / (1.0 + df)) + 1.0;
    }

    FeatureMatrix out = FeatureMatrix::Zero(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j)
        if (counts(i, j) > 0.0) out(i, j) = (1.0 + std::log(counts(i, j))) * idf(j);
      const double norm = out.row(i).norm();
      if (norm > 0.0) out.row(i) /= norm;
    }
    return out;
  }

  std::string identity() const override { return "hashed-tfidf/" + std::to_string(dims_); }

 private:
  std::size_t dims_;
};

}  // namespace entail
