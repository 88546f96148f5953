#pragma once

// Label-noise detection with confident learning, and dataset downsampling.
//
// Out-of-fold class probabilities come from a softmax regression over text
// embeddings. An example is flagged when its confidently-assigned class (the
// most probable class among those whose probability reaches that class's
// average self-confidence) differs from its given label.

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core.hpp"
#include "features.hpp"
#include "logistic.hpp"
#include "rng.hpp"

namespace entail {

// n x K; row i holds out-of-fold class probabilities for example i.
using ProbabilityMatrix = Eigen::MatrixXd;

// --- out-of-fold probabilities ----------------------------------------------

struct OutOfFoldResult {
  ProbabilityMatrix probs;        // one row per entry of `rows`
  std::vector<std::size_t> rows;  // source index of each probability row
  std::vector<std::size_t> excluded;  // singleton-class examples, not scored
  int folds = 0;
  std::vector<std::string> warnings;
};

struct OutOfFoldOptions {
  int folds = 5;
  std::uint64_t seed = 0;
  LogisticOptions logistic{};
};

// Stratified fold id per example (-1 for excluded singletons). Within each
// class, member indices are shuffled and dealt round-robin; the dealer
// position carries over between classes so fold sizes stay balanced.
inline std::vector<int> stratified_folds(std::span<const int> labels, int num_classes, int folds, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) members.at(static_cast<std::size_t>(labels[i])).push_back(i);
  std::vector<int> fold(labels.size(), -1);
  Rng rng(seed);
  std::size_t dealer = 0;
  for (auto& idx : members) {
    if (idx.size() < 2) continue;
    rng.shuffle(std::span(idx));
    for (auto i : idx) fold[i] = static_cast<int>(dealer++ % static_cast<std::size_t>(folds));
  }
  return fold;
}

inline OutOfFoldResult out_of_fold_probs(const FeatureMatrix& features, std::span<const int> labels, int num_classes,
                                         const OutOfFoldOptions& opt = {}) {
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw UsageError("out_of_fold_probs: feature rows and labels differ in length");
  if (opt.folds < 2) throw UsageError("out_of_fold_probs: need at least 2 folds");

  OutOfFoldResult out;
  std::vector<std::size_t> sizes(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) ++sizes.at(static_cast<std::size_t>(y));

  std::size_t smallest = std::numeric_limits<std::size_t>::max();
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (sizes[c] == 1) out.warnings.push_back("class " + std::to_string(c) + " has one example; excluded from cleaning");
    if (sizes[c] >= 2) smallest = std::min(smallest, sizes[c]);
  }
  out.folds = opt.folds;
  if (smallest != std::numeric_limits<std::size_t>::max() && smallest < static_cast<std::size_t>(opt.folds)) {
    out.folds = static_cast<int>(std::max<std::size_t>(2, smallest));
    out.warnings.push_back("smallest class has " + std::to_string(smallest) + " examples; using " +
                           std::to_string(out.folds) + " folds");
  }

  const auto fold = stratified_folds(labels, num_classes, out.folds, opt.seed);
  for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] < 0 ? out.excluded : out.rows).push_back(i);

  ProbabilityMatrix full = ProbabilityMatrix::Zero(features.rows(), num_classes);
  if (out.rows.empty()) {
    out.probs.resize(0, num_classes);
    return out;
  }

  // Folds train independently; each writes only its own held-out rows.
  auto run_fold = [&](int f) {
    std::vector<Eigen::Index> train, held;
    std::vector<int> train_labels;
    for (std::size_t i = 0; i < fold.size(); ++i) {
      if (fold[i] < 0) continue;
      if (fold[i] == f) {
        held.push_back(static_cast<Eigen::Index>(i));
      } else {
        train.push_back(static_cast<Eigen::Index>(i));
        train_labels.push_back(labels[i]);
      }
    }
    if (held.empty()) return;
    const FeatureMatrix x_train = features(train, Eigen::all);
    const auto model = fit_logistic(x_train, train_labels, num_classes, opt.logistic);
    const Eigen::MatrixXd p = model.predict_proba(features(held, Eigen::all));
    for (std::size_t r = 0; r < held.size(); ++r) full.row(held[r]) = p.row(static_cast<Eigen::Index>(r));
  };
  std::vector<std::future<void>> jobs;
  for (int f = 0; f < out.folds; ++f) jobs.push_back(std::async(std::launch::async, run_fold, f));
  for (auto& j : jobs) j.get();

  out.probs.resize(static_cast<Eigen::Index>(out.rows.size()), num_classes);
  for (std::size_t r = 0; r < out.rows.size(); ++r)
    out.probs.row(static_cast<Eigen::Index>(r)) = full.row(static_cast<Eigen::Index>(out.rows[r]));
  for (Eigen::Index r = 0; r < out.probs.rows(); ++r)
    if (std::abs(out.probs.row(r).sum() - 1.0) > 1e-9) throw DataError("out_of_fold_probs: row does not sum to 1");
  return out;
}

// --- confident learning -----------------------------------------------------

struct FlaggedExample {
  std::size_t index = 0;
  int given_label = 0;
  int suggested_label = 0;
  double self_confidence = 0.0;

  friend bool operator==(const FlaggedExample&, const FlaggedExample&) = default;
};

struct CleaningReport {
  std::vector<double> thresholds;
  std::vector<std::vector<long>> confident_joint;  // [given][assigned]
  std::vector<FlaggedExample> flagged;             // ascending self-confidence
  std::size_t issues_before_cap = 0;
  std::vector<double> removed_fraction_per_class;
  std::vector<std::size_t> excluded;
  int folds = 0;
  bool skipped = false;
  std::vector<std::string> warnings;

  ordered_json to_json() const {
    ordered_json j;
    j["skipped"] = skipped;
    j["folds"] = folds;
    ordered_json t = ordered_json::array();
    for (double v : thresholds) {
      if (std::isfinite(v)) t.push_back(v);
      else t.push_back(nullptr);  // class without members
    }
    j["thresholds"] = t;
    j["confident_joint"] = confident_joint;
    j["issues_before_cap"] = issues_before_cap;
    j["flagged"] = ordered_json::array();
    for (const auto& f : flagged)
      j["flagged"].push_back({{"index", f.index},
                              {"given_label", f.given_label},
                              {"suggested_label", f.suggested_label},
                              {"self_confidence", f.self_confidence}});
    j["removed_fraction_per_class"] = removed_fraction_per_class;
    j["excluded"] = excluded;
    j["warnings"] = warnings;
    return j;
  }
};

// Row indices of `probs` are reported as-is; callers map them back to dataset
// indices when the matrix covers a subset.
inline CleaningReport find_label_issues(const ProbabilityMatrix& probs, std::span<const int> labels,
                                        double max_removal_fraction_per_class = 0.5) {
  const auto n = static_cast<std::size_t>(probs.rows());
  const auto k = static_cast<int>(probs.cols());
  if (k < 2) throw DataError("find_label_issues: cleaning needs at least 2 classes");
  if (labels.size() != n) throw UsageError("find_label_issues: labels and probability rows differ in length");
  for (int y : labels)
    if (y < 0 || y >= k) throw UsageError("find_label_issues: label " + std::to_string(y) + " out of range");

  CleaningReport rep;
  const auto ku = static_cast<std::size_t>(k);
  std::vector<std::size_t> size(ku, 0);
  std::vector<double> sum(ku, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    ++size[y];
    sum[y] += probs(static_cast<Eigen::Index>(i), labels[i]);
  }
  rep.thresholds.resize(ku);
  for (std::size_t j = 0; j < ku; ++j)
    rep.thresholds[j] = size[j] ? sum[j] / static_cast<double>(size[j]) : std::numeric_limits<double>::infinity();

  rep.confident_joint.assign(ku, std::vector<long>(ku, 0));
  std::vector<FlaggedExample> issues;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = probs.row(static_cast<Eigen::Index>(i));
    int assigned = -1;
    for (int j = 0; j < k; ++j) {
      if (row(j) >= rep.thresholds[static_cast<std::size_t>(j)] && (assigned < 0 || row(j) > row(assigned)))
        assigned = j;
    }
    if (assigned < 0) continue;
    ++rep.confident_joint[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(assigned)];
    if (assigned != labels[i]) issues.push_back({i, labels[i], assigned, row(labels[i])});
  }
  rep.issues_before_cap = issues.size();
  std::stable_sort(issues.begin(), issues.end(),
                   [](const auto& a, const auto& b) { return a.self_confidence < b.self_confidence; });

  std::vector<std::size_t> taken(ku, 0);
  for (const auto& f : issues) {
    const auto y = static_cast<std::size_t>(f.given_label);
    const auto cap = static_cast<std::size_t>(std::floor(max_removal_fraction_per_class * static_cast<double>(size[y])));
    if (taken[y] >= cap) continue;
    ++taken[y];
    rep.flagged.push_back(f);
  }
  rep.removed_fraction_per_class.resize(ku);
  for (std::size_t j = 0; j < ku; ++j)
    rep.removed_fraction_per_class[j] = size[j] ? static_cast<double>(taken[j]) / static_cast<double>(size[j]) : 0.0;
  return rep;
}

struct CleanConfig {
  bool skip = false;  // complex tasks (e.g. NLI) opt out of cleaning
  int folds = 5;
  double max_removal_fraction_per_class = 0.5;
  LogisticOptions logistic{};
  std::uint64_t seed = 0;
  std::shared_ptr<const Embedder> embedder;  // hashed TF-IDF when null
};

struct CleanResult {
  LabeledDataset cleaned;
  CleaningReport report;
};

// embed -> out-of-fold probabilities -> find_label_issues -> drop flagged.
// Flagged and excluded indices in the report refer to positions in `ds`.
inline CleanResult clean(const LabeledDataset& ds, const CleanConfig& cfg) {
  if (cfg.skip) {
    CleanResult r{ds, {}};
    r.report.skipped = true;
    return r;
  }
  if (ds.num_classes() < 2) throw DataError("clean: dataset \"" + ds.dataset_id + "\" has fewer than 2 classes");
  if (ds.examples.empty()) return {ds, {}};

  const auto embedder = cfg.embedder ? cfg.embedder : std::make_shared<const HashedTfidfEmbedder>();
  const FeatureMatrix features = embedder->embed(ds.texts());
  const auto labels = ds.labels();
  const auto k = static_cast<int>(ds.num_classes());

  const auto oof = out_of_fold_probs(features, labels, k, {cfg.folds, cfg.seed, cfg.logistic});
  std::vector<int> scored_labels;
  for (auto i : oof.rows) scored_labels.push_back(labels[i]);

  CleaningReport rep;
  if (oof.rows.empty()) {
    rep.thresholds.assign(static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
    rep.confident_joint.assign(static_cast<std::size_t>(k), std::vector<long>(static_cast<std::size_t>(k), 0));
    rep.removed_fraction_per_class.assign(static_cast<std::size_t>(k), 0.0);
  } else {
    rep = find_label_issues(oof.probs, scored_labels, cfg.max_removal_fraction_per_class);
  }
  for (auto& f : rep.flagged) f.index = oof.rows[f.index];
  rep.excluded = oof.excluded;
  rep.folds = oof.folds;
  rep.warnings = oof.warnings;

  std::vector<bool> drop(ds.examples.size(), false);
  for (const auto& f : rep.flagged) drop[f.index] = true;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ds.examples.size(); ++i)
    if (!drop[i]) keep.push_back(i);
  return {ds.subset(keep), std::move(rep)};
}

// --- downsampling -----------------------------------------------------------

// Largest-remainder apportionment of `total` seats proportional to `sizes`.
// Ties in the remainder go to the lower index.
inline std::vector<std::size_t> largest_remainder(const std::vector<std::size_t>& sizes, std::size_t total) {
  const auto sum = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  std::vector<std::size_t> quota(sizes.size(), 0);
  if (sum == 0) return quota;
  std::vector<std::pair<double, std::size_t>> frac;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    // Exact integer floor; the remainder ranks the leftover seats.
    const auto num = static_cast<unsigned __int128>(total) * sizes[c];
    quota[c] = static_cast<std::size_t>(num / sum);
    frac.emplace_back(static_cast<double>(static_cast<std::size_t>(num % sum)) / static_cast<double>(sum), c);
    assigned += quota[c];
  }
  std::stable_sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total && r < frac.size(); ++r, ++assigned) ++quota[frac[r].second];
  return quota;
}

// Uniform sampling without replacement down to per_class_cap per class, then a
// proportional cut to exactly per_dataset_cap if the total still exceeds it.
// Selected examples keep their input order.
inline LabeledDataset downsample(const LabeledDataset& ds, std::size_t per_class_cap = 500,
                                 std::size_t per_dataset_cap = 5000, std::uint64_t seed = 0) {
  if (per_class_cap < 1 || per_dataset_cap < 1) throw UsageError("downsample: caps must be >= 1");
  std::vector<std::vector<std::size_t>> members(ds.num_classes());
  for (std::size_t i = 0; i < ds.examples.size(); ++i)
    members.at(static_cast<std::size_t>(ds.examples[i].label_standard)).push_back(i);

  Rng rng(seed);
  std::vector<std::size_t> sizes;
  for (auto& idx : members) {
    rng.shuffle(std::span(idx));
    if (idx.size() > per_class_cap) idx.resize(per_class_cap);
    sizes.push_back(idx.size());
  }
  const auto total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (total > per_dataset_cap) {
    const auto quota = largest_remainder(sizes, per_dataset_cap);
    for (std::size_t c = 0; c < members.size(); ++c) members[c].resize(quota[c]);
  }
  std::vector<std::size_t> keep;
  for (const auto& idx : members) keep.insert(keep.end(), idx.begin(), idx.end());
  std::sort(keep.begin(), keep.end());
  return ds.subset(keep);
}

}  // namespace entail
