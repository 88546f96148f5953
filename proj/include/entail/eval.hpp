#pragma once

// Metrics over multiplied NLI test sets, held-out run planning and
// cross-run aggregation.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "backend.hpp"
#include "core.hpp"
#include "nli_formatter.hpp"
#include "verbalizer.hpp"

namespace entail {

struct EvalReport {
  std::string dataset_id;
  std::string run_id;  // empty when not part of a planned run
  std::size_t n_texts = 0;
  std::size_t num_classes = 0;
  double balanced_accuracy = 0.0;
  double accuracy = 0.0;
  double f1_macro = 0.0;
  std::vector<double> per_class_recall;  // 0 for classes without support
  std::vector<int> zero_support_classes;  // left out of balanced accuracy
  std::vector<std::vector<long>> confusion;  // [true][predicted]

  ordered_json to_json() const {
    ordered_json j;
    j["dataset_id"] = dataset_id;
    if (!run_id.empty()) j["run_id"] = run_id;
    j["n_texts"] = n_texts;
    j["K"] = num_classes;
    j["balanced_accuracy"] = balanced_accuracy;
    j["accuracy"] = accuracy;
    j["f1_macro"] = f1_macro;
    j["per_class_recall"] = per_class_recall;
    j["zero_support_classes"] = zero_support_classes;
    j["confusion"] = confusion;
    return j;
  }

  static EvalReport from_json(const json& j) {
    EvalReport r;
    try {
      r.dataset_id = j.at("dataset_id").get<std::string>();
      r.run_id = j.value("run_id", std::string());
      r.n_texts = j.at("n_texts").get<std::size_t>();
      r.num_classes = j.at("K").get<std::size_t>();
      r.balanced_accuracy = j.at("balanced_accuracy").get<double>();
      r.accuracy = j.at("accuracy").get<double>();
      r.f1_macro = j.at("f1_macro").get<double>();
      r.per_class_recall = j.at("per_class_recall").get<std::vector<double>>();
      r.zero_support_classes = j.value("zero_support_classes", std::vector<int>{});
      r.confusion = j.at("confusion").get<std::vector<std::vector<long>>>();
    } catch (const json::exception& e) {
      throw DataError(std::string("eval report: ") + e.what());
    }
    return r;
  }
};

// Regroups the K rows of every text by origin_text_id. The predicted class is
// the row with the largest entailment logit (lowest class on ties); the true
// class is the row labeled entailment. `num_classes` defaults to the largest
// origin_class + 1.
inline EvalReport compute_metrics_nli_binary(const NLIDataset& test, std::span<const PairScore> scores,
                                             std::string dataset_id = {}, std::optional<std::size_t> num_classes = {}) {
  if (test.size() != scores.size())
    throw DataError("compute_metrics_nli_binary: " + std::to_string(test.size()) + " records but " +
                    std::to_string(scores.size()) + " scores");
  if (test.empty()) throw DataError("compute_metrics_nli_binary: empty test set");

  struct TextRows {
    std::set<int> classes;
    int truth = -1;
    int entailment_rows = 0;
    int best_class = -1;
    double best_logit = 0.0;
  };
  std::map<long, TextRows> texts;
  int max_class = -1;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& r = test[i];
    if (r.origin_text_id < 0 || r.origin_class < 0)
      throw DataError("record " + std::to_string(i) + " has no origin text/class; not a formatted test set");
    auto& t = texts[r.origin_text_id];
    if (!t.classes.insert(r.origin_class).second)
      throw DataError("text " + std::to_string(r.origin_text_id) + " has two rows for class " +
                      std::to_string(r.origin_class));
    if (r.label == kEntailment) {
      ++t.entailment_rows;
      t.truth = r.origin_class;
    }
    const double e = scores[i].entailment_logit;
    if (t.best_class < 0 || e > t.best_logit || (e == t.best_logit && r.origin_class < t.best_class)) {
      t.best_class = r.origin_class;
      t.best_logit = e;
    }
    max_class = std::max(max_class, r.origin_class);
  }

  EvalReport rep;
  rep.dataset_id = std::move(dataset_id);
  rep.n_texts = texts.size();
  rep.num_classes = num_classes.value_or(static_cast<std::size_t>(max_class + 1));
  if (static_cast<std::size_t>(max_class) >= rep.num_classes)
    throw DataError("origin_class " + std::to_string(max_class) + " exceeds the class count");
  const auto k = rep.num_classes;
  rep.confusion.assign(k, std::vector<long>(k, 0));
  for (const auto& [id, t] : texts) {
    if (t.entailment_rows != 1)
      throw DataError("malformed test set: text " + std::to_string(id) + " has " + std::to_string(t.entailment_rows) +
                      " entailment rows (expected 1)");
    ++rep.confusion[static_cast<std::size_t>(t.truth)][static_cast<std::size_t>(t.best_class)];
  }

  long correct = 0;
  double recall_sum = 0.0, f1_sum = 0.0;
  std::size_t recall_n = 0, f1_n = 0;
  rep.per_class_recall.assign(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    long support = 0, predicted = 0;
    for (std::size_t o = 0; o < k; ++o) {
      support += rep.confusion[c][o];
      predicted += rep.confusion[o][c];
    }
    const long tp = rep.confusion[c][c];
    correct += tp;
    if (support > 0) {
      rep.per_class_recall[c] = static_cast<double>(tp) / static_cast<double>(support);
      recall_sum += rep.per_class_recall[c];
      ++recall_n;
    } else {
      rep.zero_support_classes.push_back(static_cast<int>(c));
    }
    if (support > 0 || predicted > 0) {
      f1_sum += 2.0 * static_cast<double>(tp) / static_cast<double>(support + predicted);
      ++f1_n;
    }
  }
  rep.balanced_accuracy = recall_n ? recall_sum / static_cast<double>(recall_n) : 0.0;
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(rep.n_texts);
  rep.f1_macro = f1_n ? f1_sum / static_cast<double>(f1_n) : 0.0;
  return rep;
}

inline std::vector<TextPair> to_pairs(const NLIDataset& records) {
  std::vector<TextPair> pairs;
  pairs.reserve(records.size());
  for (const auto& r : records) pairs.push_back({r.premise, r.hypothesis});
  return pairs;
}

// Scores a formatted test set and computes its metrics.
inline EvalReport evaluate_nli_testset(const NLIDataset& test, ScoringBackend& backend, std::string dataset_id,
                                       std::optional<std::size_t> num_classes = {}) {
  const auto pairs = to_pairs(test);
  const auto scores = score_pairs(backend, pairs);
  return compute_metrics_nli_binary(test, scores, std::move(dataset_id), num_classes);
}

// One dataset per call: multiplied test sets are never pooled across datasets.
inline EvalReport evaluate_dataset(const LabeledDataset& ds_test, const HypothesisCatalog& cat,
                                   ScoringBackend& backend) {
  return evaluate_nli_testset(format_nli_testset(ds_test, cat), backend, ds_test.dataset_id, ds_test.num_classes());
}

// --- held-out planning -------------------------------------------------------

struct RunSpec {
  std::string run_id;
  std::vector<std::string> train_datasets;
  std::vector<std::string> eval_datasets;

  ordered_json to_json() const {
    return {{"run_id", run_id}, {"train_datasets", train_datasets}, {"eval_datasets", eval_datasets}};
  }

  friend bool operator==(const RunSpec&, const RunSpec&) = default;
};

// "all", "nli-only", then one "heldout-X" per classification dataset X that
// trains on everything except X and evaluates on X.
inline std::vector<RunSpec> plan_heldout_runs(const std::vector<std::string>& dataset_ids,
                                              const std::vector<std::string>& nli_ids) {
  if (dataset_ids.empty()) throw UsageError("plan_heldout_runs: no classification datasets");
  std::set<std::string> seen;
  for (const auto* list : {&dataset_ids, &nli_ids})
    for (const auto& id : *list)
      if (!seen.insert(id).second) throw UsageError("plan_heldout_runs: duplicate dataset id \"" + id + "\"");

  std::vector<std::string> everything = nli_ids;
  everything.insert(everything.end(), dataset_ids.begin(), dataset_ids.end());

  std::vector<RunSpec> runs;
  runs.push_back({"all", everything, dataset_ids});
  runs.push_back({"nli-only", nli_ids, dataset_ids});
  for (const auto& held : dataset_ids) {
    RunSpec r{"heldout-" + held, {}, {held}};
    for (const auto& id : everything)
      if (id != held) r.train_datasets.push_back(id);
    runs.push_back(std::move(r));
  }
  return runs;
}

// --- aggregation -------------------------------------------------------------

inline constexpr std::string_view kBaselineCondition = "nli-only";

// Run id -> condition: "heldout-X" runs pool into "heldout".
inline std::string condition_of(std::string_view run_id) {
  if (run_id.rfind("heldout-", 0) == 0) return "heldout";
  return std::string(run_id);
}

struct PairwiseDelta {
  std::string a;
  std::string b;
  double delta = 0.0;  // mean(a) - mean(b)
};

struct Summary {
  std::vector<std::string> conditions;                                  // display order
  std::map<std::string, std::map<std::string, double>> values;        // dataset -> condition -> balanced accuracy
  std::map<std::string, double> means;                                 // condition -> equal-weight mean
  std::map<std::string, double> delta_vs_baseline;                     // condition -> mean - mean(nli-only)
  std::vector<PairwiseDelta> pairwise;
  std::vector<std::string> negative_transfer;                          // heldout < nli-only

  ordered_json to_json() const {
    ordered_json j;
    j["baseline"] = kBaselineCondition;
    j["conditions"] = conditions;
    j["datasets"] = ordered_json::array();
    for (const auto& [ds, row] : values) {
      ordered_json v = ordered_json::object();
      for (const auto& c : conditions)
        if (auto it = row.find(c); it != row.end()) v[c] = it->second;
      j["datasets"].push_back({{"dataset_id", ds}, {"values", v}});
    }
    j["means"] = ordered_json::object();
    for (const auto& c : conditions) j["means"][c] = means.at(c);
    j["delta_vs_baseline"] = ordered_json::object();
    for (const auto& c : conditions)
      if (auto it = delta_vs_baseline.find(c); it != delta_vs_baseline.end()) j["delta_vs_baseline"][c] = it->second;
    j["pairwise_deltas"] = ordered_json::array();
    for (const auto& p : pairwise) j["pairwise_deltas"].push_back({{"a", p.a}, {"b", p.b}, {"delta", p.delta}});
    j["negative_transfer"] = negative_transfer;
    return j;
  }

  static Summary from_json(const json& j);
};

namespace detail {

inline std::vector<std::string> order_conditions(const std::set<std::string>& present) {
  std::vector<std::string> out;
  for (const auto* c : {"all", "heldout", "nli-only"})
    if (present.count(c)) out.emplace_back(c);
  for (const auto& c : present)
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  return out;
}

inline void finish_summary(Summary& s) {
  std::set<std::string> present;
  for (const auto& [ds, row] : s.values)
    for (const auto& [c, _] : row) present.insert(c);
  s.conditions = order_conditions(present);
  s.means.clear();
  for (const auto& c : s.conditions) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [ds, row] : s.values)
      if (auto it = row.find(c); it != row.end()) {
        sum += it->second;
        ++n;
      }
    s.means[c] = n ? sum / static_cast<double>(n) : 0.0;
  }
  s.delta_vs_baseline.clear();
  const std::string base(kBaselineCondition);
  if (s.means.count(base))
    for (const auto& c : s.conditions)
      if (c != base) s.delta_vs_baseline[c] = s.means.at(c) - s.means.at(base);
  s.pairwise.clear();
  for (std::size_t i = 0; i < s.conditions.size(); ++i)
    for (std::size_t j = i + 1; j < s.conditions.size(); ++j)
      s.pairwise.push_back({s.conditions[i], s.conditions[j], s.means.at(s.conditions[i]) - s.means.at(s.conditions[j])});
  s.negative_transfer.clear();
  for (const auto& [ds, row] : s.values) {
    auto h = row.find("heldout"), b = row.find(base);
    if (h != row.end() && b != row.end() && h->second < b->second) s.negative_transfer.push_back(ds);
  }
}

}  // namespace detail

// Balanced accuracy per dataset and condition, equal-weight means per
// condition, deltas, and negative-transfer datasets. A "heldout-X" run only
// contributes its report on X.
inline Summary aggregate_reports(const std::vector<EvalReport>& reports) {
  Summary s;
  for (const auto& r : reports) {
    const auto cond = condition_of(r.run_id.empty() ? "unlabeled" : r.run_id);
    if (cond == "heldout" && r.run_id.substr(std::string_view("heldout-").size()) != r.dataset_id) continue;
    auto [it, inserted] = s.values[r.dataset_id].emplace(cond, r.balanced_accuracy);
    if (!inserted)
      throw DataError("aggregate: two reports for dataset \"" + r.dataset_id + "\" under condition \"" + cond + "\"");
  }
  detail::finish_summary(s);
  return s;
}

inline Summary Summary::from_json(const json& j) {
  Summary s;
  try {
    for (const auto& d : j.at("datasets")) {
      auto& row = s.values[d.at("dataset_id").get<std::string>()];
      for (const auto& [c, v] : d.at("values").items()) row[c] = v.get<double>();
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("summary: ") + e.what());
  }
  detail::finish_summary(s);
  return s;
}

}  // namespace entail
