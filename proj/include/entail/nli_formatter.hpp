#pragma once

// Labeled datasets -> binary entailment records, and native NLI ingestion.
//
// NLI JSONL, one record per line:
//   {"premise":"...","hypothesis":"...","label":0,"origin_text_id":3,"origin_class":1}
// On input, "label" may also be one of the strings entailment / neutral /
// contradiction / not_entailment, and the origin fields may be omitted
// (native NLI data).

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"
#include "rng.hpp"
#include "verbalizer.hpp"

namespace entail {

// 3-way NLI label -> binary label: entailment stays 0, neutral and
// contradiction collapse into not_entailment (1).
inline int binary_nli_label(std::string_view label) {
  if (label == "entailment") return kEntailment;
  if (label == "neutral" || label == "contradiction" || label == "not_entailment") return kNotEntailment;
  throw DataError("unknown NLI label \"" + std::string(label) + "\"");
}

inline NLIRecord merge_nli_labels(std::string premise, std::string hypothesis, std::string_view label) {
  return {std::move(premise), std::move(hypothesis), binary_nli_label(label), -1, -1};
}

// Two records per example, entailment first: the text with a hypothesis of
// its own class (label 0) and with a hypothesis of a uniformly drawn other
// class (label 1). When a class has several hypotheses, each record draws one
// uniformly.
inline NLIDataset format_nli_trainset(const LabeledDataset& ds, const HypothesisCatalog& cat, std::uint64_t seed) {
  if (ds.examples.empty()) return {};
  check_catalog_covers(cat, ds);
  if (ds.num_classes() < 2 || cat.num_classes() < 2)
    throw DataError("format_nli_trainset: dataset \"" + ds.dataset_id + "\" has a single class");
  Rng rng(seed);
  NLIDataset out;
  out.reserve(2 * ds.examples.size());
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    const auto& ex = ds.examples[i];
    const auto& own = cat.entries.at(ex.label_standard);
    const auto id = static_cast<long>(i);
    out.push_back({ex.text, own[static_cast<std::size_t>(rng.below(own.size()))], kEntailment, id, ex.label_standard});
    auto [hyp, cls] = sample_incorrect_hypothesis(cat, ex.label_standard, rng);
    out.push_back({ex.text, std::move(hyp), kNotEntailment, id, cls});
  }
  return out;
}

// K records per example, one per class in ascending class order, each with
// that class's first hypothesis. Exactly one of them is labeled entailment.
inline NLIDataset format_nli_testset(const LabeledDataset& ds, const HypothesisCatalog& cat) {
  check_catalog_covers(cat, ds);
  NLIDataset out;
  out.reserve(ds.examples.size() * ds.num_classes());
  std::vector<int> class_ids;
  for (const auto& c : ds.classes) class_ids.push_back(c.id);
  std::sort(class_ids.begin(), class_ids.end());
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    const auto& ex = ds.examples[i];
    for (int cls : class_ids)
      out.push_back({ex.text, cat.primary(cls), cls == ex.label_standard ? kEntailment : kNotEntailment,
                     static_cast<long>(i), cls});
  }
  return out;
}

// Concatenates native NLI data with reformatted sets, then shuffles.
inline NLIDataset concat_train(const NLIDataset& native, const std::vector<NLIDataset>& reformatted,
                               std::uint64_t shuffle_seed) {
  NLIDataset out = native;
  for (const auto& part : reformatted) out.insert(out.end(), part.begin(), part.end());
  Rng rng(shuffle_seed);
  rng.shuffle(std::span(out));
  return out;
}

// --- NLI JSONL ---------------------------------------------------------------

inline NLIDataset read_nli_jsonl(std::istream& in) {
  NLIDataset out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (trim(text).empty()) continue;
    const json j = detail::parse_line(text, line);
    detail::reject_unknown_fields(j, {"premise", "hypothesis", "label", "origin_text_id", "origin_class"}, line);
    NLIRecord r;
    r.premise = detail::required_field<std::string>(j, "premise", line);
    r.hypothesis = detail::required_field<std::string>(j, "hypothesis", line);
    const auto label = detail::required_field<json>(j, "label", line);
    if (label.is_string()) {
      try {
        r.label = binary_nli_label(label.get<std::string>());
      } catch (const DataError& e) {
        throw DataError(detail::line_prefix(line) + e.what());
      }
    } else if (label.is_number_integer() && (label.get<int>() == 0 || label.get<int>() == 1)) {
      r.label = label.get<int>();
    } else {
      throw DataError(detail::line_prefix(line) + "label must be 0, 1 or an NLI label string");
    }
    if (j.contains("origin_text_id")) r.origin_text_id = detail::required_field<long>(j, "origin_text_id", line);
    if (j.contains("origin_class")) r.origin_class = detail::required_field<int>(j, "origin_class", line);
    if (r.premise.empty() || r.hypothesis.empty())
      throw DataError(detail::line_prefix(line) + "premise and hypothesis must be non-empty");
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_nli_jsonl(const NLIDataset& records, std::ostream& out) {
  for (const auto& r : records) {
    ordered_json j;
    j["premise"] = r.premise;
    j["hypothesis"] = r.hypothesis;
    j["label"] = r.label;
    j["origin_text_id"] = r.origin_text_id;
    j["origin_class"] = r.origin_class;
    out << j.dump() << '\n';
  }
}

inline NLIDataset read_nli_jsonl(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return read_nli_jsonl(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void write_nli_jsonl(const NLIDataset& records, const std::filesystem::path& path) {
  auto out = open_output(path);
  write_nli_jsonl(records, out);
}

}  // namespace entail
