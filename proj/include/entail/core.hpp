#pragma once

// Domain types shared by every stage of the pipeline, plus the dataset JSONL
// format.
//
// A dataset file is UTF-8 JSON Lines with "\n" endings. The first line is a
// header naming the dataset and its classes; every further line is one
// example:
//
//   {"dataset_id":"agnews","classes":[{"id":0,"name":"world"},{"id":1,"name":"sports"}]}
//   {"text":"...","label_text":"sports","label_standard":1,"split":"train"}

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"

namespace entail {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

enum class Split { train, test };

inline std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw DataError("unknown split \"" + std::string(s) + "\" (expected train or test)");
}

// Strips ASCII whitespace from both ends. No case folding, no inner changes.
inline std::string trim(std::string_view s) {
  constexpr std::string_view ws = " \t\n\r\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

struct LabeledExample {
  std::string text;
  std::string label_text;
  int label_standard = 0;
  std::string dataset_id;
  Split split = Split::train;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

struct ClassInfo {
  int id = 0;
  std::string name;

  friend bool operator==(const ClassInfo&, const ClassInfo&) = default;
};

struct LabeledDataset {
  std::string dataset_id;
  std::vector<ClassInfo> classes;
  std::vector<LabeledExample> examples;

  std::size_t num_classes() const { return classes.size(); }

  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) out.push_back(ex.label_standard);
    return out;
  }

  std::vector<std::string> texts() const {
    std::vector<std::string> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) out.push_back(ex.text);
    return out;
  }

  // Example counts indexed by label_standard.
  std::vector<std::size_t> class_sizes() const {
    std::vector<std::size_t> sizes(classes.size(), 0);
    for (const auto& ex : examples)
      if (ex.label_standard >= 0 && static_cast<std::size_t>(ex.label_standard) < sizes.size())
        ++sizes[static_cast<std::size_t>(ex.label_standard)];
    return sizes;
  }

  // Same classes, examples restricted to `indices` (kept in the given order).
  LabeledDataset subset(const std::vector<std::size_t>& indices) const {
    LabeledDataset out{dataset_id, classes, {}};
    out.examples.reserve(indices.size());
    for (auto i : indices) out.examples.push_back(examples.at(i));
    return out;
  }

  LabeledDataset only(Split split) const {
    LabeledDataset out{dataset_id, classes, {}};
    for (const auto& ex : examples)
      if (ex.split == split) out.examples.push_back(ex);
    return out;
  }

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

// Binary entailment pair. label 0 = entailment, 1 = not_entailment.
struct NLIRecord {
  std::string premise;
  std::string hypothesis;
  int label = 0;
  long origin_text_id = -1;  // -1 for native NLI data
  int origin_class = -1;     // -1 for native NLI data

  friend bool operator==(const NLIRecord&, const NLIRecord&) = default;
};

using NLIDataset = std::vector<NLIRecord>;

inline constexpr int kEntailment = 0;
inline constexpr int kNotEntailment = 1;

// Raw backend output for one premise/hypothesis pair, before any softmax.
struct PairScore {
  double entailment_logit = 0.0;
  double not_entailment_logit = 0.0;

  friend bool operator==(const PairScore&, const PairScore&) = default;
};

struct Prediction {
  long text_id = 0;
  std::vector<double> class_probs;  // indexed by candidate label position
  int predicted_class = 0;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

// Index of the largest element; the lowest index wins ties.
template <typename Range>
int argmax(const Range& values) {
  int best = 0;
  int i = 0;
  bool first = true;
  typename Range::value_type best_value{};
  for (const auto& v : values) {
    if (first || v > best_value) {
      best = i;
      best_value = v;
      first = false;
    }
    ++i;
  }
  return best;
}

// --- validation --------------------------------------------------------------

struct Violation {
  std::optional<std::size_t> example;  // empty for dataset-level problems
  std::string rule;
  std::string detail;

  std::string describe() const {
    std::string s = example ? "example " + std::to_string(*example) : std::string("dataset");
    return s + ": " + rule + ": " + detail;
  }
};

inline std::vector<Violation> validate_dataset(const LabeledDataset& ds) {
  std::vector<Violation> out;
  const auto k = static_cast<int>(ds.classes.size());

  std::map<int, std::string> names;
  std::set<std::string> seen_names;
  for (const auto& c : ds.classes) {
    if (c.id < 0 || c.id >= k)
      out.push_back({std::nullopt, "class-id-range",
                     "class id " + std::to_string(c.id) + " outside [0," + std::to_string(k) + ")"});
    if (!names.emplace(c.id, c.name).second)
      out.push_back({std::nullopt, "class-duplicate-id", "class id " + std::to_string(c.id) + " listed twice"});
    if (!seen_names.insert(c.name).second)
      out.push_back({std::nullopt, "class-duplicate-name", "class name \"" + c.name + "\" listed twice"});
  }

  std::set<std::string> seen_text[2];
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    const auto& ex = ds.examples[i];
    if (trim(ex.text).empty()) out.push_back({i, "empty-text", "text is empty after trimming"});
    if (ex.dataset_id != ds.dataset_id)
      out.push_back({i, "dataset-id", "example belongs to \"" + ex.dataset_id + "\""});
    if (ex.label_standard < 0 || ex.label_standard >= k) {
      out.push_back({i, "label-range",
                     "label_standard " + std::to_string(ex.label_standard) + " outside [0," + std::to_string(k) + ")"});
    } else if (auto it = names.find(ex.label_standard); it == names.end() || it->second != ex.label_text) {
      out.push_back({i, "label-mismatch",
                     "label_text \"" + ex.label_text + "\" does not name class " + std::to_string(ex.label_standard)});
    }
    if (!seen_text[ex.split == Split::train ? 0 : 1].insert(ex.text).second)
      out.push_back({i, "duplicate-text", "text repeated within the " + std::string(to_string(ex.split)) + " split"});
  }
  return out;
}

// --- JSONL -------------------------------------------------------------------

namespace detail {

inline std::string line_prefix(std::size_t line) { return "line " + std::to_string(line) + ": "; }

inline void reject_unknown_fields(const json& obj, std::initializer_list<std::string_view> allowed,
                                  std::size_t line) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw DataError(line_prefix(line) + "unknown field \"" + key + "\"");
  }
}

template <typename T>
T required_field(const json& obj, const char* name, std::size_t line) {
  auto it = obj.find(name);
  if (it == obj.end()) throw DataError(line_prefix(line) + "missing field \"" + name + "\"");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw DataError(line_prefix(line) + "field \"" + name + "\" has the wrong type");
  }
}

inline json parse_line(const std::string& text, std::size_t line) {
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw DataError(line_prefix(line) + "expected a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw DataError(line_prefix(line) + "malformed JSON (" + e.what() + ")");
  }
}

}  // namespace detail

inline LabeledDataset read_jsonl(std::istream& in) {
  LabeledDataset ds;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (trim(text).empty()) continue;
    const json j = detail::parse_line(text, line);
    if (!have_header) {
      detail::reject_unknown_fields(j, {"dataset_id", "classes"}, line);
      ds.dataset_id = detail::required_field<std::string>(j, "dataset_id", line);
      const auto classes = detail::required_field<json>(j, "classes", line);
      if (!classes.is_array()) throw DataError(detail::line_prefix(line) + "\"classes\" must be an array");
      for (const auto& c : classes) {
        if (!c.is_object()) throw DataError(detail::line_prefix(line) + "class entries must be objects");
        detail::reject_unknown_fields(c, {"id", "name"}, line);
        ds.classes.push_back({detail::required_field<int>(c, "id", line),
                              detail::required_field<std::string>(c, "name", line)});
      }
      have_header = true;
      continue;
    }
    detail::reject_unknown_fields(j, {"text", "label_text", "label_standard", "split"}, line);
    LabeledExample ex;
    ex.text = detail::required_field<std::string>(j, "text", line);
    ex.label_text = detail::required_field<std::string>(j, "label_text", line);
    ex.label_standard = detail::required_field<int>(j, "label_standard", line);
    try {
      ex.split = parse_split(detail::required_field<std::string>(j, "split", line));
    } catch (const DataError& e) {
      throw DataError(detail::line_prefix(line) + e.what());
    }
    ex.dataset_id = ds.dataset_id;
    ds.examples.push_back(std::move(ex));
  }
  if (!have_header) throw DataError("missing header line (dataset_id and classes)");
  return ds;
}

inline void write_jsonl(const LabeledDataset& ds, std::ostream& out) {
  ordered_json header;
  header["dataset_id"] = ds.dataset_id;
  header["classes"] = ordered_json::array();
  for (const auto& c : ds.classes) header["classes"].push_back({{"id", c.id}, {"name", c.name}});
  out << header.dump() << '\n';
  for (const auto& ex : ds.examples) {
    ordered_json j;
    j["text"] = ex.text;
    j["label_text"] = ex.label_text;
    j["label_standard"] = ex.label_standard;
    j["split"] = to_string(ex.split);
    out << j.dump() << '\n';
  }
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

inline LabeledDataset read_jsonl(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return read_jsonl(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void write_jsonl(const LabeledDataset& ds, const std::filesystem::path& path) {
  auto out = open_output(path);
  write_jsonl(ds, out);
}

inline json read_json_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": malformed JSON (" + e.what() + ")");
  }
}

inline void write_json_file(const ordered_json& j, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

}  // namespace entail
