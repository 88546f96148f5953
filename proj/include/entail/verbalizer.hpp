#pragma once

// Class names -> hypothesis sentences.
//
// Catalog file format:
//   {"dataset_id": "...", "entries": {"0": ["hyp a", "hyp b"], "1": ["..."]}}

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "core.hpp"
#include "rng.hpp"

namespace entail {

struct HypothesisCatalog {
  std::string dataset_id;
  std::map<int, std::vector<std::string>> entries;  // label_standard -> hypotheses

  std::size_t num_classes() const { return entries.size(); }

  // Canonical (first) hypothesis of a class.
  const std::string& primary(int cls) const {
    auto it = entries.find(cls);
    if (it == entries.end() || it->second.empty())
      throw DataError("catalog \"" + dataset_id + "\" has no hypothesis for class " + std::to_string(cls));
    return it->second.front();
  }

  friend bool operator==(const HypothesisCatalog&, const HypothesisCatalog&) = default;
};

inline std::size_t count_placeholders(std::string_view tmpl) {
  std::size_t count = 0;
  for (auto pos = tmpl.find("{}"); pos != std::string_view::npos; pos = tmpl.find("{}", pos + 2)) ++count;
  return count;
}

// Replaces the single "{}" in `tmpl` with `class_name` verbatim.
inline std::string render_template(std::string_view tmpl, std::string_view class_name) {
  const auto n = count_placeholders(tmpl);
  if (n != 1)
    throw UsageError("hypothesis template must contain exactly one \"{}\" placeholder, found " + std::to_string(n));
  const auto pos = tmpl.find("{}");
  std::string out(tmpl.substr(0, pos));
  out += class_name;
  out += tmpl.substr(pos + 2);
  return out;
}

// Throws unless every class has a non-empty list of non-empty hypotheses and
// no hypothesis is shared between classes.
inline void check_catalog(const HypothesisCatalog& cat) {
  std::map<std::string, int> owner;
  for (const auto& [cls, hyps] : cat.entries) {
    if (hyps.empty()) throw DataError("catalog: class " + std::to_string(cls) + " has no hypotheses");
    for (const auto& h : hyps) {
      if (trim(h).empty()) throw DataError("catalog: empty hypothesis for class " + std::to_string(cls));
      auto [it, inserted] = owner.emplace(h, cls);
      if (!inserted && it->second != cls)
        throw DataError("catalog: hypothesis \"" + h + "\" used by classes " + std::to_string(it->second) + " and " +
                        std::to_string(cls));
    }
  }
}

inline void check_catalog_covers(const HypothesisCatalog& cat, const LabeledDataset& ds) {
  for (const auto& c : ds.classes)
    if (!cat.entries.count(c.id))
      throw DataError("catalog \"" + cat.dataset_id + "\" is missing class " + std::to_string(c.id) + " (\"" +
                      c.name + "\")");
}

// Template path: each class's label_text fills the placeholder.
inline HypothesisCatalog build_catalog(const LabeledDataset& ds, std::string_view tmpl) {
  HypothesisCatalog cat{ds.dataset_id, {}};
  for (const auto& c : ds.classes) cat.entries[c.id] = {render_template(tmpl, c.name)};
  check_catalog(cat);
  return cat;
}

// Explicit path: hypotheses keyed by class name (label_text).
inline HypothesisCatalog build_catalog(const LabeledDataset& ds,
                                       const std::map<std::string, std::vector<std::string>>& by_name) {
  HypothesisCatalog cat{ds.dataset_id, {}};
  for (const auto& c : ds.classes) {
    auto it = by_name.find(c.name);
    if (it == by_name.end()) throw DataError("no hypotheses given for class \"" + c.name + "\"");
    cat.entries[c.id] = it->second;
  }
  check_catalog(cat);
  return cat;
}

// Picks a class other than `correct_class` uniformly, then one of its
// hypotheses uniformly.
inline std::pair<std::string, int> sample_incorrect_hypothesis(const HypothesisCatalog& cat, int correct_class,
                                                               Rng& rng) {
  std::vector<int> others;
  for (const auto& [cls, _] : cat.entries)
    if (cls != correct_class) others.push_back(cls);
  if (others.empty() || cat.entries.size() < 2)
    throw DataError("catalog \"" + cat.dataset_id + "\" has a single class; no incorrect hypothesis exists");
  const int cls = others[static_cast<std::size_t>(rng.below(others.size()))];
  const auto& hyps = cat.entries.at(cls);
  return {hyps[static_cast<std::size_t>(rng.below(hyps.size()))], cls};
}

inline HypothesisCatalog catalog_from_json(const json& j) {
  HypothesisCatalog cat;
  try {
    for (const auto& [key, _] : j.items())
      if (key != "dataset_id" && key != "entries") throw DataError("catalog: unknown field \"" + key + "\"");
    cat.dataset_id = j.at("dataset_id").get<std::string>();
    for (const auto& [key, hyps] : j.at("entries").items()) {
      std::size_t used = 0;
      const int cls = std::stoi(key, &used);
      if (used != key.size() || cls < 0) throw DataError("catalog: bad class key \"" + key + "\"");
      cat.entries[cls] = hyps.get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("catalog: ") + e.what());
  } catch (const std::logic_error&) {
    throw DataError("catalog: class keys must be integers");
  }
  check_catalog(cat);
  return cat;
}

inline ordered_json catalog_to_json(const HypothesisCatalog& cat) {
  ordered_json j;
  j["dataset_id"] = cat.dataset_id;
  j["entries"] = ordered_json::object();
  for (const auto& [cls, hyps] : cat.entries) j["entries"][std::to_string(cls)] = hyps;
  return j;
}

inline HypothesisCatalog read_catalog(const std::filesystem::path& path) {
  try {
    return catalog_from_json(read_json_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace entail
