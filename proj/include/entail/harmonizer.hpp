#pragma once

// Raw CSV / JSONL classification data -> canonical LabeledDataset.

#include <cmath>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "core.hpp"
#include "rng.hpp"

namespace entail {

// --- CSV (RFC 4180) ----------------------------------------------------------

// Parses the whole stream. Accepts LF or CRLF record endings and quoted fields
// spanning lines.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;
  char c;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started)
          throw DataError("csv line " + std::to_string(line) + ": quote inside unquoted field");
        quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (in.peek() != '\n') field += c;
        break;
      case '\n':
        end_row();
        ++line;
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (quoted) throw DataError("csv: unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

inline std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

// --- ingest ------------------------------------------------------------------

enum class SourceFormat { csv, jsonl };

struct IngestSpec {
  std::string dataset_id;
  std::filesystem::path source_path;
  SourceFormat format = SourceFormat::csv;
  std::vector<std::string> text_columns;  // merged with " "
  std::string label_column;
  std::map<std::string, std::string> label_mapping;  // raw label -> label_text
  std::set<std::string> drop_labels;
  std::optional<std::string> split_column;
  // Used by harmonize() when there is no split column. 0 disables splitting.
  double test_fraction = 0.2;
  std::set<std::string> na_values{"", "NA", "N/A", "NaN", "nan", "null", "NULL", "None"};
};

// Reads an ingest spec. Relative source paths resolve against `base_dir`.
inline IngestSpec ingest_spec_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
  static const std::set<std::string> known{"dataset_id",  "source_path",  "format",        "text_columns",
                                           "label_column", "label_mapping", "drop_labels", "split_column",
                                           "test_fraction", "na_values"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw DataError("ingest spec: unknown field \"" + key + "\"");
  IngestSpec spec;
  try {
    spec.dataset_id = j.at("dataset_id").get<std::string>();
    spec.source_path = j.at("source_path").get<std::string>();
    if (spec.source_path.is_relative() && !base_dir.empty()) spec.source_path = base_dir / spec.source_path;
    const auto fmt = j.value("format", std::string("csv"));
    if (fmt == "csv") spec.format = SourceFormat::csv;
    else if (fmt == "jsonl") spec.format = SourceFormat::jsonl;
    else throw DataError("ingest spec: unknown format \"" + fmt + "\"");
    spec.text_columns = j.at("text_columns").get<std::vector<std::string>>();
    spec.label_column = j.at("label_column").get<std::string>();
    if (j.contains("label_mapping")) spec.label_mapping = j["label_mapping"].get<std::map<std::string, std::string>>();
    if (j.contains("drop_labels")) spec.drop_labels = j["drop_labels"].get<std::set<std::string>>();
    if (j.contains("split_column") && !j["split_column"].is_null())
      spec.split_column = j["split_column"].get<std::string>();
    spec.test_fraction = j.value("test_fraction", 0.2);
    if (j.contains("na_values")) spec.na_values = j["na_values"].get<std::set<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("ingest spec: ") + e.what());
  }
  if (spec.text_columns.empty()) throw DataError("ingest spec: text_columns is empty");
  if (spec.label_column.empty()) throw DataError("ingest spec: label_column is empty");
  return spec;
}

struct IngestReport {
  std::size_t rows_in = 0;
  std::size_t rows_dropped_na = 0;
  std::size_t rows_dropped_dup = 0;
  std::size_t rows_dropped_label = 0;
  std::vector<std::string> warnings;

  ordered_json to_json() const {
    return {{"rows_in", rows_in},
            {"rows_dropped_na", rows_dropped_na},
            {"rows_dropped_dup", rows_dropped_dup},
            {"rows_dropped_label", rows_dropped_label},
            {"warnings", warnings}};
  }
};

struct IngestResult {
  LabeledDataset dataset;
  IngestReport report;
};

namespace detail {

// One source row as column -> cell; std::nullopt marks a null cell.
using RawRow = std::map<std::string, std::optional<std::string>>;

inline std::vector<RawRow> read_csv_rows(std::istream& in, const IngestSpec& spec) {
  auto table = parse_csv(in);
  if (table.empty()) throw DataError("csv: missing header row");
  const auto header = table.front();
  std::vector<RawRow> rows;
  for (std::size_t r = 1; r < table.size(); ++r) {
    const auto& cells = table[r];
    if (cells.size() == 1 && cells[0].empty()) continue;  // blank line
    if (cells.size() != header.size())
      throw DataError("csv row " + std::to_string(r) + ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(cells.size()));
    RawRow row;
    for (std::size_t c = 0; c < header.size(); ++c) row[header[c]] = cells[c];
    rows.push_back(std::move(row));
  }
  auto require = [&](const std::string& col) {
    if (std::find(header.begin(), header.end(), col) == header.end())
      throw DataError("missing column \"" + col + "\" in " + spec.source_path.string());
  };
  for (const auto& col : spec.text_columns) require(col);
  require(spec.label_column);
  if (spec.split_column) require(*spec.split_column);
  return rows;
}

inline std::optional<std::string> json_cell(const json& v) {
  if (v.is_null()) return std::nullopt;
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

inline std::vector<RawRow> read_jsonl_rows(std::istream& in, const IngestSpec& spec) {
  std::vector<RawRow> rows;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (trim(text).empty()) continue;
    const json j = parse_line(text, line);
    // A dataset header (our own output format) is skipped, so ingest can
    // re-read files it wrote.
    if (rows.empty() && j.contains("dataset_id") && j.contains("classes") && !j.contains(spec.label_column))
      continue;
    RawRow row;
    auto take = [&](const std::string& col) {
      auto it = j.find(col);
      if (it == j.end())
        throw DataError(line_prefix(line) + "missing column \"" + col + "\" in " + spec.source_path.string());
      row[col] = json_cell(*it);
    };
    for (const auto& col : spec.text_columns) take(col);
    take(spec.label_column);
    if (spec.split_column) take(*spec.split_column);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

inline IngestResult ingest_rows(const std::vector<detail::RawRow>& rows, const IngestSpec& spec) {
  IngestResult result;
  auto& ds = result.dataset;
  auto& report = result.report;
  ds.dataset_id = spec.dataset_id;
  std::unordered_set<std::string> seen;
  std::map<std::string, int> ids;

  auto is_na = [&](const std::optional<std::string>& cell) {
    return !cell || spec.na_values.count(trim(*cell)) > 0;
  };

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    ++report.rows_in;
    std::string text;
    for (const auto& col : spec.text_columns) {
      const auto& cell = row.at(col);
      if (is_na(cell)) continue;
      auto part = trim(*cell);
      if (part.empty()) continue;
      if (!text.empty()) text += ' ';
      text += part;
    }
    const auto& label_cell = row.at(spec.label_column);
    if (text.empty() || is_na(label_cell)) {
      ++report.rows_dropped_na;
      continue;
    }
    const auto raw_label = trim(*label_cell);
    if (spec.drop_labels.count(raw_label)) {
      ++report.rows_dropped_label;
      continue;
    }
    std::string label_text = raw_label;
    if (!spec.label_mapping.empty()) {
      auto it = spec.label_mapping.find(raw_label);
      if (it == spec.label_mapping.end())
        throw DataError("row " + std::to_string(r + 1) + ": label \"" + raw_label +
                        "\" has no mapping and no drop rule");
      label_text = it->second;
    }
    Split split = Split::train;
    if (spec.split_column) {
      const auto& cell = row.at(*spec.split_column);
      if (is_na(cell)) throw DataError("row " + std::to_string(r + 1) + ": empty split value");
      try {
        split = parse_split(trim(*cell));
      } catch (const DataError& e) {
        throw DataError("row " + std::to_string(r + 1) + ": " + e.what());
      }
    }
    if (!seen.insert(text).second) {
      ++report.rows_dropped_dup;
      continue;
    }
    auto [it, inserted] = ids.emplace(label_text, static_cast<int>(ds.classes.size()));
    if (inserted) ds.classes.push_back({it->second, label_text});
    ds.examples.push_back({std::move(text), label_text, it->second, ds.dataset_id, split});
  }
  return result;
}

// Reads the source named by `spec`, removes NA and duplicate texts, applies
// the label rules and assigns dense class ids in first-seen order.
inline IngestResult ingest(const IngestSpec& spec) {
  auto in = open_input(spec.source_path);
  const auto rows = spec.format == SourceFormat::csv ? detail::read_csv_rows(in, spec)
                                                     : detail::read_jsonl_rows(in, spec);
  return ingest_rows(rows, spec);
}

// --- split -------------------------------------------------------------------

struct SplitResult {
  LabeledDataset train;
  LabeledDataset test;
  std::vector<std::string> warnings;
};

// Stratified split. Per class, the member indices are Fisher-Yates shuffled
// (one Rng, classes in id order) and the first round(fraction * size) go to
// test, clamped to [1, size-1] for classes of size >= 2. Singletons stay in
// train. Both outputs keep the input order.
inline SplitResult train_test_split(const LabeledDataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw UsageError("test_fraction must lie in (0, 1), got " + std::to_string(test_fraction));
  SplitResult out;
  std::vector<std::vector<std::size_t>> members(ds.classes.size());
  for (std::size_t i = 0; i < ds.examples.size(); ++i)
    members.at(static_cast<std::size_t>(ds.examples[i].label_standard)).push_back(i);

  Rng rng(seed);
  std::vector<bool> is_test(ds.examples.size(), false);
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto& idx = members[c];
    if (idx.empty()) continue;
    if (idx.size() == 1) {
      out.warnings.push_back("class \"" + ds.classes[c].name + "\" has a single example; kept in train");
      continue;
    }
    rng.shuffle(std::span(idx));
    auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(idx.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    for (std::size_t j = 0; j < n_test; ++j) is_test[idx[j]] = true;
  }

  out.train = {ds.dataset_id, ds.classes, {}};
  out.test = {ds.dataset_id, ds.classes, {}};
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    auto ex = ds.examples[i];
    ex.split = is_test[i] ? Split::test : Split::train;
    (is_test[i] ? out.test : out.train).examples.push_back(std::move(ex));
  }
  return out;
}

// ingest(), then an 80-20 style split when the source carries no split column
// and spec.test_fraction > 0. The returned dataset holds both splits.
inline IngestResult harmonize(const IngestSpec& spec, std::uint64_t seed) {
  auto result = ingest(spec);
  if (!spec.split_column && spec.test_fraction > 0.0 && !result.dataset.examples.empty()) {
    auto parts = train_test_split(result.dataset, spec.test_fraction, seed);
    for (auto& w : parts.warnings) result.report.warnings.push_back(std::move(w));
    // Restore source order with the new split tags.
    std::map<std::string, Split> split_of;
    for (const auto& ex : parts.test.examples) split_of[ex.text] = Split::test;
    for (auto& ex : result.dataset.examples)
      ex.split = split_of.count(ex.text) ? Split::test : Split::train;
  }
  return result;
}

}  // namespace entail
