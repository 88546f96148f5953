#pragma once

// The `entail` command line: harmonize -> clean -> downsample -> format ->
// classify / evaluate -> heldout-plan / aggregate -> report.
//
// Exit codes: 0 success, 1 data error, 2 usage error.

#include <chrono>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "backend.hpp"
#include "cleaner.hpp"
#include "core.hpp"
#include "eval.hpp"
#include "harmonizer.hpp"
#include "http.hpp"
#include "nli_formatter.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "verbalizer.hpp"
#include "zeroshot.hpp"

namespace entail::cli {

// --config JSON: top-level keys set global options, objects keyed by a
// subcommand name set that subcommand's options. Explicit flags win.
class JsonConfig final : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw CLI::ConversionError(std::string("config: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config: expected a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        for (const auto& [sub_key, sub_value] : value.items()) items.push_back({{key}, sub_key, inputs(sub_value)});
      } else {
        items.push_back({{}, key, inputs(value)});
      }
    }
    return items;
  }

 private:
  static std::vector<std::string> inputs(const json& v) {
    if (v.is_array()) {
      std::vector<std::string> out;
      for (const auto& e : v) out.push_back(scalar(e));
      return out;
    }
    return {scalar(v)};
  }
  static std::string scalar(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }
};

enum class LogLevel { error, warn, info, debug };

class Log {
 public:
  Log(std::ostream& err, LogLevel level) : err_(err), level_(level) {}
  void warn(const std::string& msg) const { emit(LogLevel::warn, "warning", msg); }
  void info(const std::string& msg) const { emit(LogLevel::info, "info", msg); }

 private:
  void emit(LogLevel lvl, const char* tag, const std::string& msg) const {
    if (lvl <= level_) err_ << "entail: " << tag << ": " << msg << '\n';
  }
  std::ostream& err_;
  LogLevel level_;
};

// Backend from a spec string:
//   mock | mock:hash | mock:planted=<dataset.jsonl> | mock:inverted=<dataset.jsonl>
//   mock:table=<pairs.json> | file:<scores.json> | http://host:port[/prefix]
inline std::shared_ptr<ScoringBackend> make_backend(const std::string& spec, std::size_t batch_size,
                                                    std::chrono::milliseconds timeout) {
  auto after = [&](std::string_view prefix) { return spec.substr(prefix.size()); };
  auto starts = [&](std::string_view prefix) { return spec.rfind(prefix, 0) == 0; };
  if (spec == "mock" || spec == "mock:hash") return std::make_shared<MockBackend>(MockSpec{});
  if (starts("mock:planted=")) return std::make_shared<MockBackend>(planted_spec(read_jsonl(after("mock:planted="))));
  if (starts("mock:inverted="))
    return std::make_shared<MockBackend>(planted_spec(read_jsonl(after("mock:inverted=")), MockMode::inverted));
  if (starts("mock:table=")) {
    const auto path = after("mock:table=");
    MockSpec ms;
    ms.mode = MockMode::table;
    try {
      for (const auto& e : read_json_file(path))
        ms.table[{e.at("premise").get<std::string>(), e.at("hypothesis").get<std::string>()}] = {
            e.at("entailment").get<double>(), e.at("not_entailment").get<double>()};
    } catch (const json::exception& e) {
      throw DataError(path + ": " + e.what());
    }
    return std::make_shared<MockBackend>(std::move(ms));
  }
  if (starts("file:")) return std::make_shared<FileBackend>(FileBackend::load(after("file:")));
  if (starts("http://") || starts("https://")) return std::make_shared<HttpBackend>(spec, batch_size, timeout);
  throw UsageError("unknown backend \"" + spec + "\"");
}

// Texts from JSONL lines carrying a "text" field; a leading dataset header
// line is skipped, so labeled dataset files work as input too.
inline std::vector<std::string> read_texts(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::string> texts;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    const json j = detail::parse_line(line, n);
    if (texts.empty() && j.contains("classes") && !j.contains("text")) continue;
    texts.push_back(detail::required_field<std::string>(j, "text", n));
  }
  return texts;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(std::move(t));
  return out;
}

struct BackendOptions {
  std::string spec;
  std::size_t batch_size = 32;
  double timeout_s = 60.0;
  std::string record;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--backend", spec, "mock | mock:hash | mock:planted=DS | mock:inverted=DS | mock:table=F | "
                                       "file:SCORES | http://HOST:PORT")
        ->required();
    cmd->add_option("--batch-size", batch_size, "pairs per backend request")->capture_default_str();
    cmd->add_option("--timeout", timeout_s, "seconds per HTTP request")->capture_default_str();
    cmd->add_option("--record", record, "write every score seen to this replay file");
  }

  // The returned backend records when --record is set; call save() after use.
  std::shared_ptr<ScoringBackend> make() {
    auto b = make_backend(spec, batch_size, std::chrono::milliseconds(static_cast<long>(timeout_s * 1000)));
    if (!record.empty()) recorder_ = std::make_shared<RecordingBackend>(b);
    return recorder_ ? recorder_ : b;
  }

  void save() const {
    if (recorder_) recorder_->save(record);
  }

 private:
  std::shared_ptr<RecordingBackend> recorder_;
};

struct CatalogOptions {
  std::string catalog;
  std::string tmpl;

  void add_to(CLI::App* cmd) {
    auto* c = cmd->add_option("--catalog", catalog, "hypothesis catalog JSON");
    auto* t = cmd->add_option("--template", tmpl, "hypothesis template with one {} placeholder");
    c->excludes(t);
  }

  HypothesisCatalog load(const LabeledDataset& ds) const {
    if (!catalog.empty()) return read_catalog(catalog);
    if (!tmpl.empty()) return build_catalog(ds, tmpl);
    throw UsageError("one of --catalog or --template is required");
  }
};

inline LabeledDataset select_split(const LabeledDataset& ds, const std::string& split) {
  if (split == "all") return ds;
  return ds.only(parse_split(split));
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Turn text classification into binary entailment and back.", "entail"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with option defaults (explicit flags win)");
  app.allow_config_extras(CLI::config_extras_mode::error);

  std::uint64_t seed = 42;
  std::string log_level = "warn";
  app.add_option("--seed", seed, "pipeline seed; each stage derives its own")->capture_default_str();
  app.add_option("--log-level", log_level, "error | warn | info | debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}))
      ->capture_default_str();

  std::function<void()> action;
  auto log_of = [&] {
    const LogLevel lvl = log_level == "error" ? LogLevel::error
                         : log_level == "info"  ? LogLevel::info
                         : log_level == "debug" ? LogLevel::debug
                                                : LogLevel::warn;
    return Log(err, lvl);
  };

  // harmonize
  std::string h_spec, h_out, h_report;
  auto* harmonize_cmd = app.add_subcommand("harmonize", "ingest a raw CSV/JSONL dataset");
  harmonize_cmd->add_option("--spec", h_spec, "ingest spec JSON")->required();
  harmonize_cmd->add_option("--out", h_out, "output dataset JSONL")->required();
  harmonize_cmd->add_option("--report", h_report, "ingest report JSON");
  harmonize_cmd->callback([&] {
    action = [&] {
      const auto log = log_of();
      const auto spec_path = std::filesystem::path(h_spec);
      const auto spec = ingest_spec_from_json(read_json_file(spec_path), spec_path.parent_path());
      const auto result = harmonize(spec, derive_seed(seed, "split"));
      for (const auto& w : result.report.warnings) log.warn(w);
      write_jsonl(result.dataset, std::filesystem::path(h_out));
      if (!h_report.empty()) write_json_file(result.report.to_json(), h_report);
      log.info("harmonize: " + std::to_string(result.dataset.examples.size()) + " examples written");
    };
  });

  // clean
  std::string c_in, c_out, c_report, c_embedder = "hashed";
  bool c_skip = false;
  int c_folds = 5;
  std::size_t c_dims = 256;
  double c_max_removal = 0.5, c_l2 = 1.0;
  auto* clean_cmd = app.add_subcommand("clean", "flag and remove probable label errors");
  clean_cmd->add_option("--in", c_in, "dataset JSONL")->required();
  clean_cmd->add_option("--out", c_out, "cleaned dataset JSONL")->required();
  clean_cmd->add_option("--report", c_report, "cleaning report JSON");
  clean_cmd->add_flag("--skip", c_skip, "copy the dataset unchanged (complex tasks)");
  clean_cmd->add_option("--folds", c_folds, "out-of-fold splits")->capture_default_str();
  clean_cmd->add_option("--max-removal", c_max_removal, "max fraction removed per class")->capture_default_str();
  clean_cmd->add_option("--l2", c_l2, "logistic regression L2 strength")->capture_default_str();
  clean_cmd->add_option("--embedder", c_embedder, "hashed | http://HOST:PORT")->capture_default_str();
  clean_cmd->add_option("--dims", c_dims, "hashed TF-IDF dimension")->capture_default_str();
  clean_cmd->callback([&] {
    action = [&] {
      const auto log = log_of();
      const auto ds = read_jsonl(std::filesystem::path(c_in));
      CleanConfig cfg;
      cfg.skip = c_skip;
      cfg.folds = c_folds;
      cfg.max_removal_fraction_per_class = c_max_removal;
      cfg.logistic.l2 = c_l2;
      cfg.seed = derive_seed(seed, "clean");
      if (c_embedder == "hashed") cfg.embedder = std::make_shared<HashedTfidfEmbedder>(c_dims);
      else cfg.embedder = std::make_shared<HttpEmbedder>(c_embedder);
      const auto result = clean(ds, cfg);
      for (const auto& w : result.report.warnings) log.warn(w);
      write_jsonl(result.cleaned, std::filesystem::path(c_out));
      if (!c_report.empty()) write_json_file(result.report.to_json(), c_report);
      log.info("clean: removed " + std::to_string(result.report.flagged.size()) + " of " +
               std::to_string(ds.examples.size()));
    };
  });

  // downsample
  std::string d_in, d_out, d_split = "all";
  std::size_t d_per_class = 500, d_per_dataset = 5000;
  auto* downsample_cmd = app.add_subcommand("downsample", "cap examples per class and per dataset");
  downsample_cmd->add_option("--in", d_in, "dataset JSONL")->required();
  downsample_cmd->add_option("--out", d_out, "output dataset JSONL")->required();
  downsample_cmd->add_option("--per-class", d_per_class, "max examples per class")->capture_default_str();
  downsample_cmd->add_option("--per-dataset", d_per_dataset, "max examples per dataset")->capture_default_str();
  downsample_cmd->add_option("--split", d_split, "train | test | all")
      ->check(CLI::IsMember({"train", "test", "all"}))
      ->capture_default_str();
  downsample_cmd->callback([&] {
    action = [&] {
      const auto ds = read_jsonl(std::filesystem::path(d_in));
      LabeledDataset result;
      if (d_split == "all") {
        result = downsample(ds, d_per_class, d_per_dataset, derive_seed(seed, "downsample"));
      } else {
        const auto target = parse_split(d_split);
        const auto reduced = downsample(ds.only(target), d_per_class, d_per_dataset, derive_seed(seed, "downsample"));
        result = {ds.dataset_id, ds.classes, {}};
        // other splits pass through untouched; source order is kept
        std::set<std::string> kept;
        for (const auto& ex : reduced.examples) kept.insert(ex.text);
        for (const auto& ex : ds.examples)
          if (ex.split != target || kept.count(ex.text)) result.examples.push_back(ex);
      }
      write_jsonl(result, std::filesystem::path(d_out));
    };
  });

  // format-train / format-test
  std::string ft_in, ft_out, ft_split = "train";
  CatalogOptions ft_cat;
  auto* format_train_cmd = app.add_subcommand("format-train", "two NLI records per example");
  format_train_cmd->add_option("--in", ft_in, "dataset JSONL")->required();
  format_train_cmd->add_option("--out", ft_out, "NLI JSONL")->required();
  format_train_cmd->add_option("--split", ft_split, "train | test | all")
      ->check(CLI::IsMember({"train", "test", "all"}))
      ->capture_default_str();
  ft_cat.add_to(format_train_cmd);
  format_train_cmd->callback([&] {
    action = [&] {
      const auto ds = select_split(read_jsonl(std::filesystem::path(ft_in)), ft_split);
      write_nli_jsonl(format_nli_trainset(ds, ft_cat.load(ds), derive_seed(seed, "format-train")),
                      std::filesystem::path(ft_out));
    };
  });

  std::string fe_in, fe_out, fe_split = "test";
  CatalogOptions fe_cat;
  auto* format_test_cmd = app.add_subcommand("format-test", "one NLI record per example and class");
  format_test_cmd->add_option("--in", fe_in, "dataset JSONL")->required();
  format_test_cmd->add_option("--out", fe_out, "NLI JSONL")->required();
  format_test_cmd->add_option("--split", fe_split, "train | test | all")
      ->check(CLI::IsMember({"train", "test", "all"}))
      ->capture_default_str();
  fe_cat.add_to(format_test_cmd);
  format_test_cmd->callback([&] {
    action = [&] {
      const auto ds = select_split(read_jsonl(std::filesystem::path(fe_in)), fe_split);
      write_nli_jsonl(format_nli_testset(ds, fe_cat.load(ds)), std::filesystem::path(fe_out));
    };
  });

  // concat
  std::string cc_native, cc_out;
  std::vector<std::string> cc_in;
  auto* concat_cmd = app.add_subcommand("concat", "merge native NLI and reformatted training sets, shuffled");
  concat_cmd->add_option("--native", cc_native, "native NLI JSONL (3-way labels are merged)");
  concat_cmd->add_option("--in", cc_in, "reformatted NLI JSONL files")->expected(1, -1);
  concat_cmd->add_option("--out", cc_out, "output NLI JSONL")->required();
  concat_cmd->callback([&] {
    action = [&] {
      NLIDataset native;
      if (!cc_native.empty()) native = read_nli_jsonl(std::filesystem::path(cc_native));
      std::vector<NLIDataset> parts;
      for (const auto& p : cc_in) parts.push_back(read_nli_jsonl(std::filesystem::path(p)));
      write_nli_jsonl(concat_train(native, parts, derive_seed(seed, "concat")), std::filesystem::path(cc_out));
    };
  });

  // classify
  std::string cl_in, cl_labels, cl_template = "This text is about {}", cl_out;
  bool cl_multi = false, cl_json = false;
  BackendOptions cl_backend;
  auto* classify_cmd = app.add_subcommand("classify", "zero-shot classification of arbitrary texts");
  classify_cmd->add_option("--in", cl_in, "JSONL with a \"text\" field per line")->required();
  classify_cmd->add_option("--labels", cl_labels, "comma-separated candidate labels")->required();
  classify_cmd->add_option("--template", cl_template, "hypothesis template")->capture_default_str();
  classify_cmd->add_flag("--multi-label", cl_multi, "score each label independently");
  classify_cmd->add_flag("--json", cl_json, "one JSON object per text");
  classify_cmd->add_option("--out", cl_out, "write results here instead of stdout");
  cl_backend.add_to(classify_cmd);
  classify_cmd->callback([&] {
    action = [&] {
      ClassificationRequest req;
      req.texts = read_texts(cl_in);
      req.candidate_labels = split_list(cl_labels);
      req.hypothesis_template = cl_template;
      req.multi_label = cl_multi;
      auto backend = cl_backend.make();
      const auto preds = classify(req, *backend, cl_backend.batch_size);
      cl_backend.save();

      std::ostringstream buf;
      for (std::size_t t = 0; t < preds.size(); ++t) {
        if (cl_json) {
          buf << prediction_to_json(preds[t], req.texts[t], req.candidate_labels).dump() << '\n';
          continue;
        }
        buf << req.texts[t] << '\n';
        for (auto i : ranked(preds[t]))
          buf << "  " << std::left << std::setw(24) << req.candidate_labels[i] << ' ' << std::fixed
              << std::setprecision(4) << preds[t].class_probs[i] << '\n';
      }
      if (cl_out.empty()) out << buf.str();
      else open_output(cl_out) << buf.str();
    };
  });

  // evaluate
  std::string ev_in, ev_dataset, ev_split = "test", ev_out, ev_dataset_id, ev_run_id;
  std::size_t ev_classes = 0;
  CatalogOptions ev_cat;
  BackendOptions ev_backend;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "balanced accuracy of one dataset's test set");
  auto* ev_in_opt = evaluate_cmd->add_option("--in", ev_in, "formatted NLI test JSONL");
  auto* ev_ds_opt = evaluate_cmd->add_option("--dataset", ev_dataset, "labeled dataset JSONL (formatted on the fly)");
  ev_in_opt->excludes(ev_ds_opt);
  evaluate_cmd->add_option("--split", ev_split, "split of --dataset to evaluate")
      ->check(CLI::IsMember({"train", "test", "all"}))
      ->capture_default_str();
  evaluate_cmd->add_option("--out", ev_out, "report JSON (stdout when omitted)");
  evaluate_cmd->add_option("--dataset-id", ev_dataset_id, "dataset id recorded in the report");
  evaluate_cmd->add_option("--run-id", ev_run_id, "run id recorded in the report (e.g. heldout-X)");
  evaluate_cmd->add_option("--classes", ev_classes, "class count when the test file does not cover all classes");
  ev_cat.add_to(evaluate_cmd);
  ev_backend.add_to(evaluate_cmd);
  evaluate_cmd->callback([&] {
    action = [&] {
      auto backend = ev_backend.make();
      EvalReport rep;
      if (!ev_dataset.empty()) {
        const auto ds = select_split(read_jsonl(std::filesystem::path(ev_dataset)), ev_split);
        rep = evaluate_dataset(ds, ev_cat.load(ds), *backend);
      } else if (!ev_in.empty()) {
        const auto id = ev_dataset_id.empty() ? std::filesystem::path(ev_in).stem().string() : ev_dataset_id;
        rep = evaluate_nli_testset(read_nli_jsonl(std::filesystem::path(ev_in)), *backend, id,
                                   ev_classes ? std::optional<std::size_t>(ev_classes) : std::nullopt);
      } else {
        throw UsageError("evaluate needs --in or --dataset");
      }
      ev_backend.save();
      if (!ev_dataset_id.empty()) rep.dataset_id = ev_dataset_id;
      rep.run_id = ev_run_id;
      if (ev_out.empty()) out << rep.to_json().dump(2) << '\n';
      else write_json_file(rep.to_json(), ev_out);
    };
  });

  // heldout-plan
  std::string hp_datasets, hp_nli, hp_out, hp_out_dir;
  auto* plan_cmd = app.add_subcommand("heldout-plan", "training/evaluation jobs for held-out generalization");
  plan_cmd->add_option("--datasets", hp_datasets, "comma-separated classification dataset ids")->required();
  plan_cmd->add_option("--nli", hp_nli, "comma-separated NLI dataset ids");
  plan_cmd->add_option("--out", hp_out, "all RunSpecs as one JSON array");
  plan_cmd->add_option("--out-dir", hp_out_dir, "one <run_id>.json job file per run");
  plan_cmd->callback([&] {
    action = [&] {
      const auto runs = plan_heldout_runs(split_list(hp_datasets), split_list(hp_nli));
      ordered_json all = ordered_json::array();
      for (const auto& r : runs) {
        all.push_back(r.to_json());
        if (!hp_out_dir.empty()) write_json_file(r.to_json(), std::filesystem::path(hp_out_dir) / (r.run_id + ".json"));
      }
      if (!hp_out.empty()) write_json_file(all, hp_out);
      if (hp_out.empty() && hp_out_dir.empty()) out << all.dump(2) << '\n';
    };
  });

  // aggregate
  std::vector<std::string> ag_in;
  std::string ag_out;
  auto* aggregate_cmd = app.add_subcommand("aggregate", "summarize reports across runs");
  aggregate_cmd->add_option("--in", ag_in, "EvalReport JSON files (run_id set)")->required()->expected(1, -1);
  aggregate_cmd->add_option("--out", ag_out, "summary JSON (stdout when omitted)");
  aggregate_cmd->callback([&] {
    action = [&] {
      std::vector<EvalReport> reports;
      for (const auto& p : ag_in) reports.push_back(EvalReport::from_json(read_json_file(p)));
      const auto summary = aggregate_reports(reports);
      if (ag_out.empty()) out << summary.to_json().dump(2) << '\n';
      else write_json_file(summary.to_json(), ag_out);
    };
  });

  // report
  std::string rp_summary, rp_out_dir;
  auto* report_cmd = app.add_subcommand("report", "CSV/Markdown tables and an SVG chart from a summary");
  report_cmd->add_option("--summary", rp_summary, "summary JSON from aggregate")->required();
  report_cmd->add_option("--out-dir", rp_out_dir, "output directory")->required();
  report_cmd->callback([&] {
    action = [&] { write_reports(Summary::from_json(read_json_file(rp_summary)), rp_out_dir); };
  });

  if (args.empty()) {
    err << app.help();
    return 2;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << '\n' << app.help();
    return 2;
  }

  try {
    if (action) action();
    return 0;
  } catch (const UsageError& e) {
    err << "entail: usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "entail: error: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "entail: error: " << e.what() << '\n';
    return 1;
  }
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace entail::cli
