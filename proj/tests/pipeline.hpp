#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <entail/cli.hpp>

namespace entail::testing {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliResult cli_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// The bundled corpus through every stage into `work`, as data/pipeline.sh
// does. Returns the first failing stage's result, or the last one.
inline CliResult run_pipeline(const std::filesystem::path& work, const std::string& seed = "42") {
  const std::filesystem::path data = ENTAIL_DATA_DIR;
  const auto w = [&](const char* name) { return (work / name).string(); };
  const auto catalog = (data / "synthetic_catalog.json").string();
  const std::vector<std::vector<std::string>> stages{
      {"--seed", seed, "harmonize", "--spec", (data / "synthetic_spec.json").string(), "--out", w("ds.jsonl"),
       "--report", w("ingest.json")},
      {"--seed", seed, "clean", "--in", w("ds.jsonl"), "--out", w("clean.jsonl"), "--report", w("cleaning.json")},
      {"--seed", seed, "downsample", "--in", w("clean.jsonl"), "--out", w("small.jsonl")},
      {"--seed", seed, "format-train", "--in", w("small.jsonl"), "--catalog", catalog, "--out", w("train.nli.jsonl")},
      {"--seed", seed, "format-test", "--in", w("small.jsonl"), "--catalog", catalog, "--out", w("test.nli.jsonl")},
      {"--seed", seed, "evaluate", "--in", w("test.nli.jsonl"), "--dataset-id", "synthetic_topics", "--run-id", "all",
       "--backend", "mock:planted=" + w("small.jsonl"), "--out", w("report.json")},
      {"aggregate", "--in", w("report.json"), "--out", w("summary.json")},
      {"report", "--summary", w("summary.json"), "--out-dir", w("reports")},
  };
  CliResult last;
  for (const auto& args : stages) {
    last = cli_run(args);
    if (last.code != 0) {
      last.err = args[2 < args.size() ? 2 : 0] + ": " + last.err;
      return last;
    }
  }
  return last;
}

inline const std::vector<std::string>& pipeline_outputs() {
  static const std::vector<std::string> files{
      "ds.jsonl",        "ingest.json",    "clean.jsonl", "cleaning.json",       "small.jsonl",
      "train.nli.jsonl", "test.nli.jsonl", "report.json", "summary.json",        "reports/summary.csv",
      "reports/summary.md", "reports/summary.svg"};
  return files;
}

}  // namespace entail::testing
