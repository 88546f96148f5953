#include <gtest/gtest.h>

#include "pipeline.hpp"
#include "test_util.hpp"

namespace entail {
namespace {

using testing::cli_run;

TEST(Cli, NoArgumentsIsUsageError) {
  const auto r = cli_run({});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("harmonize"), std::string::npos);
}

TEST(Cli, UnknownFlagOrCommand) {
  EXPECT_EQ(cli_run({"harmonize", "--bogus"}).code, 2);
  EXPECT_EQ(cli_run({"frobnicate"}).code, 2);
  EXPECT_EQ(cli_run({"downsample", "--in", "x"}).code, 2);  // --out missing
}

TEST(Cli, Help) {
  const auto r = cli_run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("classify"), std::string::npos);
}

TEST(Cli, MissingInputIsDataError) {
  testing::TempDir dir;
  const auto r = cli_run({"downsample", "--in", (dir / "absent.jsonl").string(), "--out", (dir / "o.jsonl").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("absent.jsonl"), std::string::npos) << r.err;
}

TEST(Cli, BadTemplateIsUsageError) {
  testing::TempDir dir;
  testing::spit(dir / "in.jsonl", "{\"text\":\"hello\"}\n");
  const auto r = cli_run({"classify", "--in", (dir / "in.jsonl").string(), "--labels", "a,b", "--template", "nothing",
                          "--backend", "mock"});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, CatalogAndTemplateExclusive) {
  EXPECT_EQ(cli_run({"format-test", "--in", "a", "--out", "b", "--catalog", "c", "--template", "{}"}).code, 2);
}

TEST(Cli, PipelineOnBundledCorpus) {
  testing::TempDir dir;
  const auto r = testing::run_pipeline(dir.path());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = EvalReport::from_json(read_json_file(dir / "report.json"));
  EXPECT_EQ(rep.balanced_accuracy, 1.0);
  EXPECT_EQ(rep.num_classes, 3u);
  EXPECT_GT(rep.n_texts, 0u);
  const auto ingest = read_json_file(dir / "ingest.json");
  EXPECT_EQ(ingest["rows_in"], 125);
}

TEST(Cli, PipelineIsByteReproducible) {
  testing::TempDir a, b, c;
  ASSERT_EQ(testing::run_pipeline(a.path()).code, 0);
  ASSERT_EQ(testing::run_pipeline(b.path()).code, 0);
  for (const auto& f : testing::pipeline_outputs())
    EXPECT_EQ(testing::slurp(a / f), testing::slurp(b / f)) << f;
  ASSERT_EQ(testing::run_pipeline(c.path(), "7").code, 0);
  EXPECT_NE(testing::slurp(a / "train.nli.jsonl"), testing::slurp(c / "train.nli.jsonl"));
}

TEST(Cli, ConfigFileSetsDefaults) {
  testing::TempDir dir;
  ASSERT_EQ(testing::run_pipeline(dir.path()).code, 0);
  testing::spit(dir / "cfg.json", R"({"seed": 3, "downsample": {"per-class": 5}})");
  const auto in = (dir / "ds.jsonl").string();
  ASSERT_EQ(cli_run({"--config", (dir / "cfg.json").string(), "downsample", "--in", in, "--out",
                     (dir / "five.jsonl").string()})
                .code,
            0);
  EXPECT_EQ(read_jsonl(dir / "five.jsonl").class_sizes(), (std::vector<std::size_t>{5, 5, 5}));
  ASSERT_EQ(cli_run({"--config", (dir / "cfg.json").string(), "downsample", "--in", in, "--out",
                     (dir / "six.jsonl").string(), "--per-class", "6"})
                .code,
            0);
  EXPECT_EQ(read_jsonl(dir / "six.jsonl").class_sizes(), (std::vector<std::size_t>{6, 6, 6}));

  testing::spit(dir / "bad.json", R"({"downsample": {"per-klass": 5}})");
  EXPECT_EQ(cli_run({"--config", (dir / "bad.json").string(), "downsample", "--in", in, "--out",
                     (dir / "x.jsonl").string()})
                .code,
            2);
}

TEST(Cli, ClassifyJson) {
  testing::TempDir dir;
  testing::spit(dir / "in.jsonl", "{\"text\":\"stocks fell\"}\n{\"text\":\"rain tomorrow\"}\n");
  testing::spit(dir / "table.json", R"([
    {"premise":"stocks fell","hypothesis":"This text is about finance","entailment":3,"not_entailment":0},
    {"premise":"stocks fell","hypothesis":"This text is about weather","entailment":-1,"not_entailment":0},
    {"premise":"rain tomorrow","hypothesis":"This text is about finance","entailment":0,"not_entailment":0},
    {"premise":"rain tomorrow","hypothesis":"This text is about weather","entailment":2,"not_entailment":0}])");
  const auto r = cli_run({"classify", "--in", (dir / "in.jsonl").string(), "--labels", "weather,finance", "--json",
                          "--backend", "mock:table=" + (dir / "table.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string first, second;
  std::getline(lines, first);
  std::getline(lines, second);
  const auto j1 = json::parse(first), j2 = json::parse(second);
  EXPECT_EQ(j1["predicted"], "finance");
  EXPECT_EQ(j1["labels"][0], "finance");
  EXPECT_NEAR(j1["scores"][0].get<double>(), 1.0 / (1.0 + std::exp(-4.0)), 1e-12);
  EXPECT_EQ(j2["predicted"], "weather");
}

TEST(Cli, RecordThenReplay) {
  testing::TempDir dir;
  ASSERT_EQ(testing::run_pipeline(dir.path()).code, 0);
  const auto test = (dir / "test.nli.jsonl").string();
  ASSERT_EQ(cli_run({"evaluate", "--in", test, "--backend", "mock:hash", "--record", (dir / "scores.json").string(),
                     "--out", (dir / "live.json").string()})
                .code,
            0);
  ASSERT_EQ(cli_run({"evaluate", "--in", test, "--backend", "file:" + (dir / "scores.json").string(), "--out",
                     (dir / "replay.json").string()})
                .code,
            0);
  EXPECT_EQ(testing::slurp(dir / "live.json"), testing::slurp(dir / "replay.json"));
}

TEST(Cli, EvaluateLabeledDatasetDirectly) {
  testing::TempDir dir;
  ASSERT_EQ(testing::run_pipeline(dir.path()).code, 0);
  const auto small = (dir / "small.jsonl").string();
  const auto r = cli_run({"evaluate", "--dataset", small, "--template", "This text is about {}", "--backend",
                          "mock:inverted=" + small});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["balanced_accuracy"], 0.0);
}

TEST(Cli, HeldoutPlanFiles) {
  testing::TempDir dir;
  std::string datasets;
  for (int i = 0; i < 28; ++i) datasets += (i ? "," : "") + std::string("ds") + std::to_string(i);
  const auto r = cli_run({"heldout-plan", "--datasets", datasets, "--nli", "mnli,anli,fever,wanli,ling",
                          "--out-dir", (dir / "jobs").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "jobs")) files += e.path().extension() == ".json";
  EXPECT_EQ(files, 30u);
  const auto job = read_json_file(dir / "jobs" / "heldout-ds3.json");
  EXPECT_EQ(job["eval_datasets"], json::array({"ds3"}));
  EXPECT_EQ(cli_run({"heldout-plan", "--datasets", "a,a"}).code, 2);
}

TEST(Cli, ConcatCountsRecords) {
  testing::TempDir dir;
  ASSERT_EQ(testing::run_pipeline(dir.path()).code, 0);
  testing::spit(dir / "native.jsonl", R"({"premise":"a","hypothesis":"b","label":"neutral"})"
                                      "\n");
  const auto train = (dir / "train.nli.jsonl").string();
  ASSERT_EQ(cli_run({"concat", "--native", (dir / "native.jsonl").string(), "--in", train, train, "--out",
                     (dir / "mix.jsonl").string()})
                .code,
            0);
  EXPECT_EQ(read_nli_jsonl(dir / "mix.jsonl").size(), 1 + 2 * read_nli_jsonl(std::filesystem::path(train)).size());
}

}  // namespace
}  // namespace entail
