#include <map>

#include <gtest/gtest.h>

#include <entail/verbalizer.hpp>

#include "test_util.hpp"

namespace entail {
namespace {

LabeledDataset named(const std::vector<std::string>& names) {
  LabeledDataset ds{"named", {}, {}};
  for (std::size_t c = 0; c < names.size(); ++c) {
    ds.classes.push_back({static_cast<int>(c), names[c]});
    ds.examples.push_back({"text " + std::to_string(c), names[c], static_cast<int>(c), "named", Split::train});
  }
  return ds;
}

TEST(RenderTemplate, FillsPlaceholder) {
  EXPECT_EQ(render_template("This text is about {}", "politics"), "This text is about politics");
  EXPECT_EQ(render_template("{}", "politics"), "politics");
  EXPECT_EQ(render_template("{} first", "x"), "x first");
  EXPECT_EQ(render_template("The label is {}.", "{odd}"), "The label is {odd}.");
}

TEST(RenderTemplate, RequiresExactlyOnePlaceholder) {
  EXPECT_THROW(render_template("no placeholder", "x"), UsageError);
  EXPECT_THROW(render_template("{} and {}", "x"), UsageError);
  EXPECT_THROW(render_template("", "x"), UsageError);
}

TEST(BuildCatalog, FromTemplate) {
  const auto cat = build_catalog(named({"politics", "sports"}), "This text is about {}");
  EXPECT_EQ(cat.primary(0), "This text is about politics");
  EXPECT_EQ(cat.primary(1), "This text is about sports");
}

TEST(BuildCatalog, ExplicitSentences) {
  const auto cat = build_catalog(named({"positive", "negative"}),
                                 {{"positive", {"This app review text expresses positive sentiment"}},
                                  {"negative", {"This app review text expresses negative sentiment"}}});
  EXPECT_EQ(cat.primary(0), "This app review text expresses positive sentiment");
  EXPECT_EQ(cat.primary(1), "This app review text expresses negative sentiment");

  const auto policy = build_catalog(named({"economy", "welfare"}),
                                    {{"economy", {"It is about economy, or technology, or infrastructure, or free market"}},
                                     {"welfare", {"It is about welfare, or education, or pensions"}}});
  EXPECT_EQ(policy.num_classes(), 2u);
}

TEST(BuildCatalog, MissingClassOrEmptyHypothesis) {
  EXPECT_THROW(build_catalog(named({"a", "b"}), {{"a", {"about a"}}}), DataError);
  EXPECT_THROW(build_catalog(named({"a", "b"}), {{"a", {"about a"}}, {"b", {"  "}}}), DataError);
  EXPECT_THROW(build_catalog(named({"a", "b"}), {{"a", {"same"}}, {"b", {"same"}}}), DataError);
  EXPECT_THROW(build_catalog(named({"a", "b"}), {{"a", {"about a"}}, {"b", {}}}), DataError);
}

TEST(SampleIncorrect, TwoClassesAlwaysTheOther) {
  const auto cat = build_catalog(named({"a", "b"}), "about {}");
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto [hyp, cls] = sample_incorrect_hypothesis(cat, 0, rng);
    ASSERT_EQ(cls, 1);
    ASSERT_EQ(hyp, "about b");
  }
}

TEST(SampleIncorrect, UniformOverOtherClasses) {
  const auto cat = build_catalog(named({"a", "b", "c"}), "about {}");
  Rng rng(2);
  std::map<int, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto [hyp, cls] = sample_incorrect_hypothesis(cat, 0, rng);
    ASSERT_NE(cls, 0);
    ++counts[cls];
  }
  EXPECT_NEAR(counts[1] / static_cast<double>(draws), 0.5, 0.02);
  EXPECT_NEAR(counts[2] / static_cast<double>(draws), 0.5, 0.02);
}

TEST(SampleIncorrect, NeverTheCorrectClass) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> names;
    const auto k = 2 + rng.below(8);
    for (std::uint64_t c = 0; c < k; ++c) names.push_back("n" + std::to_string(c));
    const auto cat = build_catalog(named(names), "topic {}");
    const auto correct = static_cast<int>(rng.below(k));
    const auto [hyp, cls] = sample_incorrect_hypothesis(cat, correct, rng);
    ASSERT_NE(cls, correct);
    ASSERT_EQ(hyp, cat.primary(cls));
  }
}

TEST(SampleIncorrect, SingleClassIsAnError) {
  HypothesisCatalog cat{"one", {{0, {"only"}}}};
  Rng rng(4);
  EXPECT_THROW(sample_incorrect_hypothesis(cat, 0, rng), DataError);
}

TEST(CatalogJson, RoundTripAndErrors) {
  const HypothesisCatalog cat{"d", {{0, {"h0", "h0b"}}, {3, {"h3"}}}};
  EXPECT_EQ(catalog_from_json(json::parse(catalog_to_json(cat).dump())), cat);
  EXPECT_THROW(catalog_from_json(json::parse(R"({"dataset_id":"d","entries":{"x":["h"]}})")), DataError);
  EXPECT_THROW(catalog_from_json(json::parse(R"({"dataset_id":"d","entries":{"0":["h"]},"extra":1})")), DataError);
  EXPECT_THROW(catalog_from_json(json::parse(R"({"dataset_id":"d","entries":{"0":[""]}})")), DataError);
}

TEST(CatalogJson, BundledCatalogCoversCorpus) {
  const auto cat = read_catalog(std::filesystem::path(ENTAIL_DATA_DIR) / "synthetic_catalog.json");
  EXPECT_EQ(cat.num_classes(), 3u);
  EXPECT_EQ(cat.primary(1), "This news text is about politics");
}

}  // namespace
}  // namespace entail
