#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <gtest/gtest.h>

#include <entail/cleaner.hpp>

#include "oracles.hpp"
#include "test_util.hpp"

namespace entail {
namespace {

ProbabilityMatrix matrix(std::initializer_list<std::initializer_list<double>> rows) {
  ProbabilityMatrix p(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) p(i, j++) = v;
    ++i;
  }
  return p;
}

TEST(FindLabelIssues, FourExampleInstance) {
  const auto p = matrix({{0.9, 0.1}, {0.2, 0.8}, {0.2, 0.8}, {0.3, 0.7}});
  const std::vector<int> y{0, 0, 1, 1};
  const auto rep = find_label_issues(p, y);
  ASSERT_EQ(rep.thresholds.size(), 2u);
  EXPECT_NEAR(rep.thresholds[0], 0.55, 1e-12);
  EXPECT_NEAR(rep.thresholds[1], 0.75, 1e-12);
  ASSERT_EQ(rep.flagged.size(), 1u);
  EXPECT_EQ(rep.flagged[0].index, 1u);
  EXPECT_EQ(rep.flagged[0].suggested_label, 1);
  EXPECT_EQ(rep.confident_joint, (std::vector<std::vector<long>>{{1, 1}, {0, 1}}));
}

TEST(FindLabelIssues, OneHotAgreementFlagsNothing) {
  Rng rng(1);
  std::vector<int> y;
  ProbabilityMatrix p = ProbabilityMatrix::Zero(60, 3);
  for (int i = 0; i < 60; ++i) {
    y.push_back(i % 3);
    p(i, i % 3) = 1.0;
  }
  const auto rep = find_label_issues(p, y);
  EXPECT_TRUE(rep.flagged.empty());
  EXPECT_EQ(rep.issues_before_cap, 0u);
}

TEST(FindLabelIssues, UniformProbabilities) {
  ProbabilityMatrix p = ProbabilityMatrix::Constant(12, 3, 1.0 / 3);
  std::vector<int> y;
  for (int i = 0; i < 12; ++i) y.push_back(i % 3);
  // Every class is a candidate and the lowest index wins the tie, so every
  // example not labelled 0 is an issue.
  const auto uncapped = find_label_issues(p, y, 1.0);
  EXPECT_EQ(uncapped.issues_before_cap, 8u);
  const auto capped = find_label_issues(p, y, 0.5);
  EXPECT_EQ(capped.flagged.size(), 4u);
  EXPECT_EQ(capped.removed_fraction_per_class, (std::vector<double>{0.0, 0.5, 0.5}));
}

TEST(FindLabelIssues, EmptyClassHasInfiniteThreshold) {
  const auto p = matrix({{0.6, 0.3, 0.1}, {0.7, 0.2, 0.1}, {0.1, 0.8, 0.1}});
  const auto rep = find_label_issues(p, std::vector<int>{0, 0, 1});
  EXPECT_TRUE(std::isinf(rep.thresholds[2]));
  EXPECT_TRUE(rep.to_json()["thresholds"][2].is_null());
}

TEST(FindLabelIssues, RejectsSingleClass) {
  EXPECT_THROW(find_label_issues(ProbabilityMatrix::Ones(3, 1), std::vector<int>{0, 0, 0}), DataError);
}

TEST(FindLabelIssues, AgreesWithOracle) {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(40), k = 2 + rng.below(4);
    const bool coarse = rng.below(3) == 0;  // coarse values create ties
    std::vector<std::vector<double>> rows(n, std::vector<double>(k));
    std::vector<int> y;
    ProbabilityMatrix p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (auto& v : rows[i]) s += v = coarse ? static_cast<double>(1 + rng.below(4)) : rng.uniform() + 1e-3;
      for (std::size_t j = 0; j < k; ++j) {
        rows[i][j] /= s;
        p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
      }
      y.push_back(static_cast<int>(rng.below(k)));
    }
    const double frac = rng.below(4) == 0 ? 1.0 : rng.uniform();
    const auto expect = oracle::label_issues(rows, y, frac);
    const auto got = find_label_issues(p, y, frac);
    for (std::size_t j = 0; j < k; ++j) {
      if (std::isinf(expect.t[j])) {
        ASSERT_TRUE(std::isinf(got.thresholds[j]));
      } else {
        ASSERT_NEAR(got.thresholds[j], expect.t[j], 1e-12);
      }
    }
    ASSERT_EQ(got.confident_joint, expect.joint) << "trial " << trial;
    std::vector<std::size_t> flagged;
    for (const auto& f : got.flagged) flagged.push_back(f.index);
    std::sort(flagged.begin(), flagged.end());
    ASSERT_EQ(flagged, expect.flagged) << "trial " << trial;
    for (std::size_t i = 1; i < got.flagged.size(); ++i)
      ASSERT_LE(got.flagged[i - 1].self_confidence, got.flagged[i].self_confidence);
  }
}

// Texts drawn from a class-specific vocabulary; `flip` of them get a wrong
// label.
struct Planted {
  LabeledDataset ds;
  std::set<std::size_t> flipped;
};

Planted planted_noise(std::size_t n, std::size_t k, double flip, std::uint64_t seed) {
  Rng rng(seed);
  Planted out{{"planted", {}, {}}, {}};
  for (std::size_t c = 0; c < k; ++c) out.ds.classes.push_back({static_cast<int>(c), "c" + std::to_string(c)});
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(std::span(order));
  const auto n_flip = static_cast<std::size_t>(std::lround(flip * static_cast<double>(n)));
  out.flipped.insert(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_flip));
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = i % k;
    std::string text = "doc" + std::to_string(i);
    for (int w = 0; w < 8; ++w) text += " k" + std::to_string(c) + "w" + std::to_string(rng.below(15));
    for (int w = 0; w < 3; ++w) text += " common" + std::to_string(rng.below(10));
    auto label = static_cast<int>(c);
    if (out.flipped.count(i)) label = static_cast<int>((c + 1 + rng.below(k - 1)) % k);
    out.ds.examples.push_back({text, "c" + std::to_string(label), label, "planted", Split::train});
  }
  return out;
}

TEST(Clean, RecoversPlantedNoise) {
  const auto p = planted_noise(200, 2, 0.10, 5);
  CleanConfig cfg;
  cfg.seed = 42;
  const auto result = clean(p.ds, cfg);
  std::size_t hit = 0, false_pos = 0;
  for (const auto& f : result.report.flagged) (p.flipped.count(f.index) ? hit : false_pos)++;
  EXPECT_GE(static_cast<double>(hit) / static_cast<double>(p.flipped.size()), 0.70);
  EXPECT_LE(static_cast<double>(false_pos) / static_cast<double>(200 - p.flipped.size()), 0.05);
  EXPECT_EQ(result.cleaned.examples.size(), 200 - result.report.flagged.size());
}

TEST(Clean, NoiseFreeDataLosesNothing) {
  const auto p = planted_noise(120, 3, 0.0, 6);
  CleanConfig cfg;
  cfg.seed = 1;
  const auto result = clean(p.ds, cfg);
  EXPECT_TRUE(result.report.flagged.empty());
  EXPECT_EQ(result.cleaned, p.ds);
}

TEST(Clean, SkipReturnsInputUnchanged) {
  const auto p = planted_noise(50, 2, 0.2, 7);
  CleanConfig cfg;
  cfg.skip = true;
  const auto result = clean(p.ds, cfg);
  EXPECT_TRUE(result.report.skipped);
  EXPECT_EQ(result.cleaned, p.ds);
}

TEST(Clean, Deterministic) {
  const auto p = planted_noise(90, 3, 0.15, 8);
  CleanConfig cfg;
  cfg.seed = 3;
  const auto a = clean(p.ds, cfg), b = clean(p.ds, cfg);
  EXPECT_EQ(a.cleaned, b.cleaned);
  EXPECT_EQ(a.report.to_json().dump(), b.report.to_json().dump());
}

TEST(Clean, RejectsSingleClassDataset) {
  LabeledDataset ds{"one", {{0, "only"}}, {{"x", "only", 0, "one", Split::train}}};
  EXPECT_THROW(clean(ds, {}), DataError);
}

TEST(StratifiedFolds, BalancedAndExcludesSingletons) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(5));
    const int folds = 2 + static_cast<int>(rng.below(5));
    std::vector<int> y;
    const auto n = rng.below(80);
    for (std::uint64_t i = 0; i < n; ++i) y.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(k))));
    const auto fold = stratified_folds(y, k, folds, rng.next());
    std::vector<std::size_t> size(static_cast<std::size_t>(k), 0);
    for (int v : y) ++size[static_cast<std::size_t>(v)];
    std::vector<std::vector<int>> per_class(static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(folds), 0));
    std::vector<int> total(static_cast<std::size_t>(folds), 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (size[static_cast<std::size_t>(y[i])] < 2) {
        ASSERT_EQ(fold[i], -1);
        continue;
      }
      ASSERT_GE(fold[i], 0);
      ASSERT_LT(fold[i], folds);
      ++per_class[static_cast<std::size_t>(y[i])][static_cast<std::size_t>(fold[i])];
      ++total[static_cast<std::size_t>(fold[i])];
    }
    for (const auto& row : per_class)
      ASSERT_LE(*std::max_element(row.begin(), row.end()) - *std::min_element(row.begin(), row.end()), 1);
    ASSERT_LE(*std::max_element(total.begin(), total.end()) - *std::min_element(total.begin(), total.end()), 1);
  }
}

TEST(OutOfFold, EveryScoredExampleOnce) {
  Rng rng(10);
  FeatureMatrix x(31, 4);
  std::vector<int> y;
  for (Eigen::Index i = 0; i < 31; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) x(i, j) = rng.uniform();
    y.push_back(i == 30 ? 2 : static_cast<int>(i % 2));
  }
  const auto oof = out_of_fold_probs(x, y, 3, {5, 1, {}});
  EXPECT_EQ(oof.excluded, (std::vector<std::size_t>{30}));
  EXPECT_EQ(oof.rows.size(), 30u);
  EXPECT_EQ(std::set<std::size_t>(oof.rows.begin(), oof.rows.end()).size(), 30u);
  for (Eigen::Index r = 0; r < oof.probs.rows(); ++r) EXPECT_NEAR(oof.probs.row(r).sum(), 1.0, 1e-9);
  EXPECT_FALSE(oof.warnings.empty());
}

TEST(OutOfFold, ShrinksFoldsForSmallClasses) {
  FeatureMatrix x = FeatureMatrix::Identity(6, 6);
  const std::vector<int> y{0, 0, 0, 1, 1, 1};
  const auto oof = out_of_fold_probs(x, y, 2, {5, 0, {}});
  EXPECT_EQ(oof.folds, 3);
}

TEST(OutOfFold, DeterministicAcrossRuns) {
  const auto p = planted_noise(80, 4, 0.1, 11);
  const auto x = HashedTfidfEmbedder().embed(p.ds.texts());
  const auto y = p.ds.labels();
  const auto a = out_of_fold_probs(x, y, 4, {5, 77, {}});
  const auto b = out_of_fold_probs(x, y, 4, {5, 77, {}});
  EXPECT_EQ(a.probs, b.probs);
}

TEST(LargestRemainder, TiesGoToLowerIndex) {
  EXPECT_EQ(largest_remainder(std::vector<std::size_t>(12, 500), 5000),
            (std::vector<std::size_t>{417, 417, 417, 417, 417, 417, 417, 417, 416, 416, 416, 416}));
  EXPECT_EQ(largest_remainder({1, 1, 1}, 2), (std::vector<std::size_t>{1, 1, 0}));
  EXPECT_EQ(largest_remainder({0, 0}, 3), (std::vector<std::size_t>{0, 0}));
}

TEST(LargestRemainder, Properties) {
  Rng rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::size_t> sizes(1 + rng.below(10));
    std::size_t sum = 0;
    for (auto& s : sizes) sum += s = rng.below(3000);
    if (sum == 0) continue;
    const auto total = rng.below(sum + 1);
    const auto q = largest_remainder(sizes, total);
    std::size_t got = 0;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
      const double exact = static_cast<double>(total) * static_cast<double>(sizes[c]) / static_cast<double>(sum);
      ASSERT_LE(std::abs(static_cast<double>(q[c]) - exact), 1.0);
      ASSERT_LE(q[c], sizes[c]);
      got += q[c];
    }
    ASSERT_EQ(got, total);
  }
}

LabeledDataset sized(const std::vector<std::size_t>& sizes) {
  LabeledDataset ds{"sized", {}, {}};
  std::size_t n = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    ds.classes.push_back({static_cast<int>(c), "c" + std::to_string(c)});
    for (std::size_t i = 0; i < sizes[c]; ++i)
      ds.examples.push_back({"t" + std::to_string(n++), "c" + std::to_string(c), static_cast<int>(c), "sized", Split::train});
  }
  return ds;
}

TEST(Downsample, PerClassCap) {
  const auto out = downsample(sized({1000, 1000, 1000}), 500, 5000, 1);
  EXPECT_EQ(out.class_sizes(), (std::vector<std::size_t>{500, 500, 500}));
}

TEST(Downsample, PerDatasetCap) {
  const auto out = downsample(sized(std::vector<std::size_t>(12, 500)), 500, 5000, 1);
  EXPECT_EQ(out.examples.size(), 5000u);
  for (auto s : out.class_sizes()) EXPECT_TRUE(s == 416 || s == 417) << s;
}

TEST(Downsample, UnderCapIsNoOp) {
  const auto ds = sized({10, 3, 7});
  EXPECT_EQ(downsample(ds, 500, 5000, 9), ds);
}

TEST(Downsample, Properties) {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> sizes(1 + rng.below(6));
    for (auto& s : sizes) s = rng.below(4) == 0 ? 1 : rng.below(300);
    const auto ds = sized(sizes);
    const auto per_class = 1 + rng.below(200), per_dataset = 1 + rng.below(600);
    const auto seed = rng.next();
    const auto out = downsample(ds, per_class, per_dataset, seed);
    std::size_t capped = 0;
    for (auto s : sizes) capped += std::min<std::size_t>(s, per_class);
    ASSERT_EQ(out.examples.size(), std::min<std::size_t>(capped, per_dataset));
    for (auto s : out.class_sizes()) ASSERT_LE(s, per_class);
    // a subsequence of the input
    std::size_t pos = 0;
    for (const auto& ex : out.examples) {
      while (pos < ds.examples.size() && ds.examples[pos].text != ex.text) ++pos;
      ASSERT_LT(pos, ds.examples.size());
      ASSERT_EQ(ds.examples[pos], ex);
    }
    ASSERT_EQ(out, downsample(ds, per_class, per_dataset, seed));
  }
}

TEST(Downsample, RejectsZeroCaps) {
  EXPECT_THROW(downsample(sized({3}), 0, 10, 1), UsageError);
  EXPECT_THROW(downsample(sized({3}), 10, 0, 1), UsageError);
}

}  // namespace
}  // namespace entail
