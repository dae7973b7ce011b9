#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "ilr/bench.hpp"
#include "ilr/error.hpp"
#include "test_util.hpp"

namespace ilr {
namespace {

TEST(Complexity, DescriptionOverImageRatio) {
  for (double d : {1.0, 32.0, 4096.0}) {
    EXPECT_EQ(complexity_estimate(160, 10, d) / complexity_estimate(1, 10, d), 25600.0);
  }
  EXPECT_EQ(complexity_estimate(2, 3, 4), 144.0);
}

TEST(Overlap, DerangementHasNoFixedPoints) {
  for (std::size_t n : {2, 3, 10, 151}) {
    const auto p = derangement(n, n);
    std::set<std::size_t> seen(p.begin(), p.end());
    EXPECT_EQ(seen.size(), n);
    EXPECT_EQ(*seen.rbegin(), n - 1);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NE(p[i], i);
    EXPECT_EQ(p, derangement(n, n));
  }
  EXPECT_THROW(derangement(1, 0), Error);
}

TEST(Overlap, IdenticalMatricesGiveExactlyOne) {
  const auto w = test::small_world();
  const auto& img = w.data.features.get(FeatureType::Img);
  FeatureMatrix copy(FeatureType::JointText, img.dim());
  for (const auto& id : img.ids()) copy.add_row(id, img.row(id));
  const auto r = overlap_report(img, copy, 3);
  EXPECT_EQ(r.positive.mean, 1.0);
  EXPECT_EQ(r.positive.n, img.rows());
  EXPECT_LT(r.negative.mean, 0.9);
  EXPECT_EQ(r.positive.hist.total(), img.rows());
  EXPECT_EQ(r.positive.hist.counts.back(), img.rows());
}

TEST(Overlap, SyntheticGapAndOracle) {
  const auto w = test::small_world(20, 60);
  const auto& img = w.data.features.get(FeatureType::Img);
  const auto& txt = w.data.features.get(FeatureType::JointText);
  const auto r = overlap_report(img, txt, 5);
  // Recompute both means directly.
  const auto pi = derangement(img.rows(), 5);
  auto cos = [](std::span<const float> a, std::span<const float> b) {
    double d = 0, na = 0, nb = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      d += double(a[j]) * b[j];
      na += double(a[j]) * a[j];
      nb += double(b[j]) * b[j];
    }
    return d / std::sqrt(na * nb);
  };
  double pos = 0, neg = 0;
  for (std::size_t i = 0; i < img.rows(); ++i) {
    pos += cos(img.row(i), txt.row(img.ids()[i]));
    neg += cos(img.row(i), txt.row(img.ids()[pi[i]]));
  }
  EXPECT_NEAR(r.positive.mean, pos / img.rows(), 1e-12);
  EXPECT_NEAR(r.negative.mean, neg / img.rows(), 1e-12);
  EXPECT_GE(r.positive.mean - r.negative.mean, 0.2);
}

TEST(Overlap, ZeroRowsExcludedAndDimsChecked) {
  FeatureMatrix a(FeatureType::Img, 2);
  FeatureMatrix b(FeatureType::JointText, 2);
  const float z[] = {0, 0};
  const float x[] = {1, 0};
  const float y[] = {0, 1};
  a.add_row("p", x);
  a.add_row("q", y);
  a.add_row("r", z);
  b.add_row("p", x);
  b.add_row("q", y);
  b.add_row("r", x);
  const auto rep = overlap_report(a, b, 1);
  EXPECT_EQ(rep.excluded, 1u);
  EXPECT_EQ(rep.positive.mean, 1.0);
  EXPECT_EQ(rep.negative.mean, 0.0);
  FeatureMatrix c(FeatureType::JointText, 3);
  EXPECT_THROW(overlap_report(a, c, 1), Error);
}

TEST(Histogram, BinsByWidth) {
  Histogram h;
  h.add(-1.0);
  h.add(-0.96);
  h.add(0.0);
  h.add(0.999);
  EXPECT_EQ(h.total(), 4u);
  EXPECT_EQ(h.counts[0], 2u);
  EXPECT_EQ(h.counts[20], 1u);
  EXPECT_EQ(h.counts[39], 1u);
}

TEST(Tokens, DescriptionPromptsDominateImagePrompts) {
  const auto w = test::small_world(30, 40);
  const auto img = token_histogram(w.split, w.vocab, w.data.catalog, Mode::Image);
  const auto desc = token_histogram(w.split, w.vocab, w.data.catalog, Mode::Description);
  ASSERT_EQ(img.lengths.size(), desc.lengths.size());
  for (std::size_t i = 0; i < img.lengths.size(); ++i) {
    EXPECT_GE(desc.lengths[i], 10 * img.lengths[i]);
  }
  std::size_t binned = 0;
  for (const auto& [start, n] : img.bins) {
    EXPECT_EQ(start % 50, 0u);
    binned += n;
  }
  EXPECT_EQ(binned, img.lengths.size());
  EXPECT_GT(desc.mean(), img.mean());
  EXPECT_THROW(token_histogram(w.split, w.vocab, w.data.catalog, Mode::Image, 0), Error);
}

TEST(Timing, TokenTotalsAreDeterministicAndGrouped) {
  const auto w = test::small_world(40, 60);
  const std::vector<Mode> modes{Mode::Image, Mode::Description};
  const auto a = timing_bench(w.split, w.vocab, w.data.catalog, {5, 10, 20}, 4, modes, 1);
  const auto b = timing_bench(w.split, w.vocab, w.data.catalog, {5, 10, 20}, 4, modes, 1);
  ASSERT_EQ(a.size(), b.size());
  ASSERT_FALSE(a.empty());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].token_total, b[i].token_total);
    EXPECT_LE(a[i].users, 4u);
    EXPECT_GT(a[i].users, 0u);
  }
  // Rows alternate image/description per group; description needs far more tokens.
  for (std::size_t i = 0; i + 1 < a.size(); i += 2) {
    EXPECT_EQ(a[i].group, a[i + 1].group);
    EXPECT_GT(a[i + 1].token_total, 5 * a[i].token_total);
  }
  int calls = 0;
  const auto c = timing_bench(w.split, w.vocab, w.data.catalog, {5}, 3, {Mode::Image}, 1,
                              [&](Mode) -> Scorer {
                                return [&](const UserSplit&, const std::vector<std::string>&,
                                           const std::vector<std::string>& cands) {
                                  ++calls;
                                  return std::vector<double>(cands.size(), 0.0);
                                };
                              },
                              10);
  EXPECT_EQ(calls, static_cast<int>(c[0].users));
}

TEST(Sweep, RetainedItemsShrinkWithBudget) {
  const auto w = test::small_world(20, 40);
  EvalOptions o;
  o.n_negatives = 10;
  const auto rows = context_budget_sweep(
      w.split, w.vocab, w.data.catalog, Mode::Description, {kUnlimitedBudget, 1024, 256},
      [](std::size_t) { return random_scorer(1); }, o);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_GE(rows[0].mean_retained, rows[1].mean_retained);
  EXPECT_GE(rows[1].mean_retained, rows[2].mean_retained);
  EXPECT_LE(rows[2].max_retained, 1u);
  EXPECT_EQ(rows[0].report.hit, rows[2].report.hit);  // same scorer, same candidates
}

}  // namespace
}  // namespace ilr
