#pragma once

// Analyses that do not train anything: image/text overlap, prompt token
// counts, the attention cost proxy, timing and context-budget sweeps.

#include <map>
#include <string>
#include <vector>

#include "ilr/catalog.hpp"
#include "ilr/evaluation.hpp"
#include "ilr/feature_store.hpp"
#include "ilr/prompt.hpp"

namespace ilr {

struct Histogram {
  double bin_width = 0.05;
  double start = -1.0;
  std::vector<std::size_t> counts;

  void add(double x);
  std::size_t total() const;
};

struct SampleStats {
  double mean = 0;
  double stdev = 0;
  std::size_t n = 0;
  Histogram hist;
};

struct OverlapReport {
  SampleStats positive;   // cosine(img_i, text_i)
  SampleStats negative;   // cosine(img_i, text_pi(i)) for a derangement pi
  std::size_t excluded = 0;  // items dropped for a zero-norm row
};

// Items present in both matrices, in img row order. Needs at least two items.
OverlapReport overlap_report(const FeatureMatrix& img, const FeatureMatrix& joint_text,
                             std::uint64_t seed);

// Permutation of 0..n-1 without fixed points (n >= 2), uniform over shuffles
// retried until no fixed point remains.
std::vector<std::size_t> derangement(std::size_t n, std::uint64_t seed);

// Per-user history prompt length (train + validation items, unlimited budget).
std::vector<std::size_t> prompt_lengths(const DatasetSplit& split, const Vocabulary& vocab,
                                        const Catalog& catalog, Mode mode);

struct TokenHistogram {
  std::size_t bin_width = 0;
  std::map<std::size_t, std::size_t> bins;  // bin start -> count
  std::vector<std::size_t> lengths;         // one per user
  double mean() const;
};

TokenHistogram token_histogram(const DatasetSplit& split, const Vocabulary& vocab,
                               const Catalog& catalog, Mode mode, std::size_t bin_width = 50);

// (per_item_tokens * seq_len)^2 * d
double complexity_estimate(double per_item_tokens, double seq_len, double d);

struct TimingRow {
  Mode mode = Mode::Image;
  int group = 0;
  std::size_t lower_bound = 0;
  std::size_t users = 0;          // users timed (at most group_size)
  std::size_t token_total = 0;    // sum of rec-plan lengths over those users
  double seconds = 0;             // wall time to score the group
};

// Users grouped by |S_u| with length_group, up to group_size chosen per group
// by a seeded shuffle. Token totals are deterministic; seconds are not. When
// scorer_for is set, its scorer for each mode is run on the group's
// candidates inside the timed region.
std::vector<TimingRow> timing_bench(const DatasetSplit& split, const Vocabulary& vocab,
                                    const Catalog& catalog,
                                    const std::vector<std::size_t>& lower_bounds,
                                    std::size_t group_size, const std::vector<Mode>& modes,
                                    std::uint64_t seed,
                                    const std::function<Scorer(Mode)>& scorer_for = {},
                                    std::size_t n_negatives = 100);

struct SweepRow {
  Mode mode = Mode::Image;
  std::size_t budget = 0;
  MetricsReport report;
  double mean_retained = 0;   // item segments kept per rec prompt
  std::size_t max_retained = 0;
};

// Evaluation at each budget with the scorer built for that budget.
std::vector<SweepRow> context_budget_sweep(
    const DatasetSplit& split, const Vocabulary& vocab, const Catalog& catalog, Mode mode,
    const std::vector<std::size_t>& budgets,
    const std::function<Scorer(std::size_t budget)>& scorer_for, const EvalOptions& options);

}  // namespace ilr
