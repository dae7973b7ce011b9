#include "ilr/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "ilr/error.hpp"
#include "ilr/random.hpp"

namespace ilr {

void Histogram::add(double x) {
  const auto b = static_cast<std::ptrdiff_t>(std::floor((x - start) / bin_width + 1e-9));
  const std::size_t idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(b, 0));
  if (idx >= counts.size()) {
    counts.resize(idx + 1, 0);
  }
  ++counts[idx];
}

std::size_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

namespace {

double norm(std::span<const float> v) {
  double s = 0;
  for (const float x : v) {
    s += static_cast<double>(x) * x;
  }
  return std::sqrt(s);
}

double cosine(std::span<const float> a, std::span<const float> b, double na, double nb) {
  double dot = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
  }
  return dot / (na * nb);
}

SampleStats stats_of(const std::vector<double>& xs) {
  SampleStats s;
  s.n = xs.size();
  s.hist.counts.assign(40, 0);
  if (xs.empty()) {
    return s;
  }
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0;
  for (const double x : xs) {
    ss += (x - s.mean) * (x - s.mean);
    // Cosines of exactly 1 belong in the top bin.
    s.hist.add(std::min(x, 1.0 - 1e-12));
  }
  s.stdev = std::sqrt(ss / static_cast<double>(xs.size()));
  return s;
}

}  // namespace

std::vector<std::size_t> derangement(std::size_t n, std::uint64_t seed) {
  if (n < 2) {
    fail(ErrorKind::Argument, "derangement needs at least two elements");
  }
  Rng rng(mix_seed(seed, "derangement"));
  std::vector<std::size_t> p(n);
  for (;;) {
    std::iota(p.begin(), p.end(), 0);
    shuffle(p, rng);
    bool fixed = false;
    for (std::size_t i = 0; i < n && !fixed; ++i) {
      fixed = p[i] == i;
    }
    if (!fixed) {
      return p;
    }
  }
}

OverlapReport overlap_report(const FeatureMatrix& img, const FeatureMatrix& joint_text,
                             std::uint64_t seed) {
  if (img.dim() != joint_text.dim()) {
    fail(ErrorKind::Argument, "overlap: image dim " + std::to_string(img.dim()) +
                                  " differs from joint-text dim " +
                                  std::to_string(joint_text.dim()));
  }
  OverlapReport rep;
  std::vector<std::span<const float>> a;
  std::vector<std::span<const float>> b;
  for (std::size_t r = 0; r < img.rows(); ++r) {
    const auto j = joint_text.row_index(img.ids()[r]);
    if (!j) {
      continue;
    }
    const auto x = img.row(r);
    const auto y = joint_text.row(*j);
    if (norm(x) == 0.0 || norm(y) == 0.0) {
      ++rep.excluded;
      continue;
    }
    a.push_back(x);
    b.push_back(y);
  }
  const auto pi = derangement(a.size(), seed);
  std::vector<double> pos;
  std::vector<double> neg;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pos.push_back(cosine(a[i], b[i], norm(a[i]), norm(b[i])));
    neg.push_back(cosine(a[i], b[pi[i]], norm(a[i]), norm(b[pi[i]])));
  }
  rep.positive = stats_of(pos);
  rep.negative = stats_of(neg);
  return rep;
}

std::vector<std::size_t> prompt_lengths(const DatasetSplit& split, const Vocabulary& vocab,
                                        const Catalog& catalog, Mode mode) {
  std::vector<std::size_t> out;
  out.reserve(split.users.size());
  for (const auto& u : split.users) {
    out.push_back(
        build_history_prompt(vocab, catalog, eval_prefix(u, EvalTarget::Test), mode,
                             kUnlimitedBudget)
            .size());
  }
  return out;
}

double TokenHistogram::mean() const {
  if (lengths.empty()) {
    return 0;
  }
  return static_cast<double>(std::accumulate(lengths.begin(), lengths.end(), std::size_t{0})) /
         static_cast<double>(lengths.size());
}

TokenHistogram token_histogram(const DatasetSplit& split, const Vocabulary& vocab,
                               const Catalog& catalog, Mode mode, std::size_t bin_width) {
  if (bin_width == 0) {
    fail(ErrorKind::Argument, "token_histogram: bin width must be positive");
  }
  TokenHistogram h;
  h.bin_width = bin_width;
  h.lengths = prompt_lengths(split, vocab, catalog, mode);
  for (const auto n : h.lengths) {
    ++h.bins[n / bin_width * bin_width];
  }
  return h;
}

double complexity_estimate(double per_item_tokens, double seq_len, double d) {
  const double n = per_item_tokens * seq_len;
  return n * n * d;
}

std::vector<TimingRow> timing_bench(const DatasetSplit& split, const Vocabulary& vocab,
                                    const Catalog& catalog,
                                    const std::vector<std::size_t>& lower_bounds,
                                    std::size_t group_size, const std::vector<Mode>& modes,
                                    std::uint64_t seed,
                                    const std::function<Scorer(Mode)>& scorer_for,
                                    std::size_t n_negatives) {
  std::map<int, std::vector<const UserSplit*>> groups;
  for (const auto& u : split.users) {
    if (const auto g = length_group(u.train.size() + 2, lower_bounds)) {
      groups[*g].push_back(&u);
    }
  }
  std::vector<TimingRow> rows;
  for (auto& [g, users] : groups) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(g)));
    shuffle(users, rng);
    users.resize(std::min(users.size(), group_size));
    for (const Mode mode : modes) {
      const Scorer scorer = scorer_for ? scorer_for(mode) : Scorer();
      TimingRow row;
      row.mode = mode;
      row.group = g;
      row.lower_bound = lower_bounds[static_cast<std::size_t>(g - 1)];
      row.users = users.size();
      const auto t0 = std::chrono::steady_clock::now();
      for (const auto* u : users) {
        const auto prefix = eval_prefix(*u, EvalTarget::Test);
        row.token_total += build_rec_plan(vocab, catalog, prefix, mode, kUnlimitedBudget).size();
        if (scorer) {
          scorer(*u, prefix, sample_candidates(*u, catalog, n_negatives, seed));
        }
      }
      row.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<SweepRow> context_budget_sweep(
    const DatasetSplit& split, const Vocabulary& vocab, const Catalog& catalog, Mode mode,
    const std::vector<std::size_t>& budgets,
    const std::function<Scorer(std::size_t budget)>& scorer_for, const EvalOptions& options) {
  std::vector<SweepRow> rows;
  for (const std::size_t budget : budgets) {
    SweepRow row;
    row.mode = mode;
    row.budget = budget;
    std::size_t kept = 0;
    for (const auto& u : split.users) {
      const auto plan =
          build_rec_plan(vocab, catalog, eval_prefix(u, options.target), mode, budget);
      kept += plan.retained_items;
      row.max_retained = std::max(row.max_retained, plan.retained_items);
    }
    row.mean_retained =
        split.users.empty() ? 0.0
                            : static_cast<double>(kept) / static_cast<double>(split.users.size());
    row.report = evaluate(split, catalog, scorer_for(budget), options).report;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ilr
