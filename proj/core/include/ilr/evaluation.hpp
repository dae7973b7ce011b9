#pragma once

// Leave-one-out evaluation over 1 positive + n sampled negatives per user,
// with optional per-group breakdowns.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ilr/catalog.hpp"
#include "ilr/context.hpp"
#include "ilr/params.hpp"
#include "ilr/prompt.hpp"

namespace ilr {

enum class EvalTarget { Validation, Test };

// History shown to the model and the held-out item for a target:
// validation uses train -> validation, test uses train+validation -> test.
std::vector<std::string> eval_prefix(const UserSplit& user, EvalTarget target);
const std::string& eval_truth(const UserSplit& user, EvalTarget target);

// Scores for the candidates of one user, given the user's visible prefix.
using Scorer = std::function<std::vector<double>(
    const UserSplit& user, const std::vector<std::string>& prefix,
    const std::vector<std::string>& candidates)>;

struct EvalOptions {
  std::vector<std::size_t> ks{5, 10};
  std::size_t n_negatives = 100;
  std::uint64_t seed = 0;
  EvalTarget target = EvalTarget::Test;
  bool keep_scores = false;
};

struct UserResult {
  std::string user_id;
  std::string truth;
  std::size_t rank = 0;
  std::vector<std::string> candidates;  // kept when keep_scores
  std::vector<double> scores;
};

struct MetricsReport {
  std::vector<std::size_t> ks;
  std::map<std::size_t, double> hit;
  std::map<std::size_t, double> ndcg;
  std::size_t n_users = 0;
};

struct EvalResult {
  MetricsReport report;
  std::vector<UserResult> users;  // same order as the split
};

// Means over users; an empty list gives zeros with n_users = 0.
MetricsReport summarize(const std::vector<const UserResult*>& users,
                        const std::vector<std::size_t>& ks);

EvalResult evaluate(const DatasetSplit& split, const Catalog& catalog, const Scorer& scorer,
                    const EvalOptions& options);

// Reports per group id. Users for which group_of returns nullopt are left
// out; groups with no users are absent.
std::map<int, MetricsReport> group_eval(const EvalResult& result,
                                        const std::function<std::optional<int>(const UserResult&)>& group_of,
                                        const std::vector<std::size_t>& ks);

// Group id 1..n for |S_u| given ascending lower bounds, e.g. {5, 10, 20}
// gives [5,10) -> 1, [10,20) -> 2, [20,inf) -> 3. Shorter users -> nullopt.
std::optional<int> length_group(std::size_t sequence_length, const std::vector<std::size_t>& lower_bounds);

// h computed once per user from the rec plan, candidates scored by summed
// affinity over types.
Scorer model_scorer(const ParamSet<float>& params, const ModelContext& ctx, Mode mode,
                    std::vector<FeatureType> types, std::size_t context_budget = kUnlimitedBudget);

// Seeded uniform scores per (user, candidate).
Scorer random_scorer(std::uint64_t seed);

}  // namespace ilr
