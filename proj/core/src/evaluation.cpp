#include "ilr/evaluation.hpp"

#include "ilr/error.hpp"
#include "ilr/metrics.hpp"
#include "ilr/parallel.hpp"
#include "ilr/random.hpp"
#include "ilr/reri.hpp"

namespace ilr {

std::vector<std::string> eval_prefix(const UserSplit& user, EvalTarget target) {
  std::vector<std::string> prefix = user.train;
  if (target == EvalTarget::Test) {
    prefix.push_back(user.validation);
  }
  return prefix;
}

const std::string& eval_truth(const UserSplit& user, EvalTarget target) {
  return target == EvalTarget::Test ? user.test : user.validation;
}

MetricsReport summarize(const std::vector<const UserResult*>& users,
                        const std::vector<std::size_t>& ks) {
  MetricsReport r;
  r.ks = ks;
  r.n_users = users.size();
  for (const std::size_t k : ks) {
    double hit = 0;
    double ndcg = 0;
    for (const auto* u : users) {
      hit += hit_from_rank(u->rank, k);
      ndcg += ndcg_from_rank(u->rank, k);
    }
    r.hit[k] = users.empty() ? 0.0 : hit / static_cast<double>(users.size());
    r.ndcg[k] = users.empty() ? 0.0 : ndcg / static_cast<double>(users.size());
  }
  return r;
}

EvalResult evaluate(const DatasetSplit& split, const Catalog& catalog, const Scorer& scorer,
                    const EvalOptions& options) {
  EvalResult result;
  result.users.resize(split.users.size());
  parallel_for(split.users.size(), [&](std::size_t i) {
    const UserSplit& user = split.users[i];
    const std::string& truth = eval_truth(user, options.target);
    auto candidates =
        sample_candidates_for(user, truth, catalog, options.n_negatives, options.seed);
    auto scores = scorer(user, eval_prefix(user, options.target), candidates);
    if (scores.size() != candidates.size()) {
      fail(ErrorKind::Argument, "scorer returned " + std::to_string(scores.size()) +
                                    " scores for " + std::to_string(candidates.size()) +
                                    " candidates");
    }
    UserResult& r = result.users[i];
    r.user_id = user.user_id;
    r.truth = truth;
    r.rank = rank_of(candidates, scores, truth);
    if (options.keep_scores) {
      r.candidates = std::move(candidates);
      r.scores = std::move(scores);
    }
  });
  std::vector<const UserResult*> all;
  for (const auto& u : result.users) {
    all.push_back(&u);
  }
  result.report = summarize(all, options.ks);
  return result;
}

std::map<int, MetricsReport> group_eval(
    const EvalResult& result, const std::function<std::optional<int>(const UserResult&)>& group_of,
    const std::vector<std::size_t>& ks) {
  std::map<int, std::vector<const UserResult*>> members;
  for (const auto& u : result.users) {
    if (const auto g = group_of(u)) {
      members[*g].push_back(&u);
    }
  }
  std::map<int, MetricsReport> out;
  for (const auto& [g, users] : members) {
    out[g] = summarize(users, ks);
  }
  return out;
}

std::optional<int> length_group(std::size_t sequence_length,
                                const std::vector<std::size_t>& lower_bounds) {
  std::optional<int> group;
  for (std::size_t i = 0; i < lower_bounds.size(); ++i) {
    if (sequence_length >= lower_bounds[i]) {
      group = static_cast<int>(i) + 1;
    }
  }
  return group;
}

Scorer model_scorer(const ParamSet<float>& params, const ModelContext& ctx, Mode mode,
                    std::vector<FeatureType> types, std::size_t context_budget) {
  return [&params, ctx, mode, types = std::move(types), context_budget](
             const UserSplit&, const std::vector<std::string>& prefix,
             const std::vector<std::string>& candidates) {
    const Vec<float> h = user_repr(params, ctx, prefix, mode, context_budget);
    return score_candidates(params, ctx, h, candidates, types);
  };
}

Scorer random_scorer(std::uint64_t seed) {
  return [seed](const UserSplit& user, const std::vector<std::string>&,
                const std::vector<std::string>& candidates) {
    Rng rng(mix_seed(seed, user.user_id));
    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      scores.push_back(uniform01(rng));
    }
    return scores;
  };
}

}  // namespace ilr
