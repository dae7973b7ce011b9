#include "ilr/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "ilr/error.hpp"

namespace ilr {

namespace {

std::size_t position_in(const std::vector<std::string>& ranked, const std::string& truth,
                        std::size_t k) {
  if (ranked.size() < k) {
    fail(ErrorKind::Argument, "metric@" + std::to_string(k) + ": only " +
                                  std::to_string(ranked.size()) + " ranked items");
  }
  const auto it = std::find(ranked.begin(), ranked.end(), truth);
  if (it == ranked.end()) {
    fail(ErrorKind::Argument, "ground truth " + truth + " is not among the candidates");
  }
  return static_cast<std::size_t>(it - ranked.begin()) + 1;
}

}  // namespace

std::size_t rank_of(const std::vector<std::string>& ids, const std::vector<double>& scores,
                    const std::string& truth) {
  if (ids.size() != scores.size()) {
    fail(ErrorKind::Argument, "rank_of: ids and scores differ in length");
  }
  const auto it = std::find(ids.begin(), ids.end(), truth);
  if (it == ids.end()) {
    fail(ErrorKind::Argument, "ground truth " + truth + " is not among the candidates");
  }
  const std::size_t t = static_cast<std::size_t>(it - ids.begin());
  std::size_t rank = 1;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i != t && (scores[i] > scores[t] || (scores[i] == scores[t] && ids[i] < ids[t]))) {
      ++rank;
    }
  }
  return rank;
}

double ndcg_from_rank(std::size_t rank, std::size_t k) {
  return rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

int hit_at_k(const std::vector<std::string>& ranked, const std::string& truth, std::size_t k) {
  return hit_from_rank(position_in(ranked, truth, k), k);
}

double ndcg_at_k(const std::vector<std::string>& ranked, const std::string& truth, std::size_t k) {
  return ndcg_from_rank(position_in(ranked, truth, k), k);
}

}  // namespace ilr
