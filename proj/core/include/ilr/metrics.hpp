#pragma once

#include <string>
#include <vector>

namespace ilr {

// 1-indexed position of truth among candidates ordered by descending score,
// ties by ascending item id. Throws when truth is not a candidate.
std::size_t rank_of(const std::vector<std::string>& ids, const std::vector<double>& scores,
                    const std::string& truth);

// ranked is a best-first list of at least k items that contains truth.
int hit_at_k(const std::vector<std::string>& ranked, const std::string& truth, std::size_t k);
double ndcg_at_k(const std::vector<std::string>& ranked, const std::string& truth, std::size_t k);

// Same metrics from a known rank.
inline int hit_from_rank(std::size_t rank, std::size_t k) { return rank <= k ? 1 : 0; }
double ndcg_from_rank(std::size_t rank, std::size_t k);

}  // namespace ilr
