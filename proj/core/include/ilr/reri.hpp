#pragma once

// Retrieval head. The user is the final hidden state at the [REC] slot; each
// active feature type has a user projector and an item projector into a
// shared space, and the affinity is their dot product. Scores of the active
// types are summed at inference.

#include <array>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "ilr/context.hpp"
#include "ilr/params.hpp"
#include "ilr/prompt.hpp"

namespace ilr {

template <typename T>
Vec<T> user_repr(const ParamSet<T>& params, const ModelContext& ctx,
                 const std::vector<std::string>& prefix, Mode mode,
                 std::size_t context_budget = kUnlimitedBudget);

template <typename T>
Vec<T> project_user(const ParamSet<T>& params, const Vec<T>& h, FeatureType type);

template <typename T>
Vec<T> project_item(const ParamSet<T>& params, std::span<const float> feature, FeatureType type);

template <typename T>
T affinity(const Vec<T>& a, const Vec<T>& b);

// Feature row of an item for a retrieval type. Img honours the context's
// fallback; CF and Text rows must exist.
std::span<const float> item_feature(const ModelContext& ctx, const std::string& item_id,
                                    FeatureType type);

// -ln sigmoid(r_pos) - ln(1 - sigmoid(r_neg)), via softplus.
double reri_pair_loss(double r_pos, double r_neg);
double softplus(double x);

template <typename T>
struct ReriTerms {
  std::array<T, 3> loss{};  // indexed by FeatureType (Img, CF, Text); 0 when inactive
  T total() const { return loss[0] + loss[1] + loss[2]; }
};

// Loss terms given a user vector h. With grads, scale * gradient goes into
// the projector tensors and into d_h.
template <typename T>
ReriTerms<T> reri_head(const ParamSet<T>& params, const ModelContext& ctx, const Vec<T>& h,
                       const std::string& pos_item, const std::string& neg_item,
                       const std::vector<FeatureType>& types, ParamSet<T>* grads = nullptr,
                       Vec<T>* d_h = nullptr, T scale = T(1));

// Full loss for one (user prefix, positive, negative) triple, backpropagated
// through the backbone, adaptor and [REC] vector when grads is given.
template <typename T>
ReriTerms<T> reri_loss(const ParamSet<T>& params, const ModelContext& ctx,
                       const std::vector<std::string>& prefix, const std::string& pos_item,
                       const std::string& neg_item, const std::vector<FeatureType>& types,
                       Mode mode = Mode::Image, std::size_t context_budget = kUnlimitedBudget,
                       ParamSet<T>* grads = nullptr, T scale = T(1));

// Uniform over catalog items outside history.
std::string sample_negative(const std::unordered_set<std::string>& history,
                            const Catalog& catalog, Rng& rng);

// Summed affinity per candidate for a precomputed user vector.
template <typename T>
std::vector<double> score_candidates(const ParamSet<T>& params, const ModelContext& ctx,
                                     const Vec<T>& h, const std::vector<std::string>& candidates,
                                     const std::vector<FeatureType>& types);

struct ScoredItem {
  std::string item_id;
  double score = 0;

  bool operator==(const ScoredItem&) const = default;
};

// The k highest scores, ties broken by ascending item_id.
std::vector<ScoredItem> top_k(const std::vector<std::string>& ids, const std::vector<double>& scores,
                              std::size_t k);

}  // namespace ilr
