#pragma once

// Next-item property prediction: the history prompt is followed by a question
// about the next item and the answer, and only the answer is supervised.

#include <vector>

#include "ilr/context.hpp"
#include "ilr/params.hpp"
#include "ilr/prompt.hpp"

namespace ilr {

struct RisaExample {
  std::string user_id;
  std::string next_item;
  RisaPair pair;
};

struct RisaBatch {
  std::vector<RisaExample> examples;
};

// History = train[:-1], target = the last training item. Needs at least two
// training items.
RisaExample make_risa_example(const ModelContext& ctx, const UserSplit& user, Rng& rng,
                              Mode mode = Mode::Image,
                              std::size_t context_budget = kUnlimitedBudget);

// size examples cycling through users in order; templates drawn
// independently per example from rng.
RisaBatch make_batch(const ModelContext& ctx, const std::vector<const UserSplit*>& users, Rng& rng,
                     std::size_t size, Mode mode = Mode::Image,
                     std::size_t context_budget = kUnlimitedBudget);

// Loss of one example. When grads is given, scale * gradient is added to it.
template <typename T>
T risa_example_loss(const ParamSet<T>& params, const ModelContext& ctx, const RisaExample& ex,
                    ParamSet<T>* grads = nullptr, T scale = T(1));

// Mean over the batch.
template <typename T>
T risa_loss(const ParamSet<T>& params, const ModelContext& ctx, const RisaBatch& batch,
            ParamSet<T>* grads = nullptr);

}  // namespace ilr
