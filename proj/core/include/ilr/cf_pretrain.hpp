#pragma once

#include <cstdint>
#include <vector>

#include "ilr/catalog.hpp"
#include "ilr/feature_store.hpp"

namespace ilr {

struct CfPretrainOptions {
  std::size_t dim = 16;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
  double learning_rate = 0.05;
  double init_scale = 0.1;
};

// Item embeddings trained with a logistic loss so that items adjacent in some
// user's sequence score higher (dot product) than sampled non-adjacent items.
// Rows come out in ascending item_id order. With epochs = 0 the seeded
// initialisation is returned unchanged.
FeatureMatrix cf_pretrain_cooccurrence(const std::vector<InteractionRecord>& records,
                                       const CfPretrainOptions& options);

}  // namespace ilr
