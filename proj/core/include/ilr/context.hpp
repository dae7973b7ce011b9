#pragma once

#include "ilr/catalog.hpp"
#include "ilr/feature_store.hpp"
#include "ilr/vocab.hpp"

namespace ilr {

// Read-only inputs shared by the losses and scorers. fallback lets an item
// without an image use its joint-text row wherever an image row is needed.
struct ModelContext {
  const Vocabulary* vocab = nullptr;
  const Catalog* catalog = nullptr;
  const FeatureStore* features = nullptr;
  bool fallback = false;
};

}  // namespace ilr
