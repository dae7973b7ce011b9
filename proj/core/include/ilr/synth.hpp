#pragma once

// Planted-factor synthetic catalogs. Every item has a latent vector z; images
// and joint-space text embeddings are two noisy linear views of the same z, so
// the matched image/text pairs overlap strongly while shuffled pairs do not.
// Users consume items through a softmax over preference, popularity and a
// category-drift bonus, and the CF view carries popularity but gets noisier
// for rarely consumed items.

#include <cstdint>
#include <vector>

#include "ilr/catalog.hpp"
#include "ilr/feature_store.hpp"

namespace ilr {

struct SyntheticSpec {
  std::size_t n_users = 400;
  std::size_t n_items = 150;
  std::size_t latent_dim = 8;
  double noise = 0.1;
  double mean_sequence_length = 12.0;
  std::uint64_t seed = 7;
  std::size_t description_tokens = 160;
  std::size_t attribute_tokens = 10;

  std::size_t visual_dim = 32;
  std::size_t cf_dim = 16;
  std::size_t text_dim = 32;

  double preference_strength = 5.0;
  double popularity_strength = 1.0;
  double category_drift = 0.3;
  double joint_correlation = 0.9;   // mixing between the image and joint-text maps
  double cf_cold_noise = 0.5;       // extra CF noise for the least popular item
  double missing_image_fraction = 0.0;
  std::size_t max_sequence_length = 40;

  void validate() const;
};

struct SyntheticData {
  std::vector<InteractionRecord> records;
  Catalog catalog;
  FeatureStore features;
};

SyntheticData synth_generate(const SyntheticSpec& spec);

}  // namespace ilr
