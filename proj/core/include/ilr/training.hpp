#pragma once

// Combined objective L = L_RISA + sum over active types of L_RERI, Adam
// updates on the trainable groups, and epoch-level early stopping on
// validation Hit@5.

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ilr/checkpoint.hpp"
#include "ilr/context.hpp"
#include "ilr/optimizer.hpp"
#include "ilr/params.hpp"
#include "ilr/prompt.hpp"

namespace ilr {

// Where the RERI positive comes from: the last training item, or a uniformly
// drawn position inside the training sequence (prefix = items before it).
enum class ReriTarget { Last, Random };

struct TrainConfig {
  double lr = 0.001;
  std::size_t batch_size = 32;
  std::size_t epochs = 5;
  std::uint64_t seed = 1;
  std::vector<FeatureType> types{FeatureType::Img};
  Mode mode = Mode::Image;
  std::size_t patience = 3;
  bool two_stage = false;
  std::size_t lm_pretrain_epochs = 0;
  std::size_t context_budget = kUnlimitedBudget;
  bool fallback = false;
  ReriTarget reri_target = ReriTarget::Last;
  std::size_t n_negatives = 100;
  std::uint64_t eval_seed = 0;

  void validate() const;
};

enum class Phase { Joint, RisaOnly, ReriOnly, LanguageModel };

struct StepLoss {
  double risa = 0;
  std::array<double, 3> reri{};  // Img, CF, Text
  double lm = 0;
  // Sum of the logged components.
  double total() const { return risa + reri[0] + reri[1] + reri[2] + lm; }
};

struct LogRow {
  std::uint64_t step = 0;
  StepLoss loss;
  double wall_ms = 0;
};

struct TrainState {
  std::uint64_t step = 0;
  ParamSet<float> params;
  AdamState adam;
};

// Vocabulary over every text fragment prompts can contain.
Vocabulary build_model_vocab(const Catalog& catalog, std::size_t max_size = 4096);

// Fills vocab size, visual input dim and the projector input dims for the
// active types from the feature store. Throws a configuration error naming
// a missing type.
ModelConfig make_model_config(ModelConfig base, const Vocabulary& vocab,
                              const FeatureStore& features, const std::vector<FeatureType>& types,
                              Mode mode, bool fallback);

TrainState initial_state(std::shared_ptr<const ParamLayout> layout, std::uint64_t seed);

// Step-level driver. Batches of an epoch come from a seeded shuffle of the
// eligible users (at least two training items); example randomness is keyed
// by (seed, step, position in batch), so a saved state resumes exactly.
class Trainer {
 public:
  Trainer(const ModelContext& ctx, const DatasetSplit& split, TrainConfig config,
          TrainState state);

  StepLoss step(Phase phase = Phase::Joint);
  std::size_t steps_per_epoch() const;
  std::size_t eligible_users() const { return users_.size(); }

  TrainState& state() { return state_; }
  const TrainState& state() const { return state_; }
  const TrainConfig& config() const { return config_; }

 private:
  StepLoss example(std::size_t user_index, std::size_t position, Phase phase,
                   ParamSet<float>& grads) const;

  ModelContext ctx_;
  TrainConfig config_;
  std::vector<const UserSplit*> users_;
  TrainState state_;
};

struct TrainResult {
  ParamSet<float> best;
  double best_val_hit5 = 0;
  std::size_t best_epoch = 0;  // 0 = initialisation
  std::vector<double> val_hit5;  // index 0 = initialisation
  std::size_t epochs_run = 0;
  std::vector<LogRow> log;
  TrainState final_state;
};

// Runs the configured phases. When resume is given, training continues from
// that state (joint phase only).
TrainResult train(const ModelContext& ctx, const DatasetSplit& split, const ModelConfig& model,
                  const TrainConfig& config, std::optional<TrainState> resume = std::nullopt);

void write_training_log(const std::filesystem::path& path, const std::vector<LogRow>& rows,
                        const KeyValues& metadata);

void save_train_state(const TrainState& state, const std::filesystem::path& path);
TrainState load_train_state(const std::filesystem::path& path);

}  // namespace ilr
