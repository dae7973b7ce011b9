#include "ilr/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ilr/backbone.hpp"
#include "ilr/error.hpp"
#include "ilr/evaluation.hpp"
#include "ilr/parallel.hpp"
#include "ilr/reri.hpp"
#include "ilr/risa.hpp"

namespace ilr {

namespace {

GroupMask phase_mask(Phase phase, bool backbone_trainable) {
  // Indexed by ParamGroup: Backbone, Adaptor, RecToken, Projector.
  switch (phase) {
    case Phase::Joint:
      return {backbone_trainable, true, true, true};
    case Phase::RisaOnly:
      return {backbone_trainable, true, false, false};
    case Phase::ReriOnly:
      return {backbone_trainable, false, true, true};
    case Phase::LanguageModel:
      return {true, false, false, false};
  }
  return kAllGroups;
}

double lm_example(const ParamSet<float>& params, const ModelContext& ctx,
                  const std::vector<std::string>& items, std::size_t budget,
                  ParamSet<float>& grads, float scale) {
  PromptPlan plan = build_history_prompt(*ctx.vocab, *ctx.catalog, items, Mode::Attribute, budget);
  plan.target_mask.assign(plan.tokens.size(), true);
  plan.target_mask[0] = false;
  const auto input = assemble_input_embeddings(plan, params, *ctx.features, ctx.fallback);
  ForwardCache<float> cache;
  const auto out = forward_rows(params, input.x, supervised_rows(plan.target_mask), &cache);
  Mat<float> d_logits;
  const float loss = lm_nll(out, plan.tokens, plan.target_mask, &d_logits);
  d_logits *= scale;
  const Mat<float> d_emb = backward(params, cache, out, d_logits, Mat<float>(), grads, true);
  backward_embeddings(plan, input, d_emb, params, grads, true);
  return loss;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0) || !std::isfinite(lr)) {
    fail(ErrorKind::Config, "train: lr must be positive");
  }
  if (batch_size == 0) {
    fail(ErrorKind::Config, "train: batch size must be at least 1");
  }
  for (const auto t : types) {
    if (t == FeatureType::JointText) {
      fail(ErrorKind::Config, "train: joint_text is not a retrieval type");
    }
  }
}

Vocabulary build_model_vocab(const Catalog& catalog, std::size_t max_size) {
  return build_vocab(prompt_corpus(catalog), max_size);
}

ModelConfig make_model_config(ModelConfig base, const Vocabulary& vocab,
                              const FeatureStore& features, const std::vector<FeatureType>& types,
                              Mode mode, bool fallback) {
  base.backbone.vocab_size = vocab.size();
  const bool has_img = features.has(FeatureType::Img);
  const bool has_joint = features.has(FeatureType::JointText);
  if (has_img) {
    base.visual_dim = features.dim(FeatureType::Img);
  } else if (fallback && has_joint) {
    base.visual_dim = features.dim(FeatureType::JointText);
  }
  const bool needs_img = has_visual(mode) || std::find(types.begin(), types.end(),
                                                        FeatureType::Img) != types.end();
  if (needs_img && !has_img && !(fallback && has_joint)) {
    fail(ErrorKind::Config, "feature type img is required but missing");
  }
  if (fallback && has_img && has_joint &&
      features.dim(FeatureType::Img) != features.dim(FeatureType::JointText)) {
    fail(ErrorKind::Config, "fallback needs joint_text features with the image dimension");
  }
  base.item_dims = {0, 0, 0};
  for (const auto t : types) {
    if (t == FeatureType::Img) {
      base.item_dims[0] = base.visual_dim;
      continue;
    }
    if (!features.has(t)) {
      fail(ErrorKind::Config, "feature type " + std::string(to_string(t)) +
                                  " is active but missing from the feature store");
    }
    base.item_dims[static_cast<std::size_t>(t)] = features.dim(t);
  }
  base.validate();
  return base;
}

TrainState initial_state(std::shared_ptr<const ParamLayout> layout, std::uint64_t seed) {
  TrainState s;
  s.params = init_params<float>(layout, seed);
  s.adam = AdamState::zeros(layout);
  return s;
}

Trainer::Trainer(const ModelContext& ctx, const DatasetSplit& split, TrainConfig config,
                 TrainState state)
    : ctx_(ctx), config_(std::move(config)), state_(std::move(state)) {
  config_.validate();
  for (const auto& u : split.users) {
    if (u.train.size() >= 2) {
      users_.push_back(&u);
    }
  }
  if (users_.empty()) {
    fail(ErrorKind::Config, "train: no user has two or more training items");
  }
  config_.context_budget =
      std::min(config_.context_budget, state_.params.lay().config().backbone.max_context);
}

std::size_t Trainer::steps_per_epoch() const {
  return (users_.size() + config_.batch_size - 1) / config_.batch_size;
}

StepLoss Trainer::example(std::size_t user_index, std::size_t position, Phase phase,
                          ParamSet<float>& grads) const {
  const UserSplit& user = *users_[user_index];
  const auto& params = state_.params;
  Rng rng(mix_seed(mix_seed(config_.seed, state_.step), position));
  const std::size_t spe = steps_per_epoch();
  const std::size_t b0 = (state_.step % spe) * config_.batch_size;
  const std::size_t size = std::min(config_.batch_size, users_.size() - b0);
  const float scale = 1.0f / static_cast<float>(size);
  StepLoss loss;

  if (phase == Phase::LanguageModel) {
    loss.lm = lm_example(params, ctx_, user.train, config_.context_budget, grads, scale);
    return loss;
  }
  if (phase == Phase::Joint || phase == Phase::RisaOnly) {
    const RisaExample ex = make_risa_example(ctx_, user, rng, config_.mode, config_.context_budget);
    loss.risa = risa_example_loss(params, ctx_, ex, &grads, scale);
  }
  if ((phase == Phase::Joint || phase == Phase::ReriOnly) && !config_.types.empty()) {
    const std::string neg = sample_negative(user.history(), *ctx_.catalog, rng);
    std::size_t t = user.train.size() - 1;
    if (config_.reri_target == ReriTarget::Random) {
      t = 1 + uniform_index(rng, user.train.size() - 1);
    }
    const std::vector<std::string> prefix(user.train.begin(),
                                          user.train.begin() + static_cast<std::ptrdiff_t>(t));
    const auto terms = reri_loss(params, ctx_, prefix, user.train[t], neg, config_.types,
                                 config_.mode, config_.context_budget, &grads, scale);
    for (std::size_t k = 0; k < 3; ++k) {
      loss.reri[k] = terms.loss[k];
    }
  }
  return loss;
}

StepLoss Trainer::step(Phase phase) {
  const std::size_t spe = steps_per_epoch();
  const std::uint64_t epoch = state_.step / spe;
  const std::size_t b = state_.step % spe;
  std::vector<std::size_t> order(users_.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(mix_seed(config_.seed, "epoch" + std::to_string(epoch)));
  shuffle(order, shuffle_rng);
  const std::size_t b0 = b * config_.batch_size;
  const std::size_t size = std::min(config_.batch_size, users_.size() - b0);

  const auto layout = state_.params.layout;
  std::vector<ParamSet<float>> grads(size);
  std::vector<StepLoss> losses(size);
  parallel_for(size, [&](std::size_t i) {
    grads[i] = zero_params<float>(layout);
    losses[i] = example(order[b0 + i], i, phase, grads[i]);
  });

  // Reduce in ascending example order so results do not depend on threads.
  ParamSet<float> total = std::move(grads[0]);
  StepLoss mean = losses[0];
  for (std::size_t i = 1; i < size; ++i) {
    total.add_scaled(grads[i], 1.0f);
    mean.risa += losses[i].risa;
    mean.lm += losses[i].lm;
    for (std::size_t k = 0; k < 3; ++k) {
      mean.reri[k] += losses[i].reri[k];
    }
  }
  const double inv = 1.0 / static_cast<double>(size);
  mean.risa *= inv;
  mean.lm *= inv;
  for (auto& r : mean.reri) {
    r *= inv;
  }
  if (!std::isfinite(mean.total()) || !total.all_finite()) {
    fail(ErrorKind::Numeric, "non-finite loss at step " + std::to_string(state_.step));
  }
  adam_update(state_.params, total, state_.adam, AdamOptions{config_.lr, 0.9, 0.999, 1e-8},
              phase_mask(phase, layout->config().backbone.trainable));
  ++state_.step;
  return mean;
}

TrainResult train(const ModelContext& ctx, const DatasetSplit& split, const ModelConfig& model,
                  const TrainConfig& config, std::optional<TrainState> resume) {
  config.validate();
  for (const auto t : config.types) {
    if (!model.has_projector(t)) {
      fail(ErrorKind::Config, "no projector configured for active type " +
                                  std::string(to_string(t)));
    }
  }
  const auto layout = resume ? resume->params.layout : std::make_shared<const ParamLayout>(model);
  Trainer trainer(ctx, split, config,
                  resume ? std::move(*resume) : initial_state(layout, config.seed));
  const std::size_t spe = trainer.steps_per_epoch();

  ModelContext eval_ctx = ctx;
  eval_ctx.fallback = config.fallback;
  auto validate = [&](const ParamSet<float>& params) {
    EvalOptions opt;
    opt.ks = {5};
    opt.n_negatives = config.n_negatives;
    opt.seed = config.eval_seed;
    opt.target = EvalTarget::Validation;
    return evaluate(split, *ctx.catalog,
                    model_scorer(params, eval_ctx, config.mode, config.types,
                                 config.context_budget),
                    opt)
        .report.hit.at(5);
  };

  TrainResult result;
  auto run_epoch = [&](Phase phase) {
    for (std::size_t s = 0; s < spe; ++s) {
      const auto t0 = std::chrono::steady_clock::now();
      const std::uint64_t step = trainer.state().step;
      const StepLoss loss = trainer.step(phase);
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      if (phase != Phase::LanguageModel) {
        result.log.push_back({step, loss, ms});
      }
    }
  };
  auto reset_moments = [&] { trainer.state().adam = AdamState::zeros(layout); };

  std::size_t first_epoch = 0;
  if (!resume || trainer.state().step == 0) {
    for (std::size_t e = 0; e < config.lm_pretrain_epochs; ++e) {
      run_epoch(Phase::LanguageModel);
    }
    if (config.lm_pretrain_epochs > 0) {
      reset_moments();
    }
    if (config.two_stage) {
      for (std::size_t e = 0; e < config.epochs; ++e) {
        run_epoch(Phase::RisaOnly);
      }
      reset_moments();
    }
  } else {
    first_epoch = trainer.state().step / spe;
  }

  const Phase phase = config.two_stage ? Phase::ReriOnly : Phase::Joint;
  result.best = trainer.state().params;
  result.best_val_hit5 = config.epochs > 0 ? validate(result.best) : 0.0;
  result.val_hit5.push_back(result.best_val_hit5);
  std::size_t bad = 0;
  for (std::size_t e = first_epoch; e < config.epochs; ++e) {
    run_epoch(phase);
    ++result.epochs_run;
    const double v = validate(trainer.state().params);
    result.val_hit5.push_back(v);
    if (v > result.best_val_hit5) {
      result.best_val_hit5 = v;
      result.best = trainer.state().params;
      result.best_epoch = e + 1;
      bad = 0;
    } else if (++bad >= config.patience) {
      break;
    }
  }
  result.final_state = std::move(trainer.state());
  return result;
}

void write_training_log(const std::filesystem::path& path, const std::vector<LogRow>& rows,
                        const KeyValues& metadata) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    fail(ErrorKind::Io, "cannot write " + path.string());
  }
  for (const auto& [k, v] : metadata) {
    out << "# " << k << "=" << v << "\n";
  }
  out << "step,L_final,L_RISA,L_RERI_Img,L_RERI_CF,L_RERI_Text,wall_ms\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.step << ',' << r.loss.total() << ',' << r.loss.risa << ',' << r.loss.reri[0] << ','
        << r.loss.reri[1] << ',' << r.loss.reri[2] << ',' << r.wall_ms << "\n";
  }
  if (!out) {
    fail(ErrorKind::Io, "write failed: " + path.string());
  }
}

void save_train_state(const TrainState& state, const std::filesystem::path& path) {
  Container c;
  c.config = model_config_entries(state.params.lay().config());
  c.config["state.step"] = std::to_string(state.step);
  c.config["state.adam_step"] = std::to_string(state.adam.step);
  append_params(c, state.params);
  append_params(c, state.adam.m, "adam.m.");
  append_params(c, state.adam.v, "adam.v.");
  save_container(c, path);
}

TrainState load_train_state(const std::filesystem::path& path) {
  const Container c = load_container(path);
  const auto layout = std::make_shared<const ParamLayout>(model_config_from(c.config));
  TrainState s;
  try {
    s.step = std::stoull(c.config.at("state.step"));
    s.adam.step = std::stoull(c.config.at("state.adam_step"));
  } catch (const std::exception&) {
    fail(ErrorKind::Format, path.string() + ": missing or bad training step");
  }
  s.params = extract_params(c, layout);
  s.adam.m = extract_params(c, layout, "adam.m.");
  s.adam.v = extract_params(c, layout, "adam.v.");
  return s;
}

}  // namespace ilr
