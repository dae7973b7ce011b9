#include "ilr/risa.hpp"

#include "ilr/backbone.hpp"
#include "ilr/error.hpp"

namespace ilr {

RisaExample make_risa_example(const ModelContext& ctx, const UserSplit& user, Rng& rng, Mode mode,
                              std::size_t context_budget) {
  if (user.train.size() < 2) {
    fail(ErrorKind::Argument,
         "RISA: user " + user.user_id + " needs at least two training items");
  }
  RisaExample ex;
  ex.user_id = user.user_id;
  ex.next_item = user.train.back();
  const std::vector<std::string> prefix(user.train.begin(), user.train.end() - 1);
  ex.pair = build_risa_pair(*ctx.vocab, *ctx.catalog, prefix, ctx.catalog->at(ex.next_item), rng,
                            mode, context_budget);
  return ex;
}

RisaBatch make_batch(const ModelContext& ctx, const std::vector<const UserSplit*>& users, Rng& rng,
                     std::size_t size, Mode mode, std::size_t context_budget) {
  if (users.empty()) {
    fail(ErrorKind::Argument, "make_batch: no users");
  }
  RisaBatch batch;
  batch.examples.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    batch.examples.push_back(
        make_risa_example(ctx, *users[i % users.size()], rng, mode, context_budget));
  }
  return batch;
}

template <typename T>
T risa_example_loss(const ParamSet<T>& params, const ModelContext& ctx, const RisaExample& ex,
                    ParamSet<T>* grads, T scale) {
  const PromptPlan& plan = ex.pair.plan;
  const auto input = assemble_input_embeddings(plan, params, *ctx.features, ctx.fallback);
  ForwardCache<T> cache;
  const auto out = forward_rows(params, input.x, supervised_rows(plan.target_mask),
                                grads != nullptr ? &cache : nullptr);
  if (grads == nullptr) {
    return lm_nll(out, plan.tokens, plan.target_mask);
  }
  Mat<T> d_logits;
  const T loss = lm_nll(out, plan.tokens, plan.target_mask, &d_logits);
  d_logits *= scale;
  const bool bb = params.lay().config().backbone.trainable;
  const Mat<T> d_emb = backward(params, cache, out, d_logits, Mat<T>(), *grads, bb);
  backward_embeddings(plan, input, d_emb, params, *grads, bb);
  return loss;
}

template <typename T>
T risa_loss(const ParamSet<T>& params, const ModelContext& ctx, const RisaBatch& batch,
            ParamSet<T>* grads) {
  if (batch.examples.empty()) {
    fail(ErrorKind::Argument, "risa_loss: empty batch");
  }
  const T scale = T(1) / static_cast<T>(batch.examples.size());
  double total = 0;
  for (const auto& ex : batch.examples) {
    total += static_cast<double>(risa_example_loss(params, ctx, ex, grads, scale));
  }
  return static_cast<T>(total / static_cast<double>(batch.examples.size()));
}

template float risa_example_loss<float>(const ParamSet<float>&, const ModelContext&,
                                        const RisaExample&, ParamSet<float>*, float);
template double risa_example_loss<double>(const ParamSet<double>&, const ModelContext&,
                                          const RisaExample&, ParamSet<double>*, double);
template float risa_loss<float>(const ParamSet<float>&, const ModelContext&, const RisaBatch&,
                                ParamSet<float>*);
template double risa_loss<double>(const ParamSet<double>&, const ModelContext&, const RisaBatch&,
                                  ParamSet<double>*);

}  // namespace ilr
