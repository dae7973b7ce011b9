#pragma once

// Tiny pre-norm causal transformer with slot-embedding injection and
// hand-written reverse-mode gradients.
//
// Input embeddings: text positions use tok_emb[token] + pos_emb[t]; a
// [VISUAL] position uses adaptor(v_item) + pos_emb[t]; the [REC] position
// uses the learnable rec vector + pos_emb[t]. Each layer computes
//   x += Attn(LN1(x)) ;  x += FFN(LN2(x))
// with causal softmax attention and a tanh-GELU feed-forward block; the
// final hidden state is LN_f(x) and logits are tied to tok_emb.

#include <functional>
#include <optional>
#include <vector>

#include "ilr/feature_store.hpp"
#include "ilr/params.hpp"
#include "ilr/prompt.hpp"

namespace ilr {

// v_bar = W2 * relu(W1 * v + b1) + b2
template <typename T>
Vec<T> adaptor_apply(const ParamSet<T>& params, const Vec<T>& v);

template <typename T>
struct EmbeddedInput {
  Mat<T> x;  // positions x d_model
  std::vector<std::size_t> visual_positions;
  Mat<T> visual_features;  // one row per visual slot, adaptor input
  Mat<T> visual_pre;       // adaptor pre-activation, one row per slot
  std::optional<std::size_t> rec_position;
};

// Feature row used for an item's [VISUAL] slot or Img score: the Img row,
// or with fallback the JointText row when the image is missing. Throws when
// neither applies.
const float* visual_row(const FeatureStore& features, const std::string& item_id, bool fallback);

template <typename T>
EmbeddedInput<T> assemble_input_embeddings(const PromptPlan& plan, const ParamSet<T>& params,
                                           const FeatureStore& features, bool fallback);

template <typename T>
struct ForwardOutput {
  Mat<T> logits;                       // one row per entry of logit_rows
  Mat<T> hidden;                       // positions x d_model, final layer
  std::vector<std::size_t> logit_rows;  // positions the logits belong to
};

template <typename T>
struct LayerCache {
  Mat<T> xhat1, a, q, k, v, attn, xhat2, c, f, g;
  Vec<T> rstd1, rstd2;
  std::vector<Mat<T>> probs;  // per head, lower triangle used
};

template <typename T>
struct ForwardCache {
  std::vector<LayerCache<T>> layers;
  Mat<T> xhatf;
  Vec<T> rstdf;
};

// Logits for every position.
template <typename T>
ForwardOutput<T> forward(const ParamSet<T>& params, const Mat<T>& embeddings);

// Logits only for the listed positions; fills cache when given.
template <typename T>
ForwardOutput<T> forward_rows(const ParamSet<T>& params, const Mat<T>& embeddings,
                              std::vector<std::size_t> logit_rows, ForwardCache<T>* cache);

// Positions whose logits predict the masked tokens (t - 1 for each masked t).
std::vector<std::size_t> supervised_rows(const std::vector<bool>& target_mask);

// Mean negative log-likelihood of the masked tokens, each predicted from the
// logits at the preceding position. When d_logits is given it receives the
// gradient with respect to output.logits.
template <typename T>
T lm_nll(const ForwardOutput<T>& output, const std::vector<TokenId>& tokens,
         const std::vector<bool>& target_mask, Mat<T>* d_logits = nullptr);

template <typename T>
Vec<T> last_hidden(const ForwardOutput<T>& output, std::size_t position);

// Backpropagates from d_logits (rows aligned with logit_rows) and d_hidden
// (positions x d, or empty) to the input embeddings. Backbone gradients are
// accumulated into grads only when backbone_grads is set.
template <typename T>
Mat<T> backward(const ParamSet<T>& params, const ForwardCache<T>& cache,
                const ForwardOutput<T>& output, const Mat<T>& d_logits, const Mat<T>& d_hidden,
                ParamSet<T>& grads, bool backbone_grads);

// Routes embedding gradients to token/positional tables, the adaptor and the
// rec vector.
template <typename T>
void backward_embeddings(const PromptPlan& plan, const EmbeddedInput<T>& input,
                         const Mat<T>& d_emb, const ParamSet<T>& params, ParamSet<T>& grads,
                         bool backbone_grads);

template <typename T>
using LossClosure = std::function<T(const ParamSet<T>& params, ParamSet<T>* grads)>;

// Exact gradients of a loss closure. Backbone gradients are zero when the
// layout's backbone is frozen. Throws a numeric error on a non-finite loss.
template <typename T>
ParamSet<T> gradients(const ParamSet<T>& params, const LossClosure<T>& loss, T* loss_value = nullptr);

}  // namespace ilr
