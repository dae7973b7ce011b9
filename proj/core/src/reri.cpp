#include "ilr/reri.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ilr/backbone.hpp"
#include "ilr/error.hpp"

namespace ilr {

namespace {

// Prompts never exceed the positional table.
template <typename T>
std::size_t clamp_budget(const ParamSet<T>& params, std::size_t budget) {
  return std::min(budget, params.lay().config().backbone.max_context);
}

template <typename T>
Vec<T> to_vec(std::span<const float> f) {
  Vec<T> v(static_cast<Eigen::Index>(f.size()));
  for (std::size_t j = 0; j < f.size(); ++j) {
    v(static_cast<Eigen::Index>(j)) = static_cast<T>(f[j]);
  }
  return v;
}

double sigmoid(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double reri_pair_loss(double r_pos, double r_neg) { return softplus(-r_pos) + softplus(r_neg); }

template <typename T>
Vec<T> user_repr(const ParamSet<T>& params, const ModelContext& ctx,
                 const std::vector<std::string>& prefix, Mode mode, std::size_t context_budget) {
  const PromptPlan plan = build_rec_plan(*ctx.vocab, *ctx.catalog, prefix, mode,
                                         clamp_budget(params, context_budget));
  const auto input = assemble_input_embeddings(plan, params, *ctx.features, ctx.fallback);
  const auto out = forward_rows<T>(params, input.x, {}, nullptr);
  return last_hidden(out, *plan.rec_position());
}

template <typename T>
Vec<T> project_user(const ParamSet<T>& params, const Vec<T>& h, FeatureType type) {
  const auto& p = params.lay().projector(type);
  if (h.size() != params[p.user_w].cols()) {
    fail(ErrorKind::Argument, "project_user: dimension mismatch");
  }
  return params[p.user_w] * h + params[p.user_b].col(0);
}

template <typename T>
Vec<T> project_item(const ParamSet<T>& params, std::span<const float> feature, FeatureType type) {
  const auto& p = params.lay().projector(type);
  if (static_cast<Eigen::Index>(feature.size()) != params[p.item_w].cols()) {
    fail(ErrorKind::Argument, "project_item: " + std::string(to_string(type)) + " feature dim " +
                                  std::to_string(feature.size()) + ", expected " +
                                  std::to_string(params[p.item_w].cols()));
  }
  return params[p.item_w] * to_vec<T>(feature) + params[p.item_b].col(0);
}

template <typename T>
T affinity(const Vec<T>& a, const Vec<T>& b) {
  if (a.size() != b.size()) {
    fail(ErrorKind::Argument, "affinity: length mismatch");
  }
  return a.dot(b);
}

std::span<const float> item_feature(const ModelContext& ctx, const std::string& item_id,
                                    FeatureType type) {
  const auto& fs = *ctx.features;
  if (type == FeatureType::Img) {
    const float* row = visual_row(fs, item_id, ctx.fallback);
    const std::size_t dim = fs.find_row(FeatureType::Img, item_id) != nullptr
                                ? fs.dim(FeatureType::Img)
                                : fs.dim(FeatureType::JointText);
    return {row, dim};
  }
  const float* row = fs.find_row(type, item_id);
  if (row == nullptr) {
    fail(ErrorKind::Config, "item " + item_id + " has no " + std::string(to_string(type)) +
                                " feature");
  }
  return {row, fs.dim(type)};
}

template <typename T>
ReriTerms<T> reri_head(const ParamSet<T>& params, const ModelContext& ctx, const Vec<T>& h,
                       const std::string& pos_item, const std::string& neg_item,
                       const std::vector<FeatureType>& types, ParamSet<T>* grads, Vec<T>* d_h,
                       T scale) {
  ReriTerms<T> terms;
  if (d_h != nullptr) {
    d_h->setZero(h.size());
  }
  for (const FeatureType t : types) {
    const auto& p = params.lay().projector(t);
    const Vec<T> ou = project_user(params, h, t);
    const auto fpos = item_feature(ctx, pos_item, t);
    const auto fneg = item_feature(ctx, neg_item, t);
    const Vec<T> op = project_item(params, fpos, t);
    const Vec<T> on = project_item(params, fneg, t);
    const double r_pos = static_cast<double>(affinity(ou, op));
    const double r_neg = static_cast<double>(affinity(ou, on));
    terms.loss[static_cast<std::size_t>(t)] = static_cast<T>(reri_pair_loss(r_pos, r_neg));
    if (grads == nullptr) {
      continue;
    }
    // dL/dr_pos = sigmoid(r_pos) - 1, dL/dr_neg = sigmoid(r_neg).
    const T gp = static_cast<T>(sigmoid(r_pos) - 1.0) * scale;
    const T gn = static_cast<T>(sigmoid(r_neg)) * scale;
    const Vec<T> d_ou = gp * op + gn * on;
    auto& G = *grads;
    G[p.user_w].noalias() += d_ou * h.transpose();
    G[p.user_b].col(0) += d_ou;
    G[p.item_w].noalias() += (gp * ou) * to_vec<T>(fpos).transpose();
    G[p.item_w].noalias() += (gn * ou) * to_vec<T>(fneg).transpose();
    G[p.item_b].col(0) += (gp + gn) * ou;
    if (d_h != nullptr) {
      d_h->noalias() += params[p.user_w].transpose() * d_ou;
    }
  }
  return terms;
}

template <typename T>
ReriTerms<T> reri_loss(const ParamSet<T>& params, const ModelContext& ctx,
                       const std::vector<std::string>& prefix, const std::string& pos_item,
                       const std::string& neg_item, const std::vector<FeatureType>& types,
                       Mode mode, std::size_t context_budget, ParamSet<T>* grads, T scale) {
  const PromptPlan plan = build_rec_plan(*ctx.vocab, *ctx.catalog, prefix, mode,
                                         clamp_budget(params, context_budget));
  const auto input = assemble_input_embeddings(plan, params, *ctx.features, ctx.fallback);
  ForwardCache<T> cache;
  const auto out = forward_rows<T>(params, input.x, {}, grads != nullptr ? &cache : nullptr);
  const std::size_t rec = *plan.rec_position();
  const Vec<T> h = last_hidden(out, rec);
  if (grads == nullptr) {
    return reri_head<T>(params, ctx, h, pos_item, neg_item, types);
  }
  Vec<T> d_h;
  const auto terms = reri_head<T>(params, ctx, h, pos_item, neg_item, types, grads, &d_h, scale);
  Mat<T> d_hidden = Mat<T>::Zero(out.hidden.rows(), out.hidden.cols());
  d_hidden.row(static_cast<Eigen::Index>(rec)) = d_h.transpose();
  const bool bb = params.lay().config().backbone.trainable;
  const Mat<T> d_emb = backward(params, cache, out, Mat<T>(), d_hidden, *grads, bb);
  backward_embeddings(plan, input, d_emb, params, *grads, bb);
  return terms;
}

std::string sample_negative(const std::unordered_set<std::string>& history,
                            const Catalog& catalog, Rng& rng) {
  std::vector<std::string> eligible;
  for (auto& id : catalog.sorted_ids()) {
    if (!history.contains(id)) {
      eligible.push_back(std::move(id));
    }
  }
  if (eligible.empty()) {
    fail(ErrorKind::Argument, "sample_negative: user has interacted with every item");
  }
  return eligible[uniform_index(rng, eligible.size())];
}

template <typename T>
std::vector<double> score_candidates(const ParamSet<T>& params, const ModelContext& ctx,
                                     const Vec<T>& h, const std::vector<std::string>& candidates,
                                     const std::vector<FeatureType>& types) {
  std::vector<double> scores(candidates.size(), 0.0);
  for (const FeatureType t : types) {
    const Vec<T> ou = project_user(params, h, t);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const Vec<T> oi = project_item(params, item_feature(ctx, candidates[c], t), t);
      scores[c] += static_cast<double>(affinity(ou, oi));
    }
  }
  return scores;
}

std::vector<ScoredItem> top_k(const std::vector<std::string>& ids, const std::vector<double>& scores,
                              std::size_t k) {
  if (ids.size() != scores.size()) {
    fail(ErrorKind::Argument, "top_k: ids and scores differ in length");
  }
  if (k > ids.size()) {
    fail(ErrorKind::Argument, "top_k: k=" + std::to_string(k) + " exceeds " +
                                  std::to_string(ids.size()) + " candidates");
  }
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  auto before = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) {
      return scores[a] > scores[b];
    }
    return ids[a] < ids[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    before);
  std::vector<ScoredItem> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back({ids[order[i]], scores[order[i]]});
  }
  return out;
}

#define ILR_INSTANTIATE(T)                                                                      \
  template Vec<T> user_repr<T>(const ParamSet<T>&, const ModelContext&,                         \
                               const std::vector<std::string>&, Mode, std::size_t);             \
  template Vec<T> project_user<T>(const ParamSet<T>&, const Vec<T>&, FeatureType);              \
  template Vec<T> project_item<T>(const ParamSet<T>&, std::span<const float>, FeatureType);     \
  template T affinity<T>(const Vec<T>&, const Vec<T>&);                                         \
  template ReriTerms<T> reri_head<T>(const ParamSet<T>&, const ModelContext&, const Vec<T>&,    \
                                     const std::string&, const std::string&,                    \
                                     const std::vector<FeatureType>&, ParamSet<T>*, Vec<T>*, T); \
  template ReriTerms<T> reri_loss<T>(const ParamSet<T>&, const ModelContext&,                   \
                                     const std::vector<std::string>&, const std::string&,       \
                                     const std::string&, const std::vector<FeatureType>&, Mode, \
                                     std::size_t, ParamSet<T>*, T);                             \
  template std::vector<double> score_candidates<T>(const ParamSet<T>&, const ModelContext&,     \
                                                   const Vec<T>&,                               \
                                                   const std::vector<std::string>&,             \
                                                   const std::vector<FeatureType>&);

ILR_INSTANTIATE(float)
ILR_INSTANTIATE(double)

#undef ILR_INSTANTIATE

}  // namespace ilr
