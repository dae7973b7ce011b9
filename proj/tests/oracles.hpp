#pragma once

// Independent reference computations used by the unit tests and by the
// acceptance binary. Nothing here calls into the code it checks except to
// read parameters and build inputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ilr/backbone.hpp"
#include "ilr/params.hpp"
#include "ilr/prompt.hpp"
#include "ilr/random.hpp"

namespace ilr::oracle {

// Scalar-loop forward pass: final hidden states (after the last layer norm).
inline std::vector<std::vector<double>> reference_hidden(const ParamSet<double>& p,
                                                         const Mat<double>& emb) {
  const auto& L = p.lay();
  const auto& cfg = L.config().backbone;
  const std::size_t n = static_cast<std::size_t>(emb.rows());
  const std::size_t d = cfg.d_model;
  const std::size_t H = cfg.n_heads;
  const std::size_t dh = d / H;
  const std::size_t F = cfg.ffn_dim;
  using Row = std::vector<double>;
  std::vector<Row> x(n, Row(d));
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j < d; ++j) x[t][j] = emb(t, j);

  auto norm = [&](const Row& v, const Mat<double>& g, const Mat<double>& b) {
    double mean = 0;
    for (double a : v) mean += a;
    mean /= d;
    double var = 0;
    for (double a : v) var += (a - mean) * (a - mean);
    var /= d;
    Row out(d);
    for (std::size_t j = 0; j < d; ++j) out[j] = (v[j] - mean) / std::sqrt(var + 1e-5) * g(j, 0) + b(j, 0);
    return out;
  };
  auto matvec = [](const Mat<double>& w, const Row& v) {
    Row out(w.rows(), 0.0);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) out[r] += w(r, c) * v[c];
    return out;
  };

  for (const auto& li : L.layers) {
    std::vector<Row> q(n), k(n), v(n);
    for (std::size_t t = 0; t < n; ++t) {
      const Row a = norm(x[t], p[li.ln1_gain], p[li.ln1_offset]);
      q[t] = matvec(p[li.wq], a);
      k[t] = matvec(p[li.wk], a);
      v[t] = matvec(p[li.wv], a);
    }
    std::vector<Row> attn(n, Row(d, 0.0));
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> s(i + 1);
        double mx = -1e300;
        for (std::size_t j = 0; j <= i; ++j) {
          double dot = 0;
          for (std::size_t c = 0; c < dh; ++c) dot += q[i][h * dh + c] * k[j][h * dh + c];
          s[j] = dot / std::sqrt(static_cast<double>(dh));
          mx = std::max(mx, s[j]);
        }
        double z = 0;
        for (auto& e : s) z += (e = std::exp(e - mx));
        for (std::size_t j = 0; j <= i; ++j)
          for (std::size_t c = 0; c < dh; ++c) attn[i][h * dh + c] += s[j] / z * v[j][h * dh + c];
      }
    }
    for (std::size_t t = 0; t < n; ++t) {
      const Row o = matvec(p[li.wo], attn[t]);
      for (std::size_t j = 0; j < d; ++j) x[t][j] += o[j];
      const Row c = norm(x[t], p[li.ln2_gain], p[li.ln2_offset]);
      Row f = matvec(p[li.ffn_w1], c);
      for (std::size_t r = 0; r < F; ++r) {
        const double u = f[r] + p[li.ffn_b1](r, 0);
        f[r] = 0.5 * u * (1 + std::tanh(std::sqrt(2 / M_PI) * (u + 0.044715 * u * u * u)));
      }
      const Row m = matvec(p[li.ffn_w2], f);
      for (std::size_t j = 0; j < d; ++j) x[t][j] += m[j] + p[li.ffn_b2](j, 0);
    }
  }
  for (auto& row : x) row = norm(row, p[L.lnf_gain], p[L.lnf_offset]);
  return x;
}

// Random prompt over token ids [kReservedCount, vocab), with [VISUAL] slots
// for random items and, half the time, a trailing [REC].
inline PromptPlan random_plan(Rng& rng, std::size_t vocab, const std::vector<std::string>& items,
                              std::size_t max_len) {
  PromptPlan plan;
  const std::size_t n = 2 + uniform_index(rng, max_len - 1);
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0 && uniform01(rng) < 0.15) {
      plan.slots.push_back({t, SlotKind::Visual, items[uniform_index(rng, items.size())]});
      plan.tokens.push_back(tokens::kVisual);
    } else {
      plan.tokens.push_back(static_cast<TokenId>(tokens::kReservedCount +
                                                 uniform_index(rng, vocab - tokens::kReservedCount)));
    }
  }
  if (uniform01(rng) < 0.5) {
    plan.slots.push_back({n, SlotKind::Rec, {}});
    plan.tokens.push_back(tokens::kRec);
  }
  plan.target_mask.assign(plan.tokens.size(), false);
  return plan;
}

template <typename T>
bool rows_identical(const Mat<T>& a, const Mat<T>& b, Eigen::Index from, Eigen::Index to) {
  for (Eigen::Index r = from; r < to; ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      if (a(r, c) != b(r, c)) return false;
  return true;
}

// Perturbing input row t leaves every hidden row before t bit-identical and
// changes row t.
template <typename T>
bool causal_perturbation_holds(const ParamSet<T>& params, const Mat<T>& emb, std::size_t t,
                               Rng& rng) {
  Mat<T> moved = emb;
  for (Eigen::Index c = 0; c < moved.cols(); ++c) moved(t, c) += static_cast<T>(normal01(rng));
  const auto a = forward(params, emb);
  const auto b = forward(params, moved);
  const auto ti = static_cast<Eigen::Index>(t);
  return rows_identical(a.hidden, b.hidden, 0, ti) && !rows_identical(a.hidden, b.hidden, ti, ti + 1);
}

// Copy of the store in which one item's Img row is replaced.
inline FeatureStore with_img_row(const FeatureStore& store, const std::string& item_id,
                                 const std::vector<float>& row) {
  FeatureStore out = store;
  const auto& img = store.get(FeatureType::Img);
  FeatureMatrix m(FeatureType::Img, img.dim());
  for (const auto& id : img.ids()) {
    if (id == item_id) {
      m.add_row(id, row);
    } else {
      m.add_row(id, img.row(id));
    }
  }
  out.set(std::move(m));
  return out;
}

// Changing the feature behind one [VISUAL] slot changes only that input row
// and leaves earlier hidden rows bit-identical. Returns false if the plan has
// no visual slot whose item appears exactly once.
template <typename T>
bool injection_locality_holds(const ParamSet<T>& params, const PromptPlan& plan,
                              const FeatureStore& features, Rng& rng, bool* checked = nullptr) {
  if (checked != nullptr) *checked = false;
  for (const auto& s : plan.slots) {
    if (s.kind != SlotKind::Visual) continue;
    const auto uses = std::count_if(plan.slots.begin(), plan.slots.end(),
                                    [&](const Slot& o) { return o.item_id == s.item_id; });
    if (uses != 1) continue;
    std::vector<float> row(features.dim(FeatureType::Img));
    for (auto& v : row) v = static_cast<float>(normal01(rng));
    const FeatureStore changed = with_img_row(features, s.item_id, row);
    const auto a = assemble_input_embeddings<T>(plan, params, features, false);
    const auto b = assemble_input_embeddings<T>(plan, params, changed, false);
    const auto p = static_cast<Eigen::Index>(s.position);
    const Eigen::Index n = a.x.rows();
    if (!rows_identical(a.x, b.x, 0, p) || !rows_identical(a.x, b.x, p + 1, n) ||
        rows_identical(a.x, b.x, p, p + 1)) {
      return false;
    }
    const auto fa = forward(params, a.x);
    const auto fb = forward(params, b.x);
    if (checked != nullptr) *checked = true;
    return rows_identical(fa.hidden, fb.hidden, 0, p);
  }
  return true;
}

struct GradSample {
  std::size_t tensor = 0;
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  double analytic = 0;
  double numeric = 0;
  double rel = 0;
};

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-6);
}

// Central differences on `per_group` coordinates of one tensor group. Each
// sample picks a tensor of the group uniformly, then a coordinate of it whose
// analytic gradient is nonzero (uniform over the tensor if there is none), so
// large embedding tables with mostly unused rows do not swamp the sample.
inline std::vector<GradSample> finite_difference_check(const ParamSet<double>& params,
                                                       const LossClosure<double>& loss,
                                                       ParamGroup group, std::size_t per_group,
                                                       std::uint64_t seed, double h = 1e-5) {
  const ParamSet<double> grads = gradients<double>(params, loss);
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    if (params.lay().specs()[i].group == group) members.push_back(i);
  }
  std::vector<GradSample> out;
  if (members.empty()) return out;
  Rng rng(seed);
  ParamSet<double> work = params;
  for (std::size_t s = 0; s < per_group; ++s) {
    const std::size_t ti = members[uniform_index(rng, members.size())];
    std::vector<Eigen::Index> live;
    for (Eigen::Index k = 0; k < grads[ti].size(); ++k) {
      if (grads[ti].data()[k] != 0) live.push_back(k);
    }
    const Eigen::Index flat = live.empty()
                                  ? static_cast<Eigen::Index>(uniform_index(rng, grads[ti].size()))
                                  : live[uniform_index(rng, live.size())];
    GradSample g;
    g.tensor = ti;
    g.row = flat / params[ti].cols();
    g.col = flat % params[ti].cols();
    const double orig = work[ti](g.row, g.col);
    work[ti](g.row, g.col) = orig + h;
    const double up = loss(work, nullptr);
    work[ti](g.row, g.col) = orig - h;
    const double down = loss(work, nullptr);
    work[ti](g.row, g.col) = orig;
    g.numeric = (up - down) / (2 * h);
    g.analytic = grads[ti](g.row, g.col);
    g.rel = relative_error(g.analytic, g.numeric);
    out.push_back(g);
  }
  return out;
}

// 1-indexed rank of truth after sorting by (score desc, id asc).
inline std::size_t brute_force_rank(const std::vector<std::string>& ids,
                                    const std::vector<double>& scores, const std::string& truth) {
  std::vector<std::pair<double, std::string>> order;
  for (std::size_t i = 0; i < ids.size(); ++i) order.emplace_back(-scores[i], ids[i]);
  std::sort(order.begin(), order.end());
  for (std::size_t i = 0; i < order.size(); ++i)
    if (order[i].second == truth) return i + 1;
  return 0;
}

inline double brute_force_ndcg(std::size_t rank, std::size_t k) {
  return rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

}  // namespace ilr::oracle
