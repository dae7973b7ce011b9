#include "ilr/backbone.hpp"

#include <cmath>
#include <limits>

#include "ilr/error.hpp"

namespace ilr {

namespace {

constexpr double kLnEps = 1e-5;

template <typename T>
void layer_norm(const Mat<T>& x, const Mat<T>& gain, const Mat<T>& offset, Mat<T>& xhat,
                Vec<T>& rstd, Mat<T>& y) {
  const Eigen::Index n = x.rows();
  const T inv_d = T(1) / static_cast<T>(x.cols());
  xhat.resize(n, x.cols());
  rstd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mean = x.row(i).sum() * inv_d;
    const auto centred = x.row(i).array() - mean;
    const T var = centred.square().sum() * inv_d;
    rstd(i) = T(1) / std::sqrt(var + static_cast<T>(kLnEps));
    xhat.row(i) = centred * rstd(i);
  }
  y = (xhat.array().rowwise() * gain.col(0).transpose().array()).rowwise() +
      offset.col(0).transpose().array();
}

// dx for y = xhat * gain + offset; accumulates gain/offset grads when given.
template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const Mat<T>& xhat, const Vec<T>& rstd,
                           const Mat<T>& gain, Mat<T>* d_gain, Mat<T>* d_offset) {
  if (d_gain != nullptr) {
    d_gain->col(0) += (dy.array() * xhat.array()).colwise().sum().transpose().matrix();
    d_offset->col(0) += dy.colwise().sum().transpose();
  }
  const Mat<T> dxhat = dy.array().rowwise() * gain.col(0).transpose().array();
  const T inv_d = T(1) / static_cast<T>(dy.cols());
  Mat<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const T m1 = dxhat.row(i).sum() * inv_d;
    const T m2 = dxhat.row(i).dot(xhat.row(i)) * inv_d;
    dx.row(i) = rstd(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2).matrix();
  }
  return dx;
}

template <typename T>
T gelu(T x) {
  const T k = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  const T u = k * (x + static_cast<T>(0.044715) * x * x * x);
  return static_cast<T>(0.5) * x * (T(1) + std::tanh(u));
}

template <typename T>
T gelu_grad(T x) {
  const T k = static_cast<T>(0.7978845608028654);
  const T c = static_cast<T>(0.044715);
  const T t = std::tanh(k * (x + c * x * x * x));
  return static_cast<T>(0.5) * (T(1) + t) +
         static_cast<T>(0.5) * x * (T(1) - t * t) * k * (T(1) + T(3) * c * x * x);
}

template <typename T>
Mat<T> linear(const Mat<T>& x, const Mat<T>& w) {
  return x * w.transpose();
}

}  // namespace

template <typename T>
Vec<T> adaptor_apply(const ParamSet<T>& params, const Vec<T>& v) {
  const auto& L = params.lay();
  const auto& w1 = params[L.adaptor_w1];
  if (v.size() != w1.cols()) {
    fail(ErrorKind::Argument, "adaptor_apply: feature dim " + std::to_string(v.size()) +
                                  ", expected " + std::to_string(w1.cols()));
  }
  const Vec<T> hidden = (w1 * v + params[L.adaptor_b1].col(0)).cwiseMax(T(0));
  return params[L.adaptor_w2] * hidden + params[L.adaptor_b2].col(0);
}

const float* visual_row(const FeatureStore& features, const std::string& item_id, bool fallback) {
  if (const float* r = features.find_row(FeatureType::Img, item_id)) {
    return r;
  }
  if (fallback) {
    if (const float* r = features.find_row(FeatureType::JointText, item_id)) {
      return r;
    }
    fail(ErrorKind::Argument,
         "item " + item_id + " has neither an image feature nor a joint-text fallback row");
  }
  fail(ErrorKind::Argument, "item " + item_id + " has no image feature (fallback disabled)");
}

template <typename T>
EmbeddedInput<T> assemble_input_embeddings(const PromptPlan& plan, const ParamSet<T>& params,
                                           const FeatureStore& features, bool fallback) {
  const auto& L = params.lay();
  const auto& cfg = L.config();
  const std::size_t n = plan.tokens.size();
  if (n == 0) {
    fail(ErrorKind::Argument, "assemble_input_embeddings: empty plan");
  }
  if (n > cfg.backbone.max_context) {
    fail(ErrorKind::Argument, "plan length " + std::to_string(n) + " exceeds max context " +
                                  std::to_string(cfg.backbone.max_context));
  }
  const auto d = static_cast<Eigen::Index>(cfg.backbone.d_model);
  EmbeddedInput<T> in;
  in.x.resize(static_cast<Eigen::Index>(n), d);
  const auto& tok = params[L.tok_emb];
  const auto& pos = params[L.pos_emb];
  for (std::size_t t = 0; t < n; ++t) {
    const TokenId id = plan.tokens[t];
    if (id < 0 || id >= tok.rows()) {
      fail(ErrorKind::Argument, "token id " + std::to_string(id) + " outside the vocabulary");
    }
    const auto ti = static_cast<Eigen::Index>(t);
    in.x.row(ti) = tok.row(id) + pos.row(ti);
  }

  std::vector<const Slot*> visual;
  for (const auto& s : plan.slots) {
    if (s.kind == SlotKind::Visual) {
      visual.push_back(&s);
    } else {
      in.rec_position = s.position;
    }
  }
  if (!visual.empty()) {
    const auto dv = static_cast<Eigen::Index>(cfg.visual_dim);
    in.visual_features.resize(static_cast<Eigen::Index>(visual.size()), dv);
    for (std::size_t k = 0; k < visual.size(); ++k) {
      const float* row = visual_row(features, visual[k]->item_id, fallback);
      const std::size_t have = features.has(FeatureType::Img)
                                   ? features.dim(FeatureType::Img)
                                   : features.dim(FeatureType::JointText);
      if (static_cast<Eigen::Index>(have) != dv) {
        fail(ErrorKind::Config, "visual feature dim " + std::to_string(have) +
                                    " does not match adaptor input " + std::to_string(dv));
      }
      for (Eigen::Index j = 0; j < dv; ++j) {
        in.visual_features(static_cast<Eigen::Index>(k), j) = static_cast<T>(row[j]);
      }
      in.visual_positions.push_back(visual[k]->position);
    }
    in.visual_pre = linear(in.visual_features, params[L.adaptor_w1]);
    in.visual_pre.rowwise() += params[L.adaptor_b1].col(0).transpose();
    Mat<T> out = linear<T>(in.visual_pre.cwiseMax(T(0)), params[L.adaptor_w2]);
    out.rowwise() += params[L.adaptor_b2].col(0).transpose();
    for (std::size_t k = 0; k < visual.size(); ++k) {
      const auto p = static_cast<Eigen::Index>(in.visual_positions[k]);
      in.x.row(p) = out.row(static_cast<Eigen::Index>(k)) + pos.row(p);
    }
  }
  if (in.rec_position) {
    const auto p = static_cast<Eigen::Index>(*in.rec_position);
    in.x.row(p) = params[L.rec].col(0).transpose() + pos.row(p);
  }
  return in;
}

template <typename T>
ForwardOutput<T> forward_rows(const ParamSet<T>& params, const Mat<T>& embeddings,
                              std::vector<std::size_t> logit_rows, ForwardCache<T>* cache) {
  const auto& L = params.lay();
  const auto& cfg = L.config().backbone;
  const Eigen::Index n = embeddings.rows();
  if (n == 0 || static_cast<std::size_t>(n) > cfg.max_context) {
    fail(ErrorKind::Argument, "forward: sequence length " + std::to_string(n) +
                                  " outside [1, " + std::to_string(cfg.max_context) + "]");
  }
  const auto heads = static_cast<Eigen::Index>(cfg.n_heads);
  const Eigen::Index dh = static_cast<Eigen::Index>(cfg.d_model) / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  ForwardCache<T> local;
  ForwardCache<T>& C = cache != nullptr ? *cache : local;
  C.layers.assign(L.layers.size(), LayerCache<T>{});

  Mat<T> x = embeddings;
  for (std::size_t l = 0; l < L.layers.size(); ++l) {
    const auto& li = L.layers[l];
    auto& lc = C.layers[l];
    layer_norm(x, params[li.ln1_gain], params[li.ln1_offset], lc.xhat1, lc.rstd1, lc.a);
    lc.q = linear(lc.a, params[li.wq]);
    lc.k = linear(lc.a, params[li.wk]);
    lc.v = linear(lc.a, params[li.wv]);
    lc.attn.resize(n, lc.q.cols());
    lc.probs.resize(static_cast<std::size_t>(heads));
    for (Eigen::Index h = 0; h < heads; ++h) {
      Mat<T>& P = lc.probs[static_cast<std::size_t>(h)];
      P.setZero(n, n);
      const Mat<T> qh = lc.q.middleCols(h * dh, dh) * scale;
      const Mat<T> kh = lc.k.middleCols(h * dh, dh);
      P.template triangularView<Eigen::Lower>() = qh * kh.transpose();
      for (Eigen::Index i = 0; i < n; ++i) {
        auto row = P.row(i).head(i + 1);
        const T mx = row.maxCoeff();
        row = (row.array() - mx).exp();
        row /= row.sum();
      }
      lc.attn.middleCols(h * dh, dh) =
          P.template triangularView<Eigen::Lower>() * lc.v.middleCols(h * dh, dh);
    }
    x += linear(lc.attn, params[li.wo]);

    layer_norm(x, params[li.ln2_gain], params[li.ln2_offset], lc.xhat2, lc.rstd2, lc.c);
    lc.f = linear(lc.c, params[li.ffn_w1]);
    lc.f.rowwise() += params[li.ffn_b1].col(0).transpose();
    lc.g = lc.f.unaryExpr([](T v) { return gelu(v); });
    Mat<T> m = linear(lc.g, params[li.ffn_w2]);
    m.rowwise() += params[li.ffn_b2].col(0).transpose();
    x += m;
  }

  ForwardOutput<T> out;
  layer_norm(x, params[L.lnf_gain], params[L.lnf_offset], C.xhatf, C.rstdf, out.hidden);
  const auto& tok = params[L.tok_emb];
  Mat<T> selected(static_cast<Eigen::Index>(logit_rows.size()), out.hidden.cols());
  for (std::size_t r = 0; r < logit_rows.size(); ++r) {
    if (logit_rows[r] >= static_cast<std::size_t>(n)) {
      fail(ErrorKind::Argument, "forward: logit row out of range");
    }
    selected.row(static_cast<Eigen::Index>(r)) =
        out.hidden.row(static_cast<Eigen::Index>(logit_rows[r]));
  }
  out.logits = selected * tok.transpose();
  out.logit_rows = std::move(logit_rows);
  return out;
}

template <typename T>
ForwardOutput<T> forward(const ParamSet<T>& params, const Mat<T>& embeddings) {
  std::vector<std::size_t> rows(static_cast<std::size_t>(embeddings.rows()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i] = i;
  }
  return forward_rows<T>(params, embeddings, std::move(rows), nullptr);
}

std::vector<std::size_t> supervised_rows(const std::vector<bool>& target_mask) {
  std::vector<std::size_t> rows;
  for (std::size_t t = 0; t < target_mask.size(); ++t) {
    if (target_mask[t]) {
      if (t == 0) {
        fail(ErrorKind::Argument, "lm_nll: position 0 cannot be supervised");
      }
      rows.push_back(t - 1);
    }
  }
  return rows;
}

template <typename T>
T lm_nll(const ForwardOutput<T>& output, const std::vector<TokenId>& tokens,
         const std::vector<bool>& target_mask, Mat<T>* d_logits) {
  if (target_mask.size() != tokens.size()) {
    fail(ErrorKind::Argument, "lm_nll: mask and token lengths differ");
  }
  const auto rows = supervised_rows(target_mask);
  if (rows.empty()) {
    fail(ErrorKind::Argument, "lm_nll: no supervised positions");
  }
  // Map each needed position to its logits row.
  std::vector<Eigen::Index> where(rows.size(), -1);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t r = 0; r < output.logit_rows.size(); ++r) {
      if (output.logit_rows[r] == rows[k]) {
        where[k] = static_cast<Eigen::Index>(r);
        break;
      }
    }
    if (where[k] < 0) {
      fail(ErrorKind::Argument, "lm_nll: logits missing for position " + std::to_string(rows[k]));
    }
  }
  if (d_logits != nullptr) {
    d_logits->setZero(output.logits.rows(), output.logits.cols());
  }
  const T inv = T(1) / static_cast<T>(rows.size());
  // Accumulate in double so float and double runs agree closely.
  double total = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto row = output.logits.row(where[k]);
    const TokenId target = tokens[rows[k] + 1];
    const T mx = row.maxCoeff();
    const T lse = mx + std::log((row.array() - mx).exp().sum());
    total += static_cast<double>(lse - row(target));
    if (d_logits != nullptr) {
      auto d = d_logits->row(where[k]);
      d = (row.array() - lse).exp().matrix() * inv;
      d(target) -= inv;
    }
  }
  return static_cast<T>(total / static_cast<double>(rows.size()));
}

template <typename T>
Vec<T> last_hidden(const ForwardOutput<T>& output, std::size_t position) {
  if (position >= static_cast<std::size_t>(output.hidden.rows())) {
    fail(ErrorKind::Argument, "last_hidden: position " + std::to_string(position) +
                                  " out of range " + std::to_string(output.hidden.rows()));
  }
  return output.hidden.row(static_cast<Eigen::Index>(position)).transpose();
}

template <typename T>
Mat<T> backward(const ParamSet<T>& params, const ForwardCache<T>& cache,
                const ForwardOutput<T>& output, const Mat<T>& d_logits, const Mat<T>& d_hidden,
                ParamSet<T>& grads, bool backbone_grads) {
  const auto& L = params.lay();
  const auto& cfg = L.config().backbone;
  const Eigen::Index n = output.hidden.rows();
  const Eigen::Index d = output.hidden.cols();
  const auto heads = static_cast<Eigen::Index>(cfg.n_heads);
  const Eigen::Index dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  auto G = [&](std::size_t idx) -> Mat<T>* { return backbone_grads ? &grads[idx] : nullptr; };

  Mat<T> dh_final = d_hidden.rows() == n ? d_hidden : Mat<T>::Zero(n, d);
  if (d_logits.rows() > 0) {
    const auto& tok = params[L.tok_emb];
    const Mat<T> d_sel = d_logits * tok;  // rows x d
    if (backbone_grads) {
      Mat<T> selected(d_logits.rows(), d);
      for (std::size_t r = 0; r < output.logit_rows.size(); ++r) {
        selected.row(static_cast<Eigen::Index>(r)) =
            output.hidden.row(static_cast<Eigen::Index>(output.logit_rows[r]));
      }
      grads[L.tok_emb].noalias() += d_logits.transpose() * selected;
    }
    for (std::size_t r = 0; r < output.logit_rows.size(); ++r) {
      dh_final.row(static_cast<Eigen::Index>(output.logit_rows[r])) +=
          d_sel.row(static_cast<Eigen::Index>(r));
    }
  }

  Mat<T> dx = layer_norm_backward<T>(dh_final, cache.xhatf, cache.rstdf, params[L.lnf_gain],
                                     G(L.lnf_gain), G(L.lnf_offset));

  for (std::size_t l = L.layers.size(); l-- > 0;) {
    const auto& li = L.layers[l];
    const auto& lc = cache.layers[l];

    // Feed-forward block.
    if (backbone_grads) {
      grads[li.ffn_b2].col(0) += dx.colwise().sum().transpose();
      grads[li.ffn_w2].noalias() += dx.transpose() * lc.g;
    }
    Mat<T> df = dx * params[li.ffn_w2];
    df.array() *= lc.f.unaryExpr([](T v) { return gelu_grad(v); }).array();
    if (backbone_grads) {
      grads[li.ffn_b1].col(0) += df.colwise().sum().transpose();
      grads[li.ffn_w1].noalias() += df.transpose() * lc.c;
    }
    const Mat<T> dc = df * params[li.ffn_w1];
    dx += layer_norm_backward<T>(dc, lc.xhat2, lc.rstd2, params[li.ln2_gain], G(li.ln2_gain),
                                 G(li.ln2_offset));

    // Attention block.
    if (backbone_grads) {
      grads[li.wo].noalias() += dx.transpose() * lc.attn;
    }
    const Mat<T> dattn = dx * params[li.wo];
    Mat<T> dq(n, d), dk(n, d), dv(n, d);
    Mat<T> dP(n, n);
    for (Eigen::Index h = 0; h < heads; ++h) {
      const Mat<T>& P = lc.probs[static_cast<std::size_t>(h)];
      const Mat<T> dO = dattn.middleCols(h * dh, dh);
      const Mat<T> vh = lc.v.middleCols(h * dh, dh);
      dP.setZero();
      dP.template triangularView<Eigen::Lower>() = dO * vh.transpose();
      dv.middleCols(h * dh, dh) = P.template triangularView<Eigen::Lower>().transpose() * dO;
      // Softmax backward, scaled for the 1/sqrt(dh) applied to scores.
      for (Eigen::Index i = 0; i < n; ++i) {
        auto p = P.row(i).head(i + 1);
        auto g = dP.row(i).head(i + 1);
        const T dot = p.dot(g);
        g = (p.array() * (g.array() - dot)).matrix() * scale;
      }
      dq.middleCols(h * dh, dh) =
          dP.template triangularView<Eigen::Lower>() * lc.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh) =
          dP.template triangularView<Eigen::Lower>().transpose() * lc.q.middleCols(h * dh, dh);
    }
    if (backbone_grads) {
      grads[li.wq].noalias() += dq.transpose() * lc.a;
      grads[li.wk].noalias() += dk.transpose() * lc.a;
      grads[li.wv].noalias() += dv.transpose() * lc.a;
    }
    const Mat<T> da = dq * params[li.wq] + dk * params[li.wk] + dv * params[li.wv];
    dx += layer_norm_backward<T>(da, lc.xhat1, lc.rstd1, params[li.ln1_gain], G(li.ln1_gain),
                                 G(li.ln1_offset));
  }
  return dx;
}

template <typename T>
void backward_embeddings(const PromptPlan& plan, const EmbeddedInput<T>& input,
                         const Mat<T>& d_emb, const ParamSet<T>& params, ParamSet<T>& grads,
                         bool backbone_grads) {
  const auto& L = params.lay();
  const Eigen::Index n = d_emb.rows();
  if (backbone_grads) {
    grads[L.pos_emb].topRows(n) += d_emb;
    std::vector<bool> slot(static_cast<std::size_t>(n), false);
    for (const auto& s : plan.slots) {
      slot[s.position] = true;
    }
    auto& gtok = grads[L.tok_emb];
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!slot[static_cast<std::size_t>(t)]) {
        gtok.row(plan.tokens[static_cast<std::size_t>(t)]) += d_emb.row(t);
      }
    }
  }
  if (!input.visual_positions.empty()) {
    const auto m = static_cast<Eigen::Index>(input.visual_positions.size());
    Mat<T> dout(m, d_emb.cols());
    for (Eigen::Index k = 0; k < m; ++k) {
      dout.row(k) = d_emb.row(static_cast<Eigen::Index>(input.visual_positions[k]));
    }
    const Mat<T> relu = input.visual_pre.cwiseMax(T(0));
    grads[L.adaptor_b2].col(0) += dout.colwise().sum().transpose();
    grads[L.adaptor_w2].noalias() += dout.transpose() * relu;
    Mat<T> dpre = dout * params[L.adaptor_w2];
    dpre.array() *= (input.visual_pre.array() > T(0)).template cast<T>();
    grads[L.adaptor_b1].col(0) += dpre.colwise().sum().transpose();
    grads[L.adaptor_w1].noalias() += dpre.transpose() * input.visual_features;
  }
  if (input.rec_position) {
    grads[L.rec].col(0) += d_emb.row(static_cast<Eigen::Index>(*input.rec_position)).transpose();
  }
}

template <typename T>
ParamSet<T> gradients(const ParamSet<T>& params, const LossClosure<T>& loss, T* loss_value) {
  ParamSet<T> grads = zero_params<T>(params.layout);
  const T value = loss(params, &grads);
  if (!std::isfinite(static_cast<double>(value))) {
    fail(ErrorKind::Numeric, "gradients: non-finite loss");
  }
  if (!params.lay().config().backbone.trainable) {
    for (std::size_t i = 0; i < grads.tensors.size(); ++i) {
      if (params.lay().specs()[i].group == ParamGroup::Backbone) {
        grads[i].setZero();
      }
    }
  }
  if (loss_value != nullptr) {
    *loss_value = value;
  }
  return grads;
}

#define ILR_INSTANTIATE(T)                                                                     \
  template Vec<T> adaptor_apply<T>(const ParamSet<T>&, const Vec<T>&);                         \
  template EmbeddedInput<T> assemble_input_embeddings<T>(const PromptPlan&, const ParamSet<T>&, \
                                                         const FeatureStore&, bool);           \
  template ForwardOutput<T> forward<T>(const ParamSet<T>&, const Mat<T>&);                     \
  template ForwardOutput<T> forward_rows<T>(const ParamSet<T>&, const Mat<T>&,                 \
                                            std::vector<std::size_t>, ForwardCache<T>*);       \
  template T lm_nll<T>(const ForwardOutput<T>&, const std::vector<TokenId>&,                   \
                       const std::vector<bool>&, Mat<T>*);                                     \
  template Vec<T> last_hidden<T>(const ForwardOutput<T>&, std::size_t);                        \
  template Mat<T> backward<T>(const ParamSet<T>&, const ForwardCache<T>&,                      \
                              const ForwardOutput<T>&, const Mat<T>&, const Mat<T>&,           \
                              ParamSet<T>&, bool);                                             \
  template void backward_embeddings<T>(const PromptPlan&, const EmbeddedInput<T>&,             \
                                       const Mat<T>&, const ParamSet<T>&, ParamSet<T>&, bool); \
  template ParamSet<T> gradients<T>(const ParamSet<T>&, const LossClosure<T>&, T*);

ILR_INSTANTIATE(float)
ILR_INSTANTIATE(double)

#undef ILR_INSTANTIATE

}  // namespace ilr
