#include "ilr/params.hpp"

#include <cmath>
#include <cstring>

#include "ilr/error.hpp"
#include "ilr/random.hpp"

namespace ilr {

void BackboneConfig::validate() const {
  if (vocab_size <= 6) {
    fail(ErrorKind::Config, "backbone: vocab_size must exceed the reserved tokens");
  }
  if (d_model == 0 || n_layers == 0 || n_heads == 0 || ffn_dim == 0 || max_context == 0) {
    fail(ErrorKind::Config, "backbone: dims must be positive");
  }
  if (d_model % n_heads != 0) {
    fail(ErrorKind::Config, "backbone: d_model must be divisible by n_heads");
  }
}

bool ModelConfig::has_projector(FeatureType t) const {
  const auto i = static_cast<std::size_t>(t);
  return i < 3 && item_dims[i] > 0;
}

void ModelConfig::validate() const {
  backbone.validate();
  if (visual_dim == 0 || adaptor_hidden == 0 || shared_dim == 0) {
    fail(ErrorKind::Config, "model: visual_dim, adaptor_hidden and shared_dim must be positive");
  }
}

std::string_view to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::Backbone:
      return "backbone";
    case ParamGroup::Adaptor:
      return "adaptor";
    case ParamGroup::RecToken:
      return "rec";
    case ParamGroup::Projector:
      return "projector";
  }
  return "?";
}

ParamLayout::ParamLayout(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& bb = config_.backbone;
  const auto d = static_cast<Eigen::Index>(bb.d_model);
  const auto f = static_cast<Eigen::Index>(bb.ffn_dim);
  const auto B = ParamGroup::Backbone;
  tok_emb = add("backbone.tok_emb", static_cast<Eigen::Index>(bb.vocab_size), d, B,
                ParamInit::Uniform);
  pos_emb = add("backbone.pos_emb", static_cast<Eigen::Index>(bb.max_context), d, B,
                ParamInit::Uniform);
  for (std::size_t l = 0; l < bb.n_layers; ++l) {
    const std::string p = "backbone.layer" + std::to_string(l) + ".";
    LayerIndex li{};
    li.ln1_gain = add(p + "ln1.gain", d, 1, B, ParamInit::One);
    li.ln1_offset = add(p + "ln1.offset", d, 1, B, ParamInit::Zero);
    li.wq = add(p + "attn.wq", d, d, B, ParamInit::FanIn);
    li.wk = add(p + "attn.wk", d, d, B, ParamInit::FanIn);
    li.wv = add(p + "attn.wv", d, d, B, ParamInit::FanIn);
    li.wo = add(p + "attn.wo", d, d, B, ParamInit::FanIn);
    li.ln2_gain = add(p + "ln2.gain", d, 1, B, ParamInit::One);
    li.ln2_offset = add(p + "ln2.offset", d, 1, B, ParamInit::Zero);
    li.ffn_w1 = add(p + "ffn.w1", f, d, B, ParamInit::FanIn);
    li.ffn_b1 = add(p + "ffn.b1", f, 1, B, ParamInit::Zero);
    li.ffn_w2 = add(p + "ffn.w2", d, f, B, ParamInit::FanIn);
    li.ffn_b2 = add(p + "ffn.b2", d, 1, B, ParamInit::Zero);
    layers.push_back(li);
  }
  lnf_gain = add("backbone.lnf.gain", d, 1, B, ParamInit::One);
  lnf_offset = add("backbone.lnf.offset", d, 1, B, ParamInit::Zero);

  const auto h = static_cast<Eigen::Index>(config_.adaptor_hidden);
  const auto dv = static_cast<Eigen::Index>(config_.visual_dim);
  adaptor_w1 = add("adaptor.w1", h, dv, ParamGroup::Adaptor, ParamInit::FanIn);
  adaptor_b1 = add("adaptor.b1", h, 1, ParamGroup::Adaptor, ParamInit::Zero);
  adaptor_w2 = add("adaptor.w2", d, h, ParamGroup::Adaptor, ParamInit::FanIn);
  adaptor_b2 = add("adaptor.b2", d, 1, ParamGroup::Adaptor, ParamInit::Zero);

  rec = add("rec.embedding", d, 1, ParamGroup::RecToken, ParamInit::Uniform);

  const auto ds = static_cast<Eigen::Index>(config_.shared_dim);
  for (auto t : kRetrievalTypes) {
    if (!config_.has_projector(t)) {
      continue;
    }
    const std::string p = "projector." + std::string(to_string(t)) + ".";
    const auto in = static_cast<Eigen::Index>(config_.item_dims[static_cast<std::size_t>(t)]);
    ProjectorIndex pi{};
    pi.user_w = add(p + "user.w", ds, d, ParamGroup::Projector, ParamInit::FanIn);
    pi.user_b = add(p + "user.b", ds, 1, ParamGroup::Projector, ParamInit::Zero);
    pi.item_w = add(p + "item.w", ds, in, ParamGroup::Projector, ParamInit::FanIn);
    pi.item_b = add(p + "item.b", ds, 1, ParamGroup::Projector, ParamInit::Zero);
    projectors[static_cast<std::size_t>(t)] = pi;
  }
}

std::size_t ParamLayout::add(std::string name, Eigen::Index rows, Eigen::Index cols,
                             ParamGroup group, ParamInit init) {
  specs_.push_back({std::move(name), rows, cols, group, init});
  return specs_.size() - 1;
}

std::optional<std::size_t> ParamLayout::find(const std::string& name) const {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].name == name) {
      return i;
    }
  }
  return std::nullopt;
}

const ProjectorIndex& ParamLayout::projector(FeatureType t) const {
  const auto i = static_cast<std::size_t>(t);
  if (i >= 3 || !projectors[i]) {
    fail(ErrorKind::Argument, "no projector for feature type " + std::string(to_string(t)));
  }
  return *projectors[i];
}

template <typename T>
std::size_t ParamSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) {
    n += static_cast<std::size_t>(t.size());
  }
  return n;
}

template <typename T>
bool ParamSet<T>::all_finite() const {
  for (const auto& t : tensors) {
    if (!t.allFinite()) {
      return false;
    }
  }
  return true;
}

template <typename T>
void ParamSet<T>::set_zero() {
  for (auto& t : tensors) {
    t.setZero();
  }
}

template <typename T>
void ParamSet<T>::add_scaled(const ParamSet& other, T scale) {
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    tensors[i] += scale * other.tensors[i];
  }
}

template <typename T>
ParamSet<T> zero_params(std::shared_ptr<const ParamLayout> layout) {
  ParamSet<T> p;
  p.tensors.reserve(layout->size());
  for (const auto& s : layout->specs()) {
    p.tensors.push_back(Mat<T>::Zero(s.rows, s.cols));
  }
  p.layout = std::move(layout);
  return p;
}

template <typename T>
ParamSet<T> init_params(std::shared_ptr<const ParamLayout> layout, std::uint64_t seed,
                        double scale) {
  ParamSet<T> p = zero_params<T>(layout);
  for (std::size_t i = 0; i < layout->size(); ++i) {
    const auto& s = layout->specs()[i];
    auto& t = p.tensors[i];
    switch (s.init) {
      case ParamInit::Zero:
        break;
      case ParamInit::One:
        t.setOnes();
        break;
      case ParamInit::Uniform:
      case ParamInit::FanIn: {
        const double bound = s.init == ParamInit::FanIn
                                 ? std::sqrt(3.0 / static_cast<double>(s.cols))
                                 : scale;
        // Per-tensor stream so adding a projector does not shift other tensors.
        Rng rng(mix_seed(seed, s.name));
        for (Eigen::Index k = 0; k < t.size(); ++k) {
          t.data()[k] = static_cast<T>(uniform(rng, -bound, bound));
        }
        break;
      }
    }
  }
  return p;
}

template <typename T>
bool bit_identical(const ParamSet<T>& a, const ParamSet<T>& b) {
  if (a.tensors.size() != b.tensors.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    const auto& x = a.tensors[i];
    const auto& y = b.tensors[i];
    if (x.rows() != y.rows() || x.cols() != y.cols() ||
        std::memcmp(x.data(), y.data(), sizeof(T) * static_cast<std::size_t>(x.size())) != 0) {
      return false;
    }
  }
  return true;
}

template <typename T>
bool group_bit_identical(const ParamSet<T>& a, const ParamSet<T>& b, ParamGroup group) {
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    if (a.lay().specs()[i].group != group) {
      continue;
    }
    const auto& x = a.tensors[i];
    const auto& y = b.tensors[i];
    if (std::memcmp(x.data(), y.data(), sizeof(T) * static_cast<std::size_t>(x.size())) != 0) {
      return false;
    }
  }
  return true;
}

template struct ParamSet<float>;
template struct ParamSet<double>;
template ParamSet<float> zero_params<float>(std::shared_ptr<const ParamLayout>);
template ParamSet<double> zero_params<double>(std::shared_ptr<const ParamLayout>);
template ParamSet<float> init_params<float>(std::shared_ptr<const ParamLayout>, std::uint64_t,
                                            double);
template ParamSet<double> init_params<double>(std::shared_ptr<const ParamLayout>, std::uint64_t,
                                              double);
template bool bit_identical<float>(const ParamSet<float>&, const ParamSet<float>&);
template bool bit_identical<double>(const ParamSet<double>&, const ParamSet<double>&);
template bool group_bit_identical<float>(const ParamSet<float>&, const ParamSet<float>&,
                                         ParamGroup);
template bool group_bit_identical<double>(const ParamSet<double>&, const ParamSet<double>&,
                                          ParamGroup);

}  // namespace ilr
