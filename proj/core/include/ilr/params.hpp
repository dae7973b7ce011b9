#pragma once

// Model configuration and the flat list of trainable tensors. Every tensor is
// stored as a row-major matrix; vectors are n x 1.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ilr/feature_store.hpp"

namespace ilr {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

struct BackboneConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t ffn_dim = 64;
  std::size_t max_context = 4096;
  bool trainable = true;

  void validate() const;
};

struct ModelConfig {
  BackboneConfig backbone;
  std::size_t visual_dim = 32;
  std::size_t adaptor_hidden = 512;
  std::size_t shared_dim = 64;
  // Item feature dim per retrieval type (Img, CF, Text); 0 means no projector.
  std::array<std::size_t, 3> item_dims{0, 0, 0};

  bool has_projector(FeatureType t) const;
  void validate() const;
};

enum class ParamGroup { Backbone, Adaptor, RecToken, Projector };
std::string_view to_string(ParamGroup g);

// FanIn draws uniform(-sqrt(3/cols), sqrt(3/cols)) so every weight matrix
// starts near unit gain.
enum class ParamInit { Uniform, FanIn, Zero, One };

struct TensorSpec {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  ParamGroup group = ParamGroup::Backbone;
  ParamInit init = ParamInit::Uniform;
};

struct LayerIndex {
  std::size_t ln1_gain, ln1_offset, wq, wk, wv, wo;
  std::size_t ln2_gain, ln2_offset, ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

struct ProjectorIndex {
  std::size_t user_w, user_b, item_w, item_b;
};

class ParamLayout {
 public:
  explicit ParamLayout(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const std::vector<TensorSpec>& specs() const { return specs_; }
  std::size_t size() const { return specs_.size(); }
  std::optional<std::size_t> find(const std::string& name) const;

  std::size_t tok_emb = 0;
  std::size_t pos_emb = 0;
  std::vector<LayerIndex> layers;
  std::size_t lnf_gain = 0;
  std::size_t lnf_offset = 0;
  std::size_t adaptor_w1 = 0;
  std::size_t adaptor_b1 = 0;
  std::size_t adaptor_w2 = 0;
  std::size_t adaptor_b2 = 0;
  std::size_t rec = 0;
  std::array<std::optional<ProjectorIndex>, 3> projectors;

  const ProjectorIndex& projector(FeatureType t) const;

 private:
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols, ParamGroup group,
                  ParamInit init);

  ModelConfig config_;
  std::vector<TensorSpec> specs_;
};

template <typename T>
struct ParamSet {
  std::shared_ptr<const ParamLayout> layout;
  std::vector<Mat<T>> tensors;

  const ParamLayout& lay() const { return *layout; }
  Mat<T>& operator[](std::size_t i) { return tensors[i]; }
  const Mat<T>& operator[](std::size_t i) const { return tensors[i]; }
  std::size_t scalar_count() const;
  bool all_finite() const;
  void set_zero();

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    out.layout = layout;
    out.tensors.reserve(tensors.size());
    for (const auto& t : tensors) {
      out.tensors.push_back(t.template cast<U>());
    }
    return out;
  }

  // out += scale * other, tensor by tensor.
  void add_scaled(const ParamSet& other, T scale);
};

template <typename T>
ParamSet<T> zero_params(std::shared_ptr<const ParamLayout> layout);

// Embedding tables and the rec vector uniform(-scale, scale), weight
// matrices fan-in scaled, both from a seeded per-tensor stream; offsets zero;
// normalisation gains one.
template <typename T>
ParamSet<T> init_params(std::shared_ptr<const ParamLayout> layout, std::uint64_t seed,
                        double scale = 0.02);

template <typename T>
bool bit_identical(const ParamSet<T>& a, const ParamSet<T>& b);

template <typename T>
bool group_bit_identical(const ParamSet<T>& a, const ParamSet<T>& b, ParamGroup group);

}  // namespace ilr
