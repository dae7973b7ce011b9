#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ilr {

enum class FeatureType : std::uint8_t { Img = 0, CF = 1, Text = 2, JointText = 3 };

inline constexpr std::array<FeatureType, 3> kRetrievalTypes{FeatureType::Img, FeatureType::CF,
                                                            FeatureType::Text};

std::string_view to_string(FeatureType t);
FeatureType parse_feature_type(std::string_view s);  // "img", "cf", "text", "joint_text"

// One feature type's item x dim matrix with an item_id -> row index.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(FeatureType type, std::size_t dim);

  FeatureType type() const { return type_; }
  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return ids_.size(); }

  void add_row(const std::string& item_id, std::span<const float> values);
  bool contains(const std::string& item_id) const { return index_.contains(item_id); }
  std::optional<std::size_t> row_index(const std::string& item_id) const;
  std::span<const float> row(std::size_t r) const { return {values_.data() + r * dim_, dim_}; }
  std::span<const float> row(const std::string& item_id) const;
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<float>& values() const { return values_; }

  bool operator==(const FeatureMatrix& other) const;

 private:
  FeatureType type_ = FeatureType::Img;
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Per-type matrices. Absent types are simply missing.
class FeatureStore {
 public:
  void set(FeatureMatrix m);
  bool has(FeatureType t) const { return mats_[static_cast<std::size_t>(t)].has_value(); }
  const FeatureMatrix& get(FeatureType t) const;
  std::size_t dim(FeatureType t) const { return has(t) ? get(t).dim() : 0; }

  // Row for an item, or nullptr when the type or the row is absent.
  const float* find_row(FeatureType t, const std::string& item_id) const;

 private:
  std::array<std::optional<FeatureMatrix>, 4> mats_;
};

// Binary layout, all integers little-endian:
//   "ILRFEAT1" | type tag u8 | n_items u32 | dim u32 |
//   n_items x (len u32, UTF-8 bytes) | n_items*dim float32 row-major
void save_feature_matrix(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix load_feature_matrix(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_feature_matrix(const FeatureMatrix& m);
FeatureMatrix decode_feature_matrix(std::span<const std::uint8_t> bytes);

// Conventional file name per type inside a feature directory.
std::string feature_file_name(FeatureType t);
// Loads every <dir>/<type>.ilrf that exists.
FeatureStore load_feature_dir(const std::filesystem::path& dir);

}  // namespace ilr
