#include "ilr/feature_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ilr/error.hpp"

namespace ilr {

namespace {

constexpr std::string_view kMagic = "ILRFEAT1";

static_assert(std::endian::native == std::endian::little,
              "feature store I/O assumes a little-endian host");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      fail(ErrorKind::Format, std::string("feature store truncated at offset ") +
                                  std::to_string(pos_) + " while reading " + what);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string_view to_string(FeatureType t) {
  switch (t) {
    case FeatureType::Img:
      return "img";
    case FeatureType::CF:
      return "cf";
    case FeatureType::Text:
      return "text";
    case FeatureType::JointText:
      return "joint_text";
  }
  return "?";
}

FeatureType parse_feature_type(std::string_view s) {
  if (s == "img" || s == "Img") return FeatureType::Img;
  if (s == "cf" || s == "CF") return FeatureType::CF;
  if (s == "text" || s == "Text") return FeatureType::Text;
  if (s == "joint_text" || s == "JointText") return FeatureType::JointText;
  fail(ErrorKind::Config, "unknown feature type '" + std::string(s) + "'");
}

FeatureMatrix::FeatureMatrix(FeatureType type, std::size_t dim) : type_(type), dim_(dim) {
  if (dim == 0) {
    fail(ErrorKind::Argument, "feature matrix dim must be positive");
  }
}

void FeatureMatrix::add_row(const std::string& item_id, std::span<const float> values) {
  if (values.size() != dim_) {
    fail(ErrorKind::Argument, "feature row for " + item_id + " has dim " +
                                  std::to_string(values.size()) + ", expected " +
                                  std::to_string(dim_));
  }
  if (index_.contains(item_id)) {
    fail(ErrorKind::Argument, "duplicate feature row for " + item_id);
  }
  for (float v : values) {
    if (!std::isfinite(v)) {
      fail(ErrorKind::Argument, "non-finite feature value for " + item_id);
    }
  }
  index_.emplace(item_id, ids_.size());
  ids_.push_back(item_id);
  values_.insert(values_.end(), values.begin(), values.end());
}

std::optional<std::size_t> FeatureMatrix::row_index(const std::string& item_id) const {
  auto it = index_.find(item_id);
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::span<const float> FeatureMatrix::row(const std::string& item_id) const {
  auto r = row_index(item_id);
  if (!r) {
    fail(ErrorKind::Argument,
         std::string("no ") + std::string(to_string(type_)) + " features for item " + item_id);
  }
  return row(*r);
}

bool FeatureMatrix::operator==(const FeatureMatrix& other) const {
  return type_ == other.type_ && dim_ == other.dim_ && ids_ == other.ids_ &&
         values_.size() == other.values_.size() &&
         std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(float)) == 0;
}

void FeatureStore::set(FeatureMatrix m) {
  const auto slot = static_cast<std::size_t>(m.type());
  mats_[slot] = std::move(m);
}

const FeatureMatrix& FeatureStore::get(FeatureType t) const {
  const auto& m = mats_[static_cast<std::size_t>(t)];
  if (!m) {
    fail(ErrorKind::Config, "feature type " + std::string(to_string(t)) + " not loaded");
  }
  return *m;
}

const float* FeatureStore::find_row(FeatureType t, const std::string& item_id) const {
  const auto& m = mats_[static_cast<std::size_t>(t)];
  if (!m) {
    return nullptr;
  }
  auto r = m->row_index(item_id);
  return r ? m->row(*r).data() : nullptr;
}

std::vector<std::uint8_t> encode_feature_matrix(const FeatureMatrix& m) {
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  out.push_back(static_cast<std::uint8_t>(m.type()));
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.dim()));
  for (const auto& id : m.ids()) {
    put_u32(out, static_cast<std::uint32_t>(id.size()));
    out.insert(out.end(), id.begin(), id.end());
  }
  const auto* raw = reinterpret_cast<const std::uint8_t*>(m.values().data());
  out.insert(out.end(), raw, raw + m.values().size() * sizeof(float));
  return out;
}

FeatureMatrix decode_feature_matrix(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.take(kMagic.size(), "magic");
  if (std::memcmp(magic.data(), kMagic.data(), kMagic.size()) != 0) {
    fail(ErrorKind::Format, "feature store: bad magic at offset 0");
  }
  const std::size_t tag_offset = r.offset();
  const std::uint8_t tag = r.u8("type tag");
  if (tag > 3) {
    fail(ErrorKind::Format, "feature store: unknown type tag " + std::to_string(tag) +
                                " at offset " + std::to_string(tag_offset));
  }
  const std::uint32_t n = r.u32("n_items");
  const std::size_t dim_offset = r.offset();
  const std::uint32_t dim = r.u32("dim");
  if (dim == 0) {
    fail(ErrorKind::Format, "feature store: zero dim at offset " + std::to_string(dim_offset));
  }
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t len = r.u32("item id length");
    auto s = r.take(len, "item id");
    ids.emplace_back(reinterpret_cast<const char*>(s.data()), s.size());
  }
  const std::size_t payload = static_cast<std::size_t>(n) * dim * sizeof(float);
  if (r.remaining() < payload) {
    fail(ErrorKind::Format, "feature store truncated at offset " +
                                std::to_string(r.offset() + r.remaining()) + ": payload needs " +
                                std::to_string(payload) + " bytes, found " +
                                std::to_string(r.remaining()));
  }
  const std::size_t values_offset = r.offset();
  auto raw = r.take(payload, "values");
  if (r.remaining() != 0) {
    fail(ErrorKind::Format, "feature store: " + std::to_string(r.remaining()) +
                                " trailing bytes at offset " + std::to_string(r.offset()));
  }
  FeatureMatrix m(static_cast<FeatureType>(tag), dim);
  std::vector<float> row(dim);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::memcpy(row.data(), raw.data() + static_cast<std::size_t>(i) * dim * sizeof(float),
                dim * sizeof(float));
    for (std::uint32_t j = 0; j < dim; ++j) {
      if (!std::isfinite(row[j])) {
        fail(ErrorKind::Format, "feature store: non-finite value at offset " +
                                    std::to_string(values_offset +
                                                   (static_cast<std::size_t>(i) * dim + j) * 4));
      }
    }
    try {
      m.add_row(ids[i], row);
    } catch (const Error& e) {
      fail(ErrorKind::Format, std::string("feature store: ") + e.what());
    }
  }
  return m;
}

void save_feature_matrix(const FeatureMatrix& m, const std::filesystem::path& path) {
  const auto bytes = encode_feature_matrix(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    fail(ErrorKind::Io, "cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    fail(ErrorKind::Io, "write failed: " + path.string());
  }
}

FeatureMatrix load_feature_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorKind::Io, "cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_feature_matrix(bytes);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

std::string feature_file_name(FeatureType t) { return std::string(to_string(t)) + ".ilrf"; }

FeatureStore load_feature_dir(const std::filesystem::path& dir) {
  FeatureStore store;
  for (auto t : {FeatureType::Img, FeatureType::CF, FeatureType::Text, FeatureType::JointText}) {
    const auto p = dir / feature_file_name(t);
    if (std::filesystem::exists(p)) {
      auto m = load_feature_matrix(p);
      if (m.type() != t) {
        fail(ErrorKind::Format, p.string() + ": type tag does not match file name");
      }
      store.set(std::move(m));
    }
  }
  return store;
}

}  // namespace ilr
