#include <gtest/gtest.h>

#include <cstring>

#include "ilr/error.hpp"
#include "ilr/feature_store.hpp"
#include "test_util.hpp"

namespace ilr {
namespace {

// Byte-level writer kept separate from the library encoder.
struct Bytes {
  std::vector<std::uint8_t> b;
  void raw(std::string_view s) { b.insert(b.end(), s.begin(), s.end()); }
  void u8(std::uint8_t v) { b.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    u32(v);
  }
};

Bytes two_by_two() {
  Bytes w;
  w.raw("ILRFEAT1");
  w.u8(1);  // CF
  w.u32(2);
  w.u32(2);
  w.u32(2);
  w.raw("i1");
  w.u32(3);
  w.raw("i22");
  for (float f : {1.0f, -2.0f, 0.5f, 3.25f}) w.f32(f);
  return w;
}

std::string format_error(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_feature_matrix(bytes);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Format);
    return e.what();
  }
  ADD_FAILURE() << "decode accepted malformed bytes";
  return {};
}

TEST(FeatureStore, DecodesHandAssembledBytes) {
  const auto m = decode_feature_matrix(two_by_two().b);
  EXPECT_EQ(m.type(), FeatureType::CF);
  ASSERT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.dim(), 2u);
  EXPECT_EQ(m.ids()[1], "i22");
  EXPECT_EQ(m.row("i22")[1], 3.25f);
  EXPECT_EQ(m.row(0)[1], -2.0f);
}

TEST(FeatureStore, EncoderMatchesHandAssembledBytes) {
  FeatureMatrix m(FeatureType::CF, 2);
  const float a[] = {1.0f, -2.0f};
  const float b[] = {0.5f, 3.25f};
  m.add_row("i1", a);
  m.add_row("i22", b);
  EXPECT_EQ(encode_feature_matrix(m), two_by_two().b);
}

TEST(FeatureStore, FileRoundTrip) {
  const auto w = test::small_world();
  const auto dir = test::temp_dir("features");
  for (auto t : {FeatureType::Img, FeatureType::CF, FeatureType::Text, FeatureType::JointText}) {
    save_feature_matrix(w.data.features.get(t), dir / feature_file_name(t));
  }
  const auto store = load_feature_dir(dir);
  for (auto t : {FeatureType::Img, FeatureType::CF, FeatureType::Text, FeatureType::JointText}) {
    EXPECT_TRUE(store.get(t) == w.data.features.get(t)) << to_string(t);
  }
}

TEST(FeatureStore, WrongMagicIsFormatError) {
  auto b = two_by_two().b;
  b[3] = 'X';
  EXPECT_NE(format_error(b).find("magic"), std::string::npos);
}

TEST(FeatureStore, TruncationNamesTheOffset) {
  auto b = two_by_two().b;
  b.resize(b.size() - 3);
  const auto msg = format_error(b);
  EXPECT_NE(msg.find("truncated at offset " + std::to_string(b.size())), std::string::npos) << msg;

  // Cut inside the id table.
  auto c = two_by_two().b;
  c.resize(20);
  EXPECT_NE(format_error(c).find("offset"), std::string::npos);
}

TEST(FeatureStore, TrailingBytesRejected) {
  auto b = two_by_two().b;
  b.push_back(0);
  EXPECT_NE(format_error(b).find("trailing"), std::string::npos);
}

TEST(FeatureStore, UnknownTypeTagAndNonFinite) {
  auto b = two_by_two().b;
  b[8] = 9;
  EXPECT_NE(format_error(b).find("type tag"), std::string::npos);

  Bytes w;
  w.raw("ILRFEAT1");
  w.u8(0);
  w.u32(1);
  w.u32(1);
  w.u32(1);
  w.raw("x");
  w.f32(std::numeric_limits<float>::quiet_NaN());
  EXPECT_NE(format_error(w.b).find("non-finite"), std::string::npos);
}

TEST(FeatureStore, DuplicateRowsAndBadDims) {
  FeatureMatrix m(FeatureType::Img, 2);
  const float r[] = {0.f, 1.f};
  m.add_row("a", r);
  EXPECT_THROW(m.add_row("a", r), Error);
  const float short_row[] = {0.f};
  EXPECT_THROW(m.add_row("b", short_row), Error);
  EXPECT_THROW(FeatureMatrix(FeatureType::Img, 0), Error);
}

TEST(FeatureStore, MissingFileIsIoError) {
  try {
    load_feature_matrix("/nonexistent/img.ilrf");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST(FeatureStore, FindRowAbsentTypeOrItem) {
  FeatureStore s;
  EXPECT_EQ(s.find_row(FeatureType::Img, "a"), nullptr);
  FeatureMatrix m(FeatureType::Img, 1);
  const float r[] = {2.f};
  m.add_row("a", r);
  s.set(std::move(m));
  ASSERT_NE(s.find_row(FeatureType::Img, "a"), nullptr);
  EXPECT_EQ(*s.find_row(FeatureType::Img, "a"), 2.f);
  EXPECT_EQ(s.find_row(FeatureType::Img, "b"), nullptr);
  EXPECT_EQ(parse_feature_type("joint_text"), FeatureType::JointText);
  EXPECT_THROW(parse_feature_type("audio"), Error);
}

}  // namespace
}  // namespace ilr
