#include <gtest/gtest.h>

#include "acsr/formats.hpp"
#include "acsr/rng.hpp"
#include "test_support.hpp"

using namespace acsr;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * 3.0;
  return m;
}

double as_float(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

TEST(Lipf, HeaderLayout) {
  LipFeatures lip{Matrix::Constant(2, 3, 1.0)};
  const auto bytes = encode_lip_features(lip);
  ASSERT_EQ(bytes.size(), 16u + 4 * 6);
  EXPECT_EQ(bytes.substr(0, 4), "LIPF");
  EXPECT_EQ(bytes.substr(4, 4), std::string("\x01\x00\x00\x00", 4));
  EXPECT_EQ(bytes.substr(8, 4), std::string("\x02\x00\x00\x00", 4));
  EXPECT_EQ(bytes.substr(12, 4), std::string("\x03\x00\x00\x00", 4));
  // 1.0f little-endian
  EXPECT_EQ(bytes.substr(16, 4), std::string("\x00\x00\x80\x3f", 4));
}

TEST(Lipf, RoundTripIsExactForFloatValues) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    LipFeatures lip{random_matrix(rng, static_cast<Eigen::Index>(rng.index(50)), 1 + static_cast<Eigen::Index>(rng.index(40)))};
    const auto bytes = encode_lip_features(lip);
    const auto back = decode_lip_features(bytes);
    ASSERT_EQ(back.frames(), lip.frames());
    ASSERT_EQ(back.dim(), lip.dim());
    for (Eigen::Index i = 0; i < lip.values.size(); ++i) EXPECT_EQ(back.values.data()[i], as_float(lip.values.data()[i]));
    EXPECT_EQ(encode_lip_features(back), bytes);
  }
}

TEST(Lipf, FileRoundTrip) {
  testing_support::TempDir dir("lipf");
  Rng rng(2);
  LipFeatures lip{random_matrix(rng, 7, 5)};
  lip.values = lip.values.unaryExpr(&as_float);
  write_lip_features(dir.path() / "x.lipf", lip);
  EXPECT_EQ(read_lip_features(dir.path() / "x.lipf").values, lip.values);
  EXPECT_THROW(read_lip_features(dir.path() / "missing.lipf"), IoError);
}

TEST(Lipf, RejectsCorruptInput) {
  LipFeatures lip{Matrix::Constant(2, 3, 0.5)};
  const auto good = encode_lip_features(lip);
  EXPECT_THROW(decode_lip_features("LIP"), ParseError);
  EXPECT_THROW(decode_lip_features("XXXX" + good.substr(4)), ParseError);
  auto bad_version = good;
  bad_version[4] = 2;
  EXPECT_THROW(decode_lip_features(bad_version), ParseError);
  EXPECT_THROW(decode_lip_features(good.substr(0, good.size() - 1)), ParseError);
  EXPECT_THROW(decode_lip_features(good + "x"), ParseError);
  auto zero_dim = good;
  zero_dim[12] = 0;
  EXPECT_THROW(decode_lip_features(zero_dim), ParseError);
  auto nan = good;
  nan.replace(16, 4, std::string("\x00\x00\xc0\x7f", 4));
  EXPECT_THROW(decode_lip_features(nan), ValidationError);
}

TEST(Mfmp, RoundTrip) {
  Rng rng(3);
  for (std::size_t d : {1u, 7u, 64u}) {
    auto p = FusionParams::initial(d, rng.bits());
    p.lambda = 0.37;
    p.head_bias = random_matrix(rng, 1, 45);
    const auto bytes = encode_fusion_params(p);
    EXPECT_EQ(bytes.size(), 20u + 4 * (44 * d + d + 1 + d * 45 + 45));
    EXPECT_EQ(bytes.substr(0, 4), "MFMP");
    const auto back = decode_fusion_params(bytes);
    EXPECT_EQ(back.lambda, as_float(0.37));
    EXPECT_EQ(back.linear_weights, p.linear_weights.unaryExpr(&as_float));
    EXPECT_EQ(back.linear_bias, p.linear_bias.unaryExpr(&as_float));
    EXPECT_EQ(back.head_weights, p.head_weights.unaryExpr(&as_float));
    EXPECT_EQ(back.head_bias, p.head_bias.unaryExpr(&as_float));
    EXPECT_EQ(encode_fusion_params(back), bytes);
  }
}

TEST(Mfmp, RejectsCorruptInput) {
  const auto good = encode_fusion_params(FusionParams::initial(3, 1));
  EXPECT_THROW(decode_fusion_params("LIPF" + good.substr(4)), ParseError);
  auto wrong_hand = good;
  wrong_hand[8] = 43;
  EXPECT_THROW(decode_fusion_params(wrong_hand), ParseError);
  auto wrong_classes = good;
  wrong_classes[16] = 46;
  EXPECT_THROW(decode_fusion_params(wrong_classes), ParseError);
  EXPECT_THROW(decode_fusion_params(good.substr(0, good.size() - 4)), ParseError);
  EXPECT_THROW(decode_fusion_params(good + "abcd"), ParseError);
}
