#pragma once

// Little-endian binary containers.
//
//   LIPF: "LIPF" u32 version=1, u32 T, u32 d, then T*d float32 row-major.
//   MFMP: "MFMP" u32 version=1, u32 hand_dim=44, u32 d, u32 classes=45, then
//         float32 linear_weights (44 x d, row-major), linear_bias (d),
//         lambda (1), head_weights (d x 45, row-major), head_bias (45).

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>

#include "acsr/detail/text.hpp"
#include "acsr/error.hpp"
#include "acsr/fusion.hpp"

namespace acsr {

namespace formats_detail {

class Writer {
 public:
  void magic(std::string_view m) { bytes_.append(m); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  Reader(std::string_view bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  void magic(std::string_view m) {
    if (bytes_.substr(0, m.size()) != m) throw ParseError(source_ + ": bad magic, expected '" + std::string(m) + "'");
    pos_ = m.size();
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  void finish() const {
    if (pos_ != bytes_.size()) throw ParseError(source_ + ": " + std::to_string(bytes_.size() - pos_) + " trailing bytes");
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::string& source() const { return source_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ParseError(source_ + ": truncated");
  }
  std::string_view bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

inline void read_matrix(Reader& r, Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f32();
}

}  // namespace formats_detail

inline constexpr std::uint32_t kFormatVersion = 1;

inline std::string encode_lip_features(const LipFeatures& lip) {
  formats_detail::Writer w;
  w.magic("LIPF");
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(lip.frames()));
  w.u32(static_cast<std::uint32_t>(lip.dim()));
  for (Eigen::Index i = 0; i < lip.values.size(); ++i) w.f32(lip.values.data()[i]);
  return w.bytes();
}

inline LipFeatures decode_lip_features(std::string_view bytes, std::string source = "LIPF data") {
  formats_detail::Reader r(bytes, std::move(source));
  r.magic("LIPF");
  const auto version = r.u32();
  if (version != kFormatVersion) throw ParseError(r.source() + ": unsupported version " + std::to_string(version));
  const auto frames = r.u32();
  const auto dim = r.u32();
  if (dim == 0) throw ParseError(r.source() + ": feature dimension is 0");
  if (r.remaining() != 4ull * frames * dim) {
    throw ParseError(r.source() + ": payload size does not match " + std::to_string(frames) + "x" + std::to_string(dim));
  }
  LipFeatures lip{Matrix(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(dim))};
  formats_detail::read_matrix(r, lip.values);
  r.finish();
  lip.validate();
  return lip;
}

inline void write_lip_features(const std::filesystem::path& path, const LipFeatures& lip) {
  detail::write_file(path, encode_lip_features(lip));
}

inline LipFeatures read_lip_features(const std::filesystem::path& path) {
  return decode_lip_features(detail::read_file(path), path.string());
}

inline std::string encode_fusion_params(const FusionParams& p) {
  p.validate();
  formats_detail::Writer w;
  w.magic("MFMP");
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(kHandDim));
  w.u32(static_cast<std::uint32_t>(p.feature_dim()));
  w.u32(static_cast<std::uint32_t>(kNumClasses));
  for (Eigen::Index i = 0; i < p.linear_weights.size(); ++i) w.f32(p.linear_weights.data()[i]);
  for (Eigen::Index i = 0; i < p.linear_bias.size(); ++i) w.f32(p.linear_bias[i]);
  w.f32(p.lambda);
  for (Eigen::Index i = 0; i < p.head_weights.size(); ++i) w.f32(p.head_weights.data()[i]);
  for (Eigen::Index i = 0; i < p.head_bias.size(); ++i) w.f32(p.head_bias[i]);
  return w.bytes();
}

inline FusionParams decode_fusion_params(std::string_view bytes, std::string source = "MFMP data") {
  formats_detail::Reader r(bytes, std::move(source));
  r.magic("MFMP");
  const auto version = r.u32();
  if (version != kFormatVersion) throw ParseError(r.source() + ": unsupported version " + std::to_string(version));
  const auto hand_dim = r.u32();
  const auto d = r.u32();
  const auto classes = r.u32();
  if (hand_dim != kHandDim || classes != kNumClasses || d == 0) {
    throw ParseError(r.source() + ": unexpected dimensions " + std::to_string(hand_dim) + "/" + std::to_string(d) + "/" +
                     std::to_string(classes));
  }
  const auto rows = static_cast<Eigen::Index>(kHandDim);
  const auto cols = static_cast<Eigen::Index>(d);
  const auto k = static_cast<Eigen::Index>(kNumClasses);
  FusionParams p;
  p.linear_weights.resize(rows, cols);
  p.linear_bias.resize(cols);
  p.head_weights.resize(cols, k);
  p.head_bias.resize(k);
  formats_detail::read_matrix(r, p.linear_weights);
  for (Eigen::Index i = 0; i < cols; ++i) p.linear_bias[i] = r.f32();
  p.lambda = r.f32();
  formats_detail::read_matrix(r, p.head_weights);
  for (Eigen::Index i = 0; i < k; ++i) p.head_bias[i] = r.f32();
  r.finish();
  p.validate();
  return p;
}

inline void write_fusion_params(const std::filesystem::path& path, const FusionParams& p) {
  detail::write_file(path, encode_fusion_params(p));
}

inline FusionParams read_fusion_params(const std::filesystem::path& path) {
  return decode_fusion_params(detail::read_file(path), path.string());
}

}  // namespace acsr
