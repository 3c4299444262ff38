#pragma once

// Minimalist fusion: recognized hand codes become a T x 44 multi-hot matrix,
// which a single linear layer lifts to the lip-feature width before weighted
// addition, P = L + lambda * (H W + b).

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "acsr/domain.hpp"
#include "acsr/error.hpp"
#include "acsr/keyframe.hpp"
#include "acsr/recognizer.hpp"
#include "acsr/rng.hpp"

namespace acsr {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

inline constexpr std::size_t kHandDim = Vocabulary::kTokenCount;   // 44
inline constexpr std::size_t kNumClasses = Vocabulary::kSize;      // 44 tokens + blank
inline constexpr std::size_t kDefaultFeatureDim = 768;

struct HandMatrix {
  Matrix values;  // T x 44, entries in {0, 1}

  std::size_t frames() const { return static_cast<std::size_t>(values.rows()); }
  static HandMatrix zeros(std::size_t frames) { return {Matrix::Zero(static_cast<Eigen::Index>(frames), kHandDim)}; }
};

struct LipFeatures {
  Matrix values;  // T x d

  std::size_t frames() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }

  void validate() const {
    if (values.cols() < 1) throw ValidationError("lip features need d >= 1");
    if (!values.allFinite()) throw ValidationError("lip features contain non-finite values");
  }
};

struct FusionParams {
  Matrix linear_weights;   // 44 x d
  RowVector linear_bias;   // d
  double lambda = 1.0;
  Matrix head_weights;     // d x 45
  RowVector head_bias;     // 45

  std::size_t feature_dim() const { return static_cast<std::size_t>(linear_weights.cols()); }

  void validate() const {
    const auto d = linear_weights.cols();
    if (d < 1 || linear_weights.rows() != static_cast<Eigen::Index>(kHandDim) || linear_bias.size() != d ||
        head_weights.rows() != d || head_weights.cols() != static_cast<Eigen::Index>(kNumClasses) ||
        head_bias.size() != static_cast<Eigen::Index>(kNumClasses)) {
      throw ValidationError("fusion parameters have inconsistent dimensions");
    }
    if (!linear_weights.allFinite() || !linear_bias.allFinite() || !std::isfinite(lambda) ||
        !head_weights.allFinite() || !head_bias.allFinite()) {
      throw ValidationError("fusion parameters contain non-finite values");
    }
  }

  // lambda = 1; linear layer U[-k, k] with k = 1/sqrt(44); head U[-1/sqrt(d),
  // 1/sqrt(d)] with zero bias.
  static FusionParams initial(std::size_t d, std::uint64_t seed) {
    if (d < 1) throw ValidationError("feature dimension must be >= 1");
    Rng rng(seed);
    FusionParams p;
    const auto rows = static_cast<Eigen::Index>(kHandDim);
    const auto cols = static_cast<Eigen::Index>(d);
    const double k = 1.0 / std::sqrt(static_cast<double>(kHandDim));
    p.linear_weights.resize(rows, cols);
    for (Eigen::Index i = 0; i < p.linear_weights.size(); ++i) p.linear_weights.data()[i] = rng.uniform(-k, k);
    p.linear_bias.resize(cols);
    for (Eigen::Index i = 0; i < cols; ++i) p.linear_bias[i] = rng.uniform(-k, k);
    p.lambda = 1.0;
    const double h = 1.0 / std::sqrt(static_cast<double>(d));
    p.head_weights.resize(cols, static_cast<Eigen::Index>(kNumClasses));
    for (Eigen::Index i = 0; i < p.head_weights.size(); ++i) p.head_weights.data()[i] = rng.uniform(-h, h);
    p.head_bias = RowVector::Zero(static_cast<Eigen::Index>(kNumClasses));
    return p;
  }
};

// Row m of every group's members gets a 1 in the column of each phoneme coded
// by that group's recognized label. labels[i] must belong to groups[i].
inline HandMatrix embed_hand(const RecognitionResult& rec, const KeyframeResult& groups, std::size_t frames,
                             const CodingTable& table, const Vocabulary& vocab) {
  if (rec.labels.size() != groups.groups.size()) {
    throw ValidationError("embed_hand: " + std::to_string(rec.labels.size()) + " labels for " +
                          std::to_string(groups.groups.size()) + " groups");
  }
  (void)vocab;
  HandMatrix hand = HandMatrix::zeros(frames);
  for (std::size_t g = 0; g < groups.groups.size(); ++g) {
    const auto& group = groups.groups[g];
    const auto& label = rec.labels[g];
    if (label.frame != group.keyframe) {
      throw ValidationError("embed_hand: label " + std::to_string(g) + " is for frame " + std::to_string(label.frame) +
                            " but the group keyframe is " + std::to_string(group.keyframe));
    }
    const auto phonemes = table.phonemes_for(label.code);
    for (std::size_t frame : group.members) {
      if (frame >= frames) {
        throw ValidationError("embed_hand: frame " + std::to_string(frame) + " out of range for T=" +
                              std::to_string(frames));
      }
      for (std::size_t idx : phonemes) {
        hand.values(static_cast<Eigen::Index>(frame), static_cast<Eigen::Index>(Vocabulary::hand_column(idx))) = 1.0;
      }
    }
  }
  return hand;
}

// f(H) = H W + b, applied row-wise.
inline Matrix hand_projection(const HandMatrix& hand, const FusionParams& params) {
  Matrix f = hand.values * params.linear_weights;
  f.rowwise() += params.linear_bias;
  return f;
}

inline Matrix fuse(const LipFeatures& lip, const HandMatrix& hand, const FusionParams& params) {
  if (lip.frames() != hand.frames()) {
    throw ValidationError("fuse: lip features have " + std::to_string(lip.frames()) + " frames, hand matrix has " +
                          std::to_string(hand.frames()));
  }
  if (lip.dim() != params.feature_dim()) {
    throw ValidationError("fuse: lip dimension " + std::to_string(lip.dim()) + " does not match parameters (" +
                          std::to_string(params.feature_dim()) + ")");
  }
  Matrix fused = lip.values;
  if (params.lambda != 0.0) fused.noalias() += params.lambda * hand_projection(hand, params);
  return fused;
}

// Classifier head over fused features: T x 45 logits, blank at column 0.
inline Matrix head_logits(const Matrix& fused, const FusionParams& params) {
  Matrix logits = fused * params.head_weights;
  logits.rowwise() += params.head_bias;
  return logits;
}

}  // namespace acsr
