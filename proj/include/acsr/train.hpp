#pragma once

// Desk-scale training of the fusion layer and a linear CTC head over frozen
// lip features, by plain mini-batch gradient descent.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "acsr/ctc.hpp"
#include "acsr/error.hpp"
#include "acsr/eval.hpp"
#include "acsr/fusion.hpp"
#include "acsr/rng.hpp"

namespace acsr {

struct TrainingSample {
  LipFeatures lip;
  HandMatrix hand;
  std::vector<std::size_t> target;  // vocabulary indices, blank excluded
};

struct TrainConfig {
  std::size_t epochs = 15;
  double learning_rate = 0.3;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void validate() const {
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (jobs < 1) throw ValidationError("jobs must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning_rate must be >= 0");
  }
};

struct TrainReport {
  std::vector<double> epoch_losses;  // mean per-token CTC loss seen during each epoch
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t epoch, double loss)
      : Error("training diverged at epoch " + std::to_string(epoch) + " (loss " + std::to_string(loss) + ")"),
        epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

inline Matrix sample_logits(const LipFeatures& lip, const HandMatrix& hand, const FusionParams& params) {
  return head_logits(fuse(lip, hand, params), params);
}

// Gradient of one sample's CTC loss, divided by the target length, with
// respect to every parameter; added into a FusionParams-shaped container.
// H is a sparse multi-hot matrix, so the hand path goes through
// F Wh = H (W Wh) + b Wh instead of materializing F = H W + b.
inline double accumulate_gradient(const TrainingSample& s, const FusionParams& p, FusionParams& grad) {
  const Matrix& lip = s.lip.values;
  const Eigen::Index frames = lip.rows();
  std::vector<std::pair<Eigen::Index, Eigen::Index>> active;  // (frame, hand column) with H = 1
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index c = 0; c < s.hand.values.cols(); ++c) {
      if (s.hand.values(t, c) != 0.0) active.emplace_back(t, c);
    }
  }
  for (const auto& [t, c] : active) {
    if (s.hand.values(t, c) != 1.0) throw ValidationError("hand matrix entries must be 0 or 1");
  }
  const Matrix w_wh = p.linear_weights * p.head_weights;        // 44 x 45
  const RowVector b_wh = p.linear_bias * p.head_weights;        // 45
  Matrix f_wh(frames, w_wh.cols());                             // T x 45
  f_wh.rowwise() = b_wh;
  for (const auto& [t, c] : active) f_wh.row(t) += w_wh.row(c);

  Matrix logits = lip * p.head_weights;
  logits += p.lambda * f_wh;
  logits.rowwise() += p.head_bias;
  CtcResult ctc = ctc_loss(logits, s.target);
  const double scale = 1.0 / static_cast<double>(std::max<std::size_t>(1, s.target.size()));
  const Matrix g = ctc.gradient * scale;

  Matrix ht_g = Matrix::Zero(w_wh.rows(), g.cols());            // H^T g, 44 x 45
  for (const auto& [t, c] : active) ht_g.row(c) += g.row(t);
  const RowVector g_sum = g.colwise().sum();                    // 45
  grad.head_weights.noalias() += lip.transpose() * g;
  grad.head_weights.noalias() += p.lambda * (p.linear_weights.transpose() * ht_g);
  grad.head_weights.noalias() += p.lambda * (p.linear_bias.transpose() * g_sum);
  grad.head_bias += g_sum;
  grad.lambda += (f_wh.array() * g.array()).sum();
  grad.linear_weights.noalias() += p.lambda * (ht_g * p.head_weights.transpose());
  grad.linear_bias.noalias() += p.lambda * (g_sum * p.head_weights.transpose());
  return ctc.loss * scale;
}

inline FusionParams zero_like(const FusionParams& p) {
  FusionParams z;
  z.linear_weights = Matrix::Zero(p.linear_weights.rows(), p.linear_weights.cols());
  z.linear_bias = RowVector::Zero(p.linear_bias.size());
  z.lambda = 0.0;
  z.head_weights = Matrix::Zero(p.head_weights.rows(), p.head_weights.cols());
  z.head_bias = RowVector::Zero(p.head_bias.size());
  return z;
}

// Trains from `initial`. Per-sample gradients may be computed on several
// threads, but they are always summed in sample order, so the result does not
// depend on `jobs`.
inline FusionParams train_head(std::span<const TrainingSample> samples, const TrainConfig& cfg, FusionParams initial,
                               TrainReport* report = nullptr) {
  cfg.validate();
  initial.validate();
  if (samples.empty()) throw ValidationError("train_head: empty training set");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.lip.dim() != initial.feature_dim() || s.lip.frames() != s.hand.frames() ||
        s.hand.values.cols() != static_cast<Eigen::Index>(kHandDim)) {
      throw ValidationError("train_head: sample " + std::to_string(i) + " has inconsistent dimensions");
    }
    if (s.lip.frames() < ctc_min_frames(s.target)) {
      throw ValidationError("train_head: sample " + std::to_string(i) + " is too short for its target");
    }
  }

  FusionParams params = std::move(initial);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      std::vector<FusionParams> grads(count, zero_like(params));
      std::vector<double> losses(count, 0.0);
      auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t b = first; b < count; b += stride) {
          losses[b] = accumulate_gradient(samples[order[start + b]], params, grads[b]);
        }
      };
      const std::size_t workers = std::min(cfg.jobs, count);
      if (workers <= 1) {
        work(0, 1);
      } else {
        std::vector<std::jthread> threads;
        for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w, workers);
      }

      FusionParams& total = grads[0];
      for (std::size_t b = 1; b < count; ++b) {
        total.linear_weights += grads[b].linear_weights;
        total.linear_bias += grads[b].linear_bias;
        total.lambda += grads[b].lambda;
        total.head_weights += grads[b].head_weights;
        total.head_bias += grads[b].head_bias;
      }
      for (double l : losses) epoch_loss += l;

      const double step = cfg.learning_rate / static_cast<double>(count);
      params.linear_weights -= step * total.linear_weights;
      params.linear_bias -= step * total.linear_bias;
      params.lambda -= step * total.lambda;
      params.head_weights -= step * total.head_weights;
      params.head_bias -= step * total.head_bias;
    }
    epoch_loss /= static_cast<double>(samples.size());
    if (!std::isfinite(epoch_loss) || !params.head_weights.allFinite() || !params.linear_weights.allFinite() ||
        !std::isfinite(params.lambda)) {
      throw TrainingDiverged(epoch + 1, epoch_loss);
    }
    if (report) report->epoch_losses.push_back(epoch_loss);
  }
  return params;
}

inline FusionParams train_head(std::span<const TrainingSample> samples, const TrainConfig& cfg,
                               TrainReport* report = nullptr) {
  if (samples.empty()) throw ValidationError("train_head: empty training set");
  return train_head(samples, cfg, FusionParams::initial(samples.front().lip.dim(), derive_seed(cfg.seed, ~0ULL)),
                    report);
}

inline Transcript decode_transcript(const LipFeatures& lip, const HandMatrix& hand, const FusionParams& params,
                                    const Vocabulary& vocab) {
  return Transcript::from_tokens(greedy_decode(sample_logits(lip, hand, params), vocab));
}

// Vocabulary indices for a transcript, with "/" between words.
inline std::vector<std::size_t> transcript_target(const Transcript& t, const Vocabulary& vocab) {
  std::vector<std::size_t> target;
  for (const auto& s : t.symbols()) target.push_back(vocab.index(s));
  return target;
}

}  // namespace acsr
