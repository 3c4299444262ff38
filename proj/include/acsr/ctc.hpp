#pragma once

// Connectionist temporal classification over T x C logits (blank at index 0):
// log-space forward-backward for loss and gradient, and best-path decoding.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "acsr/domain.hpp"
#include "acsr/error.hpp"

namespace acsr {

namespace ctc_detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace ctc_detail

using LogitsMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row-wise log-softmax.
inline LogitsMatrix log_softmax(const LogitsMatrix& logits) {
  LogitsMatrix out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double hi = logits.row(t).maxCoeff();
    const double lse = hi + std::log((logits.row(t).array() - hi).exp().sum());
    out.row(t) = logits.row(t).array() - lse;
  }
  return out;
}

// Minimum frame count for a target: one frame per label plus a blank between
// each pair of equal neighbours.
inline std::size_t ctc_min_frames(std::span<const std::size_t> target) {
  std::size_t repeats = 0;
  for (std::size_t i = 1; i < target.size(); ++i) repeats += target[i] == target[i - 1] ? 1 : 0;
  return target.size() + repeats;
}

struct CtcResult {
  double loss = 0.0;        // -log p(target | logits)
  LogitsMatrix gradient;    // d loss / d logits, T x C
};

inline CtcResult ctc_loss(const LogitsMatrix& logits, std::span<const std::size_t> target,
                          std::size_t blank = Vocabulary::kBlank) {
  using ctc_detail::kNegInf;
  using ctc_detail::log_add;
  const auto T = static_cast<std::size_t>(logits.rows());
  const auto C = static_cast<std::size_t>(logits.cols());
  if (T == 0) throw ValidationError("ctc_loss: empty logits");
  for (std::size_t label : target) {
    if (label >= C || label == blank) throw ValidationError("ctc_loss: target label " + std::to_string(label) + " is invalid");
  }
  if (T < ctc_min_frames(target)) {
    throw ValidationError("ctc_loss: target of length " + std::to_string(target.size()) + " needs at least " +
                          std::to_string(ctc_min_frames(target)) + " frames, got " + std::to_string(T));
  }

  const LogitsMatrix logp = log_softmax(logits);

  // Blank-augmented target: blank, l1, blank, l2, ..., blank.
  const std::size_t S = 2 * target.size() + 1;
  std::vector<std::size_t> ext(S, blank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  auto can_skip = [&](std::size_t s) { return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]; };

  // alpha[t][s]: log prob of prefixes ending in state s at t, emission at t included.
  std::vector<double> alpha(T * S, kNegInf);
  auto A = [&](std::size_t t, std::size_t s) -> double& { return alpha[t * S + s]; };
  A(0, 0) = logp(0, static_cast<Eigen::Index>(ext[0]));
  if (S > 1) A(0, 1) = logp(0, static_cast<Eigen::Index>(ext[1]));
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double acc = A(t - 1, s);
      if (s >= 1) acc = log_add(acc, A(t - 1, s - 1));
      if (can_skip(s)) acc = log_add(acc, A(t - 1, s - 2));
      if (acc != kNegInf) A(t, s) = acc + logp(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(ext[s]));
    }
  }
  double log_total = A(T - 1, S - 1);
  if (S > 1) log_total = log_add(log_total, A(T - 1, S - 2));

  // beta[t][s]: log prob of completing from state s at t, emission at t excluded.
  std::vector<double> beta(T * S, kNegInf);
  auto B = [&](std::size_t t, std::size_t s) -> double& { return beta[t * S + s]; };
  B(T - 1, S - 1) = 0.0;
  if (S > 1) B(T - 1, S - 2) = 0.0;
  for (std::size_t t = T - 1; t-- > 0;) {
    const auto next = static_cast<Eigen::Index>(t + 1);
    for (std::size_t s = 0; s < S; ++s) {
      double acc = B(t + 1, s) + logp(next, static_cast<Eigen::Index>(ext[s]));
      if (s + 1 < S) acc = log_add(acc, B(t + 1, s + 1) + logp(next, static_cast<Eigen::Index>(ext[s + 1])));
      if (s + 2 < S && can_skip(s + 2)) {
        acc = log_add(acc, B(t + 1, s + 2) + logp(next, static_cast<Eigen::Index>(ext[s + 2])));
      }
      B(t, s) = acc;
    }
  }

  // d loss / d z[t][k] = softmax[t][k] - posterior occupancy of label k at t.
  CtcResult result;
  result.loss = -log_total;
  result.gradient = logp.array().exp();
  std::vector<double> occupancy(C);
  for (std::size_t t = 0; t < T; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kNegInf);
    for (std::size_t s = 0; s < S; ++s) {
      const double ab = A(t, s) + B(t, s);
      if (ab != kNegInf) occupancy[ext[s]] = log_add(occupancy[ext[s]], ab);
    }
    for (std::size_t k = 0; k < C; ++k) {
      if (occupancy[k] != kNegInf) {
        result.gradient(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) -= std::exp(occupancy[k] - log_total);
      }
    }
  }
  return result;
}

// Best path: per-frame argmax (first maximum wins), collapse repeats, drop blanks.
inline std::vector<std::size_t> greedy_decode(const LogitsMatrix& logits, std::size_t blank = Vocabulary::kBlank) {
  std::vector<std::size_t> out;
  std::size_t previous = blank;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    std::size_t label = 0;
    for (Eigen::Index k = 1; k < logits.cols(); ++k) {
      if (logits(t, k) > logits(t, static_cast<Eigen::Index>(label))) label = static_cast<std::size_t>(k);
    }
    if (label != blank && label != previous) out.push_back(label);
    previous = label;
  }
  return out;
}

inline std::vector<std::string> greedy_decode(const LogitsMatrix& logits, const Vocabulary& vocab) {
  std::vector<std::string> symbols;
  for (std::size_t idx : greedy_decode(logits, Vocabulary::kBlank)) symbols.emplace_back(vocab.symbol(idx));
  return symbols;
}

}  // namespace acsr
