#pragma once

#include <array>
#include <string>
#include <vector>

#include "indexcast/codec.hpp"
#include "indexcast/prediction.hpp"

namespace indexcast::losses {

using BitWeights = std::vector<double>;

enum class GcVariant { mean, trend };

enum class LossVariant { ce_only, ce_conf_mean, ce_conf_trend };

LossVariant loss_variant_from_string(const std::string& s);
std::string to_string(LossVariant v);

// w_k proportional to 2^{-k}, normalized to sum to 1, so the high-order
// code bits dominate the classification loss.
BitWeights default_weights(int k);

struct LossConfig {
  BitWeights weights;            // defaults to default_weights(kBits) when empty
  LossVariant variant = LossVariant::ce_only;
  double conf_coeff = 1.0;       // scales the confidence term of the total loss
};

struct LossGrad {
  double value = 0;
  std::array<double, codec::kLogits> grad{};  // d value / d logits
};

// Sum over bits of w_k * cross-entropy of the pair softmax against the
// true bit.
double weighted_ce(const codec::BinaryCode& truth,
                   const std::array<double, codec::kLogits>& logits, const BitWeights& w);
LossGrad weighted_ce_grad(const codec::BinaryCode& truth,
                          const std::array<double, codec::kLogits>& logits, const BitWeights& w);

// Geometric confidence of a prediction: the geometric mean of the chosen
// per-bit probabilities, or just the trend bit's probability. Both live in
// [0.5, 1].
double gc_mean(const nn::PredictionOutput& out);
double gc_trend(const nn::PredictionOutput& out);

// s * GC where s = -1 when the true trend bit's probability strictly
// exceeds its complement and +1 otherwise (a 0.5 tie gives +1). The sign
// and the chosen bits are constants under differentiation; only GC itself
// carries gradient.
double confidence_reg(const codec::BinaryCode& truth, const nn::PredictionOutput& out,
                      GcVariant variant);
LossGrad confidence_reg_grad(const codec::BinaryCode& truth,
                             const std::array<double, codec::kLogits>& logits, GcVariant variant);

struct TotalLoss {
  double total = 0;
  double ce = 0;
  double conf = 0;  // already multiplied by conf_coeff; 0 for ce_only
};

TotalLoss total_loss(const codec::BinaryCode& truth,
                     const std::array<double, codec::kLogits>& logits, const LossConfig& cfg);
struct TotalLossGrad {
  TotalLoss parts;
  std::array<double, codec::kLogits> grad{};
};
TotalLossGrad total_loss_grad(const codec::BinaryCode& truth,
                              const std::array<double, codec::kLogits>& logits,
                              const LossConfig& cfg);

}  // namespace indexcast::losses
