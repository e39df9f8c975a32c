#pragma once

#include <array>

#include "indexcast/codec.hpp"

namespace indexcast::nn {

// Everything derived from one 30-logit model output. Logits come in
// (zero, one) pairs, one pair per code bit.
struct PredictionOutput {
  std::array<double, codec::kLogits> logits{};
  std::array<double, codec::kBits> prob_zero{};
  std::array<double, codec::kBits> prob_one{};  // prob_zero[k] + prob_one[k] == 1
  codec::BinaryCode predicted_bits;             // per-pair argmax; a 0.5 tie picks 1
  double decoded_v = 0;                         // decode(predicted_bits), in [-1, 1]
  double gc_mean = 0;                           // geometric mean of the chosen probabilities
  double gc_trend = 0;                          // chosen probability of bit 0
};

// Numerically stable two-way softmax.
void pair_softmax(double a0, double a1, double& p0, double& p1);

PredictionOutput prediction_from_logits(const std::array<double, codec::kLogits>& logits);

}  // namespace indexcast::nn
