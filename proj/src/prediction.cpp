#include "indexcast/prediction.hpp"

#include <cmath>

#include "indexcast/losses.hpp"

namespace indexcast::nn {

void pair_softmax(double a0, double a1, double& p0, double& p1) {
  if (a0 >= a1) {
    double e = std::exp(a1 - a0);
    p0 = 1.0 / (1.0 + e);
    p1 = e * p0;
  } else {
    double e = std::exp(a0 - a1);
    p1 = 1.0 / (1.0 + e);
    p0 = e * p1;
  }
}

PredictionOutput prediction_from_logits(const std::array<double, codec::kLogits>& logits) {
  PredictionOutput out;
  out.logits = logits;
  for (int k = 0; k < codec::kBits; ++k) {
    auto ki = static_cast<std::size_t>(k);
    pair_softmax(logits[2 * ki], logits[2 * ki + 1], out.prob_zero[ki], out.prob_one[ki]);
    out.predicted_bits.bits[ki] = out.prob_one[ki] >= out.prob_zero[ki] ? 1 : 0;
  }
  out.decoded_v = codec::decode(out.predicted_bits);
  out.gc_mean = losses::gc_mean(out);
  out.gc_trend = losses::gc_trend(out);
  return out;
}

}  // namespace indexcast::nn
