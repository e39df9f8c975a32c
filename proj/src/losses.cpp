#include "indexcast/losses.hpp"

#include <cmath>

#include "indexcast/errors.hpp"

namespace indexcast::losses {

namespace {

// log(1 + e^x) without overflow.
double log1pexp(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

const BitWeights& resolve_weights(const LossConfig& cfg) {
  static const BitWeights defaults = default_weights(codec::kBits);
  if (cfg.weights.empty()) return defaults;
  if (cfg.weights.size() != static_cast<std::size_t>(codec::kBits)) {
    throw config_error("loss weights must have " + std::to_string(codec::kBits) + " entries");
  }
  return cfg.weights;
}

}  // namespace

LossVariant loss_variant_from_string(const std::string& s) {
  if (s == "ce_only") return LossVariant::ce_only;
  if (s == "ce_conf_mean") return LossVariant::ce_conf_mean;
  if (s == "ce_conf_trend") return LossVariant::ce_conf_trend;
  throw config_error("unknown loss variant '" + s +
                     "' (expected ce_only, ce_conf_mean or ce_conf_trend)");
}

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::ce_only: return "ce_only";
    case LossVariant::ce_conf_mean: return "ce_conf_mean";
    case LossVariant::ce_conf_trend: return "ce_conf_trend";
  }
  return "ce_only";
}

BitWeights default_weights(int k) {
  if (k < 1) throw config_error("default_weights: k must be positive");
  BitWeights w(static_cast<std::size_t>(k));
  double total = 0;
  double cur = 1.0;
  for (int i = 0; i < k; ++i, cur *= 0.5) {
    w[static_cast<std::size_t>(i)] = cur;
    total += cur;
  }
  for (auto& x : w) x /= total;
  return w;
}

double weighted_ce(const codec::BinaryCode& truth,
                   const std::array<double, codec::kLogits>& logits, const BitWeights& w) {
  if (w.size() != static_cast<std::size_t>(codec::kBits)) {
    throw config_error("weighted_ce: weight count must match the code length");
  }
  double loss = 0;
  for (int k = 0; k < codec::kBits; ++k) {
    auto ki = static_cast<std::size_t>(k);
    double a0 = logits[2 * ki];
    double a1 = logits[2 * ki + 1];
    // -log softmax(true class) = log(1 + e^{wrong - right})
    double margin = truth.bits[ki] ? a0 - a1 : a1 - a0;
    loss += w[ki] * log1pexp(margin);
  }
  return loss;
}

LossGrad weighted_ce_grad(const codec::BinaryCode& truth,
                          const std::array<double, codec::kLogits>& logits, const BitWeights& w) {
  LossGrad lg;
  lg.value = weighted_ce(truth, logits, w);
  for (int k = 0; k < codec::kBits; ++k) {
    auto ki = static_cast<std::size_t>(k);
    double p0 = 0;
    double p1 = 0;
    nn::pair_softmax(logits[2 * ki], logits[2 * ki + 1], p0, p1);
    double t1 = truth.bits[ki] ? 1.0 : 0.0;
    lg.grad[2 * ki] = w[ki] * (p0 - (1.0 - t1));
    lg.grad[2 * ki + 1] = w[ki] * (p1 - t1);
  }
  return lg;
}

double gc_mean(const nn::PredictionOutput& out) {
  double log_sum = 0;
  for (int k = 0; k < codec::kBits; ++k) {
    auto ki = static_cast<std::size_t>(k);
    double p = out.predicted_bits.bits[ki] ? out.prob_one[ki] : out.prob_zero[ki];
    log_sum += std::log(p);
  }
  return std::exp(log_sum / codec::kBits);
}

double gc_trend(const nn::PredictionOutput& out) {
  return out.predicted_bits.bits[0] ? out.prob_one[0] : out.prob_zero[0];
}

double confidence_reg(const codec::BinaryCode& truth, const nn::PredictionOutput& out,
                      GcVariant variant) {
  double p_true = truth.bits[0] ? out.prob_one[0] : out.prob_zero[0];
  double s = p_true > 1.0 - p_true ? -1.0 : 1.0;
  double gc = variant == GcVariant::mean ? gc_mean(out) : gc_trend(out);
  return s * gc;
}

LossGrad confidence_reg_grad(const codec::BinaryCode& truth,
                             const std::array<double, codec::kLogits>& logits,
                             GcVariant variant) {
  nn::PredictionOutput out = nn::prediction_from_logits(logits);
  LossGrad lg;
  lg.value = confidence_reg(truth, out, variant);

  // The sign and the predicted bits are frozen; differentiate GC only.
  double p_true = truth.bits[0] ? out.prob_one[0] : out.prob_zero[0];
  double s = p_true > 1.0 - p_true ? -1.0 : 1.0;

  if (variant == GcVariant::trend) {
    double p = out.predicted_bits.bits[0] ? out.prob_one[0] : out.prob_zero[0];
    double d = p * (1.0 - p);  // d p_chosen / d logit_chosen
    double sign_chosen = out.predicted_bits.bits[0] ? 1.0 : -1.0;
    lg.grad[1] = s * sign_chosen * d;
    lg.grad[0] = -lg.grad[1];
    return lg;
  }

  double gc = gc_mean(out);
  for (int k = 0; k < codec::kBits; ++k) {
    auto ki = static_cast<std::size_t>(k);
    double p = out.predicted_bits.bits[ki] ? out.prob_one[ki] : out.prob_zero[ki];
    // d gc / d logit_chosen = gc * (1 - p) / kBits
    double g = s * gc * (1.0 - p) / codec::kBits;
    double sign_chosen = out.predicted_bits.bits[ki] ? 1.0 : -1.0;
    lg.grad[2 * ki + 1] = sign_chosen * g;
    lg.grad[2 * ki] = -lg.grad[2 * ki + 1];
  }
  return lg;
}

TotalLoss total_loss(const codec::BinaryCode& truth,
                     const std::array<double, codec::kLogits>& logits, const LossConfig& cfg) {
  const BitWeights& w = resolve_weights(cfg);
  TotalLoss out;
  out.ce = weighted_ce(truth, logits, w);
  if (cfg.variant != LossVariant::ce_only) {
    nn::PredictionOutput pred = nn::prediction_from_logits(logits);
    GcVariant gv =
        cfg.variant == LossVariant::ce_conf_mean ? GcVariant::mean : GcVariant::trend;
    out.conf = cfg.conf_coeff * confidence_reg(truth, pred, gv);
  }
  out.total = out.ce + out.conf;
  return out;
}

TotalLossGrad total_loss_grad(const codec::BinaryCode& truth,
                              const std::array<double, codec::kLogits>& logits,
                              const LossConfig& cfg) {
  const BitWeights& w = resolve_weights(cfg);
  TotalLossGrad out;
  LossGrad ce = weighted_ce_grad(truth, logits, w);
  out.parts.ce = ce.value;
  out.grad = ce.grad;
  if (cfg.variant != LossVariant::ce_only) {
    GcVariant gv =
        cfg.variant == LossVariant::ce_conf_mean ? GcVariant::mean : GcVariant::trend;
    LossGrad conf = confidence_reg_grad(truth, logits, gv);
    out.parts.conf = cfg.conf_coeff * conf.value;
    for (std::size_t i = 0; i < out.grad.size(); ++i) {
      out.grad[i] += cfg.conf_coeff * conf.grad[i];
    }
  }
  out.parts.total = out.parts.ce + out.parts.conf;
  return out;
}

}  // namespace indexcast::losses
