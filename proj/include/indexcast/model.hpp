#pragma once

#include <string>
#include <utility>
#include <vector>

#include "indexcast/autodiff.hpp"
#include "indexcast/codec.hpp"
#include "indexcast/losses.hpp"
#include "indexcast/prediction.hpp"
#include "indexcast/rng.hpp"

namespace indexcast::nn {

enum class InitScheme {
  xavier_uniform,
  xavier_normal,
  kaiming_uniform_fan_in,
  kaiming_uniform_fan_out,
  kaiming_normal_fan_in,
  kaiming_normal_fan_out,
  normal_001,  // N(0, 0.01^2)
};

InitScheme init_scheme_from_string(const std::string& s);
std::string to_string(InitScheme scheme);

// Architecture: a shared two-layer embedding maps each stock's feature
// vector to embed_dim; per day the stock embeddings are max/mean/min pooled
// and concatenated (3 * embed_dim); the pooled vectors of the window are
// flattened and fed through n_hidden ReLU layers of hidden_dim (dropout in
// train mode) into out_dim logits.
struct ModelConfig {
  int n_stocks = 0;
  int n_features = 16;
  int window = 5;
  int embed_hidden_dim = 64;
  int embed_dim = 32;
  int hidden_dim = 128;
  int n_hidden = 3;
  int out_dim = codec::kLogits;
  double dropout_p = 0.1;
  InitScheme init_scheme = InitScheme::xavier_uniform;

  int pooled_dim() const { return 3 * embed_dim; }
  int backbone_in() const { return window * pooled_dim(); }
  void validate() const;
};

struct ModelParams {
  Tensor emb_w1, emb_b1;  // n_features -> embed_hidden_dim
  Tensor emb_w2, emb_b2;  // embed_hidden_dim -> embed_dim
  std::vector<Tensor> hid_w, hid_b;
  Tensor out_w, out_b;

  // Fixed enumeration order used by the optimizer and serialization.
  std::vector<std::pair<std::string, Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
  std::vector<Tensor*> tensors();
};

// Weight matrices drawn per scheme (fan_in = cols, fan_out = rows), biases
// zero. Deterministic for a given seed.
Tensor init_matrix(int rows, int cols, InitScheme scheme, Rng& rng);
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);
ModelParams zero_like(const ModelConfig& cfg);

// Feature window for one sample: day 0 is the oldest of the window, each
// (day, stock) points at n_features contiguous doubles.
struct WindowView {
  const double* base = nullptr;
  int window = 0;
  int n_stocks = 0;
  int n_features = 0;
  long stride_day = 0;
  long stride_stock = 0;

  const double* at(int day, int stock) const {
    return base + static_cast<std::size_t>(day) * stride_day +
           static_cast<std::size_t>(stock) * stride_stock;
  }
};

enum class Mode { train, eval };

// Builds the forward graph on the tape and returns the logits node.
// dropout_rng is required in train mode when dropout_p > 0.
Tape::Id build_graph(Tape& tape, const WindowView& x, const ModelParams& params,
                     ModelParams* grads, const ModelConfig& cfg, Mode mode, Rng* dropout_rng);

// Eval-mode forward pass (deterministic, no dropout).
PredictionOutput forward(const WindowView& x, const ModelParams& params, const ModelConfig& cfg);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
  int batch_size = 32;
  int max_epochs = 50;
  int patience = 10;  // early stop after this many epochs without a new best val IC
  losses::LossVariant loss_variant = losses::LossVariant::ce_only;
  double conf_coeff = 1.0;
  std::uint64_t seed = 42;

  void validate() const;
};

// Standardized features plus targets for training and validation. Targets
// are indexed by day: y_raw/y_std[t] is the next-day return of day t.
struct TrainData {
  const double* features = nullptr;  // [n_dates][n_stocks][n_features]
  int n_dates = 0;
  int n_stocks = 0;
  int n_features = 0;
  const double* y_raw = nullptr;
  const double* y_std = nullptr;
  int n_targets = 0;
  std::vector<int> train_days;
  std::vector<int> val_days;
  codec::TargetScaler scaler;
  double target_mean = 0;  // de-standardization of decoded predictions
  double target_std = 1;

  WindowView window_ending_at(int day, int window) const;
  void validate(const ModelConfig& cfg) const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0;
  double train_ce = 0;
  double train_conf = 0;
  double val_ic = 0;
  bool val_ic_degenerate = false;
  double val_da = 0;
  bool is_best = false;
};

struct BatchRecord {
  int epoch = 0;
  int batch = 0;
  double l_ce = 0;
  double l_conf = 0;
  double l_total = 0;
};

struct TrainResult {
  ModelParams params;  // parameters of the best epoch by validation IC
  int best_epoch = 0;
  double best_val_ic = 0;
  bool best_val_ic_degenerate = false;
  std::vector<EpochRecord> epochs;
  std::vector<BatchRecord> batches;
};

// Mini-batch Adam over the training days with per-epoch validation;
// keeps the parameters of the epoch with the highest validation IC and
// stops early after `patience` epochs without improvement. Deterministic
// for fixed data, config and seed.
TrainResult train(const TrainData& data, const ModelConfig& mcfg, const TrainConfig& tcfg);

// Raw-return prediction for one day: decode -> unscale -> de-standardize.
double predicted_return(const PredictionOutput& out, const codec::TargetScaler& scaler,
                        double target_mean, double target_std);

}  // namespace indexcast::nn
