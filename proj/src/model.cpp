#include "indexcast/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "indexcast/evaluation.hpp"
#include "indexcast/optim.hpp"

namespace indexcast::nn {

InitScheme init_scheme_from_string(const std::string& s) {
  if (s == "xavier_uniform") return InitScheme::xavier_uniform;
  if (s == "xavier_normal") return InitScheme::xavier_normal;
  if (s == "kaiming_uniform_fan_in") return InitScheme::kaiming_uniform_fan_in;
  if (s == "kaiming_uniform_fan_out") return InitScheme::kaiming_uniform_fan_out;
  if (s == "kaiming_normal_fan_in") return InitScheme::kaiming_normal_fan_in;
  if (s == "kaiming_normal_fan_out") return InitScheme::kaiming_normal_fan_out;
  if (s == "normal_0.01") return InitScheme::normal_001;
  throw config_error("unknown init scheme '" + s + "'");
}

std::string to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::xavier_uniform: return "xavier_uniform";
    case InitScheme::xavier_normal: return "xavier_normal";
    case InitScheme::kaiming_uniform_fan_in: return "kaiming_uniform_fan_in";
    case InitScheme::kaiming_uniform_fan_out: return "kaiming_uniform_fan_out";
    case InitScheme::kaiming_normal_fan_in: return "kaiming_normal_fan_in";
    case InitScheme::kaiming_normal_fan_out: return "kaiming_normal_fan_out";
    case InitScheme::normal_001: return "normal_0.01";
  }
  return "xavier_uniform";
}

void ModelConfig::validate() const {
  if (n_stocks < 1) throw config_error("model.n_stocks must be at least 1");
  if (n_features < 1) throw config_error("model.n_features must be at least 1");
  if (window < 1) throw config_error("model.window must be at least 1");
  if (embed_hidden_dim < 1 || embed_dim < 1 || hidden_dim < 1) {
    throw config_error("model dimensions must be positive");
  }
  if (n_hidden < 1) throw config_error("model.n_hidden must be at least 1");
  if (out_dim != codec::kLogits) {
    throw config_error("model.out_dim must be " + std::to_string(codec::kLogits) +
                       " (one logit pair per code bit)");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw config_error("model.dropout_p must be in [0, 1)");
  }
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.reserve(6 + 2 * hid_w.size());
  out.emplace_back("emb_w1", &emb_w1);
  out.emplace_back("emb_b1", &emb_b1);
  out.emplace_back("emb_w2", &emb_w2);
  out.emplace_back("emb_b2", &emb_b2);
  for (std::size_t i = 0; i < hid_w.size(); ++i) {
    out.emplace_back("hid_w" + std::to_string(i), &hid_w[i]);
    out.emplace_back("hid_b" + std::to_string(i), &hid_b[i]);
  }
  out.emplace_back("out_w", &out_w);
  out.emplace_back("out_b", &out_b);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named_tensors() const {
  auto mut = const_cast<ModelParams*>(this)->named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mut.size());
  for (auto& [name, t] : mut) out.emplace_back(name, t);
  return out;
}

std::vector<Tensor*> ModelParams::tensors() {
  std::vector<Tensor*> out;
  for (auto& [name, t] : named_tensors()) out.push_back(t);
  return out;
}

Tensor init_matrix(int rows, int cols, InitScheme scheme, Rng& rng) {
  Tensor t(rows, cols);
  double fan_in = cols;
  double fan_out = rows;
  switch (scheme) {
    case InitScheme::xavier_uniform: {
      double a = std::sqrt(6.0 / (fan_in + fan_out));
      for (int i = 0; i < t.size(); ++i) t[i] = rng.uniform(-a, a);
      break;
    }
    case InitScheme::xavier_normal: {
      double s = std::sqrt(2.0 / (fan_in + fan_out));
      for (int i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, s);
      break;
    }
    case InitScheme::kaiming_uniform_fan_in: {
      double a = std::sqrt(6.0 / fan_in);
      for (int i = 0; i < t.size(); ++i) t[i] = rng.uniform(-a, a);
      break;
    }
    case InitScheme::kaiming_uniform_fan_out: {
      double a = std::sqrt(6.0 / fan_out);
      for (int i = 0; i < t.size(); ++i) t[i] = rng.uniform(-a, a);
      break;
    }
    case InitScheme::kaiming_normal_fan_in: {
      double s = std::sqrt(2.0 / fan_in);
      for (int i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, s);
      break;
    }
    case InitScheme::kaiming_normal_fan_out: {
      double s = std::sqrt(2.0 / fan_out);
      for (int i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, s);
      break;
    }
    case InitScheme::normal_001: {
      for (int i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, 0.01);
      break;
    }
  }
  return t;
}

ModelParams zero_like(const ModelConfig& cfg) {
  ModelParams p;
  p.emb_w1 = Tensor(cfg.embed_hidden_dim, cfg.n_features);
  p.emb_b1 = Tensor(cfg.embed_hidden_dim, 1);
  p.emb_w2 = Tensor(cfg.embed_dim, cfg.embed_hidden_dim);
  p.emb_b2 = Tensor(cfg.embed_dim, 1);
  p.hid_w.reserve(static_cast<std::size_t>(cfg.n_hidden));
  p.hid_b.reserve(static_cast<std::size_t>(cfg.n_hidden));
  for (int i = 0; i < cfg.n_hidden; ++i) {
    int in = i == 0 ? cfg.backbone_in() : cfg.hidden_dim;
    p.hid_w.emplace_back(cfg.hidden_dim, in);
    p.hid_b.emplace_back(cfg.hidden_dim, 1);
  }
  p.out_w = Tensor(cfg.out_dim, cfg.hidden_dim);
  p.out_b = Tensor(cfg.out_dim, 1);
  return p;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelParams p = zero_like(cfg);
  p.emb_w1 = init_matrix(cfg.embed_hidden_dim, cfg.n_features, cfg.init_scheme, rng);
  p.emb_w2 = init_matrix(cfg.embed_dim, cfg.embed_hidden_dim, cfg.init_scheme, rng);
  for (int i = 0; i < cfg.n_hidden; ++i) {
    int in = i == 0 ? cfg.backbone_in() : cfg.hidden_dim;
    p.hid_w[static_cast<std::size_t>(i)] = init_matrix(cfg.hidden_dim, in, cfg.init_scheme, rng);
  }
  p.out_w = init_matrix(cfg.out_dim, cfg.hidden_dim, cfg.init_scheme, rng);
  return p;
}

Tape::Id build_graph(Tape& tape, const WindowView& x, const ModelParams& params,
                     ModelParams* grads, const ModelConfig& cfg, Mode mode, Rng* dropout_rng) {
  if (x.window != cfg.window || x.n_stocks != cfg.n_stocks || x.n_features != cfg.n_features) {
    throw model_error("forward: window shape does not match the model config");
  }
  bool train_mode = mode == Mode::train;
  if (train_mode && cfg.dropout_p > 0 && dropout_rng == nullptr) {
    throw model_error("forward: train mode with dropout needs an rng");
  }

  auto leaf = [&](const Tensor& value, Tensor* grad) {
    return grad ? tape.param(&value, grad) : tape.constant_ref(&value);
  };

  Tape::Id w1 = leaf(params.emb_w1, grads ? &grads->emb_w1 : nullptr);
  Tape::Id b1 = leaf(params.emb_b1, grads ? &grads->emb_b1 : nullptr);
  Tape::Id w2 = leaf(params.emb_w2, grads ? &grads->emb_w2 : nullptr);
  Tape::Id b2 = leaf(params.emb_b2, grads ? &grads->emb_b2 : nullptr);

  std::vector<Tape::Id> days;
  days.reserve(static_cast<std::size_t>(cfg.window));
  std::vector<Tape::Id> embs(static_cast<std::size_t>(cfg.n_stocks));
  for (int d = 0; d < cfg.window; ++d) {
    for (int s = 0; s < cfg.n_stocks; ++s) {
      Tape::Id xin = tape.input(x.at(d, s), cfg.n_features);
      Tape::Id h = tape.relu(tape.affine(w1, xin, b1));
      embs[static_cast<std::size_t>(s)] = tape.affine(w2, h, b2);
    }
    days.push_back(tape.concat({tape.pool_max(embs), tape.pool_mean(embs), tape.pool_min(embs)}));
  }

  Tape::Id z = cfg.window == 1 ? days[0] : tape.concat(days);
  for (int i = 0; i < cfg.n_hidden; ++i) {
    auto ii = static_cast<std::size_t>(i);
    Tape::Id hw = leaf(params.hid_w[ii], grads ? &grads->hid_w[ii] : nullptr);
    Tape::Id hb = leaf(params.hid_b[ii], grads ? &grads->hid_b[ii] : nullptr);
    z = tape.relu(tape.affine(hw, z, hb));
    if (train_mode && cfg.dropout_p > 0) {
      z = tape.dropout(z, cfg.dropout_p, *dropout_rng);
    }
  }
  Tape::Id ow = leaf(params.out_w, grads ? &grads->out_w : nullptr);
  Tape::Id ob = leaf(params.out_b, grads ? &grads->out_b : nullptr);
  return tape.affine(ow, z, ob);
}

namespace {

[[noreturn]] void throw_nonfinite(const Tape& tape, const std::string& context) {
  Tape::Id bad = tape.first_nonfinite_node();
  int layer = bad >= 0 ? tape.affine_nodes_before(bad) : -1;
  throw model_error(context + ": non-finite activation at layer " + std::to_string(layer) +
                    " (graph node " + std::to_string(bad) + ")");
}

std::array<double, codec::kLogits> logits_from_tape(const Tape& tape, Tape::Id id,
                                                    const std::string& context) {
  const Tensor& lv = tape.value(id);
  std::array<double, codec::kLogits> logits{};
  for (int i = 0; i < codec::kLogits; ++i) {
    logits[static_cast<std::size_t>(i)] = lv[i];
    if (!std::isfinite(lv[i])) throw_nonfinite(tape, context);
  }
  return logits;
}

}  // namespace

PredictionOutput forward(const WindowView& x, const ModelParams& params, const ModelConfig& cfg) {
  Tape tape;
  Tape::Id logits_id = build_graph(tape, x, params, nullptr, cfg, Mode::eval, nullptr);
  return prediction_from_logits(logits_from_tape(tape, logits_id, "forward"));
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0)) throw config_error("train.learning_rate must be non-negative");
  if (batch_size < 1) throw config_error("train.batch_size must be at least 1");
  if (max_epochs < 1) throw config_error("train.max_epochs must be at least 1");
  if (patience < 1) throw config_error("train.patience must be at least 1");
  if (!(conf_coeff >= 0)) throw config_error("train.conf_coeff must be non-negative");
}

WindowView TrainData::window_ending_at(int day, int window) const {
  WindowView v;
  v.n_stocks = n_stocks;
  v.n_features = n_features;
  v.window = window;
  v.stride_stock = n_features;
  v.stride_day = static_cast<long>(n_stocks) * n_features;
  v.base = features + static_cast<std::size_t>(day - window + 1) * v.stride_day;
  return v;
}

void TrainData::validate(const ModelConfig& cfg) const {
  if (!features || !y_raw || !y_std) throw train_error("train data: missing arrays");
  if (n_stocks != cfg.n_stocks || n_features != cfg.n_features) {
    throw train_error("train data: feature shape does not match the model config");
  }
  if (train_days.empty()) throw train_error("train data: no training days");
  if (val_days.empty()) throw train_error("train data: no validation days");
  auto check = [&](const std::vector<int>& days, const char* name) {
    for (int d : days) {
      if (d < cfg.window - 1 || d >= n_targets || d >= n_dates) {
        throw train_error(std::string("train data: ") + name + " day " + std::to_string(d) +
                          " lacks a full window or a target");
      }
    }
  };
  check(train_days, "train");
  check(val_days, "validation");
  scaler.validate();
  if (!(target_std > 0)) throw train_error("train data: target_std must be positive");
}

double predicted_return(const PredictionOutput& out, const codec::TargetScaler& scaler,
                        double target_mean, double target_std) {
  return scaler.unscale(out.decoded_v) * target_std + target_mean;
}

TrainResult train(const TrainData& data, const ModelConfig& mcfg, const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.validate();
  data.validate(mcfg);

  TrainResult result;
  ModelParams params = init_params(mcfg, tcfg.seed);
  ModelParams grads = zero_like(mcfg);
  std::vector<Tensor*> param_ptrs = params.tensors();
  std::vector<Tensor*> grad_ptrs = grads.tensors();

  AdamConfig acfg;
  acfg.learning_rate = tcfg.learning_rate;
  acfg.beta1 = tcfg.beta1;
  acfg.beta2 = tcfg.beta2;
  acfg.eps = tcfg.eps;
  acfg.weight_decay = tcfg.weight_decay;
  Adam adam(param_ptrs, acfg);

  losses::BitWeights weights = losses::default_weights(codec::kBits);
  losses::GcVariant gc_variant = tcfg.loss_variant == losses::LossVariant::ce_conf_trend
                                     ? losses::GcVariant::trend
                                     : losses::GcVariant::mean;
  bool use_conf = tcfg.loss_variant != losses::LossVariant::ce_only;

  // Per-day target codes for the training segment.
  std::vector<codec::BinaryCode> codes(static_cast<std::size_t>(data.n_targets));
  for (int d : data.train_days) {
    codes[static_cast<std::size_t>(d)] =
        codec::encode(data.scaler.scale(data.y_std[static_cast<std::size_t>(d)]));
  }

  Rng shuffle_rng(mix_seed(tcfg.seed, 1));
  Rng dropout_rng(mix_seed(tcfg.seed, 2));
  std::vector<int> order = data.train_days;

  Tape tape;
  std::vector<double> val_pred(data.val_days.size());
  std::vector<double> val_actual(data.val_days.size());
  double best_metric = -std::numeric_limits<double>::infinity();
  int epochs_since_best = 0;

  for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double ep_ce = 0;
    double ep_conf = 0;
    double ep_total = 0;
    int n_batches = 0;

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tcfg.batch_size)) {
      std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tcfg.batch_size));
      int batch_n = static_cast<int>(end - start);
      for (Tensor* gt : grad_ptrs) gt->fill(0.0);
      double b_ce = 0;
      double b_conf = 0;

      for (std::size_t i = start; i < end; ++i) {
        int day = order[i];
        tape.clear();
        WindowView window = data.window_ending_at(day, mcfg.window);
        Tape::Id logits_id =
            build_graph(tape, window, params, &grads, mcfg, Mode::train, &dropout_rng);
        const codec::BinaryCode& truth = codes[static_cast<std::size_t>(day)];
        Tape::Id ce_id = tape.loss_weighted_ce(logits_id, truth, weights);
        Tape::Id total_id = ce_id;
        double conf_value = 0;
        if (use_conf) {
          Tape::Id conf_id = tape.loss_confidence(logits_id, truth, gc_variant);
          conf_value = tcfg.conf_coeff * tape.value(conf_id)[0];
          total_id = tape.add(ce_id, tape.scale(conf_id, tcfg.conf_coeff));
        }
        double total_value = tape.value(total_id)[0];
        if (!std::isfinite(total_value)) {
          Tape::Id bad = tape.first_nonfinite_node();
          throw train_error("diverged at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(n_batches + 1) + ", day " + std::to_string(day) +
                            ": non-finite loss (layer " +
                            std::to_string(bad >= 0 ? tape.affine_nodes_before(bad) : -1) + ")");
        }
        tape.backward(total_id);
        b_ce += tape.value(ce_id)[0];
        b_conf += conf_value;
      }

      double inv = 1.0 / batch_n;
      for (Tensor* gt : grad_ptrs) {
        for (int j = 0; j < gt->size(); ++j) (*gt)[j] *= inv;
      }
      adam.step(grad_ptrs);

      ++n_batches;
      BatchRecord br;
      br.epoch = epoch;
      br.batch = n_batches;
      br.l_ce = b_ce * inv;
      br.l_conf = b_conf * inv;
      br.l_total = br.l_ce + br.l_conf;
      result.batches.push_back(br);
      ep_ce += br.l_ce;
      ep_conf += br.l_conf;
      ep_total += br.l_total;
    }

    // Validation pass (eval mode: no dropout).
    for (std::size_t i = 0; i < data.val_days.size(); ++i) {
      int day = data.val_days[i];
      tape.clear();
      WindowView window = data.window_ending_at(day, mcfg.window);
      Tape::Id logits_id = build_graph(tape, window, params, nullptr, mcfg, Mode::eval, nullptr);
      PredictionOutput out =
          prediction_from_logits(logits_from_tape(tape, logits_id, "validation forward"));
      val_pred[i] = predicted_return(out, data.scaler, data.target_mean, data.target_std);
      val_actual[i] = data.y_raw[static_cast<std::size_t>(day)];
    }

    EpochRecord er;
    er.epoch = epoch;
    er.train_loss = ep_total / n_batches;
    er.train_ce = ep_ce / n_batches;
    er.train_conf = ep_conf / n_batches;
    try {
      er.val_ic = metrics::pearson(val_pred, val_actual);
    } catch (const Error&) {
      er.val_ic = 0;
      er.val_ic_degenerate = true;
    }
    er.val_da = metrics::direction_accuracy(val_pred, val_actual);

    double metric = er.val_ic_degenerate ? -std::numeric_limits<double>::infinity() : er.val_ic;
    bool first = result.best_epoch == 0;
    if (first || metric > best_metric) {
      best_metric = metric;
      result.best_epoch = epoch;
      result.best_val_ic = er.val_ic;
      result.best_val_ic_degenerate = er.val_ic_degenerate;
      result.params = params;  // deep copy
      er.is_best = true;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
    }
    result.epochs.push_back(er);

    if (epochs_since_best >= tcfg.patience) break;
  }
  return result;
}

}  // namespace indexcast::nn
