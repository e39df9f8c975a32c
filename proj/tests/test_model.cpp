#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "indexcast/errors.hpp"
#include "indexcast/model.hpp"
#include "indexcast/optim.hpp"
#include "indexcast/rng.hpp"

using namespace indexcast;
using nn::ModelConfig;
using nn::ModelParams;
using nn::Tensor;

namespace {

ModelConfig tiny_config(int n_stocks = 3, int window = 2) {
  ModelConfig cfg;
  cfg.n_stocks = n_stocks;
  cfg.n_features = 4;
  cfg.window = window;
  cfg.embed_hidden_dim = 6;
  cfg.embed_dim = 5;
  cfg.hidden_dim = 8;
  cfg.n_hidden = 2;
  cfg.dropout_p = 0.0;
  return cfg;
}

std::vector<double> random_features(int n_dates, int n_stocks, int n_features, Rng& rng) {
  std::vector<double> f(static_cast<std::size_t>(n_dates) * n_stocks * n_features);
  for (double& v : f) v = rng.normal();
  return f;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  auto na = const_cast<ModelParams&>(a).named_tensors();
  auto nb = const_cast<ModelParams&>(b).named_tensors();
  if (na.size() != nb.size()) return false;
  for (std::size_t i = 0; i < na.size(); ++i) {
    if (na[i].first != nb[i].first) return false;
    const Tensor* ta = na[i].second;
    const Tensor* tb = nb[i].second;
    if (ta->rows != tb->rows || ta->cols != tb->cols) return false;
    for (int e = 0; e < ta->size(); ++e) {
      if ((*ta)[e] != (*tb)[e]) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig cfg = tiny_config();
  cfg.validate();
  cfg.out_dim = 29;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_config();
  cfg.window = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_config();
  cfg.n_stocks = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_config();
  cfg.dropout_p = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_EQ(tiny_config().pooled_dim(), 15);
  CHECK_EQ(tiny_config().backbone_in(), 30);
}

TEST_CASE("init scheme names round trip") {
  for (auto s : {nn::InitScheme::xavier_uniform, nn::InitScheme::xavier_normal,
                 nn::InitScheme::kaiming_uniform_fan_in, nn::InitScheme::kaiming_uniform_fan_out,
                 nn::InitScheme::kaiming_normal_fan_in, nn::InitScheme::kaiming_normal_fan_out,
                 nn::InitScheme::normal_001}) {
    CHECK_EQ(nn::init_scheme_from_string(nn::to_string(s)), s);
  }
  CHECK_THROWS_AS(nn::init_scheme_from_string("other"), Error);
}

TEST_CASE("init is deterministic per seed, biases zero") {
  ModelConfig cfg = tiny_config();
  ModelParams a = nn::init_params(cfg, 42);
  ModelParams b = nn::init_params(cfg, 42);
  ModelParams c = nn::init_params(cfg, 43);
  CHECK(params_equal(a, b));
  CHECK_FALSE(params_equal(a, c));
  for (int i = 0; i < a.emb_b1.size(); ++i) CHECK_EQ(a.emb_b1[i], 0.0);
  for (int i = 0; i < a.out_b.size(); ++i) CHECK_EQ(a.out_b[i], 0.0);
}

TEST_CASE("named tensor enumeration order") {
  ModelConfig cfg = tiny_config();
  ModelParams p = nn::init_params(cfg, 1);
  auto named = p.named_tensors();
  std::vector<std::string> expect = {"emb_w1", "emb_b1", "emb_w2", "emb_b2", "hid_w0",
                                     "hid_b0", "hid_w1", "hid_b1", "out_w",  "out_b"};
  REQUIRE_EQ(named.size(), expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK_EQ(named[i].first, expect[i]);
  CHECK_EQ(p.out_w.rows, codec::kLogits);
  CHECK_EQ(p.out_w.cols, cfg.hidden_dim);
  CHECK_EQ(p.emb_w1.rows, cfg.embed_hidden_dim);
  CHECK_EQ(p.emb_w1.cols, cfg.n_features);
}

TEST_CASE("init bounds and variances per scheme") {
  Rng rng(1000);
  int rows = 80;
  int cols = 120;
  auto sample_var = [](const Tensor& t) {
    double mean = 0;
    for (int i = 0; i < t.size(); ++i) mean += t[i];
    mean /= t.size();
    double var = 0;
    for (int i = 0; i < t.size(); ++i) var += (t[i] - mean) * (t[i] - mean);
    return var / t.size();
  };

  Tensor xu = nn::init_matrix(rows, cols, nn::InitScheme::xavier_uniform, rng);
  double bound = std::sqrt(6.0 / (rows + cols));
  for (int i = 0; i < xu.size(); ++i) {
    CHECK_LE(std::abs(xu[i]), bound);
  }
  CHECK_EQ(sample_var(xu), doctest::Approx(bound * bound / 3.0).epsilon(0.15));

  Tensor kin = nn::init_matrix(rows, cols, nn::InitScheme::kaiming_uniform_fan_in, rng);
  double kin_bound = std::sqrt(6.0 / cols);
  for (int i = 0; i < kin.size(); ++i) {
    CHECK_LE(std::abs(kin[i]), kin_bound);
  }

  Tensor n001 = nn::init_matrix(200, 500, nn::InitScheme::normal_001, rng);
  CHECK_EQ(sample_var(n001), doctest::Approx(1e-4).epsilon(0.1));

  Tensor knf = nn::init_matrix(200, 500, nn::InitScheme::kaiming_normal_fan_in, rng);
  CHECK_EQ(sample_var(knf), doctest::Approx(2.0 / 500).epsilon(0.1));

  Tensor kno = nn::init_matrix(200, 500, nn::InitScheme::kaiming_normal_fan_out, rng);
  CHECK_EQ(sample_var(kno), doctest::Approx(2.0 / 200).epsilon(0.1));

  Tensor xn = nn::init_matrix(200, 500, nn::InitScheme::xavier_normal, rng);
  CHECK_EQ(sample_var(xn), doctest::Approx(2.0 / 700).epsilon(0.1));
}

TEST_CASE("window view addresses the right block") {
  nn::TrainData td;
  int n_dates = 6;
  int n_stocks = 2;
  int n_features = 3;
  std::vector<double> f(static_cast<std::size_t>(n_dates) * n_stocks * n_features);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(i);
  td.features = f.data();
  td.n_dates = n_dates;
  td.n_stocks = n_stocks;
  td.n_features = n_features;

  nn::WindowView v = td.window_ending_at(4, 3);
  CHECK_EQ(v.window, 3);
  // Day offset 0 of the view is absolute day 2.
  CHECK_EQ(v.at(0, 0)[0], f[2 * 6 + 0]);
  CHECK_EQ(v.at(0, 1)[2], f[2 * 6 + 3 + 2]);
  CHECK_EQ(v.at(2, 1)[1], f[4 * 6 + 3 + 1]);
}

TEST_CASE("forward is invariant under stock permutations") {
  ModelConfig cfg = tiny_config(4, 2);
  ModelParams params = nn::init_params(cfg, 7);
  Rng rng(21);
  int n_dates = 3;
  std::vector<double> f = random_features(n_dates, cfg.n_stocks, cfg.n_features, rng);

  nn::TrainData td;
  td.features = f.data();
  td.n_dates = n_dates;
  td.n_stocks = cfg.n_stocks;
  td.n_features = cfg.n_features;
  nn::PredictionOutput base = nn::forward(td.window_ending_at(2, cfg.window), params, cfg);

  std::vector<int> perm = {2, 0, 3, 1};
  std::vector<double> g(f.size());
  for (int t = 0; t < n_dates; ++t) {
    for (int s = 0; s < cfg.n_stocks; ++s) {
      for (int k = 0; k < cfg.n_features; ++k) {
        g[static_cast<std::size_t>((t * cfg.n_stocks + s) * cfg.n_features + k)] =
            f[static_cast<std::size_t>(
                (t * cfg.n_stocks + perm[static_cast<std::size_t>(s)]) * cfg.n_features + k)];
      }
    }
  }
  nn::TrainData tp = td;
  tp.features = g.data();
  nn::PredictionOutput permuted = nn::forward(tp.window_ending_at(2, cfg.window), params, cfg);
  for (int i = 0; i < codec::kLogits; ++i) {
    CHECK_EQ(base.logits[static_cast<std::size_t>(i)],
             permuted.logits[static_cast<std::size_t>(i)]);
  }
  CHECK_EQ(base.decoded_v, permuted.decoded_v);
}

TEST_CASE("dropout p = 0 train graph equals the eval forward") {
  ModelConfig cfg = tiny_config(2, 2);
  ModelParams params = nn::init_params(cfg, 3);
  Rng rng(77);
  std::vector<double> f = random_features(2, cfg.n_stocks, cfg.n_features, rng);
  nn::TrainData td;
  td.features = f.data();
  td.n_dates = 2;
  td.n_stocks = cfg.n_stocks;
  td.n_features = cfg.n_features;
  nn::WindowView x = td.window_ending_at(1, cfg.window);

  nn::PredictionOutput eval_out = nn::forward(x, params, cfg);

  nn::Tape tape;
  Rng drop(1);
  nn::Tape::Id logits = nn::build_graph(tape, x, params, nullptr, cfg, nn::Mode::train, &drop);
  const Tensor& v = tape.value(logits);
  for (int i = 0; i < codec::kLogits; ++i) {
    CHECK_EQ(v[i], eval_out.logits[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("train mode with dropout needs an rng") {
  ModelConfig cfg = tiny_config(2, 1);
  cfg.dropout_p = 0.5;
  ModelParams params = nn::init_params(cfg, 3);
  Rng rng(77);
  std::vector<double> f = random_features(1, cfg.n_stocks, cfg.n_features, rng);
  nn::TrainData td;
  td.features = f.data();
  td.n_dates = 1;
  td.n_stocks = cfg.n_stocks;
  td.n_features = cfg.n_features;
  nn::Tape tape;
  CHECK_THROWS_AS(
      nn::build_graph(tape, td.window_ending_at(0, 1), params, nullptr, cfg, nn::Mode::train,
                      nullptr),
      Error);
}

TEST_CASE("adam: first step size, zero lr, decoupled decay") {
  Tensor p(1, 1);
  p[0] = 1.0;
  Tensor g(1, 1);
  g[0] = 0.5;
  nn::AdamConfig cfg;
  cfg.weight_decay = 0.0;
  nn::Adam opt({&p}, cfg);
  opt.step({&g});
  CHECK_EQ(p[0], doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
  CHECK_EQ(opt.steps(), 1);

  Tensor q(1, 1);
  q[0] = 2.0;
  nn::AdamConfig zero;
  zero.learning_rate = 0.0;
  zero.weight_decay = 0.0;
  nn::Adam opt2({&q}, zero);
  opt2.step({&g});
  CHECK_EQ(q[0], 2.0);

  Tensor r(1, 1);
  r[0] = 1.0;
  Tensor zg(1, 1);
  nn::AdamConfig decay;
  decay.weight_decay = 0.1;
  nn::Adam opt3({&r}, decay);
  opt3.step({&zg});
  CHECK_EQ(r[0], doctest::Approx(1.0 - 1e-3 * 0.1).epsilon(1e-12));
}

TEST_CASE("training learns a clean pooled linear target") {
  ModelConfig cfg;
  cfg.n_stocks = 3;
  cfg.n_features = 2;
  cfg.window = 1;
  cfg.embed_hidden_dim = 16;
  cfg.embed_dim = 8;
  cfg.hidden_dim = 16;
  cfg.n_hidden = 1;
  cfg.dropout_p = 0.0;

  int n_dates = 220;
  Rng rng(5150);
  std::vector<double> f = random_features(n_dates, cfg.n_stocks, cfg.n_features, rng);
  std::vector<double> y(static_cast<std::size_t>(n_dates - 1));
  for (int t = 0; t < n_dates - 1; ++t) {
    double mean0 = 0;
    double mean1 = 0;
    for (int s = 0; s < cfg.n_stocks; ++s) {
      mean0 += f[static_cast<std::size_t>((t * cfg.n_stocks + s) * 2)];
      mean1 += f[static_cast<std::size_t>((t * cfg.n_stocks + s) * 2 + 1)];
    }
    y[static_cast<std::size_t>(t)] = (0.8 * mean0 - 0.5 * mean1) / cfg.n_stocks;
  }
  double sd = 0;
  for (double v : y) sd += v * v;
  sd = std::sqrt(sd / static_cast<double>(y.size()));
  std::vector<double> y_std(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) y_std[i] = y[i] / sd;

  nn::TrainData td;
  td.features = f.data();
  td.n_dates = n_dates;
  td.n_stocks = cfg.n_stocks;
  td.n_features = cfg.n_features;
  td.y_raw = y.data();
  td.y_std = y_std.data();
  td.n_targets = n_dates - 1;
  for (int t = 0; t < 170; ++t) td.train_days.push_back(t);
  for (int t = 170; t < n_dates - 1; ++t) td.val_days.push_back(t);
  td.target_mean = 0.0;
  td.target_std = sd;

  nn::TrainConfig tcfg;
  tcfg.max_epochs = 150;
  tcfg.patience = 150;
  tcfg.seed = 99;

  nn::TrainResult result = nn::train(td, cfg, tcfg);
  // Chance IC on 49 validation days is ~0.14, so 0.7 means most of the
  // signal was found; the full-scale bar lives in the acceptance suite.
  CHECK_GE(result.best_val_ic, 0.7);
  CHECK_FALSE(result.best_val_ic_degenerate);
  CHECK_GE(result.best_epoch, 1);
  CHECK_EQ(result.epochs.size(), 150u);
  CHECK_EQ(result.epochs.front().epoch, 1);

  nn::TrainResult again = nn::train(td, cfg, tcfg);
  CHECK(params_equal(result.params, again.params));
  CHECK_EQ(result.best_epoch, again.best_epoch);
  CHECK_EQ(result.best_val_ic, again.best_val_ic);
  REQUIRE_EQ(result.batches.size(), again.batches.size());
  for (std::size_t i = 0; i < result.batches.size(); ++i) {
    CHECK_EQ(result.batches[i].l_total, again.batches[i].l_total);
  }
}

TEST_CASE("train data validation rejects bad day lists") {
  ModelConfig cfg = tiny_config(2, 2);
  Rng rng(1);
  std::vector<double> f = random_features(5, cfg.n_stocks, cfg.n_features, rng);
  std::vector<double> y = {0.1, -0.2, 0.3, -0.4};
  nn::TrainData td;
  td.features = f.data();
  td.n_dates = 5;
  td.n_stocks = cfg.n_stocks;
  td.n_features = cfg.n_features;
  td.y_raw = y.data();
  td.y_std = y.data();
  td.n_targets = 4;
  td.train_days = {1, 2};
  td.val_days = {3};
  td.validate(cfg);

  nn::TrainData no_window = td;
  no_window.train_days = {0};
  CHECK_THROWS_AS(no_window.validate(cfg), Error);

  nn::TrainData no_target = td;
  no_target.val_days = {4};
  CHECK_THROWS_AS(no_target.validate(cfg), Error);

  nn::TrainData empty = td;
  empty.train_days.clear();
  CHECK_THROWS_AS(empty.validate(cfg), Error);
}

TEST_CASE("predicted return reverses the encoding chain") {
  nn::PredictionOutput out;
  out.decoded_v = 0.5;
  codec::TargetScaler scaler;
  CHECK_EQ(nn::predicted_return(out, scaler, 0.001, 0.01), 0.001 + 0.01 * 1.5);
}
