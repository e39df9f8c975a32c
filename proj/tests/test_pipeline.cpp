#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "indexcast/errors.hpp"
#include "indexcast/pipeline.hpp"
#include "indexcast/synthetic.hpp"
#include "json.hpp"

using namespace indexcast;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path temp_root() {
  fs::path dir = fs::temp_directory_path() / "indexcast_pipeline_test";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A small synthetic market on disk plus a config pointing at it.
struct Fixture {
  fs::path dir;
  pipeline::RunConfig cfg;
};

Fixture make_fixture(const std::string& name, int n_stocks = 3, int n_days = 300,
                     std::uint64_t seed = 2025) {
  Fixture fx;
  fx.dir = temp_root() / name;
  fs::remove_all(fx.dir);
  fs::create_directories(fx.dir);
  synth::SynthConfig scfg;
  scfg.n_stocks = n_stocks;
  scfg.n_days = n_days;
  scfg.seed = seed;
  synth::SyntheticMarket market = synth::generate(scfg);
  synth::write_csvs(market, (fx.dir / "data").string());

  fx.cfg.data.index_path = (fx.dir / "data" / "index.csv").string();
  for (int i = 0; i < n_stocks; ++i) {
    char sym[16];
    std::snprintf(sym, sizeof(sym), "SYN%03d", i);
    fx.cfg.data.stock_paths.push_back((fx.dir / "data" / (std::string(sym) + ".csv")).string());
  }
  fx.cfg.output_dir = (fx.dir / "run").string();
  fx.cfg.seed = seed;
  return fx;
}

pipeline::RunConfig small_model(pipeline::RunConfig cfg) {
  cfg.model.embed_hidden_dim = 8;
  cfg.model.embed_dim = 8;
  cfg.model.hidden_dim = 16;
  cfg.model.n_hidden = 1;
  cfg.train.max_epochs = 3;
  cfg.train.patience = 3;
  return cfg;
}

}  // namespace

TEST_CASE("config text parses, echoes and round trips") {
  std::string text = R"({
    "data": {"index": "idx.csv", "stocks": ["a.csv", "b.csv"]},
    "split": {"train": 0.6, "val": 0.2, "test": 0.2},
    "model": {"window": 3, "embed_dim": 16},
    "train": {"learning_rate": 0.002, "loss_variant": "ce_conf_mean"},
    "trading": {"cost_rate": 0.0005,
                "buckets": [{"lo": 0.5, "hi": 0.9, "fraction": 0.25},
                            {"lo": 0.9, "hi": 1.0, "fraction": 1.0}]},
    "codec": {"clamp_sigma": 2.5},
    "indicators": {"n_osc": 10},
    "evaluate": {"segment": "val", "icir_window": 10},
    "output_dir": "somewhere",
    "seed": 7
  })";
  pipeline::RunConfig cfg = pipeline::run_config_from_json_text(text, {});
  CHECK_EQ(cfg.data.index_path, "idx.csv");
  REQUIRE_EQ(cfg.data.stock_paths.size(), 2u);
  CHECK_EQ(cfg.split.train, 0.6);
  CHECK_EQ(cfg.model.window, 3);
  CHECK_EQ(cfg.model.embed_dim, 16);
  CHECK_EQ(cfg.model.hidden_dim, 128);
  CHECK_EQ(cfg.train.learning_rate, 0.002);
  CHECK_EQ(cfg.train.loss_variant, losses::LossVariant::ce_conf_mean);
  CHECK_EQ(cfg.trading.cost_rate, 0.0005);
  REQUIRE_EQ(cfg.trading.buckets.size(), 2u);
  CHECK_EQ(cfg.trading.buckets[0].hi, 0.9);
  CHECK_EQ(cfg.scaler.clamp_sigma, 2.5);
  CHECK_EQ(cfg.indicators.n_osc, 10);
  CHECK_EQ(cfg.eval_segment, "val");
  CHECK_EQ(cfg.icir_window, 10);
  CHECK_EQ(cfg.output_dir, "somewhere");
  CHECK_EQ(cfg.seed, 7u);

  std::string echo = pipeline::resolved_config_json(cfg);
  pipeline::RunConfig back = pipeline::run_config_from_json_text(echo, {});
  CHECK_EQ(pipeline::resolved_config_json(back), echo);
}

TEST_CASE("unknown keys are rejected with a nearest-key hint") {
  auto expect_hint = [](const std::string& text, const std::string& hint) {
    try {
      pipeline::run_config_from_json_text(text, {});
      FAIL("expected a config error for ", text);
    } catch (const Error& e) {
      INFO("message: ", e.what());
      CHECK_EQ(e.category(), "config");
      CHECK(std::string(e.what()).find(hint) != std::string::npos);
    }
  };
  expect_hint(R"({"trian": {}})", "train");
  expect_hint(R"({"train": {"learning_rat": 0.1}})", "learning_rate");
  expect_hint(R"({"model": {"windw": 3}})", "window");
}

TEST_CASE("overrides apply dotted keys with json values") {
  std::string text = R"({"train": {"batch_size": 16}})";
  pipeline::RunConfig cfg = pipeline::run_config_from_json_text(
      text, {"train.batch_size=8", "model.window=2", "train.loss_variant=ce_conf_trend",
             "output_dir=elsewhere"});
  CHECK_EQ(cfg.train.batch_size, 8);
  CHECK_EQ(cfg.model.window, 2);
  CHECK_EQ(cfg.train.loss_variant, losses::LossVariant::ce_conf_trend);
  CHECK_EQ(cfg.output_dir, "elsewhere");

  CHECK_THROWS_AS(pipeline::run_config_from_json_text(text, {"train.batch_sz=8"}), Error);
  CHECK_THROWS_AS(pipeline::run_config_from_json_text(text, {"no_equals_sign"}), Error);
}

TEST_CASE("config validation rejects inconsistent documents") {
  CHECK_THROWS_AS(pipeline::run_config_from_json_text(
                      R"({"split": {"train": 0.5, "val": 0.2, "test": 0.2}})", {}),
                  Error);
  CHECK_THROWS_AS(
      pipeline::run_config_from_json_text(R"({"evaluate": {"segment": "future"}})", {}), Error);
  CHECK_THROWS_AS(pipeline::run_config_from_json_text(R"({"evaluate": {"icir_window": 1}})", {}),
                  Error);
  CHECK_THROWS_AS(pipeline::run_config_from_json_text(R"({"train": {"batch_size": 0}})", {}),
                  Error);
}

TEST_CASE("dataset build, save and load round trip") {
  Fixture fx = make_fixture("dataset_rt");
  pipeline::Dataset ds = pipeline::build_dataset(fx.cfg);
  CHECK_EQ(ds.panel.n_dates(), 300);
  CHECK_EQ(ds.panel.n_stocks(), 3);
  CHECK_EQ(ds.sizes.train, 210);
  CHECK_EQ(ds.sizes.val, 60);
  CHECK_EQ(ds.sizes.test, 30);
  CHECK_EQ(ds.target.train_len, 209);
  CHECK_EQ(ds.target.raw.size(), 299u);
  CHECK_EQ(ds.panel.stocks[0].symbol, "SYN000");

  fs::create_directories(fx.cfg.output_dir);
  std::string path = fx.cfg.output_dir + "/dataset.json";
  pipeline::save_dataset(ds, path);
  pipeline::Dataset back = pipeline::load_dataset(path);
  CHECK(back.panel.dates == ds.panel.dates);
  CHECK_EQ(back.sizes.train, ds.sizes.train);
  CHECK_EQ(back.target.mean, ds.target.mean);
  CHECK_EQ(back.target.stddev, ds.target.stddev);
  REQUIRE_EQ(back.panel.stocks.size(), ds.panel.stocks.size());
  for (std::size_t s = 0; s < ds.panel.stocks.size(); ++s) {
    CHECK_EQ(back.panel.stocks[s].symbol, ds.panel.stocks[s].symbol);
    for (std::size_t b = 0; b < ds.panel.stocks[s].bars.size(); ++b) {
      CHECK_EQ(back.panel.stocks[s].bars[b].close, ds.panel.stocks[s].bars[b].close);
      CHECK_EQ(back.panel.stocks[s].bars[b].volume, ds.panel.stocks[s].bars[b].volume);
    }
  }
  for (std::size_t t = 0; t < ds.target.raw.size(); ++t) {
    CHECK_EQ(back.target.raw[t], ds.target.raw[t]);
  }

  std::ofstream bad(fx.cfg.output_dir + "/broken.json");
  bad << "{]";
  bad.close();
  CHECK_THROWS_AS(pipeline::load_dataset(fx.cfg.output_dir + "/broken.json"), Error);
  CHECK_THROWS_AS(pipeline::load_dataset(fx.cfg.output_dir + "/missing.json"), Error);
}

TEST_CASE("duplicate stock symbols are rejected") {
  Fixture fx = make_fixture("dup_sym");
  fx.cfg.data.stock_paths.push_back(fx.cfg.data.stock_paths[0]);
  CHECK_THROWS_AS(pipeline::build_dataset(fx.cfg), Error);
}

TEST_CASE("featurize produces the documented day lists") {
  Fixture fx = make_fixture("featurize");
  pipeline::Dataset ds = pipeline::build_dataset(fx.cfg);
  pipeline::Featurized fz = pipeline::featurize(ds, fx.cfg);
  CHECK_EQ(fz.panel.valid_from, 33);
  CHECK(fz.panel.standardized);
  // Window 5: first usable day is 33 + 4 = 37; train days end at 208.
  REQUIRE_FALSE(fz.train_days.empty());
  CHECK_EQ(fz.train_days.front(), 37);
  CHECK_EQ(fz.train_days.back(), 208);
  CHECK_EQ(fz.train_days.size(), 172u);
  CHECK_EQ(fz.val_days.front(), 210);
  CHECK_EQ(fz.val_days.back(), 269);
  CHECK_EQ(fz.val_days.size(), 60u);
  CHECK_EQ(fz.test_days.front(), 270);
  CHECK_EQ(fz.test_days.back(), 298);
  CHECK_EQ(fz.test_days.size(), 29u);
}

TEST_CASE("checkpoint save and load round trip") {
  Fixture fx = make_fixture("checkpoint_rt");
  fs::create_directories(fx.cfg.output_dir);
  pipeline::Checkpoint cp;
  cp.model.n_stocks = 3;
  cp.model.n_features = 16;
  cp.model.embed_hidden_dim = 8;
  cp.model.embed_dim = 8;
  cp.model.hidden_dim = 16;
  cp.model.n_hidden = 1;
  cp.params = nn::init_params(cp.model, 11);
  cp.target_mean = 1.25e-4;
  cp.target_std = 0.011;
  cp.feature_stats.resize(3 * 16);
  for (std::size_t i = 0; i < cp.feature_stats.size(); ++i) {
    cp.feature_stats[i].mean = 0.1 * static_cast<double>(i);
    cp.feature_stats[i].stddev = 1.0 + 0.01 * static_cast<double>(i);
  }
  cp.feature_stats[5].constant = true;
  cp.symbols = {"SYN000", "SYN001", "SYN002"};
  cp.best_epoch = 4;
  cp.best_val_ic = 0.31;

  std::string path = fx.cfg.output_dir + "/checkpoint.json";
  pipeline::save_checkpoint(cp, path);
  pipeline::Checkpoint back = pipeline::load_checkpoint(path);
  CHECK_EQ(back.model.embed_dim, 8);
  CHECK_EQ(back.best_epoch, 4);
  CHECK_EQ(back.best_val_ic, 0.31);
  CHECK_EQ(back.target_mean, cp.target_mean);
  CHECK(back.symbols == cp.symbols);
  CHECK_EQ(back.feature_stats.size(), cp.feature_stats.size());
  CHECK_EQ(back.feature_stats[5].constant, true);
  CHECK_EQ(back.feature_stats[7].mean, cp.feature_stats[7].mean);

  auto named_a = cp.params.named_tensors();
  auto named_b = back.params.named_tensors();
  REQUIRE_EQ(named_a.size(), named_b.size());
  for (std::size_t i = 0; i < named_a.size(); ++i) {
    const nn::Tensor* ta = named_a[i].second;
    const nn::Tensor* tb = named_b[i].second;
    REQUIRE_EQ(ta->size(), tb->size());
    for (int e = 0; e < ta->size(); ++e) CHECK_EQ((*ta)[e], (*tb)[e]);
  }

  std::ofstream bad(fx.cfg.output_dir + "/bad_cp.json");
  bad << R"({"format_version": 1})";
  bad.close();
  CHECK_THROWS_AS(pipeline::load_checkpoint(fx.cfg.output_dir + "/bad_cp.json"), Error);
}

TEST_CASE("train, evaluate and backtest commands produce consistent artifacts") {
  Fixture fx = make_fixture("commands");
  fx.cfg = small_model(fx.cfg);
  pipeline::cmd_ingest(fx.cfg);
  pipeline::cmd_train(fx.cfg);

  std::string cp_path = fx.cfg.output_dir + "/checkpoint.json";
  REQUIRE(fs::exists(cp_path));
  REQUIRE(fs::exists(fx.cfg.output_dir + "/training_log.csv"));
  REQUIRE(fs::exists(fx.cfg.output_dir + "/batch_log.csv"));

  pipeline::Checkpoint cp = pipeline::load_checkpoint(cp_path);
  CHECK_EQ(cp.model.n_stocks, 3);
  CHECK_EQ(cp.symbols.size(), 3u);
  CHECK_GE(cp.best_epoch, 1);

  std::string log = slurp(fx.cfg.output_dir + "/training_log.csv");
  CHECK(log.find("epoch,train_loss,train_ce,train_conf,val_ic,val_ic_degenerate,val_da,best") !=
        std::string::npos);

  pipeline::cmd_evaluate(fx.cfg, cp_path);
  json metrics = json::parse(slurp(fx.cfg.output_dir + "/metrics.json"));
  CHECK(metrics.contains("config"));
  CHECK(metrics.contains("metrics"));
  CHECK_EQ(metrics["segment"], "test");
  CHECK_EQ(metrics["metrics"]["n_days"], 29);
  CHECK(metrics["metrics"].contains("ic"));
  CHECK(metrics["metrics"].contains("da"));
  CHECK(metrics["metrics"].contains("icir_available"));

  pipeline::cmd_backtest(fx.cfg, cp_path);
  json bt = json::parse(slurp(fx.cfg.output_dir + "/backtest.json"));
  CHECK(bt.contains("baseline_long_short"));
  CHECK(bt.contains("confidence_guided"));
  CHECK_EQ(bt["confidence_guided"]["n_days"], 29);
  CHECK(bt["confidence_guided"].contains("annualized_return"));
  CHECK(bt["confidence_guided"].contains("sharpe"));
  REQUIRE(fs::exists(fx.cfg.output_dir + "/backtest.csv"));
  std::string btcsv = slurp(fx.cfg.output_dir + "/backtest.csv");
  CHECK(btcsv.find("date,prediction,confidence,position,daily_return,equity") !=
        std::string::npos);
  CHECK_EQ(std::count(btcsv.begin(), btcsv.end(), '\n'), 30);

  pipeline::cmd_plot_data(fx.cfg, cp_path);
  REQUIRE(fs::exists(fx.cfg.output_dir + "/plot.csv"));

  pipeline::SegmentPredictions sp = pipeline::predict_segment(
      pipeline::load_dataset(fx.cfg.output_dir + "/dataset.json"), cp, "test");
  CHECK_EQ(sp.days.size(), 29u);
  CHECK_EQ(sp.dates.size(), 29u);
  for (std::size_t i = 0; i < sp.days.size(); ++i) {
    CHECK_GE(sp.gc_mean[i], 0.5);
    CHECK_LE(sp.gc_mean[i], 1.0);
  }
}

TEST_CASE("repeated training runs are byte identical; seeds change them") {
  Fixture fx = make_fixture("determinism");
  fx.cfg = small_model(fx.cfg);
  pipeline::cmd_ingest(fx.cfg);
  pipeline::cmd_train(fx.cfg);
  std::string first = slurp(fx.cfg.output_dir + "/checkpoint.json");
  pipeline::cmd_train(fx.cfg);
  std::string second = slurp(fx.cfg.output_dir + "/checkpoint.json");
  CHECK(first == second);

  pipeline::RunConfig other = fx.cfg;
  other.seed = fx.cfg.seed + 1;
  pipeline::cmd_train(other);
  std::string third = slurp(fx.cfg.output_dir + "/checkpoint.json");
  CHECK(first != third);
}

TEST_CASE("predict_segment rejects mismatched checkpoints") {
  Fixture fx = make_fixture("mismatch");
  fx.cfg = small_model(fx.cfg);
  pipeline::cmd_ingest(fx.cfg);
  pipeline::cmd_train(fx.cfg);
  pipeline::Dataset ds = pipeline::load_dataset(fx.cfg.output_dir + "/dataset.json");
  pipeline::Checkpoint cp = pipeline::load_checkpoint(fx.cfg.output_dir + "/checkpoint.json");

  pipeline::Checkpoint wrong_n = cp;
  wrong_n.model.n_stocks = 5;
  CHECK_THROWS_AS(pipeline::predict_segment(ds, wrong_n, "test"), Error);

  pipeline::Checkpoint wrong_sym = cp;
  std::swap(wrong_sym.symbols[0], wrong_sym.symbols[1]);
  CHECK_THROWS_AS(pipeline::predict_segment(ds, wrong_sym, "test"), Error);

  CHECK_THROWS_AS(pipeline::predict_segment(ds, cp, "tomorrow"), Error);
}
