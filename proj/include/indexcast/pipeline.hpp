#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "indexcast/backtest.hpp"
#include "indexcast/codec.hpp"
#include "indexcast/evaluation.hpp"
#include "indexcast/indicators.hpp"
#include "indexcast/market_data.hpp"
#include "indexcast/model.hpp"

namespace indexcast::pipeline {

struct DataManifest {
  std::string index_path;
  std::vector<std::string> stock_paths;  // symbol = file stem
};

// One config file drives every command; each section maps onto one module's
// config. The resolved form is embedded verbatim in every report so a run
// can be reproduced from its own output.
struct RunConfig {
  DataManifest data;
  data::SplitSpec split;
  ta::IndicatorConfig indicators;
  codec::TargetScaler scaler;
  nn::ModelConfig model;  // n_stocks / n_features are filled from the data
  nn::TrainConfig train;  // seed is filled from the top-level seed
  backtest::TradingConfig trading;
  std::string eval_segment = "test";  // train | val | test
  int icir_window = 21;
  std::string output_dir = "out";
  std::uint64_t seed = 42;

  void validate() const;
};

// `overrides` are "section.key=value" pairs applied to the parsed document
// before field extraction; values parse as JSON with a plain-string
// fallback. Unknown keys anywhere are errors (with a nearest-key hint).
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);
RunConfig run_config_from_json_text(const std::string& text,
                                    const std::vector<std::string>& overrides);
std::string resolved_config_json(const RunConfig& cfg);  // canonical echo, sorted keys

// Aligned panel + split boundaries + standardized target, as written to
// <output_dir>/dataset.json by ingest and read back by the later stages.
struct Dataset {
  data::AlignedPanel panel;
  data::SplitSizes sizes;
  data::TargetSeries target;
};

Dataset build_dataset(const RunConfig& cfg);  // loads the CSVs in the manifest
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// Everything the model stages share: the standardized feature panel and the
// per-split lists of usable sample days (full indicator window available
// and a realized next-day return).
struct Featurized {
  ta::IndicatorPanel panel;
  std::vector<int> train_days;
  std::vector<int> val_days;
  std::vector<int> test_days;
};

Featurized featurize(const Dataset& ds, const RunConfig& cfg);

struct Checkpoint {
  nn::ModelConfig model;
  nn::ModelParams params;
  codec::TargetScaler scaler;
  double target_mean = 0;
  double target_std = 1;
  std::vector<ta::FeatureStats> feature_stats;  // [stock][feature]
  ta::IndicatorConfig indicators;
  std::vector<std::string> symbols;
  int best_epoch = 0;
  double best_val_ic = 0;
  bool best_val_ic_degenerate = false;
};

void save_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Per-day model outputs on one segment, in raw next-day-return space.
struct SegmentPredictions {
  std::vector<int> days;
  std::vector<std::string> dates;
  std::vector<double> predicted;   // de-standardized return forecasts
  std::vector<double> actual;      // realized raw returns
  std::vector<double> gc_mean;
  std::vector<double> gc_trend;
};

SegmentPredictions predict_segment(const Dataset& ds, const Checkpoint& cp,
                                   const std::string& segment);

// Subcommand bodies. Each prints a short human-readable summary on stdout
// and writes its artifacts under cfg.output_dir.
void cmd_ingest(const RunConfig& cfg, bool write_features_csv = false);
void cmd_train(const RunConfig& cfg);
void cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint_path);
void cmd_backtest(const RunConfig& cfg, const std::string& checkpoint_path);
void cmd_plot_data(const RunConfig& cfg, const std::string& checkpoint_path);

}  // namespace indexcast::pipeline
