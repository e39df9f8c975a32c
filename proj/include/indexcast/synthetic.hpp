#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "indexcast/indicators.hpp"
#include "indexcast/market_data.hpp"

namespace indexcast::synth {

// Synthetic market whose index return is a noisy linear function of the
// pooled (max/mean/min over stocks) standardized indicator features, so a
// model fed those features has real signal to find.
struct SynthConfig {
  int n_stocks = 20;
  int n_days = 1500;
  std::uint64_t seed = 12345;
  double return_scale = 0.01;  // sets the daily return magnitude
  double noise = 0.10;         // noise-to-signal ratio in the return
  double clamp = 0.08;         // returns are clipped to +-clamp
  double index_start = 1000.0;
  std::string start_date = "2015-01-02";
  ta::IndicatorConfig indicator_cfg;

  void validate() const;
};

struct SyntheticMarket {
  std::vector<data::StockSeries> stocks;
  data::StockSeries index;
  std::vector<double> true_returns;  // (index[t+1] - index[t]) / index[t]
  int valid_from = 0;                // indicator warm-up used in the construction
};

// Next calendar day of an ISO date (leap years handled).
std::string next_date(const std::string& iso);

SyntheticMarket generate(const SynthConfig& cfg);

// One CSV per stock plus index.csv, full double precision.
void write_csvs(const SyntheticMarket& market, const std::string& dir);

}  // namespace indexcast::synth
