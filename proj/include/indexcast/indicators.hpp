#pragma once

#include <string>
#include <vector>

#include "indexcast/market_data.hpp"

namespace indexcast::ta {

struct IndicatorConfig {
  int n_osc = 14;       // RSI, stochastic K, MFI, ATR, ADX period
  int n_ma = 20;        // SMA / EMA / Bollinger period
  int macd_fast = 12;
  int macd_slow = 26;
  int macd_signal = 9;

  void validate() const;
};

inline constexpr int kNumFeatures = 16;

// Column order of the per-stock feature vector.
enum Feature : int {
  kArithmeticRatio = 0,  // open / close
  kOpen,
  kClose,
  kCloseSma,
  kVolumeSma,
  kCloseEma,
  kVolumeEma,
  kAdx,
  kRsi,
  kMacd,
  kMacdSignal,
  kStochasticK,
  kMfi,
  kAtr,
  kBollingerMiddle,  // SMA of close over n_ma
  kObv,
};

extern const char* const kFeatureNames[kNumFeatures];

// Rolling mean of the last n values; NaN before index n - 1.
std::vector<double> sma(const std::vector<double>& x, int n);

// Exponential moving average with k = 2 / (n + 1), seeded with x[0].
std::vector<double> ema(const std::vector<double>& x, int n);

// Wilder RSI: seed averages over the first n changes, then
// avg_t = ((n - 1) * avg_{t-1} + change_t) / n. NaN before index n.
// Guards: average loss below 1e-12 returns 100, average gain below returns 0.
std::vector<double> rsi(const std::vector<double>& close, int n);

struct MacdResult {
  std::vector<double> macd;    // ema(close, fast) - ema(close, slow)
  std::vector<double> signal;  // ema(macd, signal_n)
};
MacdResult macd(const std::vector<double>& close, int fast, int slow, int signal_n);

// Stochastic %K over the trailing n bars; a flat high/low range returns 50.
std::vector<double> stochastic_k(const std::vector<double>& high,
                                 const std::vector<double>& low,
                                 const std::vector<double>& close, int n);

// Money flow index on typical price (H + L + C) / 3 times volume, classified
// by the sign of the typical-price change over the trailing n changes.
// Zero negative flow returns 100, zero positive flow returns 0.
std::vector<double> mfi(const std::vector<double>& high, const std::vector<double>& low,
                        const std::vector<double>& close, const std::vector<double>& volume,
                        int n);

// Average true range: TR_0 = H - L, later bars include gaps to the previous
// close; smoothed with ema(TR, n).
std::vector<double> atr(const std::vector<double>& high, const std::vector<double>& low,
                        const std::vector<double>& close, int n);

// 100 * |DM+ - DM-| / (DM+ + DM-) where DM+/DM- are n-bar Wilder-smoothed
// sums of the directional moves (this is the single-stage directional
// formula, not the double-smoothed textbook ADX). Zero denominator gives 0.
std::vector<double> adx(const std::vector<double>& high, const std::vector<double>& low, int n);

// On-balance volume starting at 0.
std::vector<double> obv(const std::vector<double>& close, const std::vector<double>& volume);

struct FeatureStats {
  double mean = 0;
  double stddev = 0;      // population estimator
  bool constant = false;  // training values had (near) zero variance
};

// Per (date, stock) feature matrix for a whole panel. values is laid out
// [date][stock][feature]; entries before a feature's warm-up are NaN.
struct IndicatorPanel {
  int n_dates = 0;
  int n_stocks = 0;
  int valid_from = 0;  // first date index where all features of all stocks are defined
  std::vector<double> values;
  std::vector<FeatureStats> stats;  // [stock][feature]; filled by standardization
  bool standardized = false;

  double at(int date, int stock, int feature) const {
    return values[(static_cast<std::size_t>(date) * n_stocks + stock) * kNumFeatures + feature];
  }
  double& at(int date, int stock, int feature) {
    return values[(static_cast<std::size_t>(date) * n_stocks + stock) * kNumFeatures + feature];
  }
  const double* row(int date, int stock) const {
    return values.data() + (static_cast<std::size_t>(date) * n_stocks + stock) * kNumFeatures;
  }
};

// Warm-up (first defined index) of the slowest feature under cfg; with the
// defaults this is the MACD signal chain: (macd_slow - 1) + (macd_signal - 1).
int warmup_length(const IndicatorConfig& cfg);

// Computes the 16 features for every stock over the full panel.
IndicatorPanel compute_indicator_panel(const data::AlignedPanel& panel,
                                       const IndicatorConfig& cfg);

// Mean/std per (stock, feature) over dates [valid_from, n_train_dates).
std::vector<FeatureStats> compute_feature_stats(const IndicatorPanel& ip, int n_train_dates);

// Applies z-scoring in place over all defined dates. Features whose training
// variance is (near) zero are flagged and mapped to 0 everywhere.
void apply_feature_stats(IndicatorPanel& ip, const std::vector<FeatureStats>& stats);

// compute_feature_stats + apply_feature_stats.
void standardize_panel(IndicatorPanel& ip, int n_train_dates);

// One row per (date, stock) from valid_from on, with named feature columns.
void write_feature_csv(const IndicatorPanel& ip, const data::AlignedPanel& panel,
                       const std::string& path);

}  // namespace indexcast::ta
