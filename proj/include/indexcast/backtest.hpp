#pragma once

#include <span>
#include <string>
#include <vector>

namespace indexcast::backtest {

enum class ConfidenceSource { mean, trend, none };

ConfidenceSource confidence_source_from_string(const std::string& s);
std::string to_string(ConfidenceSource s);

// Position fraction per confidence bucket. Buckets are [lo, hi) except the
// last, which closes at hi so a confidence of exactly 1 is covered.
struct Bucket {
  double lo = 0;
  double hi = 0;
  double fraction = 0;
};

struct TradingConfig {
  double cost_rate = 0.001;  // per unit of position change
  ConfidenceSource confidence_source = ConfidenceSource::mean;
  std::vector<Bucket> buckets = {{0.5, 0.7, 0.5}, {0.7, 1.0, 1.0}};
  int trading_days_per_year = 252;

  // Buckets must be sorted, contiguous and cover [0.5, 1.0] exactly.
  void validate() const;
};

// direction is +-1; returns direction * bucket fraction (or the full
// direction when the config disables confidence sizing).
double position_from_confidence(double confidence, int direction, const TradingConfig& cfg);

struct SharpeResult {
  double value = 0;
  bool degenerate = false;  // zero return variance
};

// mean / population std, annualized with sqrt(days_per_year); risk-free
// rate zero.
SharpeResult sharpe(std::span<const double> returns, int days_per_year = 252);

// (prod(1 + r))^(days_per_year / T) - 1. A return of -1 or lower (ruin)
// is an explicit error.
double annualized_return(std::span<const double> returns, int days_per_year = 252);

struct BacktestReport {
  std::vector<double> positions;
  std::vector<double> daily_returns;  // position * index return - transaction costs
  std::vector<double> equity_curve;   // length T + 1, starts at 1
  SharpeResult sr;
  double ar = 0;
  int n_trades = 0;      // days with a position change
  double total_cost = 0;
  double final_equity = 1;
};

// Day t's position is taken from prediction t and earns index_returns[t]
// (the return from day t to t + 1); the alignment is the caller's contract.
// Costs are charged on position changes, starting from flat.
BacktestReport run_backtest(std::span<const double> predictions,
                            std::span<const double> confidences,
                            std::span<const double> index_returns, const TradingConfig& cfg);

}  // namespace indexcast::backtest
