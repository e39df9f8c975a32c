#include "indexcast/backtest.hpp"

#include <algorithm>
#include <cmath>

#include "indexcast/errors.hpp"

namespace indexcast::backtest {

namespace {
constexpr double kEps = 1e-12;
}

ConfidenceSource confidence_source_from_string(const std::string& s) {
  if (s == "mean") return ConfidenceSource::mean;
  if (s == "trend") return ConfidenceSource::trend;
  if (s == "none") return ConfidenceSource::none;
  throw config_error("unknown confidence_source '" + s + "' (expected mean, trend or none)");
}

std::string to_string(ConfidenceSource s) {
  switch (s) {
    case ConfidenceSource::mean: return "mean";
    case ConfidenceSource::trend: return "trend";
    case ConfidenceSource::none: return "none";
  }
  return "mean";
}

void TradingConfig::validate() const {
  if (!(cost_rate >= 0)) throw config_error("trading.cost_rate must be non-negative");
  if (trading_days_per_year < 1) throw config_error("trading_days_per_year must be positive");
  if (buckets.empty()) throw config_error("trading.buckets must not be empty");
  double at = 0.5;
  for (const auto& b : buckets) {
    if (std::abs(b.lo - at) > 1e-12) {
      throw config_error("trading.buckets must be contiguous from 0.5 to 1.0");
    }
    if (!(b.hi > b.lo)) throw config_error("trading bucket bounds must increase");
    if (!(b.fraction >= 0 && b.fraction <= 1)) {
      throw config_error("trading bucket fractions must be in [0, 1]");
    }
    at = b.hi;
  }
  if (std::abs(at - 1.0) > 1e-12) {
    throw config_error("trading.buckets must cover confidences up to 1.0");
  }
}

double position_from_confidence(double confidence, int direction, const TradingConfig& cfg) {
  if (direction != 1 && direction != -1) {
    throw backtest_error("position_from_confidence: direction must be +-1");
  }
  if (cfg.confidence_source == ConfidenceSource::none) return direction;
  if (!(confidence >= 0.5 && confidence <= 1.0)) {
    throw backtest_error("position_from_confidence: confidence outside [0.5, 1]");
  }
  for (std::size_t i = 0; i < cfg.buckets.size(); ++i) {
    const auto& b = cfg.buckets[i];
    bool last = i + 1 == cfg.buckets.size();
    if (confidence >= b.lo && (confidence < b.hi || (last && confidence <= b.hi))) {
      return direction * b.fraction;
    }
  }
  throw backtest_error("position_from_confidence: no bucket covers the confidence");
}

SharpeResult sharpe(std::span<const double> returns, int days_per_year) {
  if (returns.empty()) throw backtest_error("sharpe: empty returns");
  double mean = 0;
  for (double r : returns) mean += r;
  mean /= static_cast<double>(returns.size());
  double var = 0;
  for (double r : returns) {
    double d = r - mean;
    var += d * d;
  }
  var /= static_cast<double>(returns.size());
  double sd = std::sqrt(var);
  SharpeResult out;
  if (sd < kEps) {
    out.degenerate = true;
    out.value = 0;
  } else {
    out.value = mean / sd * std::sqrt(static_cast<double>(days_per_year));
  }
  return out;
}

double annualized_return(std::span<const double> returns, int days_per_year) {
  if (returns.empty()) throw backtest_error("annualized_return: empty returns");
  double growth = 1.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    if (returns[i] <= -1.0) {
      throw backtest_error("annualized_return: ruin on day " + std::to_string(i) +
                           " (daily return " + std::to_string(returns[i]) + ")");
    }
    growth *= 1.0 + returns[i];
  }
  double years_exp = static_cast<double>(days_per_year) / static_cast<double>(returns.size());
  return std::pow(growth, years_exp) - 1.0;
}

BacktestReport run_backtest(std::span<const double> predictions,
                            std::span<const double> confidences,
                            std::span<const double> index_returns, const TradingConfig& cfg) {
  cfg.validate();
  std::size_t n = predictions.size();
  if (n == 0) throw backtest_error("run_backtest: no days");
  if (index_returns.size() != n) {
    throw backtest_error("run_backtest: predictions and returns lengths differ");
  }
  if (cfg.confidence_source != ConfidenceSource::none && confidences.size() != n) {
    throw backtest_error("run_backtest: confidences length differs");
  }

  BacktestReport rep;
  rep.positions.resize(n);
  rep.daily_returns.resize(n);
  rep.equity_curve.resize(n + 1);
  rep.equity_curve[0] = 1.0;

  double prev = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    int direction = predictions[t] >= 0 ? 1 : -1;
    double conf = cfg.confidence_source == ConfidenceSource::none ? 1.0 : confidences[t];
    double pos = position_from_confidence(conf, direction, cfg);
    double turn = std::abs(pos - prev);
    double cost = cfg.cost_rate * turn;
    rep.positions[t] = pos;
    rep.daily_returns[t] = pos * index_returns[t] - cost;
    rep.total_cost += cost;
    if (turn > 0) ++rep.n_trades;
    if (rep.daily_returns[t] <= -1.0) {
      throw backtest_error("run_backtest: ruin on day " + std::to_string(t));
    }
    rep.equity_curve[t + 1] = rep.equity_curve[t] * (1.0 + rep.daily_returns[t]);
    prev = pos;
  }
  rep.final_equity = rep.equity_curve[n];
  rep.sr = sharpe(rep.daily_returns, cfg.trading_days_per_year);
  rep.ar = annualized_return(rep.daily_returns, cfg.trading_days_per_year);
  return rep;
}

}  // namespace indexcast::backtest
