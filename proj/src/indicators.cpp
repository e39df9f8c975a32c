#include "indexcast/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace indexcast::ta {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kEps = 1e-12;

std::vector<double> column(const data::StockSeries& s, double data::OhlcvBar::*field) {
  std::vector<double> out;
  out.reserve(s.bars.size());
  for (const auto& b : s.bars) out.push_back(b.*field);
  return out;
}

}  // namespace

const char* const kFeatureNames[kNumFeatures] = {
    "arithmetic_ratio", "open",        "close",       "close_sma",
    "volume_sma",       "close_ema",   "volume_ema",  "adx",
    "rsi",              "macd",        "macd_signal", "stochastic_k",
    "mfi",              "atr",         "bb_middle",   "obv",
};

void IndicatorConfig::validate() const {
  if (n_osc < 2) throw config_error("indicators.n_osc must be at least 2");
  if (n_ma < 2) throw config_error("indicators.n_ma must be at least 2");
  if (macd_fast < 1 || macd_slow < 1 || macd_signal < 1) {
    throw config_error("macd spans must be positive");
  }
  if (macd_fast >= macd_slow) {
    throw config_error("macd_fast must be smaller than macd_slow");
  }
}

std::vector<double> sma(const std::vector<double>& x, int n) {
  std::vector<double> out(x.size(), kNaN);
  if (n < 1 || x.size() < static_cast<std::size_t>(n)) return out;
  double sum = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum += x[i];
    if (i >= static_cast<std::size_t>(n)) sum -= x[i - static_cast<std::size_t>(n)];
    if (i + 1 >= static_cast<std::size_t>(n)) out[i] = sum / n;
  }
  return out;
}

std::vector<double> ema(const std::vector<double>& x, int n) {
  std::vector<double> out(x.size(), kNaN);
  if (x.empty() || n < 1) return out;
  double k = 2.0 / (n + 1);
  out[0] = x[0];
  for (std::size_t i = 1; i < x.size(); ++i) {
    out[i] = k * x[i] + (1.0 - k) * out[i - 1];
  }
  return out;
}

std::vector<double> rsi(const std::vector<double>& close, int n) {
  std::vector<double> out(close.size(), kNaN);
  if (close.size() <= static_cast<std::size_t>(n)) return out;
  double avg_gain = 0;
  double avg_loss = 0;
  for (int i = 1; i <= n; ++i) {
    double d = close[static_cast<std::size_t>(i)] - close[static_cast<std::size_t>(i - 1)];
    avg_gain += std::max(d, 0.0);
    avg_loss += std::max(-d, 0.0);
  }
  avg_gain /= n;
  avg_loss /= n;
  auto value = [](double g, double l) {
    if (l < kEps) return 100.0;
    if (g < kEps) return 0.0;
    return 100.0 - 100.0 / (1.0 + g / l);
  };
  out[static_cast<std::size_t>(n)] = value(avg_gain, avg_loss);
  for (std::size_t i = static_cast<std::size_t>(n) + 1; i < close.size(); ++i) {
    double d = close[i] - close[i - 1];
    avg_gain = ((n - 1) * avg_gain + std::max(d, 0.0)) / n;
    avg_loss = ((n - 1) * avg_loss + std::max(-d, 0.0)) / n;
    out[i] = value(avg_gain, avg_loss);
  }
  return out;
}

MacdResult macd(const std::vector<double>& close, int fast, int slow, int signal_n) {
  MacdResult r;
  auto ef = ema(close, fast);
  auto es = ema(close, slow);
  r.macd.resize(close.size());
  for (std::size_t i = 0; i < close.size(); ++i) r.macd[i] = ef[i] - es[i];
  r.signal = ema(r.macd, signal_n);
  return r;
}

std::vector<double> stochastic_k(const std::vector<double>& high,
                                 const std::vector<double>& low,
                                 const std::vector<double>& close, int n) {
  std::vector<double> out(close.size(), kNaN);
  for (std::size_t i = static_cast<std::size_t>(n) - 1; i < close.size(); ++i) {
    double hh = -std::numeric_limits<double>::infinity();
    double ll = std::numeric_limits<double>::infinity();
    for (std::size_t j = i + 1 - static_cast<std::size_t>(n); j <= i; ++j) {
      hh = std::max(hh, high[j]);
      ll = std::min(ll, low[j]);
    }
    out[i] = (hh - ll < kEps) ? 50.0 : 100.0 * (close[i] - ll) / (hh - ll);
  }
  return out;
}

std::vector<double> mfi(const std::vector<double>& high, const std::vector<double>& low,
                        const std::vector<double>& close, const std::vector<double>& volume,
                        int n) {
  std::size_t len = close.size();
  std::vector<double> out(len, kNaN);
  if (len <= static_cast<std::size_t>(n)) return out;
  std::vector<double> tp(len), pos(len, 0.0), neg(len, 0.0);
  for (std::size_t i = 0; i < len; ++i) tp[i] = (high[i] + low[i] + close[i]) / 3.0;
  for (std::size_t i = 1; i < len; ++i) {
    double flow = tp[i] * volume[i];
    if (tp[i] > tp[i - 1]) pos[i] = flow;
    else if (tp[i] < tp[i - 1]) neg[i] = flow;
  }
  double p = 0;
  double m = 0;
  for (std::size_t i = 1; i < len; ++i) {
    p += pos[i];
    m += neg[i];
    if (i > static_cast<std::size_t>(n)) {
      p -= pos[i - static_cast<std::size_t>(n)];
      m -= neg[i - static_cast<std::size_t>(n)];
    }
    if (i >= static_cast<std::size_t>(n)) {
      if (m < kEps) out[i] = 100.0;
      else if (p < kEps) out[i] = 0.0;
      else out[i] = 100.0 - 100.0 / (1.0 + p / m);
    }
  }
  return out;
}

std::vector<double> atr(const std::vector<double>& high, const std::vector<double>& low,
                        const std::vector<double>& close, int n) {
  std::size_t len = close.size();
  std::vector<double> tr(len);
  if (len == 0) return tr;
  tr[0] = high[0] - low[0];
  for (std::size_t i = 1; i < len; ++i) {
    tr[i] = std::max({high[i] - low[i], std::abs(high[i] - close[i - 1]),
                      std::abs(low[i] - close[i - 1])});
  }
  return ema(tr, n);
}

std::vector<double> adx(const std::vector<double>& high, const std::vector<double>& low, int n) {
  std::size_t len = high.size();
  std::vector<double> out(len, kNaN);
  if (len <= static_cast<std::size_t>(n)) return out;
  std::vector<double> dmp(len, 0.0), dmm(len, 0.0);
  for (std::size_t i = 1; i < len; ++i) {
    double up = high[i] - high[i - 1];
    double dn = low[i - 1] - low[i];
    if (up > dn && up > 0) dmp[i] = up;
    if (dn > up && dn > 0) dmm[i] = dn;
  }
  double sp = 0;
  double sm = 0;
  for (int i = 1; i <= n; ++i) {
    sp += dmp[static_cast<std::size_t>(i)];
    sm += dmm[static_cast<std::size_t>(i)];
  }
  auto value = [](double a, double b) {
    return (a + b < kEps) ? 0.0 : 100.0 * std::abs(a - b) / (a + b);
  };
  out[static_cast<std::size_t>(n)] = value(sp, sm);
  for (std::size_t i = static_cast<std::size_t>(n) + 1; i < len; ++i) {
    sp = sp - sp / n + dmp[i];
    sm = sm - sm / n + dmm[i];
    out[i] = value(sp, sm);
  }
  return out;
}

std::vector<double> obv(const std::vector<double>& close, const std::vector<double>& volume) {
  std::vector<double> out(close.size(), 0.0);
  for (std::size_t i = 1; i < close.size(); ++i) {
    double step = 0;
    if (close[i] > close[i - 1]) step = volume[i];
    else if (close[i] < close[i - 1]) step = -volume[i];
    out[i] = out[i - 1] + step;
  }
  return out;
}

int warmup_length(const IndicatorConfig& cfg) {
  int w = 0;
  w = std::max(w, cfg.n_ma - 1);                                 // SMA / EMA / Bollinger
  w = std::max(w, cfg.n_osc);                                    // RSI, MFI, ADX
  w = std::max(w, cfg.n_osc - 1);                                // K, ATR
  w = std::max(w, cfg.macd_slow - 1);                            // MACD
  w = std::max(w, (cfg.macd_slow - 1) + (cfg.macd_signal - 1));  // MACD signal
  return w;
}

IndicatorPanel compute_indicator_panel(const data::AlignedPanel& panel,
                                       const IndicatorConfig& cfg) {
  cfg.validate();
  if (panel.n_stocks() < 1) throw data_error("indicator panel: no stocks");
  int warm = warmup_length(cfg);
  if (panel.n_dates() <= warm) {
    throw data_error("indicator panel: " + std::to_string(panel.n_dates()) +
                     " dates is not enough for a warm-up of " + std::to_string(warm));
  }

  IndicatorPanel ip;
  ip.n_dates = panel.n_dates();
  ip.n_stocks = panel.n_stocks();
  ip.valid_from = warm;
  ip.values.assign(static_cast<std::size_t>(ip.n_dates) * ip.n_stocks * kNumFeatures, kNaN);

  for (int s = 0; s < ip.n_stocks; ++s) {
    const auto& series = panel.stocks[static_cast<std::size_t>(s)];
    auto open = column(series, &data::OhlcvBar::open);
    auto high = column(series, &data::OhlcvBar::high);
    auto low = column(series, &data::OhlcvBar::low);
    auto close = column(series, &data::OhlcvBar::close);
    auto volume = column(series, &data::OhlcvBar::volume);

    auto close_sma = sma(close, cfg.n_ma);
    auto volume_sma = sma(volume, cfg.n_ma);
    auto close_ema = ema(close, cfg.n_ma);
    auto volume_ema = ema(volume, cfg.n_ma);
    auto adx_v = adx(high, low, cfg.n_osc);
    auto rsi_v = rsi(close, cfg.n_osc);
    auto macd_v = macd(close, cfg.macd_fast, cfg.macd_slow, cfg.macd_signal);
    auto k_v = stochastic_k(high, low, close, cfg.n_osc);
    auto mfi_v = mfi(high, low, close, volume, cfg.n_osc);
    auto atr_v = atr(high, low, close, cfg.n_osc);
    auto obv_v = obv(close, volume);

    for (int t = 0; t < ip.n_dates; ++t) {
      auto ti = static_cast<std::size_t>(t);
      ip.at(t, s, kArithmeticRatio) = open[ti] / close[ti];
      ip.at(t, s, kOpen) = open[ti];
      ip.at(t, s, kClose) = close[ti];
      ip.at(t, s, kCloseSma) = close_sma[ti];
      ip.at(t, s, kVolumeSma) = volume_sma[ti];
      ip.at(t, s, kCloseEma) = close_ema[ti];
      ip.at(t, s, kVolumeEma) = volume_ema[ti];
      ip.at(t, s, kAdx) = adx_v[ti];
      ip.at(t, s, kRsi) = rsi_v[ti];
      ip.at(t, s, kMacd) = macd_v.macd[ti];
      ip.at(t, s, kMacdSignal) = macd_v.signal[ti];
      ip.at(t, s, kStochasticK) = k_v[ti];
      ip.at(t, s, kMfi) = mfi_v[ti];
      ip.at(t, s, kAtr) = atr_v[ti];
      ip.at(t, s, kBollingerMiddle) = close_sma[ti];
      ip.at(t, s, kObv) = obv_v[ti];
    }
  }

  for (int t = ip.valid_from; t < ip.n_dates; ++t) {
    for (int s = 0; s < ip.n_stocks; ++s) {
      for (int f = 0; f < kNumFeatures; ++f) {
        if (!std::isfinite(ip.at(t, s, f))) {
          throw data_error("indicator panel: non-finite value at date " + std::to_string(t) +
                           " stock " + std::to_string(s) + " feature " + kFeatureNames[f]);
        }
      }
    }
  }
  return ip;
}

std::vector<FeatureStats> compute_feature_stats(const IndicatorPanel& ip, int n_train_dates) {
  if (n_train_dates <= ip.valid_from) {
    throw data_error("feature stats: training segment ends before the indicator warm-up (" +
                     std::to_string(n_train_dates) + " <= " + std::to_string(ip.valid_from) + ")");
  }
  if (n_train_dates > ip.n_dates) {
    throw data_error("feature stats: n_train_dates exceeds the panel");
  }
  std::vector<FeatureStats> stats(static_cast<std::size_t>(ip.n_stocks) * kNumFeatures);
  int n = n_train_dates - ip.valid_from;
  for (int s = 0; s < ip.n_stocks; ++s) {
    for (int f = 0; f < kNumFeatures; ++f) {
      double mean = 0;
      for (int t = ip.valid_from; t < n_train_dates; ++t) mean += ip.at(t, s, f);
      mean /= n;
      double var = 0;
      for (int t = ip.valid_from; t < n_train_dates; ++t) {
        double d = ip.at(t, s, f) - mean;
        var += d * d;
      }
      var /= n;
      auto& st = stats[static_cast<std::size_t>(s) * kNumFeatures + f];
      st.mean = mean;
      st.stddev = std::sqrt(var);
      st.constant = st.stddev < 1e-12;
    }
  }
  return stats;
}

void apply_feature_stats(IndicatorPanel& ip, const std::vector<FeatureStats>& stats) {
  if (stats.size() != static_cast<std::size_t>(ip.n_stocks) * kNumFeatures) {
    throw data_error("feature stats: size does not match the panel");
  }
  for (int t = ip.valid_from; t < ip.n_dates; ++t) {
    for (int s = 0; s < ip.n_stocks; ++s) {
      for (int f = 0; f < kNumFeatures; ++f) {
        const auto& st = stats[static_cast<std::size_t>(s) * kNumFeatures + f];
        double& v = ip.at(t, s, f);
        v = st.constant ? 0.0 : (v - st.mean) / st.stddev;
      }
    }
  }
  ip.stats = stats;
  ip.standardized = true;
}

void standardize_panel(IndicatorPanel& ip, int n_train_dates) {
  apply_feature_stats(ip, compute_feature_stats(ip, n_train_dates));
}

void write_feature_csv(const IndicatorPanel& ip, const data::AlignedPanel& panel,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path + "'");
  out << "date,symbol";
  for (int f = 0; f < kNumFeatures; ++f) out << ',' << kFeatureNames[f];
  out << '\n';
  char buf[64];
  for (int t = ip.valid_from; t < ip.n_dates; ++t) {
    for (int s = 0; s < ip.n_stocks; ++s) {
      out << panel.dates[static_cast<std::size_t>(t)] << ','
          << panel.stocks[static_cast<std::size_t>(s)].symbol;
      for (int f = 0; f < kNumFeatures; ++f) {
        std::snprintf(buf, sizeof(buf), "%.10g", ip.at(t, s, f));
        out << ',' << buf;
      }
      out << '\n';
    }
  }
}

}  // namespace indexcast::ta
