#include "indexcast/synthetic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "indexcast/rng.hpp"

namespace indexcast::synth {

void SynthConfig::validate() const {
  indicator_cfg.validate();
  if (n_stocks < 2) throw config_error("synthetic: n_stocks must be at least 2");
  int need = ta::warmup_length(indicator_cfg) + 20;
  if (n_days < need) {
    throw config_error("synthetic: n_days must be at least " + std::to_string(need) +
                       " to clear the indicator warm-up");
  }
  if (!(return_scale > 0)) throw config_error("synthetic: return_scale must be positive");
  if (!(noise >= 0)) throw config_error("synthetic: noise must be non-negative");
  if (!(clamp > 0 && clamp < 1)) throw config_error("synthetic: clamp must be in (0, 1)");
  if (!(index_start > 0)) throw config_error("synthetic: index_start must be positive");
}

namespace {

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static const int d[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && leap(y)) return 29;
  return d[m - 1];
}

int parse_part(const std::string& iso, std::size_t pos, std::size_t len) {
  int v = 0;
  auto [p, ec] = std::from_chars(iso.data() + pos, iso.data() + pos + len, v);
  if (ec != std::errc() || p != iso.data() + pos + len) {
    throw data_error("bad ISO date '" + iso + "'");
  }
  return v;
}

}  // namespace

std::string next_date(const std::string& iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
    throw data_error("bad ISO date '" + iso + "'");
  }
  int y = parse_part(iso, 0, 4);
  int m = parse_part(iso, 5, 2);
  int d = parse_part(iso, 8, 2);
  if (m < 1 || m > 12 || d < 1 || d > days_in_month(y, m)) {
    throw data_error("bad ISO date '" + iso + "'");
  }
  if (++d > days_in_month(y, m)) {
    d = 1;
    if (++m > 12) {
      m = 1;
      ++y;
    }
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
  return buf;
}

SyntheticMarket generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  int T = cfg.n_days;
  auto st = [](int i) { return static_cast<std::size_t>(i); };

  std::vector<std::string> dates(st(T));
  dates[0] = cfg.start_date;
  (void)next_date(cfg.start_date);  // reject a malformed start early
  for (int t = 1; t < T; ++t) dates[st(t)] = next_date(dates[st(t - 1)]);

  // Constituents share a market factor, so cross-sectional extremes track the
  // cross-sectional mean the way correlated index members do.
  std::vector<double> market(st(T));
  for (double& v : market) v = 0.010 * rng.normal();

  SyntheticMarket out;
  out.stocks.resize(st(cfg.n_stocks));
  for (int i = 0; i < cfg.n_stocks; ++i) {
    data::StockSeries& s = out.stocks[st(i)];
    char sym[16];
    std::snprintf(sym, sizeof(sym), "SYN%03d", i);
    s.symbol = sym;
    s.bars.resize(st(T));

    std::vector<double> close(st(T));
    double logc = std::log(100.0);
    for (int t = 0; t < T; ++t) {
      logc += 0.0002 + market[st(t)] + 0.010 * rng.normal();
      close[st(t)] = std::exp(logc);
    }
    for (int t = 0; t < T; ++t) {
      data::OhlcvBar& b = s.bars[st(t)];
      b.date = dates[st(t)];
      b.close = close[st(t)];
      b.open = t == 0 ? b.close : close[st(t - 1)] * std::exp(0.003 * rng.normal());
      b.high = std::max(b.open, b.close) * (1.0 + std::abs(0.004 * rng.normal()));
      b.low = std::min(b.open, b.close) * (1.0 - std::abs(0.004 * rng.normal()));
      b.volume = 1e6 * std::exp(0.3 * rng.normal());
    }
    data::validate_series(s);
  }

  // Standardized features over the full range, pooled across stocks.
  data::AlignedPanel panel;
  panel.dates = dates;
  panel.stocks = out.stocks;
  ta::IndicatorPanel ip = ta::compute_indicator_panel(panel, cfg.indicator_cfg);
  ta::standardize_panel(ip, ip.n_dates);
  int vf = ip.valid_from;
  out.valid_from = vf;

  int n_pooled = T - vf;
  int phi_dim = 3 * ta::kNumFeatures;
  std::vector<double> phi(st(n_pooled) * st(phi_dim));
  for (int t = vf; t < T; ++t) {
    double* row = phi.data() + st(t - vf) * st(phi_dim);
    for (int f = 0; f < ta::kNumFeatures; ++f) {
      double mx = ip.at(t, 0, f);
      double mn = mx;
      double sum = mx;
      for (int i = 1; i < cfg.n_stocks; ++i) {
        double v = ip.at(t, i, f);
        mx = std::max(mx, v);
        mn = std::min(mn, v);
        sum += v;
      }
      row[f] = mx;
      row[ta::kNumFeatures + f] = sum / cfg.n_stocks;
      row[2 * ta::kNumFeatures + f] = mn;
    }
  }

  // The signal lives on the cross-sectional mean block; the max and min
  // blocks stay in phi as zero-weight distractor columns.
  std::vector<double> w(st(phi_dim));
  double norm2 = 0;
  for (int j = ta::kNumFeatures; j < 2 * ta::kNumFeatures; ++j) {
    w[st(j)] = rng.normal();
    norm2 += w[st(j)] * w[st(j)];
  }
  double norm = std::sqrt(norm2);
  if (norm < 1e-12) throw data_error("synthetic: degenerate signal weights");
  for (double& v : w) v /= norm;

  std::vector<double> sig(st(n_pooled));
  double smean = 0;
  for (int t = 0; t < n_pooled; ++t) {
    double dot = 0;
    const double* row = phi.data() + st(t) * st(phi_dim);
    for (int j = 0; j < phi_dim; ++j) dot += row[j] * w[st(j)];
    sig[st(t)] = dot;
    smean += dot;
  }
  smean /= n_pooled;
  double svar = 0;
  for (double v : sig) svar += (v - smean) * (v - smean);
  double sstd = std::sqrt(svar / n_pooled);
  if (sstd < 1e-12) throw data_error("synthetic: degenerate pooled signal");
  for (double& v : sig) v = (v - smean) / sstd;

  out.true_returns.resize(st(T - 1));
  for (int t = 0; t < T - 1; ++t) {
    double y = t >= vf ? cfg.return_scale * (sig[st(t - vf)] + cfg.noise * rng.normal())
                       : cfg.return_scale * cfg.noise * rng.normal();
    out.true_returns[st(t)] = std::clamp(y, -cfg.clamp, cfg.clamp);
  }

  out.index.symbol = "INDEX";
  out.index.bars.resize(st(T));
  double level = cfg.index_start;
  for (int t = 0; t < T; ++t) {
    data::OhlcvBar& b = out.index.bars[st(t)];
    b.date = dates[st(t)];
    b.close = level;
    b.open = t == 0 ? level : out.index.bars[st(t - 1)].close;
    b.high = std::max(b.open, b.close);
    b.low = std::min(b.open, b.close);
    b.volume = 1e6;
    if (t < T - 1) level *= 1.0 + out.true_returns[st(t)];
  }
  data::validate_series(out.index);
  return out;
}

namespace {

void write_series_csv(const data::StockSeries& s, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw io_error("cannot write " + path);
  f << "date,open,high,low,close,volume\n";
  char buf[160];
  for (const auto& b : s.bars) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g\n", b.date.c_str(), b.open,
                  b.high, b.low, b.close, b.volume);
    f << buf;
  }
  if (!f.good()) throw io_error("failed writing " + path);
}

}  // namespace

void write_csvs(const SyntheticMarket& market, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& s : market.stocks) {
    write_series_csv(s, dir + "/" + s.symbol + ".csv");
  }
  write_series_csv(market.index, dir + "/index.csv");
}

}  // namespace indexcast::synth
