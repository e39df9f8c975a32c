#include "indexcast/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

namespace indexcast::data {

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static const int d[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return d[m - 1];
}

bool valid_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (s[static_cast<std::size_t>(i)] < '0' || s[static_cast<std::size_t>(i)] > '9') return false;
  }
  int y = std::stoi(s.substr(0, 4));
  int m = std::stoi(s.substr(5, 2));
  int d = std::stoi(s.substr(8, 2));
  return m >= 1 && m <= 12 && d >= 1 && d <= days_in_month(y, m);
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_number(const std::string& s, const std::string& path, int row, const char* field) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw data_error(path + ": row " + std::to_string(row) + ": field '" + field +
                     "' is not a number: '" + s + "'");
  }
  if (!std::isfinite(v)) {
    throw data_error(path + ": row " + std::to_string(row) + ": field '" + field +
                     "' is not finite");
  }
  return v;
}

void validate_bar(const OhlcvBar& b, const std::string& where) {
  if (!valid_date(b.date)) {
    throw data_error(where + ": invalid date '" + b.date + "'");
  }
  if (!(b.open > 0 && b.high > 0 && b.low > 0 && b.close > 0)) {
    throw data_error(where + ": prices must be positive");
  }
  if (b.volume < 0 || !std::isfinite(b.volume)) {
    throw data_error(where + ": volume must be non-negative");
  }
  if (b.high < std::max(b.open, b.close) || b.low > std::min(b.open, b.close)) {
    throw data_error(where + ": high/low do not bracket open/close");
  }
}

AlignedPanel restrict_dates(const AlignedPanel& panel, int begin, int end) {
  AlignedPanel out;
  out.dates.assign(panel.dates.begin() + begin, panel.dates.begin() + end);
  out.index.symbol = panel.index.symbol;
  out.index.bars.assign(panel.index.bars.begin() + begin, panel.index.bars.begin() + end);
  out.stocks.reserve(panel.stocks.size());
  for (const auto& s : panel.stocks) {
    StockSeries t;
    t.symbol = s.symbol;
    t.bars.assign(s.bars.begin() + begin, s.bars.begin() + end);
    out.stocks.push_back(std::move(t));
  }
  return out;
}

}  // namespace

StockSeries load_csv(const std::string& path, const std::string& symbol) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");

  StockSeries series;
  series.symbol = symbol;

  std::string line;
  int row = 0;
  if (!std::getline(in, line)) throw data_error(path + ": empty file");
  ++row;
  // Tolerate a UTF-8 byte order mark on the header.
  if (line.size() >= 3 && line.compare(0, 3, "\xef\xbb\xbf") == 0) line.erase(0, 3);
  {
    auto fields = split_fields(line);
    const std::vector<std::string> expect = {"date", "open", "high", "low", "close", "volume"};
    bool ok = fields.size() == expect.size();
    for (std::size_t i = 0; ok && i < expect.size(); ++i) {
      std::string f = fields[i];
      std::transform(f.begin(), f.end(), f.begin(), [](unsigned char c) { return std::tolower(c); });
      ok = f == expect[i];
    }
    if (!ok) {
      throw data_error(path + ": header must be 'date,open,high,low,close,volume', got '" + line +
                       "'");
    }
  }

  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 6) {
      throw data_error(path + ": row " + std::to_string(row) + ": expected 6 fields, got " +
                       std::to_string(fields.size()));
    }
    OhlcvBar bar;
    bar.date = fields[0];
    bar.open = parse_number(fields[1], path, row, "open");
    bar.high = parse_number(fields[2], path, row, "high");
    bar.low = parse_number(fields[3], path, row, "low");
    bar.close = parse_number(fields[4], path, row, "close");
    bar.volume = parse_number(fields[5], path, row, "volume");
    validate_bar(bar, path + ": row " + std::to_string(row));
    series.bars.push_back(std::move(bar));
  }
  if (series.bars.empty()) throw data_error(path + ": no data rows");

  std::stable_sort(series.bars.begin(), series.bars.end(),
                   [](const OhlcvBar& a, const OhlcvBar& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < series.bars.size(); ++i) {
    if (series.bars[i].date == series.bars[i - 1].date) {
      throw data_error(path + ": duplicate date '" + series.bars[i].date + "'");
    }
  }
  return series;
}

void validate_series(const StockSeries& series) {
  if (series.bars.empty()) throw data_error(series.symbol + ": empty series");
  for (std::size_t i = 0; i < series.bars.size(); ++i) {
    validate_bar(series.bars[i], series.symbol + ": bar " + std::to_string(i));
    if (i > 0 && series.bars[i].date <= series.bars[i - 1].date) {
      throw data_error(series.symbol + ": dates not strictly increasing at bar " +
                       std::to_string(i));
    }
  }
}

AlignedPanel align(const std::vector<StockSeries>& stocks, const StockSeries& index) {
  if (stocks.empty()) throw data_error("align: need at least one constituent series");
  if (index.bars.empty()) throw data_error("align: index series is empty");

  std::set<std::string> common;
  for (const auto& b : index.bars) common.insert(b.date);
  for (const auto& s : stocks) {
    std::set<std::string> dates;
    for (const auto& b : s.bars) dates.insert(b.date);
    std::set<std::string> kept;
    std::set_intersection(common.begin(), common.end(), dates.begin(), dates.end(),
                          std::inserter(kept, kept.begin()));
    common.swap(kept);
  }
  if (common.empty()) throw data_error("align: no dates shared by every series");

  AlignedPanel panel;
  panel.dates.assign(common.begin(), common.end());

  auto filter = [&common](const StockSeries& s) {
    StockSeries out;
    out.symbol = s.symbol;
    for (const auto& b : s.bars) {
      if (common.count(b.date)) out.bars.push_back(b);
    }
    return out;
  };
  panel.index = filter(index);
  for (const auto& s : stocks) panel.stocks.push_back(filter(s));
  return panel;
}

TargetSeries compute_target(const StockSeries& index, int train_len) {
  int n = static_cast<int>(index.bars.size());
  if (n < 2) throw data_error("compute_target: need at least 2 bars");
  if (train_len < 1 || train_len > n - 1) {
    throw data_error("compute_target: train_len " + std::to_string(train_len) +
                     " outside [1, " + std::to_string(n - 1) + "]");
  }

  TargetSeries t;
  t.train_len = train_len;
  t.raw.resize(static_cast<std::size_t>(n - 1));
  for (int i = 0; i + 1 < n; ++i) {
    double prev = index.bars[static_cast<std::size_t>(i)].close;
    double next = index.bars[static_cast<std::size_t>(i + 1)].close;
    t.raw[static_cast<std::size_t>(i)] = (next - prev) / prev;
  }

  double mean = 0;
  for (int i = 0; i < train_len; ++i) mean += t.raw[static_cast<std::size_t>(i)];
  mean /= train_len;
  double var = 0;
  for (int i = 0; i < train_len; ++i) {
    double d = t.raw[static_cast<std::size_t>(i)] - mean;
    var += d * d;
  }
  var /= train_len;
  double sd = std::sqrt(var);
  if (sd < 1e-12) {
    throw data_error("compute_target: training prefix of the index is constant (std = 0)");
  }
  t.mean = mean;
  t.stddev = sd;
  t.standardized.resize(t.raw.size());
  for (std::size_t i = 0; i < t.raw.size(); ++i) {
    t.standardized[i] = (t.raw[i] - mean) / sd;
  }
  return t;
}

SplitSizes split_sizes(int n_dates, const SplitSpec& spec) {
  if (!(spec.train > 0 && spec.val > 0 && spec.test > 0)) {
    throw config_error("split ratios must all be positive");
  }
  if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
    throw config_error("split ratios must sum to 1");
  }
  // The small epsilon keeps e.g. 10 * 0.7 from flooring to 6.
  SplitSizes s;
  s.train = static_cast<int>(std::floor(n_dates * spec.train + 1e-9));
  s.val = static_cast<int>(std::floor(n_dates * spec.val + 1e-9));
  s.test = static_cast<int>(std::floor(n_dates * spec.test + 1e-9));
  s.train += n_dates - (s.train + s.val + s.test);
  if (s.train < 1 || s.val < 1 || s.test < 1) {
    throw config_error("split produces an empty segment for " + std::to_string(n_dates) +
                       " dates");
  }
  return s;
}

SplitPanels split_chronological(const AlignedPanel& panel, const SplitSpec& spec) {
  if (panel.n_dates() < 10) {
    throw data_error("split: need at least 10 dates, got " + std::to_string(panel.n_dates()));
  }
  SplitSizes s = split_sizes(panel.n_dates(), spec);
  SplitPanels out;
  out.train = restrict_dates(panel, 0, s.train);
  out.val = restrict_dates(panel, s.train, s.train + s.val);
  out.test = restrict_dates(panel, s.train + s.val, panel.n_dates());
  return out;
}

}  // namespace indexcast::data
