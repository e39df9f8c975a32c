#pragma once

#include <string>
#include <vector>

#include "indexcast/errors.hpp"

namespace indexcast::data {

// One daily bar. Dates are ISO-8601 (YYYY-MM-DD) strings, which order
// lexicographically the same way they order chronologically.
struct OhlcvBar {
  std::string date;
  double open = 0;
  double high = 0;
  double low = 0;
  double close = 0;
  double volume = 0;
};

struct StockSeries {
  std::string symbol;
  std::vector<OhlcvBar> bars;  // strictly increasing dates
};

// Constituents plus the index, restricted to their common trading dates.
struct AlignedPanel {
  std::vector<std::string> dates;
  std::vector<StockSeries> stocks;  // every series has one bar per date
  StockSeries index;

  int n_dates() const { return static_cast<int>(dates.size()); }
  int n_stocks() const { return static_cast<int>(stocks.size()); }
};

// Next-day simple returns of the index close, standardized with statistics
// from the training prefix only. raw[t] = (close[t+1] - close[t]) / close[t].
struct TargetSeries {
  std::vector<double> raw;
  std::vector<double> standardized;
  double mean = 0;    // over raw[0 .. train_len)
  double stddev = 0;  // population estimator (divide by n)
  int train_len = 0;
};

struct SplitSpec {
  double train = 0.7;
  double val = 0.2;
  double test = 0.1;
};

struct SplitSizes {
  int train = 0;
  int val = 0;
  int test = 0;
};

struct SplitPanels {
  AlignedPanel train;
  AlignedPanel val;
  AlignedPanel test;
};

// Parses a CSV with header "date,open,high,low,close,volume". Rows are
// validated (calendar dates, positive prices, high/low envelope, finite
// values) and rejected with their 1-based row number on failure. Bars are
// sorted by date; duplicate dates are an error.
StockSeries load_csv(const std::string& path, const std::string& symbol);

// Same validation applied to an in-memory series (used by generators).
void validate_series(const StockSeries& series);

// Restricts all series to the intersection of their date sets, ascending.
// Errors if the intersection is empty or no stocks are given.
AlignedPanel align(const std::vector<StockSeries>& stocks, const StockSeries& index);

// train_len is the number of leading raw returns used for the mean/std;
// it must be in [1, len - 1]. Errors if the prefix has zero variance.
TargetSeries compute_target(const StockSeries& index, int train_len);

// floor(ratio * total) per segment, remainder assigned to train. Every
// ratio must be positive and the three must sum to 1; every resulting
// segment must be non-empty.
SplitSizes split_sizes(int n_dates, const SplitSpec& spec);

// Chronological split; needs at least 10 dates. Concatenating the three
// panels in order reproduces the input.
SplitPanels split_chronological(const AlignedPanel& panel, const SplitSpec& spec);

}  // namespace indexcast::data
