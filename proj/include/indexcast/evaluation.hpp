#pragma once

#include <span>
#include <vector>

namespace indexcast::metrics {

// Pearson correlation over the full sequences. Errors on length < 2 or
// zero variance of either side.
double pearson(std::span<const double> a, std::span<const double> b);

struct IcirResult {
  double value = 0;
  bool degenerate = false;  // window ICs had (near) zero spread
  std::vector<double> window_ics;
};

// Information coefficient ratio: Pearson IC per non-overlapping window of
// `window` days (leftover tail dropped), then mean / population std of the
// window ICs. Needs at least 2 complete windows. A zero spread is returned
// as mean / epsilon with the degenerate flag set.
IcirResult icir(std::span<const double> pred, std::span<const double> actual, int window = 21);

// Fraction of days whose predicted and realized signs agree; zero counts
// as positive on both sides.
double direction_accuracy(std::span<const double> pred, std::span<const double> actual);

struct MetricBlock {
  int n_days = 0;
  double ic = 0;
  bool ic_degenerate = false;
  double icir = 0;
  bool icir_available = false;
  bool icir_degenerate = false;
  int icir_window = 21;
  double da = 0;
};

// Bundles the three metrics; degenerate inputs set flags instead of
// failing (too few windows leaves icir unavailable).
MetricBlock compute_metrics(std::span<const double> pred, std::span<const double> actual,
                            int icir_window = 21);

}  // namespace indexcast::metrics
