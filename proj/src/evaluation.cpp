#include "indexcast/evaluation.hpp"

#include <cmath>
#include <string>

#include "indexcast/errors.hpp"

namespace indexcast::metrics {

namespace {
constexpr double kEps = 1e-12;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw eval_error("pearson: length mismatch");
  std::size_t n = a.size();
  if (n < 2) throw eval_error("pearson: need at least 2 points");
  double ma = 0;
  double mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0;
  double va = 0;
  double vb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double da = a[i] - ma;
    double db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va < kEps || vb < kEps) throw eval_error("pearson: zero variance");
  return cov / std::sqrt(va * vb);
}

IcirResult icir(std::span<const double> pred, std::span<const double> actual, int window) {
  if (pred.size() != actual.size()) throw eval_error("icir: length mismatch");
  if (window < 2) throw eval_error("icir: window must be at least 2");
  int n_windows = static_cast<int>(pred.size()) / window;
  if (n_windows < 2) {
    throw eval_error("icir: need at least 2 complete windows of " + std::to_string(window) +
                     " days, got " + std::to_string(n_windows));
  }
  IcirResult r;
  r.window_ics.reserve(static_cast<std::size_t>(n_windows));
  for (int w = 0; w < n_windows; ++w) {
    auto off = static_cast<std::size_t>(w) * static_cast<std::size_t>(window);
    r.window_ics.push_back(pearson(pred.subspan(off, static_cast<std::size_t>(window)),
                                   actual.subspan(off, static_cast<std::size_t>(window))));
  }
  double mean = 0;
  for (double ic : r.window_ics) mean += ic;
  mean /= static_cast<double>(n_windows);
  double var = 0;
  for (double ic : r.window_ics) {
    double d = ic - mean;
    var += d * d;
  }
  var /= static_cast<double>(n_windows);
  double sd = std::sqrt(var);
  if (sd < kEps) {
    r.degenerate = true;
    r.value = mean / kEps;
  } else {
    r.value = mean / sd;
  }
  return r;
}

double direction_accuracy(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size()) throw eval_error("direction_accuracy: length mismatch");
  if (pred.empty()) throw eval_error("direction_accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    bool up_pred = pred[i] >= 0;
    bool up_actual = actual[i] >= 0;
    if (up_pred == up_actual) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

MetricBlock compute_metrics(std::span<const double> pred, std::span<const double> actual,
                            int icir_window) {
  MetricBlock m;
  m.n_days = static_cast<int>(pred.size());
  m.icir_window = icir_window;
  try {
    m.ic = pearson(pred, actual);
  } catch (const Error&) {
    m.ic = 0;
    m.ic_degenerate = true;
  }
  try {
    IcirResult r = icir(pred, actual, icir_window);
    m.icir = r.value;
    m.icir_degenerate = r.degenerate;
    m.icir_available = true;
  } catch (const Error&) {
    m.icir_available = false;
  }
  m.da = direction_accuracy(pred, actual);
  return m;
}

}  // namespace indexcast::metrics
