#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "indexcast/errors.hpp"
#include "indexcast/market_data.hpp"

using namespace indexcast;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  fs::path dir = fs::temp_directory_path() / "indexcast_market_data_test";
  fs::create_directories(dir);
  return dir;
}

std::string write_csv(const std::string& name, const std::string& body) {
  fs::path p = temp_dir() / name;
  std::ofstream out(p);
  out << body;
  out.close();
  return p.string();
}

data::OhlcvBar bar(const std::string& date, double close) {
  data::OhlcvBar b;
  b.date = date;
  b.open = close;
  b.high = close + 1;
  b.low = close - 1;
  b.close = close;
  b.volume = 1000;
  return b;
}

data::StockSeries series(const std::string& symbol, const std::vector<std::string>& dates,
                         double base = 100.0) {
  data::StockSeries s;
  s.symbol = symbol;
  double c = base;
  for (const auto& d : dates) {
    s.bars.push_back(bar(d, c));
    c += 1;
  }
  return s;
}

std::vector<std::string> make_dates(int n) {
  std::vector<std::string> dates;
  for (int i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "2021-%02d-%02d", 1 + i / 28, 1 + i % 28);
    dates.push_back(buf);
  }
  return dates;
}

}  // namespace

TEST_CASE("load_csv parses and sorts") {
  std::string path = write_csv("good.csv",
                               "date,open,high,low,close,volume\n"
                               "2020-01-03,10,12,9,11,500\n"
                               "2020-01-02,9,11,8,10,400\n");
  data::StockSeries s = data::load_csv(path, "GOOD");
  CHECK_EQ(s.symbol, "GOOD");
  REQUIRE_EQ(s.bars.size(), 2u);
  CHECK_EQ(s.bars[0].date, "2020-01-02");
  CHECK_EQ(s.bars[0].open, 9.0);
  CHECK_EQ(s.bars[1].close, 11.0);
  CHECK_EQ(s.bars[1].volume, 500.0);
}

TEST_CASE("load_csv reports the offending row") {
  auto expect_error_with_row = [](const std::string& name, const std::string& body,
                                  const std::string& needle) {
    std::string path = write_csv(name, body);
    try {
      data::load_csv(path, "BAD");
      FAIL("expected an error for ", name);
    } catch (const Error& e) {
      INFO("message: ", e.what());
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  std::string header = "date,open,high,low,close,volume\n";
  expect_error_with_row("bad_date.csv", header + "2020-13-40,10,12,9,11,500\n", "row 2");
  expect_error_with_row("bad_envelope.csv", header + "2020-01-02,10,9,11,10,500\n", "row 2");
  expect_error_with_row("bad_negative.csv", header + "2020-01-02,-10,12,9,11,500\n", "row 2");
  expect_error_with_row("bad_numeric.csv", header + "2020-01-02,ten,12,9,11,500\n", "row 2");
  expect_error_with_row("bad_fields.csv", header + "2020-01-02,10,12,9,11\n", "row 2");
  expect_error_with_row("bad_dup.csv",
                        header + "2020-01-02,10,12,9,11,500\n2020-01-02,10,12,9,11,500\n",
                        "duplicate");
}

TEST_CASE("load_csv rejects a wrong header and a missing file") {
  std::string path = write_csv("hdr.csv", "time,open,high,low,close,volume\n");
  CHECK_THROWS_AS(data::load_csv(path, "X"), Error);
  CHECK_THROWS_AS(data::load_csv((temp_dir() / "nope.csv").string(), "X"), Error);
}

TEST_CASE("validate_series accepts generator output and rejects bad bars") {
  data::StockSeries s = series("OK", {"2020-01-01", "2020-01-02"});
  data::validate_series(s);

  data::StockSeries unsorted = s;
  std::swap(unsorted.bars[0], unsorted.bars[1]);
  CHECK_THROWS_AS(data::validate_series(unsorted), Error);

  data::StockSeries bad_env = s;
  bad_env.bars[1].high = bad_env.bars[1].low - 1;
  CHECK_THROWS_AS(data::validate_series(bad_env), Error);
}

TEST_CASE("align keeps only common dates") {
  data::StockSeries a = series("A", {"2020-01-01", "2020-01-02", "2020-01-03"});
  data::StockSeries b = series("B", {"2020-01-02", "2020-01-03", "2020-01-04"});
  data::StockSeries idx = series("IDX", {"2020-01-01", "2020-01-02", "2020-01-03", "2020-01-04"});
  data::AlignedPanel panel = data::align({a, b}, idx);
  REQUIRE_EQ(panel.n_dates(), 2);
  CHECK_EQ(panel.dates[0], "2020-01-02");
  CHECK_EQ(panel.dates[1], "2020-01-03");
  CHECK_EQ(panel.n_stocks(), 2);
  for (const auto& s : panel.stocks) {
    REQUIRE_EQ(s.bars.size(), 2u);
    CHECK_EQ(s.bars[0].date, "2020-01-02");
  }
  CHECK_EQ(panel.index.bars.size(), 2u);

  data::StockSeries disjoint = series("C", {"2021-06-01"});
  CHECK_THROWS_AS(data::align({a, disjoint}, idx), Error);
  CHECK_THROWS_AS(data::align({}, idx), Error);
}

TEST_CASE("compute_target standardizes with the training prefix") {
  data::StockSeries idx;
  idx.symbol = "IDX";
  idx.bars = {bar("2020-01-01", 100), bar("2020-01-02", 110), bar("2020-01-03", 99)};
  data::TargetSeries t = data::compute_target(idx, 2);
  REQUIRE_EQ(t.raw.size(), 2u);
  CHECK_EQ(t.raw[0], doctest::Approx(0.1).epsilon(1e-12));
  CHECK_EQ(t.raw[1], doctest::Approx(-0.1).epsilon(1e-12));
  CHECK_EQ(t.mean, doctest::Approx(0.0).epsilon(1e-15));
  CHECK_EQ(t.stddev, doctest::Approx(0.1).epsilon(1e-12));
  CHECK_EQ(t.standardized[0], doctest::Approx(1.0).epsilon(1e-12));
  CHECK_EQ(t.standardized[1], doctest::Approx(-1.0).epsilon(1e-12));
  CHECK_EQ(t.train_len, 2);
}

TEST_CASE("compute_target rejects degenerate prefixes and bad lengths") {
  data::StockSeries idx;
  idx.symbol = "IDX";
  idx.bars = {bar("2020-01-01", 100), bar("2020-01-02", 100), bar("2020-01-03", 100)};
  CHECK_THROWS_AS(data::compute_target(idx, 2), Error);

  data::StockSeries ok;
  ok.symbol = "IDX";
  ok.bars = {bar("2020-01-01", 100), bar("2020-01-02", 110), bar("2020-01-03", 99)};
  CHECK_THROWS_AS(data::compute_target(ok, 0), Error);
  CHECK_THROWS_AS(data::compute_target(ok, 3), Error);
}

TEST_CASE("split sizes: floor with remainder to train") {
  data::SplitSpec spec;
  auto check_sizes = [&](int n, int tr, int va, int te) {
    data::SplitSizes s = data::split_sizes(n, spec);
    CHECK_EQ(s.train, tr);
    CHECK_EQ(s.val, va);
    CHECK_EQ(s.test, te);
    CHECK_EQ(s.train + s.val + s.test, n);
  };
  check_sizes(10, 7, 2, 1);
  check_sizes(300, 210, 60, 30);
  check_sizes(2991, 2094, 598, 299);
  check_sizes(3020, 2114, 604, 302);
}

TEST_CASE("split sizes validation") {
  data::SplitSpec bad;
  bad.train = 0.7;
  bad.val = 0.2;
  bad.test = 0.2;
  CHECK_THROWS_AS(data::split_sizes(100, bad), Error);

  data::SplitSpec zero;
  zero.train = 0.9;
  zero.val = 0.0;
  zero.test = 0.1;
  CHECK_THROWS_AS(data::split_sizes(100, zero), Error);

  data::SplitSpec spec;
  CHECK_THROWS_AS(data::split_sizes(5, spec), Error);
}

TEST_CASE("chronological split concatenates back to the panel") {
  auto dates = make_dates(23);
  data::StockSeries a = series("A", dates);
  data::StockSeries b = series("B", dates, 50.0);
  data::StockSeries idx = series("IDX", dates, 1000.0);
  data::AlignedPanel panel = data::align({a, b}, idx);
  data::SplitSpec spec;
  data::SplitPanels sp = data::split_chronological(panel, spec);

  data::SplitSizes sizes = data::split_sizes(23, spec);
  CHECK_EQ(sp.train.n_dates(), sizes.train);
  CHECK_EQ(sp.val.n_dates(), sizes.val);
  CHECK_EQ(sp.test.n_dates(), sizes.test);

  std::vector<std::string> all;
  for (const auto* part : {&sp.train, &sp.val, &sp.test}) {
    for (const auto& d : part->dates) all.push_back(d);
  }
  CHECK(all == panel.dates);

  std::vector<double> closes;
  for (const auto* part : {&sp.train, &sp.val, &sp.test}) {
    for (const auto& bb : part->stocks[0].bars) closes.push_back(bb.close);
  }
  REQUIRE_EQ(closes.size(), panel.stocks[0].bars.size());
  for (std::size_t i = 0; i < closes.size(); ++i) {
    CHECK_EQ(closes[i], panel.stocks[0].bars[i].close);
  }

  data::AlignedPanel small = panel;
  small.dates.resize(9);
  for (auto& s : small.stocks) s.bars.resize(9);
  small.index.bars.resize(9);
  CHECK_THROWS_AS(data::split_chronological(small, spec), Error);
}
