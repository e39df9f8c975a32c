#include "indexcast/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace indexcast::pipeline {

using nlohmann::json;

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw io_error("failed reading " + path);
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot write " + path);
  f << text;
  if (!f.good()) throw io_error("failed writing " + path);
}

int edit_distance(const std::string& a, const std::string& b) {
  std::size_t n = a.size();
  std::size_t m = b.size();
  std::vector<int> row(m + 1);
  for (std::size_t j = 0; j <= m; ++j) row[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    int diag = row[0];
    row[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      int cost = a[i - 1] == b[j - 1] ? 0 : 1;
      int next = std::min({row[j] + 1, row[j - 1] + 1, diag + cost});
      diag = row[j];
      row[j] = next;
    }
  }
  return row[m];
}

std::string suggestion(const std::string& key, const std::vector<std::string>& known) {
  int best = 4;
  std::string hit;
  for (const auto& k : known) {
    int d = edit_distance(key, k);
    if (d < best) {
      best = d;
      hit = k;
    }
  }
  return hit.empty() ? "" : " (did you mean '" + hit + "'?)";
}

// Typed accessors for one config section that remember which keys were
// read, so finish() can reject typos with a nearest-key hint.
class Section {
 public:
  Section(const json* j, std::string name) : j_(j), name_(std::move(name)) {
    if (j_ && !j_->is_object()) {
      throw config_error("config: '" + name_ + "' must be an object");
    }
  }

  const json* raw(const char* key) {
    known_.emplace_back(key);
    if (!j_) return nullptr;
    auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }

  double num(const char* key, double dflt) {
    const json* v = raw(key);
    if (!v) return dflt;
    if (!v->is_number()) throw type_err(key, "a number");
    return v->get<double>();
  }

  int integer(const char* key, int dflt) {
    const json* v = raw(key);
    if (!v) return dflt;
    if (!v->is_number_integer()) throw type_err(key, "an integer");
    return v->get<int>();
  }

  std::uint64_t u64(const char* key, std::uint64_t dflt) {
    const json* v = raw(key);
    if (!v) return dflt;
    if (!v->is_number_integer()) throw type_err(key, "a non-negative integer");
    if (!v->is_number_unsigned() && v->get<std::int64_t>() < 0) {
      throw type_err(key, "a non-negative integer");
    }
    return v->get<std::uint64_t>();
  }

  std::string str(const char* key, const std::string& dflt) {
    const json* v = raw(key);
    if (!v) return dflt;
    if (!v->is_string()) throw type_err(key, "a string");
    return v->get<std::string>();
  }

  void finish() {
    if (!j_) return;
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      if (std::find(known_.begin(), known_.end(), it.key()) == known_.end()) {
        throw config_error("config: unknown key '" + it.key() + "' in '" + name_ + "'" +
                           suggestion(it.key(), known_));
      }
    }
  }

 private:
  Error type_err(const char* key, const char* want) const {
    return config_error("config: '" + name_ + "." + key + "' must be " + want);
  }

  const json* j_;
  std::string name_;
  std::vector<std::string> known_;
};

void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw config_error("override '" + ov + "' must look like section.key=value");
    }
    std::string path = ov.substr(0, eq);
    std::string text = ov.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;  // bare words are strings

    json* cur = &doc;
    std::size_t pos = 0;
    while (true) {
      auto dot = path.find('.', pos);
      std::string part = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
      if (part.empty()) throw config_error("override '" + ov + "' has an empty key part");
      if (dot == std::string::npos) {
        (*cur)[part] = std::move(value);
        break;
      }
      json& next = (*cur)[part];
      if (next.is_null()) next = json::object();
      if (!next.is_object()) {
        throw config_error("override '" + ov + "': '" + part + "' is not a section");
      }
      cur = &next;
      pos = dot + 1;
    }
  }
}

RunConfig config_from_doc(json doc, const std::vector<std::string>& overrides) {
  if (!doc.is_object()) throw config_error("config: top level must be a JSON object");
  apply_overrides(doc, overrides);

  RunConfig cfg;
  Section top(&doc, "config");

  {
    Section s(top.raw("data"), "data");
    cfg.data.index_path = s.str("index", "");
    if (const json* v = s.raw("stocks")) {
      if (!v->is_array()) throw config_error("config: 'data.stocks' must be an array of paths");
      for (const auto& e : *v) {
        if (!e.is_string()) throw config_error("config: 'data.stocks' must hold strings");
        cfg.data.stock_paths.push_back(e.get<std::string>());
      }
    }
    s.finish();
  }
  {
    Section s(top.raw("split"), "split");
    cfg.split.train = s.num("train", cfg.split.train);
    cfg.split.val = s.num("val", cfg.split.val);
    cfg.split.test = s.num("test", cfg.split.test);
    s.finish();
  }
  {
    Section s(top.raw("indicators"), "indicators");
    cfg.indicators.n_osc = s.integer("n_osc", cfg.indicators.n_osc);
    cfg.indicators.n_ma = s.integer("n_ma", cfg.indicators.n_ma);
    cfg.indicators.macd_fast = s.integer("macd_fast", cfg.indicators.macd_fast);
    cfg.indicators.macd_slow = s.integer("macd_slow", cfg.indicators.macd_slow);
    cfg.indicators.macd_signal = s.integer("macd_signal", cfg.indicators.macd_signal);
    s.finish();
  }
  {
    Section s(top.raw("codec"), "codec");
    cfg.scaler.clamp_sigma = s.num("clamp_sigma", cfg.scaler.clamp_sigma);
    s.finish();
  }
  {
    Section s(top.raw("model"), "model");
    cfg.model.window = s.integer("window", cfg.model.window);
    cfg.model.embed_hidden_dim = s.integer("embed_hidden_dim", cfg.model.embed_hidden_dim);
    cfg.model.embed_dim = s.integer("embed_dim", cfg.model.embed_dim);
    cfg.model.hidden_dim = s.integer("hidden_dim", cfg.model.hidden_dim);
    cfg.model.n_hidden = s.integer("n_hidden", cfg.model.n_hidden);
    cfg.model.dropout_p = s.num("dropout_p", cfg.model.dropout_p);
    cfg.model.init_scheme =
        nn::init_scheme_from_string(s.str("init_scheme", nn::to_string(cfg.model.init_scheme)));
    s.finish();
  }
  {
    Section s(top.raw("train"), "train");
    cfg.train.learning_rate = s.num("learning_rate", cfg.train.learning_rate);
    cfg.train.beta1 = s.num("beta1", cfg.train.beta1);
    cfg.train.beta2 = s.num("beta2", cfg.train.beta2);
    cfg.train.eps = s.num("eps", cfg.train.eps);
    cfg.train.weight_decay = s.num("weight_decay", cfg.train.weight_decay);
    cfg.train.batch_size = s.integer("batch_size", cfg.train.batch_size);
    cfg.train.max_epochs = s.integer("max_epochs", cfg.train.max_epochs);
    cfg.train.patience = s.integer("patience", cfg.train.patience);
    cfg.train.loss_variant =
        losses::loss_variant_from_string(s.str("loss_variant", to_string(cfg.train.loss_variant)));
    cfg.train.conf_coeff = s.num("conf_coeff", cfg.train.conf_coeff);
    s.finish();
  }
  {
    Section s(top.raw("trading"), "trading");
    cfg.trading.cost_rate = s.num("cost_rate", cfg.trading.cost_rate);
    cfg.trading.confidence_source = backtest::confidence_source_from_string(
        s.str("confidence_source", to_string(cfg.trading.confidence_source)));
    cfg.trading.trading_days_per_year =
        s.integer("trading_days_per_year", cfg.trading.trading_days_per_year);
    if (const json* v = s.raw("buckets")) {
      if (!v->is_array()) throw config_error("config: 'trading.buckets' must be an array");
      cfg.trading.buckets.clear();
      for (const auto& e : *v) {
        Section b(&e, "trading.buckets[]");
        backtest::Bucket bk;
        bk.lo = b.num("lo", -1);
        bk.hi = b.num("hi", -1);
        bk.fraction = b.num("fraction", -1);
        b.finish();
        cfg.trading.buckets.push_back(bk);
      }
    }
    s.finish();
  }
  {
    Section s(top.raw("evaluate"), "evaluate");
    cfg.eval_segment = s.str("segment", cfg.eval_segment);
    cfg.icir_window = s.integer("icir_window", cfg.icir_window);
    s.finish();
  }
  cfg.output_dir = top.str("output_dir", cfg.output_dir);
  cfg.seed = top.u64("seed", cfg.seed);
  top.finish();

  cfg.validate();
  return cfg;
}

json config_to_json(const RunConfig& cfg) {
  json doc;
  doc["data"]["index"] = cfg.data.index_path;
  doc["data"]["stocks"] = cfg.data.stock_paths;
  doc["split"]["train"] = cfg.split.train;
  doc["split"]["val"] = cfg.split.val;
  doc["split"]["test"] = cfg.split.test;
  doc["indicators"]["n_osc"] = cfg.indicators.n_osc;
  doc["indicators"]["n_ma"] = cfg.indicators.n_ma;
  doc["indicators"]["macd_fast"] = cfg.indicators.macd_fast;
  doc["indicators"]["macd_slow"] = cfg.indicators.macd_slow;
  doc["indicators"]["macd_signal"] = cfg.indicators.macd_signal;
  doc["codec"]["clamp_sigma"] = cfg.scaler.clamp_sigma;
  doc["model"]["window"] = cfg.model.window;
  doc["model"]["embed_hidden_dim"] = cfg.model.embed_hidden_dim;
  doc["model"]["embed_dim"] = cfg.model.embed_dim;
  doc["model"]["hidden_dim"] = cfg.model.hidden_dim;
  doc["model"]["n_hidden"] = cfg.model.n_hidden;
  doc["model"]["dropout_p"] = cfg.model.dropout_p;
  doc["model"]["init_scheme"] = nn::to_string(cfg.model.init_scheme);
  doc["train"]["learning_rate"] = cfg.train.learning_rate;
  doc["train"]["beta1"] = cfg.train.beta1;
  doc["train"]["beta2"] = cfg.train.beta2;
  doc["train"]["eps"] = cfg.train.eps;
  doc["train"]["weight_decay"] = cfg.train.weight_decay;
  doc["train"]["batch_size"] = cfg.train.batch_size;
  doc["train"]["max_epochs"] = cfg.train.max_epochs;
  doc["train"]["patience"] = cfg.train.patience;
  doc["train"]["loss_variant"] = to_string(cfg.train.loss_variant);
  doc["train"]["conf_coeff"] = cfg.train.conf_coeff;
  doc["trading"]["cost_rate"] = cfg.trading.cost_rate;
  doc["trading"]["confidence_source"] = to_string(cfg.trading.confidence_source);
  doc["trading"]["trading_days_per_year"] = cfg.trading.trading_days_per_year;
  json buckets = json::array();
  for (const auto& b : cfg.trading.buckets) {
    buckets.push_back({{"lo", b.lo}, {"hi", b.hi}, {"fraction", b.fraction}});
  }
  doc["trading"]["buckets"] = buckets;
  doc["evaluate"]["segment"] = cfg.eval_segment;
  doc["evaluate"]["icir_window"] = cfg.icir_window;
  doc["output_dir"] = cfg.output_dir;
  doc["seed"] = cfg.seed;
  return doc;
}

}  // namespace

void RunConfig::validate() const {
  if (!(split.train > 0 && split.val > 0 && split.test > 0)) {
    throw config_error("config: split ratios must all be positive");
  }
  if (std::abs(split.train + split.val + split.test - 1.0) > 1e-9) {
    throw config_error("config: split ratios must sum to 1");
  }
  indicators.validate();
  scaler.validate();
  nn::ModelConfig probe = model;
  if (probe.n_stocks == 0) probe.n_stocks = 1;
  if (probe.n_features == 0) probe.n_features = ta::kNumFeatures;
  probe.validate();
  train.validate();
  trading.validate();
  if (eval_segment != "train" && eval_segment != "val" && eval_segment != "test") {
    throw config_error("config: evaluate.segment must be train, val or test");
  }
  if (icir_window < 2) throw config_error("config: evaluate.icir_window must be at least 2");
  if (output_dir.empty()) throw config_error("config: output_dir must not be empty");
}

RunConfig run_config_from_json_text(const std::string& text,
                                    const std::vector<std::string>& overrides) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw config_error("config: invalid JSON");
  return config_from_doc(std::move(doc), overrides);
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::string text = read_text_file(path);
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw config_error("config: " + path + " is not valid JSON");
  return config_from_doc(std::move(doc), overrides);
}

std::string resolved_config_json(const RunConfig& cfg) {
  return config_to_json(cfg).dump(2) + "\n";
}

namespace {

std::string path_stem(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

json series_to_json(const data::StockSeries& s) {
  json cols;
  std::vector<double> open, high, low, close, volume;
  open.reserve(s.bars.size());
  for (const auto& b : s.bars) {
    open.push_back(b.open);
    high.push_back(b.high);
    low.push_back(b.low);
    close.push_back(b.close);
    volume.push_back(b.volume);
  }
  cols["open"] = open;
  cols["high"] = high;
  cols["low"] = low;
  cols["close"] = close;
  cols["volume"] = volume;
  return cols;
}

data::StockSeries series_from_json(const json& cols, const std::string& symbol,
                                   const std::vector<std::string>& dates) {
  for (const char* key : {"open", "high", "low", "close", "volume"}) {
    if (!cols.contains(key) || !cols[key].is_array() || cols[key].size() != dates.size()) {
      throw io_error("dataset: series '" + symbol + "' is missing column '" + key +
                     "' or its length disagrees with the date axis");
    }
  }
  data::StockSeries s;
  s.symbol = symbol;
  s.bars.resize(dates.size());
  for (std::size_t i = 0; i < dates.size(); ++i) {
    data::OhlcvBar& b = s.bars[i];
    b.date = dates[i];
    b.open = cols["open"][i].get<double>();
    b.high = cols["high"][i].get<double>();
    b.low = cols["low"][i].get<double>();
    b.close = cols["close"][i].get<double>();
    b.volume = cols["volume"][i].get<double>();
  }
  return s;
}

}  // namespace

Dataset build_dataset(const RunConfig& cfg) {
  if (cfg.data.index_path.empty()) throw config_error("config: data.index is required");
  if (cfg.data.stock_paths.empty()) {
    throw config_error("config: data.stocks must list at least one constituent");
  }
  std::vector<data::StockSeries> stocks;
  stocks.reserve(cfg.data.stock_paths.size());
  std::set<std::string> seen;
  for (const auto& path : cfg.data.stock_paths) {
    std::string symbol = path_stem(path);
    if (!seen.insert(symbol).second) {
      throw config_error("config: duplicate stock symbol '" + symbol + "' in the manifest");
    }
    stocks.push_back(data::load_csv(path, symbol));
  }
  data::StockSeries index = data::load_csv(cfg.data.index_path, path_stem(cfg.data.index_path));

  Dataset ds;
  ds.panel = data::align(stocks, index);
  if (ds.panel.n_dates() < 10) {
    throw data_error("aligned panel has " + std::to_string(ds.panel.n_dates()) +
                     " dates; need at least 10 to split");
  }
  ds.sizes = data::split_sizes(ds.panel.n_dates(), cfg.split);
  ds.target = data::compute_target(ds.panel.index, ds.sizes.train - 1);
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  json doc;
  doc["format_version"] = 1;
  doc["dates"] = ds.panel.dates;
  std::vector<std::string> symbols;
  symbols.reserve(ds.panel.stocks.size());
  json stocks = json::object();
  for (const auto& s : ds.panel.stocks) {
    symbols.push_back(s.symbol);
    stocks[s.symbol] = series_to_json(s);
  }
  doc["symbols"] = symbols;
  doc["stocks"] = stocks;
  doc["index_symbol"] = ds.panel.index.symbol;
  doc["index"] = series_to_json(ds.panel.index);
  doc["split"]["train"] = ds.sizes.train;
  doc["split"]["val"] = ds.sizes.val;
  doc["split"]["test"] = ds.sizes.test;
  doc["target"]["raw"] = ds.target.raw;
  doc["target"]["standardized"] = ds.target.standardized;
  doc["target"]["mean"] = ds.target.mean;
  doc["target"]["stddev"] = ds.target.stddev;
  doc["target"]["train_len"] = ds.target.train_len;
  write_text_file(path, doc.dump(2) + "\n");
}

Dataset load_dataset(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw io_error(path + " not found; run the ingest command first");
  }
  json doc = json::parse(read_text_file(path), nullptr, false);
  if (doc.is_discarded()) throw io_error("dataset: " + path + " is not valid JSON");
  if (!doc.is_object() || doc.value("format_version", 0) != 1) {
    throw io_error("dataset: " + path + " has an unsupported format");
  }

  Dataset ds;
  try {
    ds.panel.dates = doc.at("dates").get<std::vector<std::string>>();
    auto symbols = doc.at("symbols").get<std::vector<std::string>>();
    for (const auto& sym : symbols) {
      if (!doc.at("stocks").contains(sym)) {
        throw io_error("dataset: symbol '" + sym + "' listed but not stored");
      }
      ds.panel.stocks.push_back(series_from_json(doc.at("stocks").at(sym), sym, ds.panel.dates));
    }
    ds.panel.index = series_from_json(doc.at("index"), doc.value("index_symbol", "index"),
                                      ds.panel.dates);
    ds.sizes.train = doc.at("split").at("train").get<int>();
    ds.sizes.val = doc.at("split").at("val").get<int>();
    ds.sizes.test = doc.at("split").at("test").get<int>();
    ds.target.raw = doc.at("target").at("raw").get<std::vector<double>>();
    ds.target.standardized = doc.at("target").at("standardized").get<std::vector<double>>();
    ds.target.mean = doc.at("target").at("mean").get<double>();
    ds.target.stddev = doc.at("target").at("stddev").get<double>();
    ds.target.train_len = doc.at("target").at("train_len").get<int>();
  } catch (const json::exception& e) {
    throw io_error("dataset: " + path + " is malformed: " + e.what());
  }
  if (ds.sizes.train + ds.sizes.val + ds.sizes.test != ds.panel.n_dates()) {
    throw io_error("dataset: split sizes do not add up to the date count");
  }
  if (ds.target.raw.size() != ds.panel.dates.size() - 1 ||
      ds.target.standardized.size() != ds.target.raw.size()) {
    throw io_error("dataset: target length disagrees with the date axis");
  }
  return ds;
}

namespace {

std::vector<int> segment_days(const std::string& segment, const data::SplitSizes& sizes,
                              int valid_from, int window, int n_targets) {
  int first_usable = valid_from + window - 1;
  int lo = 0;
  int hi = -1;
  if (segment == "train") {
    lo = first_usable;
    hi = sizes.train - 2;
  } else if (segment == "val") {
    lo = std::max(sizes.train, first_usable);
    hi = std::min(sizes.train + sizes.val - 1, n_targets - 1);
  } else if (segment == "test") {
    lo = std::max(sizes.train + sizes.val, first_usable);
    hi = n_targets - 1;
  } else {
    throw config_error("unknown segment '" + segment + "' (expected train, val or test)");
  }
  std::vector<int> days;
  for (int t = lo; t <= hi; ++t) days.push_back(t);
  return days;
}

nn::WindowView window_at(const ta::IndicatorPanel& panel, int day, int window) {
  nn::WindowView v;
  v.window = window;
  v.n_stocks = panel.n_stocks;
  v.n_features = ta::kNumFeatures;
  v.stride_stock = ta::kNumFeatures;
  v.stride_day = static_cast<long>(panel.n_stocks) * ta::kNumFeatures;
  v.base = panel.values.data() + static_cast<std::size_t>(day - window + 1) * v.stride_day;
  return v;
}

}  // namespace

Featurized featurize(const Dataset& ds, const RunConfig& cfg) {
  Featurized fz;
  fz.panel = ta::compute_indicator_panel(ds.panel, cfg.indicators);
  ta::standardize_panel(fz.panel, ds.sizes.train);
  int n_targets = static_cast<int>(ds.target.raw.size());
  fz.train_days = segment_days("train", ds.sizes, fz.panel.valid_from, cfg.model.window, n_targets);
  fz.val_days = segment_days("val", ds.sizes, fz.panel.valid_from, cfg.model.window, n_targets);
  fz.test_days = segment_days("test", ds.sizes, fz.panel.valid_from, cfg.model.window, n_targets);
  if (fz.train_days.empty()) {
    throw data_error("no usable training days: the indicator warm-up plus the model window "
                     "consume the whole training segment");
  }
  if (fz.val_days.empty()) {
    throw data_error("no usable validation days in the split");
  }
  return fz;
}

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  json doc;
  doc["format_version"] = 1;
  doc["model"]["n_stocks"] = cp.model.n_stocks;
  doc["model"]["n_features"] = cp.model.n_features;
  doc["model"]["window"] = cp.model.window;
  doc["model"]["embed_hidden_dim"] = cp.model.embed_hidden_dim;
  doc["model"]["embed_dim"] = cp.model.embed_dim;
  doc["model"]["hidden_dim"] = cp.model.hidden_dim;
  doc["model"]["n_hidden"] = cp.model.n_hidden;
  doc["model"]["out_dim"] = cp.model.out_dim;
  doc["model"]["dropout_p"] = cp.model.dropout_p;
  doc["model"]["init_scheme"] = nn::to_string(cp.model.init_scheme);
  json params = json::object();
  for (const auto& [name, t] : cp.params.named_tensors()) {
    params[name] = {{"rows", t->rows}, {"cols", t->cols}, {"data", t->data}};
  }
  doc["params"] = params;
  doc["scaler"]["clamp_sigma"] = cp.scaler.clamp_sigma;
  doc["target"]["mean"] = cp.target_mean;
  doc["target"]["stddev"] = cp.target_std;
  json stats = json::array();
  for (const auto& st : cp.feature_stats) {
    stats.push_back({{"mean", st.mean}, {"stddev", st.stddev}, {"constant", st.constant}});
  }
  doc["feature_stats"] = stats;
  doc["indicators"]["n_osc"] = cp.indicators.n_osc;
  doc["indicators"]["n_ma"] = cp.indicators.n_ma;
  doc["indicators"]["macd_fast"] = cp.indicators.macd_fast;
  doc["indicators"]["macd_slow"] = cp.indicators.macd_slow;
  doc["indicators"]["macd_signal"] = cp.indicators.macd_signal;
  doc["symbols"] = cp.symbols;
  doc["best_epoch"] = cp.best_epoch;
  doc["best_val_ic"] = cp.best_val_ic;
  doc["best_val_ic_degenerate"] = cp.best_val_ic_degenerate;
  write_text_file(path, doc.dump(2) + "\n");
}

namespace {

Checkpoint checkpoint_from_json(const json& doc) {
  Checkpoint cp;
  const json& m = doc.at("model");
  cp.model.n_stocks = m.at("n_stocks").get<int>();
  cp.model.n_features = m.at("n_features").get<int>();
  cp.model.window = m.at("window").get<int>();
  cp.model.embed_hidden_dim = m.at("embed_hidden_dim").get<int>();
  cp.model.embed_dim = m.at("embed_dim").get<int>();
  cp.model.hidden_dim = m.at("hidden_dim").get<int>();
  cp.model.n_hidden = m.at("n_hidden").get<int>();
  cp.model.out_dim = m.at("out_dim").get<int>();
  cp.model.dropout_p = m.at("dropout_p").get<double>();
  cp.model.init_scheme = nn::init_scheme_from_string(m.at("init_scheme").get<std::string>());
  cp.model.validate();

  cp.params = nn::zero_like(cp.model);
  for (auto& [name, t] : cp.params.named_tensors()) {
    if (!doc.at("params").contains(name)) {
      throw io_error("checkpoint: parameter '" + name + "' is missing");
    }
    const json& pj = doc.at("params").at(name);
    if (pj.at("rows").get<int>() != t->rows || pj.at("cols").get<int>() != t->cols) {
      throw io_error("checkpoint: parameter '" + name + "' has the wrong shape");
    }
    auto data = pj.at("data").get<std::vector<double>>();
    if (data.size() != t->data.size()) {
      throw io_error("checkpoint: parameter '" + name + "' has the wrong element count");
    }
    t->data = std::move(data);
  }

  cp.scaler.clamp_sigma = doc.at("scaler").at("clamp_sigma").get<double>();
  cp.scaler.validate();
  cp.target_mean = doc.at("target").at("mean").get<double>();
  cp.target_std = doc.at("target").at("stddev").get<double>();
  for (const auto& st : doc.at("feature_stats")) {
    ta::FeatureStats fs;
    fs.mean = st.at("mean").get<double>();
    fs.stddev = st.at("stddev").get<double>();
    fs.constant = st.at("constant").get<bool>();
    cp.feature_stats.push_back(fs);
  }
  const json& ind = doc.at("indicators");
  cp.indicators.n_osc = ind.at("n_osc").get<int>();
  cp.indicators.n_ma = ind.at("n_ma").get<int>();
  cp.indicators.macd_fast = ind.at("macd_fast").get<int>();
  cp.indicators.macd_slow = ind.at("macd_slow").get<int>();
  cp.indicators.macd_signal = ind.at("macd_signal").get<int>();
  cp.indicators.validate();
  cp.symbols = doc.at("symbols").get<std::vector<std::string>>();
  cp.best_epoch = doc.at("best_epoch").get<int>();
  cp.best_val_ic = doc.at("best_val_ic").get<double>();
  cp.best_val_ic_degenerate = doc.at("best_val_ic_degenerate").get<bool>();

  if (static_cast<int>(cp.feature_stats.size()) != cp.model.n_stocks * ta::kNumFeatures) {
    throw io_error("checkpoint: feature_stats count does not match n_stocks * n_features");
  }
  if (static_cast<int>(cp.symbols.size()) != cp.model.n_stocks) {
    throw io_error("checkpoint: symbol count does not match n_stocks");
  }
  return cp;
}

}  // namespace

Checkpoint load_checkpoint(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw io_error(path + " not found; run the train command first");
  }
  json doc = json::parse(read_text_file(path), nullptr, false);
  if (doc.is_discarded()) throw io_error("checkpoint: " + path + " is not valid JSON");
  if (!doc.is_object() || doc.value("format_version", 0) != 1) {
    throw io_error("checkpoint: " + path + " has an unsupported format");
  }
  try {
    return checkpoint_from_json(doc);
  } catch (const json::exception& e) {
    throw io_error("checkpoint: " + path + " is malformed: " + e.what());
  }
}

SegmentPredictions predict_segment(const Dataset& ds, const Checkpoint& cp,
                                   const std::string& segment) {
  if (cp.model.n_stocks != ds.panel.n_stocks()) {
    throw model_error("checkpoint was trained on " + std::to_string(cp.model.n_stocks) +
                      " stocks but the dataset has " + std::to_string(ds.panel.n_stocks()));
  }
  for (int i = 0; i < ds.panel.n_stocks(); ++i) {
    if (ds.panel.stocks[static_cast<std::size_t>(i)].symbol !=
        cp.symbols[static_cast<std::size_t>(i)]) {
      throw model_error("checkpoint stock order disagrees with the dataset at position " +
                        std::to_string(i) + " ('" + cp.symbols[static_cast<std::size_t>(i)] +
                        "' vs '" + ds.panel.stocks[static_cast<std::size_t>(i)].symbol + "')");
    }
  }

  ta::IndicatorPanel panel = ta::compute_indicator_panel(ds.panel, cp.indicators);
  ta::apply_feature_stats(panel, cp.feature_stats);

  SegmentPredictions sp;
  sp.days = segment_days(segment, ds.sizes, panel.valid_from, cp.model.window,
                         static_cast<int>(ds.target.raw.size()));
  if (sp.days.empty()) {
    throw eval_error("segment '" + segment + "' has no usable days (indicator warm-up, model "
                     "window and the final open day leave nothing)");
  }
  sp.dates.reserve(sp.days.size());
  sp.predicted.reserve(sp.days.size());
  sp.actual.reserve(sp.days.size());
  sp.gc_mean.reserve(sp.days.size());
  sp.gc_trend.reserve(sp.days.size());
  for (int day : sp.days) {
    nn::PredictionOutput out = nn::forward(window_at(panel, day, cp.model.window), cp.params,
                                           cp.model);
    sp.dates.push_back(ds.panel.dates[static_cast<std::size_t>(day)]);
    sp.predicted.push_back(nn::predicted_return(out, cp.scaler, cp.target_mean, cp.target_std));
    sp.actual.push_back(ds.target.raw[static_cast<std::size_t>(day)]);
    sp.gc_mean.push_back(out.gc_mean);
    sp.gc_trend.push_back(out.gc_trend);
  }
  return sp;
}

namespace {

json metric_block_to_json(const metrics::MetricBlock& mb) {
  json j;
  j["n_days"] = mb.n_days;
  j["ic"] = mb.ic;
  j["ic_degenerate"] = mb.ic_degenerate;
  j["icir"] = mb.icir;
  j["icir_available"] = mb.icir_available;
  j["icir_degenerate"] = mb.icir_degenerate;
  j["icir_window"] = mb.icir_window;
  j["da"] = mb.da;
  return j;
}

json backtest_report_to_json(const backtest::BacktestReport& rep) {
  json j;
  j["n_days"] = static_cast<int>(rep.daily_returns.size());
  j["sharpe"] = rep.sr.value;
  j["sharpe_degenerate"] = rep.sr.degenerate;
  j["annualized_return"] = rep.ar;
  j["n_trades"] = rep.n_trades;
  j["total_cost"] = rep.total_cost;
  j["final_equity"] = rep.final_equity;
  return j;
}

const std::vector<double>& confidence_series(const SegmentPredictions& sp,
                                             backtest::ConfidenceSource source) {
  return source == backtest::ConfidenceSource::trend ? sp.gc_trend : sp.gc_mean;
}

void write_positions_csv(const std::string& path, const SegmentPredictions& sp,
                         const std::vector<double>& conf, const backtest::BacktestReport& rep) {
  std::ostringstream out;
  out << "date,prediction,confidence,position,daily_return,equity\n";
  char buf[200];
  for (std::size_t i = 0; i < sp.days.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g\n", sp.dates[i].c_str(),
                  sp.predicted[i], conf[i], rep.positions[i], rep.daily_returns[i],
                  rep.equity_curve[i + 1]);
    out << buf;
  }
  write_text_file(path, out.str());
}

void print_metric_table(const std::string& segment, const metrics::MetricBlock& mb) {
  std::printf("segment        %s\n", segment.c_str());
  std::printf("days           %d\n", mb.n_days);
  std::printf("ic             %.6f%s\n", mb.ic, mb.ic_degenerate ? "  (degenerate)" : "");
  if (mb.icir_available) {
    std::printf("icir           %.6f  (window %d%s)\n", mb.icir, mb.icir_window,
                mb.icir_degenerate ? ", degenerate spread" : "");
  } else {
    std::printf("icir           n/a  (needs 2 complete %d-day windows, each with spread)\n",
                mb.icir_window);
  }
  std::printf("da             %.6f\n", mb.da);
}

}  // namespace

void cmd_ingest(const RunConfig& cfg, bool write_features_csv) {
  Dataset ds = build_dataset(cfg);
  std::string path = cfg.output_dir + "/dataset.json";
  save_dataset(ds, path);
  std::printf("aligned %d dates across %d stocks plus the index\n", ds.panel.n_dates(),
              ds.panel.n_stocks());
  std::printf("split: train %d, val %d, test %d days\n", ds.sizes.train, ds.sizes.val,
              ds.sizes.test);
  std::printf("target: mean %.6g, std %.6g over the first %d returns\n", ds.target.mean,
              ds.target.stddev, ds.target.train_len);
  std::printf("wrote %s\n", path.c_str());
  if (write_features_csv) {
    Featurized fz = featurize(ds, cfg);
    std::string fpath = cfg.output_dir + "/features.csv";
    ta::write_feature_csv(fz.panel, ds.panel, fpath);
    std::printf("wrote %s\n", fpath.c_str());
  }
}

void cmd_train(const RunConfig& cfg) {
  Dataset ds = load_dataset(cfg.output_dir + "/dataset.json");
  Featurized fz = featurize(ds, cfg);

  nn::ModelConfig mcfg = cfg.model;
  mcfg.n_stocks = ds.panel.n_stocks();
  mcfg.n_features = ta::kNumFeatures;
  mcfg.validate();
  nn::TrainConfig tcfg = cfg.train;
  tcfg.seed = cfg.seed;

  nn::TrainData td;
  td.features = fz.panel.values.data();
  td.n_dates = fz.panel.n_dates;
  td.n_stocks = fz.panel.n_stocks;
  td.n_features = ta::kNumFeatures;
  td.y_raw = ds.target.raw.data();
  td.y_std = ds.target.standardized.data();
  td.n_targets = static_cast<int>(ds.target.raw.size());
  td.train_days = fz.train_days;
  td.val_days = fz.val_days;
  td.scaler = cfg.scaler;
  td.target_mean = ds.target.mean;
  td.target_std = ds.target.stddev;

  std::printf("training on %zu days, validating on %zu (loss %s, seed %llu)\n",
              fz.train_days.size(), fz.val_days.size(), to_string(tcfg.loss_variant).c_str(),
              static_cast<unsigned long long>(cfg.seed));
  nn::TrainResult result = nn::train(td, mcfg, tcfg);

  Checkpoint cp;
  cp.model = mcfg;
  cp.params = std::move(result.params);
  cp.scaler = cfg.scaler;
  cp.target_mean = ds.target.mean;
  cp.target_std = ds.target.stddev;
  cp.feature_stats = fz.panel.stats;
  cp.indicators = cfg.indicators;
  for (const auto& s : ds.panel.stocks) cp.symbols.push_back(s.symbol);
  cp.best_epoch = result.best_epoch;
  cp.best_val_ic = result.best_val_ic;
  cp.best_val_ic_degenerate = result.best_val_ic_degenerate;
  std::string cpath = cfg.output_dir + "/checkpoint.json";
  save_checkpoint(cp, cpath);

  std::ostringstream log;
  log << "epoch,train_loss,train_ce,train_conf,val_ic,val_ic_degenerate,val_da,best\n";
  char buf[240];
  for (const auto& er : result.epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%d\n", er.epoch,
                  er.train_loss, er.train_ce, er.train_conf, er.val_ic,
                  er.val_ic_degenerate ? 1 : 0, er.val_da, er.is_best ? 1 : 0);
    log << buf;
  }
  write_text_file(cfg.output_dir + "/training_log.csv", log.str());

  std::ostringstream blog;
  blog << "epoch,batch,l_ce,l_conf,l_total\n";
  for (const auto& br : result.batches) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g\n", br.epoch, br.batch, br.l_ce,
                  br.l_conf, br.l_total);
    blog << buf;
  }
  write_text_file(cfg.output_dir + "/batch_log.csv", blog.str());

  std::printf("ran %zu epochs; best epoch %d with val IC %.6f%s, val DA %.6f\n",
              result.epochs.size(), result.best_epoch, result.best_val_ic,
              result.best_val_ic_degenerate ? " (degenerate)" : "",
              result.epochs[static_cast<std::size_t>(result.best_epoch - 1)].val_da);
  std::printf("wrote %s\n", cpath.c_str());
}

void cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint_path) {
  Checkpoint cp = load_checkpoint(checkpoint_path);
  Dataset ds = load_dataset(cfg.output_dir + "/dataset.json");
  SegmentPredictions sp = predict_segment(ds, cp, cfg.eval_segment);
  metrics::MetricBlock mb = metrics::compute_metrics(sp.predicted, sp.actual, cfg.icir_window);

  json doc;
  doc["config"] = config_to_json(cfg);
  doc["segment"] = cfg.eval_segment;
  doc["checkpoint"] = {{"path", checkpoint_path},
                       {"best_epoch", cp.best_epoch},
                       {"best_val_ic", cp.best_val_ic}};
  doc["metrics"] = metric_block_to_json(mb);
  std::string path = cfg.output_dir + "/metrics.json";
  write_text_file(path, doc.dump(2) + "\n");

  print_metric_table(cfg.eval_segment, mb);
  std::printf("wrote %s\n", path.c_str());
}

void cmd_backtest(const RunConfig& cfg, const std::string& checkpoint_path) {
  Checkpoint cp = load_checkpoint(checkpoint_path);
  Dataset ds = load_dataset(cfg.output_dir + "/dataset.json");
  SegmentPredictions sp = predict_segment(ds, cp, cfg.eval_segment);
  metrics::MetricBlock mb = metrics::compute_metrics(sp.predicted, sp.actual, cfg.icir_window);

  const std::vector<double>& conf = confidence_series(sp, cfg.trading.confidence_source);
  backtest::TradingConfig base_cfg = cfg.trading;
  base_cfg.confidence_source = backtest::ConfidenceSource::none;
  backtest::BacktestReport base = backtest::run_backtest(sp.predicted, conf, sp.actual, base_cfg);
  backtest::BacktestReport guided =
      backtest::run_backtest(sp.predicted, conf, sp.actual, cfg.trading);

  json doc;
  doc["config"] = config_to_json(cfg);
  doc["segment"] = cfg.eval_segment;
  doc["prediction_metrics"] = metric_block_to_json(mb);
  doc["baseline_long_short"] = backtest_report_to_json(base);
  doc["confidence_guided"] = backtest_report_to_json(guided);
  std::string jpath = cfg.output_dir + "/backtest.json";
  write_text_file(jpath, doc.dump(2) + "\n");

  std::string cpath = cfg.output_dir + "/backtest.csv";
  write_positions_csv(cpath, sp, conf, guided);

  std::printf("segment %s, %zu trading days, cost rate %g\n", cfg.eval_segment.c_str(),
              sp.days.size(), cfg.trading.cost_rate);
  std::printf("baseline long-short:  SR %.6f%s, AR %.6f, final equity %.6f\n", base.sr.value,
              base.sr.degenerate ? " (degenerate)" : "", base.ar, base.final_equity);
  std::printf("confidence guided (%s): SR %.6f%s, AR %.6f, final equity %.6f\n",
              to_string(cfg.trading.confidence_source).c_str(), guided.sr.value,
              guided.sr.degenerate ? " (degenerate)" : "", guided.ar, guided.final_equity);
  std::printf("wrote %s and %s\n", jpath.c_str(), cpath.c_str());
}

void cmd_plot_data(const RunConfig& cfg, const std::string& checkpoint_path) {
  Checkpoint cp = load_checkpoint(checkpoint_path);
  Dataset ds = load_dataset(cfg.output_dir + "/dataset.json");
  SegmentPredictions sp = predict_segment(ds, cp, cfg.eval_segment);
  const std::vector<double>& conf = confidence_series(sp, cfg.trading.confidence_source);
  backtest::BacktestReport guided =
      backtest::run_backtest(sp.predicted, conf, sp.actual, cfg.trading);
  std::string path = cfg.output_dir + "/plot.csv";
  write_positions_csv(path, sp, conf, guided);
  std::printf("wrote %zu rows to %s\n", sp.days.size(), path.c_str());
}

}  // namespace indexcast::pipeline
