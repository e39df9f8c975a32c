#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace indexcast {

// All pipeline failures carry a category so the CLI can print
// "error [category]: message" and exit nonzero.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

inline Error config_error(const std::string& msg) { return Error("config", msg); }
inline Error data_error(const std::string& msg) { return Error("data", msg); }
inline Error model_error(const std::string& msg) { return Error("model", msg); }
inline Error train_error(const std::string& msg) { return Error("train", msg); }
inline Error eval_error(const std::string& msg) { return Error("eval", msg); }
inline Error backtest_error(const std::string& msg) { return Error("backtest", msg); }
inline Error io_error(const std::string& msg) { return Error("io", msg); }

}  // namespace indexcast
