#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace indexcast::codec {

// Code length. A value v in [-1, 1] is represented as
//   v = -1 + sum_{k=0}^{kBits-1} bit_k * 2^{-k}
// so bit 0 carries weight 1 and doubles as the sign (trend) bit, and the
// quantization step is 2^{-(kBits-1)}.
inline constexpr int kBits = 15;
inline constexpr int kLogits = 2 * kBits;  // one (zero, one) logit pair per bit
inline constexpr int kLevels = 1 << kBits;
inline constexpr double kStep = 1.0 / (1 << (kBits - 1));

struct BinaryCode {
  std::array<std::uint8_t, kBits> bits{};  // bits[0] is the most significant

  bool operator==(const BinaryCode&) const = default;

  // "101001100110011" style, bit 0 first.
  std::string to_string() const;
};

// Maps a standardized target into [-1, 1] by clamping at +-clamp_sigma and
// dividing by it. unscale inverts the division (the clamp is lossy).
struct TargetScaler {
  double clamp_sigma = 3.0;

  double scale(double standardized) const;
  double unscale(double v) const { return v * clamp_sigma; }
  void validate() const;
};

// Nearest grid point at or below v, saturated at the top level so that
// every input in [-1, 1] round-trips to within one step. v outside [-1, 1]
// is an error.
BinaryCode encode(double v);

// Exact evaluation of the defining sum.
double decode(const BinaryCode& code);

// Integer helpers used by encode/decode and the exhaustive tests.
BinaryCode code_from_level(int level);  // level in [0, kLevels)
int level_from_code(const BinaryCode& code);

}  // namespace indexcast::codec
