#include "indexcast/codec.hpp"

#include <algorithm>
#include <cmath>

#include "indexcast/errors.hpp"

namespace indexcast::codec {

std::string BinaryCode::to_string() const {
  std::string s(kBits, '0');
  for (int k = 0; k < kBits; ++k) {
    if (bits[static_cast<std::size_t>(k)]) s[static_cast<std::size_t>(k)] = '1';
  }
  return s;
}

double TargetScaler::scale(double standardized) const {
  validate();
  double clamped = std::clamp(standardized, -clamp_sigma, clamp_sigma);
  return clamped / clamp_sigma;
}

void TargetScaler::validate() const {
  if (!(clamp_sigma > 0) || !std::isfinite(clamp_sigma)) {
    throw config_error("clamp_sigma must be positive and finite");
  }
}

BinaryCode code_from_level(int level) {
  if (level < 0 || level >= kLevels) {
    throw model_error("code level " + std::to_string(level) + " outside [0, " +
                      std::to_string(kLevels) + ")");
  }
  BinaryCode code;
  for (int k = 0; k < kBits; ++k) {
    code.bits[static_cast<std::size_t>(k)] =
        static_cast<std::uint8_t>((level >> (kBits - 1 - k)) & 1);
  }
  return code;
}

int level_from_code(const BinaryCode& code) {
  int level = 0;
  for (int k = 0; k < kBits; ++k) {
    level = (level << 1) | (code.bits[static_cast<std::size_t>(k)] ? 1 : 0);
  }
  return level;
}

BinaryCode encode(double v) {
  if (!(v >= -1.0 && v <= 1.0)) {
    throw model_error("encode: value outside [-1, 1]");
  }
  int level = static_cast<int>(std::floor((v + 1.0) / kStep));
  level = std::min(level, kLevels - 1);
  return code_from_level(level);
}

double decode(const BinaryCode& code) {
  double v = -1.0;
  double w = 1.0;
  for (int k = 0; k < kBits; ++k) {
    if (code.bits[static_cast<std::size_t>(k)]) v += w;
    w *= 0.5;
  }
  return v;
}

}  // namespace indexcast::codec
