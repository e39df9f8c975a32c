#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>

#include "doctest.h"
#include "indexcast/codec.hpp"
#include "indexcast/errors.hpp"
#include "indexcast/rng.hpp"

using namespace indexcast;
using codec::BinaryCode;
using codec::decode;
using codec::encode;

TEST_CASE("constants") {
  CHECK_EQ(codec::kBits, 15);
  CHECK_EQ(codec::kLogits, 30);
  CHECK_EQ(codec::kLevels, 32768);
  CHECK_EQ(codec::kStep, std::pow(2.0, -14));
}

TEST_CASE("frozen example 0.3") {
  BinaryCode c = encode(0.3);
  CHECK_EQ(c.to_string(), "101001100110011");
  CHECK_EQ(codec::level_from_code(c), 21299);
  CHECK_EQ(decode(c), 0.29998779296875);
}

TEST_CASE("defining sum") {
  BinaryCode c;
  CHECK_EQ(decode(c), -1.0);
  c.bits[0] = 1;
  CHECK_EQ(decode(c), 0.0);
  for (auto& b : c.bits) b = 1;
  CHECK_EQ(decode(c), 1.0 - codec::kStep);
  BinaryCode lsb;
  lsb.bits[codec::kBits - 1] = 1;
  CHECK_EQ(decode(lsb), -1.0 + codec::kStep);
}

TEST_CASE("level round trip is exhaustive") {
  for (int level = 0; level < codec::kLevels; ++level) {
    BinaryCode c = codec::code_from_level(level);
    CHECK_EQ(codec::level_from_code(c), level);
    double v = decode(c);
    CHECK_EQ(encode(v), c);
  }
}

TEST_CASE("random values round trip within one step") {
  Rng rng(2024);
  for (int i = 0; i < 100000; ++i) {
    double v = rng.uniform(-1.0, 1.0);
    double back = decode(encode(v));
    CHECK_LE(std::abs(back - v), codec::kStep);
  }
  CHECK_LE(std::abs(decode(encode(1.0)) - 1.0), codec::kStep);
  CHECK_LE(std::abs(decode(encode(-1.0)) + 1.0), codec::kStep);
}

TEST_CASE("encode is monotone") {
  Rng rng(7);
  for (int i = 0; i < 20000; ++i) {
    double a = rng.uniform(-1.0, 1.0);
    double b = rng.uniform(-1.0, 1.0);
    if (a > b) std::swap(a, b);
    CHECK_LE(codec::level_from_code(encode(a)), codec::level_from_code(encode(b)));
  }
}

TEST_CASE("bit 0 is the trend bit") {
  CHECK_EQ(encode(0.0).bits[0], 1);
  CHECK_EQ(encode(0.75).bits[0], 1);
  CHECK_EQ(encode(-1e-9).bits[0], 0);
  CHECK_EQ(encode(-0.75).bits[0], 0);
  Rng rng(99);
  for (int i = 0; i < 10000; ++i) {
    double v = rng.uniform(-1.0, 1.0);
    BinaryCode c = encode(v);
    CHECK_EQ(static_cast<int>(c.bits[0]), v >= 0 ? 1 : 0);
    CHECK_EQ(decode(c) >= 0, v >= 0);
  }
}

TEST_CASE("encode rejects values outside [-1, 1]") {
  CHECK_THROWS_AS(encode(1.0000001), Error);
  CHECK_THROWS_AS(encode(-1.0000001), Error);
  CHECK_THROWS_AS(encode(std::nan("")), Error);
}

TEST_CASE("target scaler clamps and divides") {
  codec::TargetScaler s;
  CHECK_EQ(s.clamp_sigma, 3.0);
  CHECK_EQ(s.scale(1.5), 0.5);
  CHECK_EQ(s.scale(-6.0), -1.0);
  CHECK_EQ(s.scale(97.0), 1.0);
  CHECK_EQ(s.unscale(0.5), 1.5);
  CHECK_EQ(s.unscale(s.scale(2.4)), 2.4);

  codec::TargetScaler bad;
  bad.clamp_sigma = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.clamp_sigma = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}
