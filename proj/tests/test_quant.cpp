#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <random>

#include "fedsplit/error.hpp"
#include "fedsplit/quant.hpp"

using namespace fedsplit;

namespace {

// Value of a binary16 pattern computed from its fields, without the codec.
double half_value(std::uint16_t h) {
  const int sign = (h >> 15) ? -1 : 1;
  const int exp = (h >> 10) & 0x1F;
  const int mant = h & 0x3FF;
  if (exp == 0) return sign * std::ldexp(mant, -24);
  return sign * std::ldexp(1024 + mant, exp - 25);
}

// Nearest finite binary16 by exhaustive search; ties pick the even pattern.
std::uint16_t nearest_half(float x) {
  std::uint16_t best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  const std::uint16_t sign = std::signbit(x) ? 0x8000 : 0;
  for (std::uint16_t m = 0; m <= 0x7BFF; ++m) {
    const double err = std::abs(std::abs(static_cast<double>(x)) - half_value(m));
    if (err < best_err || (err == best_err && (m & 1) == 0)) {
      best_err = err;
      best = m;
    }
  }
  return static_cast<std::uint16_t>(sign | best);
}

ParameterSet sample_set() {
  ParameterSet p;
  p.insert("a.w", Tensor({2, 3}, {0.1, -2.5, 3.0, 1e-3, 65504.0, -0.0}));
  p.insert("b", Tensor({4}, {1.0, 2.0, 0.5, -0.25}));
  return p;
}

}  // namespace

TEST_CASE("fixed conversions") {
  CHECK(quantize_f16(1.0f) == 0x3C00);
  CHECK(quantize_f16(0.1f) == 0x2E66);
  CHECK(dequantize_f16(0x2E66) == 0.0999755859375f);
  CHECK(quantize_f16(1e5f) == 0x7BFF);
  CHECK(quantize_f16(-1e5f) == 0xFBFF);
  CHECK(dequantize_f16(0x3C00) == 1.0f);
  CHECK(dequantize_f16(0x0000) == 0.0f);
  CHECK(std::signbit(dequantize_f16(0x8000)));
  CHECK(quantize_f16(65519.996f) == 0x7BFF);
  CHECK(quantize_f16(std::numeric_limits<float>::infinity()) == 0x7BFF);
  CHECK_THROWS_AS((void)quantize_f16(std::numeric_limits<float>::quiet_NaN()), Error);
  // Smallest subnormal and the halfway point below it.
  CHECK(quantize_f16(std::ldexp(1.0f, -24)) == 0x0001);
  CHECK(quantize_f16(std::ldexp(1.0f, -25)) == 0x0000);
  CHECK(quantize_f16(std::ldexp(3.0f, -25)) == 0x0002);
}

TEST_CASE("exhaustive 16-bit pattern roundtrip") {
  std::size_t checked = 0;
  for (std::uint32_t b = 0; b <= 0xFFFF; ++b) {
    const auto h = static_cast<std::uint16_t>(b);
    const float f = dequantize_f16(h);
    if (std::isnan(f)) {
      CHECK_THROWS_AS((void)quantize_f16(f), Error);
    } else if (std::isinf(f)) {
      CHECK(quantize_f16(f) == ((h & 0x8000) | 0x7BFF));
    } else {
      if (quantize_f16(f) != h) FAIL("pattern " << b);
      if (static_cast<double>(f) != half_value(h)) FAIL("value of pattern " << b);
    }
    ++checked;
  }
  CHECK(checked == 65536);
}

TEST_CASE("rounding matches the brute-force nearest oracle") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> expo(-27.0, 16.0);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int i = 0; i < 400; ++i) {
    float x = static_cast<float>(std::exp2(expo(rng)));
    if (coin(rng)) x = -x;
    if (std::abs(x) > 65504.0f) continue;
    CHECK(quantize_f16(x) == nearest_half(x));
  }
  // Exact midpoints between neighbours must go to the even pattern.
  for (std::uint16_t m : {0x3C00, 0x3C01, 0x0400, 0x0001, 0x7BFE}) {
    const double mid = 0.5 * (half_value(m) + half_value(static_cast<std::uint16_t>(m + 1)));
    const auto x = static_cast<float>(mid);
    REQUIRE(static_cast<double>(x) == mid);
    CHECK(quantize_f16(x) == nearest_half(x));
    CHECK((quantize_f16(x) & 1) == 0);
  }
}

TEST_CASE("relative error bound in the normal range") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> expo(-14.0, std::log2(65504.0));
  for (int i = 0; i < 100000; ++i) {
    const auto x = static_cast<float>(std::exp2(expo(rng)));
    const float y = dequantize_f16(quantize_f16(x));
    REQUIRE(std::abs(static_cast<double>(x) - y) <= std::ldexp(std::abs(static_cast<double>(x)), -11));
  }
}

TEST_CASE("payload sizes") {
  ParameterSet one;
  one.insert("w", Tensor({100}, 0.5));
  const std::size_t entry_header = 1 + 1 + 1 + 1 + 8;
  CHECK(payload_size(ParameterSet{}, DType::F32) == 16);
  CHECK(encode_global_payload(ParameterSet{}, DType::F32).size() == 16);
  CHECK(payload_size(one, DType::F32) == 16 + entry_header + 400);
  CHECK(payload_size(one, DType::F16) == 16 + entry_header + 200);
  CHECK(payload_data_bytes(one, DType::F16) * 2 == payload_data_bytes(one, DType::F32));
  const ParameterSet p = sample_set();
  CHECK(encode_global_payload(p, DType::F32).size() == payload_size(p, DType::F32));
  CHECK(encode_global_payload(p, DType::F16).size() == payload_size(p, DType::F16));
  ParameterSet long_name;
  long_name.insert(std::string(256, 'x'), Tensor({1}));
  try {
    (void)payload_size(long_name, DType::F32);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.fault() == FormatFault::NameTooLong);
  }
}

TEST_CASE("wire roundtrips") {
  PrecisionScope scope(Precision::F32);
  ParameterSet p = sample_set();
  for (auto& [name, t] : p) t.round_to_precision();
  CHECK(decode_global_payload(encode_global_payload(p, DType::F32)).bit_equal(p));
  const auto once = encode_global_payload(p, DType::F16);
  const ParameterSet q = decode_global_payload(once);
  CHECK(encode_global_payload(q, DType::F16) == once);
  CHECK(decode_global_payload(encode_global_payload(q, DType::F16)).bit_equal(q));
  CHECK(q.at("a.w")[0] == 0.0999755859375);
}

TEST_CASE("decode errors are distinct") {
  const auto good = encode_global_payload(sample_set(), DType::F32);
  auto expect_fault = [](std::vector<std::uint8_t> bytes, FormatFault fault) {
    try {
      (void)decode_global_payload(bytes);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.fault() == fault);
      return e.offset();
    }
    return std::size_t{0};
  };
  auto bad_magic = good;
  bad_magic[0] = 'X';
  expect_fault(bad_magic, FormatFault::BadMagic);
  auto bad_version = good;
  bad_version[4] = 9;
  expect_fault(bad_version, FormatFault::BadVersion);
  auto truncated = good;
  truncated.resize(good.size() - 3);
  CHECK(expect_fault(truncated, FormatFault::Truncated) > 0);
  auto trailing = good;
  trailing.push_back(0);
  expect_fault(trailing, FormatFault::TrailingBytes);
  auto bad_dtype = good;
  bad_dtype[16 + 1 + 3] = 7;  // after "a.w"
  expect_fault(bad_dtype, FormatFault::BadDType);
  CHECK_THROWS_AS((void)decode_params(good, kCheckpointMagic), FormatError);
}

TEST_CASE("checkpoints") {
  const auto dir = std::filesystem::temp_directory_path() / "fsb_test_ckpt";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "a.fsbc").string();
  PrecisionScope scope(Precision::F32);
  ParameterSet p = sample_set();
  for (auto& [name, t] : p) t.round_to_precision();
  save_checkpoint(p, path);
  CHECK(load_checkpoint(path).bit_equal(p));
  const auto entries = inspect_checkpoint(path);
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].name == "a.w");
  CHECK(entries[0].shape == Shape{2, 3});
  CHECK(entries[0].dtype == DType::F32);

  const std::string empty = (dir / "empty.fsbc").string();
  save_checkpoint(ParameterSet{}, empty);
  CHECK(std::filesystem::file_size(empty) == 16);
  CHECK(load_checkpoint(empty).empty());

  // A wire payload is not a checkpoint.
  {
    const auto wire = encode_global_payload(p, DType::F32);
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fwrite(wire.data(), 1, wire.size(), f);
    std::fclose(f);
  }
  try {
    (void)load_checkpoint(path);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.fault() == FormatFault::BadMagic);
  }
  try {
    (void)load_checkpoint((dir / "missing.fsbc").string());
    FAIL("expected an I/O error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
  std::filesystem::remove_all(dir);
}
