// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsplit/quant.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

namespace fedsplit {
namespace {

constexpr std::uint16_t kF16MaxBits = 0x7BFF;  // 65504

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t le(std::size_t n, const char* what) {
    need(n, what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (n > remaining()) {
      throw FormatError(FormatFault::Truncated, pos_,
                        "format error: truncated buffer reading " + std::string(what) + " at offset " +
                            std::to_string(pos_) + " (need " + std::to_string(n) + " bytes, have " +
                            std::to_string(remaining()) + ")");
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void check_magic(Reader& r, const char (&magic)[4]) {
  auto m = r.take(4, "magic");
  for (int i = 0; i < 4; ++i) {
    if (m[i] != static_cast<std::uint8_t>(magic[i])) {
      throw FormatError(FormatFault::BadMagic, 0,
                        "format error: bad magic, expected \"" + std::string(magic, 4) + "\"");
    }
  }
}

// Walks the container, calling `on_entry(entry, data_bytes)` per entry.
template <typename F>
void walk(std::span<const std::uint8_t> bytes, const char (&magic)[4], F&& on_entry) {
  Reader r(bytes);
  check_magic(r, magic);
  const auto version = r.le(4, "version");
  if (version != kFormatVersion) {
    throw FormatError(FormatFault::BadVersion, 4, "format error: unsupported version " + std::to_string(version));
  }
  const auto count = r.le(8, "entry count");
  std::string prev;
  for (std::uint64_t e = 0; e < count; ++e) {
    const std::size_t entry_at = r.pos();
    PayloadEntry entry;
    const auto name_len = r.le(1, "name length");
    auto name = r.take(name_len, "name");
    entry.name.assign(name.begin(), name.end());
    if (entry.name.empty() || (e > 0 && entry.name <= prev)) {
      throw FormatError(FormatFault::BadEntry, entry_at,
                        "format error: entry names must be non-empty, unique and sorted (at offset " +
                            std::to_string(entry_at) + ")");
    }
    prev = entry.name;
    const auto code = r.le(1, "dtype");
    if (code > 1) {
      throw FormatError(FormatFault::BadDType, r.pos() - 1, "format error: unknown dtype code " + std::to_string(code));
    }
    entry.dtype = static_cast<DType>(code);
    const auto rank = r.le(1, "rank");
    if (rank == 0) throw FormatError(FormatFault::BadEntry, r.pos() - 1, "format error: zero-rank entry " + entry.name);
    std::size_t n = 1;
    for (std::uint64_t i = 0; i < rank; ++i) {
      const auto d = r.le(8, "dimension");
      if (d == 0 || d > (std::uint64_t{1} << 40)) {
        throw FormatError(FormatFault::BadEntry, r.pos() - 8, "format error: bad dimension in entry " + entry.name);
      }
      entry.shape.push_back(static_cast<std::size_t>(d));
      n *= static_cast<std::size_t>(d);
      if (n > (std::size_t{1} << 40)) {
        throw FormatError(FormatFault::BadEntry, r.pos() - 8, "format error: entry " + entry.name + " too large");
      }
    }
    auto data = r.take(n * dtype_bytes(entry.dtype), "tensor data");
    on_entry(std::move(entry), data);
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatFault::TrailingBytes, r.pos(),
                      "format error: " + std::to_string(r.remaining()) + " trailing bytes at offset " +
                          std::to_string(r.pos()));
  }
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::Io, "failed reading '" + path + "'");
  return bytes;
}

}  // namespace

std::uint16_t quantize_f16(float value) {
  const std::uint32_t x = std::bit_cast<std::uint32_t>(value);
  const std::uint16_t sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
  const std::uint32_t ax = x & 0x7FFFFFFFu;
  if (ax > 0x7F800000u) fail(ErrorKind::Numeric, "cannot quantize NaN weight");
  if (ax >= 0x477FF000u) return sign | kF16MaxBits;  // >= 65520 rounds past the largest finite half
  if (ax >= 0x38800000u) {                            // normal half range, >= 2^-14
    const std::uint32_t exp = (ax >> 23) - 127 + 15;
    const std::uint32_t mant = ax & 0x7FFFFFu;
    std::uint32_t half = (exp << 10) | (mant >> 13);
    const std::uint32_t rem = mant & 0x1FFFu;
    if (rem > 0x1000u || (rem == 0x1000u && (half & 1u))) ++half;
    return sign | static_cast<std::uint16_t>(half);
  }
  if (ax <= 0x33000000u) return sign;  // <= 2^-25 rounds to (signed) zero
  // Subnormal half: units of 2^-24.
  const std::uint32_t e = ax >> 23;
  const std::uint32_t mant = (ax & 0x7FFFFFu) | 0x800000u;
  const std::uint32_t shift = 126 - e;
  std::uint32_t half = mant >> shift;
  const std::uint32_t rem = mant & ((1u << shift) - 1);
  const std::uint32_t halfway = 1u << (shift - 1);
  if (rem > halfway || (rem == halfway && (half & 1u))) ++half;
  return sign | static_cast<std::uint16_t>(half);
}

float dequantize_f16(std::uint16_t bits) noexcept {
  const std::uint32_t sign = static_cast<std::uint32_t>(bits & 0x8000u) << 16;
  const std::uint32_t exp = (bits >> 10) & 0x1Fu;
  const std::uint32_t mant = bits & 0x3FFu;
  if (exp == 0) {
    const float mag = std::ldexp(static_cast<float>(mant), -24);
    return sign ? -mag : mag;
  }
  if (exp == 31) return std::bit_cast<float>(sign | 0x7F800000u | (mant << 13));
  return std::bit_cast<float>(sign | ((exp - 15 + 127) << 23) | (mant << 13));
}

std::vector<std::uint16_t> quantize_f16(std::span<const float> values) {
  std::vector<std::uint16_t> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = quantize_f16(values[i]);
  return out;
}

std::vector<float> dequantize_f16(std::span<const std::uint16_t> bits) {
  std::vector<float> out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) out[i] = dequantize_f16(bits[i]);
  return out;
}

double f16_roundtrip(double value) { return dequantize_f16(quantize_f16(static_cast<float>(value))); }

const char* to_string(DType t) noexcept { return t == DType::F32 ? "f32" : "f16"; }

std::size_t payload_data_bytes(const ParameterSet& params, DType dtype) noexcept {
  return params.total_numel() * dtype_bytes(dtype);
}

std::size_t payload_size(const ParameterSet& params, DType dtype) {
  std::size_t n = kHeaderBytes;
  for (const auto& [name, t] : params) {
    if (name.size() > 255) {
      throw FormatError(FormatFault::NameTooLong, 0, "format error: parameter name longer than 255 bytes: " + name);
    }
    n += 1 + name.size() + 1 + 1 + 8 * t.rank() + t.numel() * dtype_bytes(dtype);
  }
  return n;
}

std::size_t payload_data_bytes(const std::map<std::string, Shape>& shapes, DType dtype) noexcept {
  std::size_t n = 0;
  for (const auto& [name, shape] : shapes) n += numel(shape);
  return n * dtype_bytes(dtype);
}

std::size_t payload_size(const std::map<std::string, Shape>& shapes, DType dtype) {
  std::size_t n = kHeaderBytes;
  for (const auto& [name, shape] : shapes) {
    if (name.size() > 255) {
      throw FormatError(FormatFault::NameTooLong, 0, "format error: parameter name longer than 255 bytes: " + name);
    }
    n += 1 + name.size() + 1 + 1 + 8 * shape.size() + numel(shape) * dtype_bytes(dtype);
  }
  return n;
}

std::vector<std::uint8_t> encode_params(const ParameterSet& params, DType dtype, const char (&magic)[4]) {
  std::vector<std::uint8_t> out;
  out.reserve(payload_size(params, dtype));
  for (int i = 0; i < 4; ++i) put_u8(out, static_cast<std::uint8_t>(magic[i]));
  put_le(out, kFormatVersion, 4);
  put_le(out, params.size(), 8);
  for (const auto& [name, t] : params) {
    put_u8(out, static_cast<std::uint8_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u8(out, static_cast<std::uint8_t>(dtype));
    put_u8(out, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) put_le(out, d, 8);
    for (double v : t.data()) {
      const float f = static_cast<float>(v);
      if (dtype == DType::F32) {
        put_le(out, std::bit_cast<std::uint32_t>(f), 4);
      } else {
        put_le(out, quantize_f16(f), 2);
      }
    }
  }
  return out;
}

ParameterSet decode_params(std::span<const std::uint8_t> bytes, const char (&magic)[4]) {
  ParameterSet params;
  walk(bytes, magic, [&](PayloadEntry entry, std::span<const std::uint8_t> data) {
    Tensor t(entry.shape);
    const std::size_t w = dtype_bytes(entry.dtype);
    for (std::size_t i = 0; i < t.numel(); ++i) {
      std::uint32_t raw = 0;
      for (std::size_t b = 0; b < w; ++b) raw |= static_cast<std::uint32_t>(data[i * w + b]) << (8 * b);
      t[i] = entry.dtype == DType::F32 ? static_cast<double>(std::bit_cast<float>(raw))
                                       : static_cast<double>(dequantize_f16(static_cast<std::uint16_t>(raw)));
    }
    params.insert(entry.name, std::move(t));
  });
  return params;
}

std::vector<PayloadEntry> inspect_params(std::span<const std::uint8_t> bytes, const char (&magic)[4]) {
  std::vector<PayloadEntry> out;
  walk(bytes, magic, [&](PayloadEntry entry, std::span<const std::uint8_t>) { out.push_back(std::move(entry)); });
  return out;
}

void save_checkpoint(const ParameterSet& params, const std::string& path) {
  const auto bytes = encode_params(params, DType::F32, kCheckpointMagic);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "failed writing '" + path + "'");
}

ParameterSet load_checkpoint(const std::string& path) { return decode_params(read_file(path), kCheckpointMagic); }

std::vector<PayloadEntry> inspect_checkpoint(const std::string& path) {
  return inspect_params(read_file(path), kCheckpointMagic);
}

}  // namespace fedsplit
