// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDSPLIT_QUANT_HPP
#define FEDSPLIT_QUANT_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fedsplit/error.hpp"
#include "fedsplit/param_set.hpp"

namespace fedsplit {

// IEEE-754 binary16, round-to-nearest-even. Magnitudes that would round past
// 65504 saturate to +/-65504 instead of becoming infinite; NaN is rejected.
std::uint16_t quantize_f16(float value);
float dequantize_f16(std::uint16_t bits) noexcept;

std::vector<std::uint16_t> quantize_f16(std::span<const float> values);
std::vector<float> dequantize_f16(std::span<const std::uint16_t> bits);

// Rounds a double through binary32 and then binary16 and back.
double f16_roundtrip(double value);

enum class DType : std::uint8_t { F32 = 0, F16 = 1 };

inline std::size_t dtype_bytes(DType t) noexcept { return t == DType::F32 ? 4 : 2; }
const char* to_string(DType t) noexcept;

// Container layout, all integers little-endian:
//   magic[4] | version u32 | entry count u64
//   per entry: name length u8 | name bytes | dtype u8 | rank u8 | dims u64 x rank |
//              raw elements row-major
inline constexpr char kWireMagic[4] = {'F', 'S', 'B', 'W'};
inline constexpr char kCheckpointMagic[4] = {'F', 'S', 'B', 'C'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderBytes = 16;

enum class FormatFault { BadMagic, BadVersion, Truncated, TrailingBytes, BadDType, BadEntry, NameTooLong };

class FormatError : public Error {
 public:
  FormatError(FormatFault fault, std::size_t offset, const std::string& message)
      : Error(ErrorKind::Format, message), fault_(fault), offset_(offset) {}
  FormatFault fault() const noexcept { return fault_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  FormatFault fault_;
  std::size_t offset_;
};

struct PayloadEntry {
  std::string name;
  Shape shape;
  DType dtype = DType::F32;
};

std::vector<std::uint8_t> encode_params(const ParameterSet& params, DType dtype, const char (&magic)[4]);
ParameterSet decode_params(std::span<const std::uint8_t> bytes, const char (&magic)[4]);
std::vector<PayloadEntry> inspect_params(std::span<const std::uint8_t> bytes, const char (&magic)[4]);

inline std::vector<std::uint8_t> encode_global_payload(const ParameterSet& global, DType dtype) {
  return encode_params(global, dtype, kWireMagic);
}
inline ParameterSet decode_global_payload(std::span<const std::uint8_t> bytes) {
  return decode_params(bytes, kWireMagic);
}

// Exact encoded length, computed without encoding.
std::size_t payload_size(const ParameterSet& params, DType dtype);
// Element bytes only (header and entry headers excluded).
std::size_t payload_data_bytes(const ParameterSet& params, DType dtype) noexcept;
// Same sizes computed from shapes alone.
std::size_t payload_size(const std::map<std::string, Shape>& shapes, DType dtype);
std::size_t payload_data_bytes(const std::map<std::string, Shape>& shapes, DType dtype) noexcept;

// Checkpoints hold the full parameter set as f32 under the "FSBC" magic.
void save_checkpoint(const ParameterSet& params, const std::string& path);
ParameterSet load_checkpoint(const std::string& path);
std::vector<PayloadEntry> inspect_checkpoint(const std::string& path);

}  // namespace fedsplit

#endif  // FEDSPLIT_QUANT_HPP
