// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDSPLIT_TENSOR_HPP
#define FEDSPLIT_TENSOR_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fedsplit {

// Storage is always double. In F32 mode every op rounds its outputs (and every
// accumulated gradient) to the nearest binary32 value, so results are exactly
// what a float pipeline with double-precision inner accumulation produces.
enum class Precision { F32, F64 };

Precision precision() noexcept;
void set_precision(Precision p) noexcept;

class PrecisionScope {
 public:
  explicit PrecisionScope(Precision p) noexcept : saved_(precision()) { set_precision(p); }
  ~PrecisionScope() { set_precision(saved_); }
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

 private:
  Precision saved_;
};

inline double round_to_precision(double v, Precision p) noexcept {
  return p == Precision::F32 ? static_cast<double>(static_cast<float>(v)) : v;
}
inline double round_to_precision(double v) noexcept { return round_to_precision(v, precision()); }
void round_to_precision(std::span<double> values) noexcept;

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape) noexcept;
std::string shape_str(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t numel() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }

  // Matrix view: last dim is columns, everything before it is flattened into rows.
  std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }
  std::size_t rows() const noexcept { return cols() == 0 ? 0 : data_.size() / cols(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double item() const;
  bool all_finite() const noexcept;
  bool bit_equal(const Tensor& other) const noexcept;
  void fill(double v) noexcept;
  void round_to_precision() noexcept;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Eager dense kernels shared by the graph ops. Row-major, outputs rounded to
// the active precision.
Tensor matmul(const Tensor& a, const Tensor& b);

}  // namespace fedsplit

#endif  // FEDSPLIT_TENSOR_HPP
