// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsplit/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstring>

#include "fedsplit/error.hpp"

namespace fedsplit {
namespace {

std::atomic<Precision> g_precision{Precision::F32};

}  // namespace

Precision precision() noexcept { return g_precision.load(std::memory_order_relaxed); }

void set_precision(Precision p) noexcept { g_precision.store(p, std::memory_order_relaxed); }

void round_to_precision(std::span<double> values) noexcept {
  if (precision() != Precision::F32) return;
  for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

std::size_t numel(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (std::size_t d : shape_) {
    if (d == 0) fail(ErrorKind::Dimension, "tensor dims must be positive, got " + shape_str(shape_));
  }
  data_.assign(fedsplit::numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t d : shape_) {
    if (d == 0) fail(ErrorKind::Dimension, "tensor dims must be positive, got " + shape_str(shape_));
  }
  if (data_.size() != fedsplit::numel(shape_)) {
    fail(ErrorKind::Dimension, "data length " + std::to_string(data_.size()) +
                                   " does not match shape " + shape_str(shape_));
  }
}

double Tensor::item() const {
  if (data_.size() != 1) fail(ErrorKind::Dimension, "item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool Tensor::bit_equal(const Tensor& other) const noexcept {
  return shape_ == other.shape_ &&
         (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0);
}

void Tensor::fill(double v) noexcept {
  for (double& x : data_) x = v;
}

void Tensor::round_to_precision() noexcept { fedsplit::round_to_precision(std::span<double>(data_)); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    fail(ErrorKind::Dimension, "matmul of " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  c.round_to_precision();
  return c;
}

}  // namespace fedsplit
