// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDSPLIT_ERROR_HPP
#define FEDSPLIT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace fedsplit {

enum class ErrorKind {
  Dimension,
  Index,
  Config,
  Format,
  Divergence,
  Io,
  Name,
  Numeric,
  Infeasible,
};

const char* to_string(ErrorKind kind) noexcept;

// Every failure surfaced by the core library is an Error carrying a kind, so
// the C API can map it onto a status code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace fedsplit

#endif  // FEDSPLIT_ERROR_HPP
