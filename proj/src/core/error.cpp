// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsplit/error.hpp"

namespace fedsplit {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::Index: return "index error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Io: return "I/O error";
    case ErrorKind::Name: return "name error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Infeasible: return "infeasible partition";
  }
  return "error";
}

void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, std::string(to_string(kind)) + ": " + message);
}

}  // namespace fedsplit
