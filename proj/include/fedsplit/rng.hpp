// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDSPLIT_RNG_HPP
#define FEDSPLIT_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace fedsplit {

// Independent stream keyed by a tuple of integers (seed, purpose, client, ...).
inline std::mt19937_64 derive_rng(std::initializer_list<std::uint64_t> key) {
  std::vector<std::uint32_t> words;
  words.reserve(key.size() * 2);
  for (std::uint64_t k : key) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

// Stream tags for derive_rng.
enum class Stream : std::uint64_t {
  Data = 1,
  Partition = 2,
  TrainTest = 3,
  Init = 4,
  Selection = 5,
  Batches = 6,
};

}  // namespace fedsplit

#endif  // FEDSPLIT_RNG_HPP
