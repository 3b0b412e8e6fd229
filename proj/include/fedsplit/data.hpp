// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDSPLIT_DATA_HPP
#define FEDSPLIT_DATA_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "fedsplit/model.hpp"

namespace fedsplit {

struct Sample {
  std::vector<std::int32_t> tokens;
  int label = 0;
  double score = 0.0;
  // Index in the originally generated dataset; survives partitioning.
  std::size_t source = 0;
};

// num_classes == 1 means a regression task with scores in [0, 5].
struct LabeledDataset {
  std::size_t vocab_size = 0;
  std::size_t num_classes = 0;
  std::size_t seq_len = 0;
  std::vector<Sample> samples;

  bool regression() const noexcept { return num_classes == 1; }
  std::size_t size() const noexcept { return samples.size(); }
  std::vector<std::size_t> class_histogram() const;
  void validate() const;
  LabeledDataset subset(std::span<const std::size_t> indices) const;
};

// Per-client class fractions. Rows are renormalized to sum to one on
// construction, so published tables that round to 99% are accepted.
class LabelDistScheme {
 public:
  LabelDistScheme() = default;
  explicit LabelDistScheme(std::vector<std::vector<double>> rows);

  std::size_t clients() const noexcept { return rows_.size(); }
  std::size_t classes() const noexcept { return rows_.empty() ? 0 : rows_.front().size(); }
  const std::vector<double>& row(std::size_t i) const { return rows_.at(i); }
  const std::vector<std::vector<double>>& rows() const noexcept { return rows_; }

 private:
  std::vector<std::vector<double>> rows_;
};

// Counts summing to `total` that follow `fractions`, by largest remainder
// (ties go to the lower index).
std::vector<std::size_t> largest_remainder(std::span<const double> fractions, std::size_t total);

// Keyword task. Token 0 is padding; class k owns keywords 1+3k .. 3+3k; the
// rest of the vocabulary is background. A class-k sample is seq_len uniform
// background tokens in which each of the three class-k keywords is planted
// independently with probability p at distinct random positions. Labels are
// balanced (sample i has label i mod C before shuffling).
//
// Only samples with no keyword are ambiguous, so under a uniform prior the
// Bayes-optimal accuracy is 1 - (1-p)^3 * (C-1)/C.
struct ClassificationTaskSpec {
  std::size_t vocab_size = 200;
  std::size_t num_classes = 2;
  std::size_t seq_len = 16;
  std::size_t samples = 1000;
  double keyword_strength = 0.8;
  std::uint64_t seed = 1;
};

inline constexpr std::size_t kKeywordsPerClass = 3;
inline constexpr std::size_t kMinBackgroundTokens = 8;

LabeledDataset generate_classification_task(const ClassificationTaskSpec& spec);
double classification_bayes_accuracy(double keyword_strength, std::size_t num_classes);

// Sentiment-style regression task. Tokens 1..4 are "positive", 5..8
// "negative", the rest background. Each sample draws a rate u ~ U(0,1) and
// fills min(10, seq_len) slots with positive tokens w.p. u (negative
// otherwise); score = 5 * positives / slots.
struct RegressionTaskSpec {
  std::size_t vocab_size = 200;
  std::size_t seq_len = 16;
  std::size_t samples = 1000;
  std::uint64_t seed = 1;
};

inline constexpr std::size_t kRegressionSlots = 10;

LabeledDataset generate_regression_task(const RegressionTaskSpec& spec);

// Samples K shards without replacement so that shard i's class histogram is
// the largest-remainder rounding of scheme row i times shard_size. A
// shard_size of 0 means |D| / K.
std::vector<LabeledDataset> partition_label_skew(const LabeledDataset& ds, const LabelDistScheme& scheme,
                                                 std::uint64_t seed, std::size_t shard_size = 0);

// Sorts by score (ties by position) and cuts K contiguous shards of |D| / K;
// the last shard takes the remainder.
std::vector<LabeledDataset> partition_sorted(const LabeledDataset& ds, std::size_t clients);

// Seeded shuffle then split; stratified per class for classification.
std::pair<LabeledDataset, LabeledDataset> split_train_test(const LabeledDataset& shard, double train_frac,
                                                           std::uint64_t seed);

Batch make_batch(const LabeledDataset& ds, std::span<const std::size_t> indices);

// Text dump: "fsbd,v1,<vocab>,<C>,<seq_len>" then one "<ids,...>|<label or score>" per line.
void write_dataset(std::ostream& out, const LabeledDataset& ds);
LabeledDataset read_dataset(std::istream& in);

}  // namespace fedsplit

#endif  // FEDSPLIT_DATA_HPP
