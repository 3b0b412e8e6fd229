// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsplit/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "fedsplit/error.hpp"
#include "fedsplit/rng.hpp"

namespace fedsplit {

std::vector<std::size_t> LabeledDataset::class_histogram() const {
  std::vector<std::size_t> h(regression() ? 0 : num_classes, 0);
  if (regression()) return h;
  for (const Sample& s : samples) ++h.at(static_cast<std::size_t>(s.label));
  return h;
}

void LabeledDataset::validate() const {
  if (num_classes == 0 || seq_len == 0 || vocab_size == 0) fail(ErrorKind::Config, "dataset metadata must be positive");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.tokens.size() != seq_len) fail(ErrorKind::Dimension, "sample " + std::to_string(i) + " has wrong length");
    for (std::int32_t t : s.tokens) {
      if (t < 0 || static_cast<std::size_t>(t) >= vocab_size) {
        fail(ErrorKind::Index, "sample " + std::to_string(i) + " token " + std::to_string(t) + " outside vocabulary");
      }
    }
    if (regression()) {
      if (!(s.score >= 0.0 && s.score <= 5.0)) fail(ErrorKind::Index, "sample " + std::to_string(i) + " score outside [0,5]");
    } else if (s.label < 0 || static_cast<std::size_t>(s.label) >= num_classes) {
      fail(ErrorKind::Index, "sample " + std::to_string(i) + " label outside [0," + std::to_string(num_classes) + ")");
    }
  }
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out{vocab_size, num_classes, seq_len, {}};
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) out.samples.push_back(samples.at(i));
  return out;
}

LabelDistScheme::LabelDistScheme(std::vector<std::vector<double>> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) fail(ErrorKind::Config, "label scheme needs at least one row");
  const std::size_t cols = rows_.front().size();
  if (cols < 2) fail(ErrorKind::Config, "label scheme rows need at least two classes");
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    auto& row = rows_[i];
    if (row.size() != cols) fail(ErrorKind::Config, "label scheme row " + std::to_string(i) + " has a different class count");
    double total = 0.0;
    for (double v : row) {
      if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorKind::Config, "label scheme row " + std::to_string(i) + " has a negative entry");
      total += v;
    }
    if (!(total > 0.0)) fail(ErrorKind::Config, "label scheme row " + std::to_string(i) + " sums to zero");
    for (double& v : row) v /= total;
  }
}

std::vector<std::size_t> largest_remainder(std::span<const double> fractions, std::size_t total) {
  std::vector<std::size_t> counts(fractions.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double exact = fractions[i] * static_cast<double>(total);
    // Snap values within rounding noise of an integer so 0.8 * 600 lands on 480.
    const double snapped = std::abs(exact - std::round(exact)) < 1e-9 ? std::round(exact) : exact;
    counts[i] = static_cast<std::size_t>(std::floor(snapped));
    assigned += counts[i];
    rema.emplace_back(snapped - std::floor(snapped), i);
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < rema.size(); ++k, ++assigned) ++counts[rema[k].second];
  return counts;
}

double classification_bayes_accuracy(double keyword_strength, std::size_t num_classes) {
  const double miss = std::pow(1.0 - keyword_strength, static_cast<double>(kKeywordsPerClass));
  return 1.0 - miss * static_cast<double>(num_classes - 1) / static_cast<double>(num_classes);
}

LabeledDataset generate_classification_task(const ClassificationTaskSpec& spec) {
  if (spec.num_classes < 2) fail(ErrorKind::Config, "classification needs at least 2 classes (use the regression generator)");
  if (!(spec.keyword_strength > 0.5 && spec.keyword_strength <= 1.0)) {
    fail(ErrorKind::Config, "keyword_strength must lie in (0.5, 1]");
  }
  const std::size_t first_background = 1 + kKeywordsPerClass * spec.num_classes;
  if (spec.vocab_size < first_background + kMinBackgroundTokens) {
    fail(ErrorKind::Config, "vocab_size " + std::to_string(spec.vocab_size) + " too small for " +
                                std::to_string(spec.num_classes) + " classes; need at least " +
                                std::to_string(first_background + kMinBackgroundTokens));
  }
  if (spec.seq_len < kKeywordsPerClass) fail(ErrorKind::Config, "seq_len must be >= 3 to plant keywords");

  auto rng = derive_rng({spec.seed, static_cast<std::uint64_t>(Stream::Data)});
  std::uniform_int_distribution<std::int32_t> background(static_cast<std::int32_t>(first_background),
                                                         static_cast<std::int32_t>(spec.vocab_size - 1));
  std::bernoulli_distribution plant(spec.keyword_strength);

  std::vector<int> labels(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i) labels[i] = static_cast<int>(i % spec.num_classes);
  std::shuffle(labels.begin(), labels.end(), rng);

  LabeledDataset ds{spec.vocab_size, spec.num_classes, spec.seq_len, {}};
  ds.samples.reserve(spec.samples);
  std::vector<std::size_t> positions(spec.seq_len);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    Sample s;
    s.label = labels[i];
    s.source = i;
    s.tokens.resize(spec.seq_len);
    for (auto& t : s.tokens) t = background(rng);
    std::iota(positions.begin(), positions.end(), 0);
    std::shuffle(positions.begin(), positions.end(), rng);
    for (std::size_t k = 0; k < kKeywordsPerClass; ++k) {
      if (plant(rng)) {
        s.tokens[positions[k]] = static_cast<std::int32_t>(1 + kKeywordsPerClass * static_cast<std::size_t>(s.label) + k);
      }
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

LabeledDataset generate_regression_task(const RegressionTaskSpec& spec) {
  constexpr std::int32_t kFirstBackground = 9;
  if (spec.vocab_size < kFirstBackground + kMinBackgroundTokens) {
    fail(ErrorKind::Config, "vocab_size too small for the regression task; need at least " +
                                std::to_string(kFirstBackground + kMinBackgroundTokens));
  }
  if (spec.samples == 0) fail(ErrorKind::Config, "regression task needs at least one sample");
  const std::size_t slots = std::min(kRegressionSlots, spec.seq_len);

  auto rng = derive_rng({spec.seed, static_cast<std::uint64_t>(Stream::Data)});
  std::uniform_int_distribution<std::int32_t> background(kFirstBackground, static_cast<std::int32_t>(spec.vocab_size - 1));
  std::uniform_int_distribution<std::int32_t> positive(1, 4), negative(5, 8);
  std::uniform_real_distribution<double> rate(0.0, 1.0);

  LabeledDataset ds{spec.vocab_size, 1, spec.seq_len, {}};
  ds.samples.reserve(spec.samples);
  std::vector<std::size_t> positions(spec.seq_len);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    Sample s;
    s.source = i;
    s.tokens.resize(spec.seq_len);
    for (auto& t : s.tokens) t = background(rng);
    std::iota(positions.begin(), positions.end(), 0);
    std::shuffle(positions.begin(), positions.end(), rng);
    const double u = rate(rng);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < slots; ++k) {
      const bool is_pos = std::bernoulli_distribution(u)(rng);
      s.tokens[positions[k]] = is_pos ? positive(rng) : negative(rng);
      pos += is_pos ? 1 : 0;
    }
    s.score = 5.0 * static_cast<double>(pos) / static_cast<double>(slots);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::vector<LabeledDataset> partition_label_skew(const LabeledDataset& ds, const LabelDistScheme& scheme,
                                                 std::uint64_t seed, std::size_t shard_size) {
  if (ds.regression()) fail(ErrorKind::Config, "label-skew partition needs a classification dataset");
  if (scheme.classes() != ds.num_classes) {
    fail(ErrorKind::Config, "label scheme has " + std::to_string(scheme.classes()) + " classes, dataset has " +
                                std::to_string(ds.num_classes));
  }
  const std::size_t K = scheme.clients();
  if (shard_size == 0) shard_size = ds.size() / K;
  if (shard_size == 0) fail(ErrorKind::Infeasible, "dataset too small for " + std::to_string(K) + " shards");

  std::vector<std::vector<std::size_t>> quotas(K);
  std::vector<std::size_t> demand(ds.num_classes, 0);
  for (std::size_t i = 0; i < K; ++i) {
    quotas[i] = largest_remainder(scheme.row(i), shard_size);
    for (std::size_t c = 0; c < ds.num_classes; ++c) demand[c] += quotas[i][c];
  }
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.samples[i].label)].push_back(i);
  for (std::size_t c = 0; c < ds.num_classes; ++c) {
    if (demand[c] > by_class[c].size()) {
      fail(ErrorKind::Infeasible, "class " + std::to_string(c) + " needs " + std::to_string(demand[c]) +
                                      " samples but only " + std::to_string(by_class[c].size()) + " exist");
    }
  }

  auto rng = derive_rng({seed, static_cast<std::uint64_t>(Stream::Partition)});
  for (auto& idx : by_class) std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::size_t> cursor(ds.num_classes, 0);
  std::vector<LabeledDataset> shards;
  for (std::size_t i = 0; i < K; ++i) {
    std::vector<std::size_t> picked;
    picked.reserve(shard_size);
    for (std::size_t c = 0; c < ds.num_classes; ++c) {
      for (std::size_t n = 0; n < quotas[i][c]; ++n) picked.push_back(by_class[c][cursor[c]++]);
    }
    std::shuffle(picked.begin(), picked.end(), rng);
    shards.push_back(ds.subset(picked));
  }
  return shards;
}

std::vector<LabeledDataset> partition_sorted(const LabeledDataset& ds, std::size_t clients) {
  if (clients == 0) fail(ErrorKind::Config, "partition needs at least one client");
  if (ds.size() < clients) fail(ErrorKind::Infeasible, "fewer samples than clients");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ds.samples[a].score < ds.samples[b].score; });
  const std::size_t per = ds.size() / clients;
  std::vector<LabeledDataset> shards;
  for (std::size_t i = 0; i < clients; ++i) {
    const std::size_t begin = i * per;
    const std::size_t end = i + 1 == clients ? ds.size() : begin + per;
    shards.push_back(ds.subset(std::span<const std::size_t>(order).subspan(begin, end - begin)));
  }
  return shards;
}

std::pair<LabeledDataset, LabeledDataset> split_train_test(const LabeledDataset& shard, double train_frac,
                                                           std::uint64_t seed) {
  if (shard.size() < 5) fail(ErrorKind::Config, "train/test split needs at least 5 samples, got " + std::to_string(shard.size()));
  if (!(train_frac > 0.0 && train_frac < 1.0)) fail(ErrorKind::Config, "train fraction must lie in (0, 1)");
  const std::size_t n = shard.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  const std::size_t n_test = n - n_train;
  auto rng = derive_rng({seed, static_cast<std::uint64_t>(Stream::TrainTest)});

  std::vector<std::size_t> train, test;
  if (shard.regression()) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  } else {
    std::vector<std::vector<std::size_t>> by_class(shard.num_classes);
    for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(shard.samples[i].label)].push_back(i);
    std::vector<double> frac(shard.num_classes);
    for (std::size_t c = 0; c < shard.num_classes; ++c) frac[c] = static_cast<double>(by_class[c].size()) / static_cast<double>(n);
    const auto quota = largest_remainder(frac, n_test);
    for (std::size_t c = 0; c < shard.num_classes; ++c) {
      auto& idx = by_class[c];
      std::shuffle(idx.begin(), idx.end(), rng);
      const std::size_t q = std::min(quota[c], idx.size());
      test.insert(test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(q));
      train.insert(train.end(), idx.begin() + static_cast<std::ptrdiff_t>(q), idx.end());
    }
    std::shuffle(train.begin(), train.end(), rng);
    std::shuffle(test.begin(), test.end(), rng);
  }
  return {shard.subset(train), shard.subset(test)};
}

Batch make_batch(const LabeledDataset& ds, std::span<const std::size_t> indices) {
  Batch b;
  b.size = indices.size();
  b.tokens.reserve(indices.size() * ds.seq_len);
  for (std::size_t i : indices) {
    const Sample& s = ds.samples.at(i);
    b.tokens.insert(b.tokens.end(), s.tokens.begin(), s.tokens.end());
    if (ds.regression()) {
      b.scores.push_back(s.score);
    } else {
      b.labels.push_back(s.label);
    }
  }
  b.mask.resize(b.tokens.size());
  for (std::size_t i = 0; i < b.tokens.size(); ++i) b.mask[i] = b.tokens[i] != kPadToken ? 1 : 0;
  return b;
}

void write_dataset(std::ostream& out, const LabeledDataset& ds) {
  out << "fsbd,v1," << ds.vocab_size << ',' << ds.num_classes << ',' << ds.seq_len << '\n';
  char buf[32];
  for (const Sample& s : ds.samples) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      if (i) out << ',';
      out << s.tokens[i];
    }
    out << '|';
    if (ds.regression()) {
      std::snprintf(buf, sizeof buf, "%.9g", s.score);
      out << buf;
    } else {
      out << s.label;
    }
    out << '\n';
  }
  if (!out) fail(ErrorKind::Io, "failed writing dataset");
}

LabeledDataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Format, "empty dataset stream");
  LabeledDataset ds;
  {
    std::istringstream header(line);
    std::string magic, version;
    std::getline(header, magic, ',');
    std::getline(header, version, ',');
    if (magic != "fsbd" || version != "v1") fail(ErrorKind::Format, "dataset header must start with fsbd,v1");
    char c1 = 0, c2 = 0;
    if (!(header >> ds.vocab_size >> c1 >> ds.num_classes >> c2 >> ds.seq_len) || c1 != ',' || c2 != ',') {
      fail(ErrorKind::Format, "malformed dataset header '" + line + "'");
    }
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto bar = line.find('|');
    if (bar == std::string::npos) fail(ErrorKind::Format, "line " + std::to_string(lineno) + " lacks '|'");
    Sample s;
    s.source = ds.samples.size();
    std::istringstream ids(line.substr(0, bar));
    std::string tok;
    while (std::getline(ids, tok, ',')) s.tokens.push_back(static_cast<std::int32_t>(std::stol(tok)));
    const std::string target = line.substr(bar + 1);
    if (ds.regression()) {
      s.score = std::stod(target);
    } else {
      s.label = std::stoi(target);
    }
    ds.samples.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

}  // namespace fedsplit
