// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDSPLIT_EXPERIMENT_HPP
#define FEDSPLIT_EXPERIMENT_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedsplit/federation.hpp"
#include "fedsplit/gradcheck.hpp"
#include "fedsplit/model.hpp"
#include "fedsplit/tensor.hpp"

namespace fedsplit {

enum class TaskKind { Classification, Regression };

struct DataConfig {
  TaskKind task = TaskKind::Classification;
  // Per-client class fractions; one row per client.
  std::vector<std::vector<double>> scheme{{0.8, 0.2}, {0.5, 0.5}, {0.2, 0.8}};
  std::size_t samples_per_client = 600;
  double keyword_strength = 0.8;
  double train_frac = 0.8;
  std::uint64_t seed = 1;
};

struct GradCheckConfig {
  std::size_t layers = 2;
  std::size_t hidden = 16;
  std::size_t heads = 2;
  std::size_t seq_len = 8;
  std::size_t batch = 4;
  std::size_t probes = 200;
  double eps = 1e-5;
  double abs_floor = 1e-5;
  double threshold = 1e-5;
  Precision precision = Precision::F64;
};

struct ExperimentConfig {
  ModelConfig model;
  FedConfig federation;
  std::size_t critical_layer = 2;
  std::optional<bool> head_global;
  DataConfig data;
  std::string output_dir;
  Precision precision = Precision::F32;
  GradCheckConfig gradcheck;

  // Cross-field checks (scheme rows = K, c <= L, ...). Errors name the field.
  void validate() const;
  SplitSpec split_spec() const;
  // Every key with its effective value, one "key = value" per line, sorted.
  std::string to_text() const;
};

// Flat "key = value" text; '#' starts a comment. Unknown keys are errors.
// Overrides are applied after the text, as if they were the last lines.
// model.num_classes and federation.clients default to the scheme's shape,
// federation.critical_layer to model.layers / 2.
ExperimentConfig parse_config(const std::string& text,
                              const std::vector<std::pair<std::string, std::string>>& overrides = {});
ExperimentConfig load_config(const std::string& path);
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();

// Per-(round, client) transfer accounting.
class CommLedger {
 public:
  struct Row {
    std::size_t round = 0;
    std::size_t client = 0;
    std::uint64_t bytes_up = 0;
    std::uint64_t bytes_down = 0;
    std::uint64_t data_bytes_up = 0;
    std::uint64_t data_bytes_down = 0;
  };

  void record(const RoundRecord& rec);
  const std::vector<Row>& rows() const noexcept { return rows_; }
  std::uint64_t total_up() const noexcept { return total_up_; }
  std::uint64_t total_down() const noexcept { return total_down_; }
  std::uint64_t total_data_up() const noexcept { return total_data_up_; }
  std::uint64_t total_data_down() const noexcept { return total_data_down_; }

 private:
  std::vector<Row> rows_;
  std::uint64_t total_up_ = 0, total_down_ = 0, total_data_up_ = 0, total_data_down_ = 0;
};

struct ExperimentResult {
  TrainingResult training;
  CommLedger ledger;
  std::vector<std::size_t> train_samples;  // per client
  double final_mean_uniform = 0.0;
  double final_mean_weighted = 0.0;
  std::string output_dir;
};

// Data shards for every client (train/test split applied), ids 0..K-1.
std::vector<ClientState> build_clients(const ExperimentConfig& cfg);

// Resolves output_dir, falling back to $FSB_OUT_DIR.
std::string resolve_output_dir(const ExperimentConfig& cfg);

// Writes metrics.csv, ledger.csv, summary.csv, final.csv, client_<kk>.fsbc and
// config.resolved into the output directory. Files are removed again if the
// run fails.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// One experiment per value of `key` ("c" is short for
// federation.critical_layer), each in <out>/<key>_<value>/, plus <out>/sweep.csv.
struct SweepRow {
  std::string value;
  double final_mean_uniform = 0.0;
  double final_mean_weighted = 0.0;
  std::uint64_t total_bytes = 0;
};
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const std::string& key, const std::vector<std::string>& values);

GradCheckReport run_gradcheck(const ExperimentConfig& cfg);

// Human-readable shard histograms for a dry run.
std::string partition_report(const ExperimentConfig& cfg);

}  // namespace fedsplit

#endif  // FEDSPLIT_EXPERIMENT_HPP
