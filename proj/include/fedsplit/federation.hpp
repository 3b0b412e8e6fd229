// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDSPLIT_FEDERATION_HPP
#define FEDSPLIT_FEDERATION_HPP

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fedsplit/data.hpp"
#include "fedsplit/model.hpp"
#include "fedsplit/param_set.hpp"

namespace fedsplit {

enum class Aggregator { FedAvg, FedProx, FedAdam };

const char* to_string(Aggregator a) noexcept;
Aggregator parse_aggregator(const std::string& s);

struct FedConfig {
  std::size_t clients = 3;
  std::size_t clients_per_round = 0;  // 0 selects every client
  std::size_t rounds = 10;
  std::size_t local_epochs = 3;
  std::size_t batch_size = 16;
  double lr = 3e-5;
  Aggregator aggregator = Aggregator::FedAvg;
  double prox_lambda = 0.0;
  // FedAdam server optimizer (no bias correction).
  double server_lr = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double adam_eps = 1e-3;
  bool quantize = false;
  // Round the running server sum to binary16 after every client term.
  bool strict_f16_accumulate = false;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  std::size_t selected_per_round() const noexcept { return clients_per_round == 0 ? clients : clients_per_round; }
  void validate() const;
};

struct ClientState {
  std::size_t id = 0;
  ParameterSet local;
  LabeledDataset train;
  LabeledDataset test;

  std::size_t sample_count() const noexcept { return train.size(); }
};

struct ServerOptState {
  ParameterSet m;
  ParameterSet v;
  std::uint64_t step = 0;
};

struct ClientUpdateResult {
  ParameterSet global;
  ParameterSet local;
  std::vector<double> losses;  // one per mini-batch

  double mean_loss() const noexcept;
};

struct RoundRecord {
  std::size_t round = 0;
  std::vector<std::size_t> selected;  // ascending
  std::vector<double> train_loss;     // parallel to `selected`
  std::vector<double> test_metric;    // parallel to `selected`
  // Bytes per selected client per direction: the encoded global payload, or 0
  // when the global part is empty and nothing is exchanged.
  std::uint64_t client_bytes = 0;
  std::uint64_t client_data_bytes = 0;
  double wall_seconds = 0.0;

  std::uint64_t bytes_up() const noexcept { return client_bytes * selected.size(); }
  std::uint64_t bytes_down() const noexcept { return client_bytes * selected.size(); }
};

struct TrainingResult {
  std::vector<RoundRecord> rounds;
  std::vector<double> final_metric;  // per client, local test split
};

// Uniform sample of s ids from [0, K) without replacement, ascending.
std::vector<std::size_t> select_clients(std::mt19937_64& rng, std::size_t clients, std::size_t per_round);

// Mini-batch order for one client epoch sequence, keyed by (seed, client, round).
std::mt19937_64 batch_rng(std::uint64_t seed, std::size_t client_id, std::size_t round);

struct ProximalTerm {
  double value = 0.0;
  ParameterSet grad;  // lambda * (w - anchor) over anchored names
};

// (lambda / 2) * sum ||w - anchor||^2 over the anchor's names.
ProximalTerm proximal_penalty(const ParameterSet& w, const ParameterSet& anchor, double lambda);

// Runs E epochs of mini-batch SGD on the merged model and splits it back
// into (global candidate, local) using the names of `global`.
ClientUpdateResult client_update(const Model& model, const ClientState& client, const ParameterSet& global,
                                 const FedConfig& cfg, std::size_t round);

struct WeightedUpdate {
  ParameterSet params;
  std::size_t samples = 0;
};

// Elementwise sum_i N_i * w_i / N, reduced in the given (ascending client) order.
ParameterSet aggregate_weighted(std::span<const WeightedUpdate> updates, bool strict_f16 = false);

// m <- b1 m + (1-b1) D;  v <- b2 v + (1-b2) D^2;  g <- g + lr m / (sqrt(v) + eps)
// with pseudo-gradient D = aggregated - current.
ParameterSet server_adam_step(ServerOptState& state, const ParameterSet& current, const ParameterSet& aggregated,
                              const FedConfig& cfg);

// Accuracy for classification, Pearson correlation for regression.
double evaluate(const Model& model, const ParameterSet& params, const LabeledDataset& ds);

class Federation {
 public:
  // Every client starts from the local part of `init`; the server from its
  // global part (quantized when cfg.quantize).
  Federation(Model model, SplitSpec split, FedConfig cfg, const ParameterSet& init, std::vector<ClientState> clients);

  RoundRecord run_round(std::size_t t);
  TrainingResult run_training(std::size_t rounds);

  const Model& model() const noexcept { return model_; }
  const SplitSpec& split() const noexcept { return split_; }
  const FedConfig& config() const noexcept { return cfg_; }
  const ParameterSet& global() const noexcept { return global_; }
  const std::vector<ClientState>& clients() const noexcept { return clients_; }
  ParameterSet client_model(std::size_t i) const;
  double evaluate_client(std::size_t i) const;

 private:
  ParameterSet transmit(const ParameterSet& g) const;

  Model model_;
  SplitSpec split_;
  FedConfig cfg_;
  ParameterSet global_;
  std::vector<ClientState> clients_;
  ServerOptState server_opt_;
  std::mt19937_64 selection_rng_;
  std::size_t next_round_ = 0;
};

}  // namespace fedsplit

#endif  // FEDSPLIT_FEDERATION_HPP
