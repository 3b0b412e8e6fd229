// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsplit/federation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "fedsplit/error.hpp"
#include "fedsplit/quant.hpp"
#include "fedsplit/rng.hpp"

namespace fedsplit {
namespace {

constexpr std::size_t kEvalBatch = 64;

std::string name_list_diff(const ParameterSet& a, const ParameterSet& b) {
  std::string out;
  for (const auto& [name, _] : a) {
    if (!b.contains(name)) out += (out.empty() ? "" : ", ") + name;
  }
  for (const auto& [name, _] : b) {
    if (!a.contains(name)) out += (out.empty() ? "" : ", ") + name;
  }
  return out;
}

}  // namespace

const char* to_string(Aggregator a) noexcept {
  switch (a) {
    case Aggregator::FedAvg: return "fedavg";
    case Aggregator::FedProx: return "fedprox";
    case Aggregator::FedAdam: return "fedadam";
  }
  return "?";
}

Aggregator parse_aggregator(const std::string& s) {
  if (s == "fedavg") return Aggregator::FedAvg;
  if (s == "fedprox") return Aggregator::FedProx;
  if (s == "fedadam") return Aggregator::FedAdam;
  fail(ErrorKind::Config, "federation.aggregator must be one of fedavg, fedprox, fedadam (got '" + s + "')");
}

void FedConfig::validate() const {
  if (clients < 1) fail(ErrorKind::Config, "federation.clients must be >= 1");
  if (selected_per_round() > clients) {
    fail(ErrorKind::Config, "federation.clients_per_round must be <= federation.clients");
  }
  if (rounds < 1) fail(ErrorKind::Config, "federation.rounds must be >= 1");
  if (local_epochs < 1) fail(ErrorKind::Config, "federation.local_epochs must be >= 1");
  if (batch_size < 1) fail(ErrorKind::Config, "federation.batch_size must be >= 1");
  if (!(lr > 0.0)) fail(ErrorKind::Config, "federation.lr must be > 0");
  if (!(prox_lambda >= 0.0)) fail(ErrorKind::Config, "federation.prox_lambda must be >= 0");
  if (!(server_lr > 0.0)) fail(ErrorKind::Config, "federation.server_lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail(ErrorKind::Config, "federation.beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail(ErrorKind::Config, "federation.beta2 must lie in [0, 1)");
  if (!(adam_eps > 0.0)) fail(ErrorKind::Config, "federation.adam_eps must be > 0");
  if (threads < 1) fail(ErrorKind::Config, "federation.threads must be >= 1");
}

double ClientUpdateResult::mean_loss() const noexcept {
  if (losses.empty()) return 0.0;
  double s = 0.0;
  for (double l : losses) s += l;
  return s / static_cast<double>(losses.size());
}

std::vector<std::size_t> select_clients(std::mt19937_64& rng, std::size_t clients, std::size_t per_round) {
  if (per_round < 1 || per_round > clients) {
    fail(ErrorKind::Config, "cannot select " + std::to_string(per_round) + " of " + std::to_string(clients) + " clients");
  }
  std::vector<std::size_t> all(clients);
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::size_t> out;
  out.reserve(per_round);
  std::sample(all.begin(), all.end(), std::back_inserter(out), per_round, rng);
  return out;
}

std::mt19937_64 batch_rng(std::uint64_t seed, std::size_t client_id, std::size_t round) {
  return derive_rng({seed, static_cast<std::uint64_t>(Stream::Batches), client_id, round});
}

ProximalTerm proximal_penalty(const ParameterSet& w, const ParameterSet& anchor, double lambda) {
  if (!(lambda >= 0.0)) fail(ErrorKind::Config, "proximal lambda must be >= 0");
  ProximalTerm term;
  double sq = 0.0;
  for (const auto& [name, a] : anchor) {
    const Tensor& x = w.at(name);
    if (x.shape() != a.shape()) {
      fail(ErrorKind::Dimension, "proximal anchor '" + name + "' has shape " + shape_str(a.shape()) +
                                     ", weight has " + shape_str(x.shape()));
    }
    Tensor g(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const double diff = x[i] - a[i];
      sq += diff * diff;
      g[i] = lambda * diff;
    }
    g.round_to_precision();
    term.grad.insert(name, std::move(g));
  }
  term.value = round_to_precision(0.5 * lambda * sq);
  return term;
}

ClientUpdateResult client_update(const Model& model, const ClientState& client, const ParameterSet& global,
                                 const FedConfig& cfg, std::size_t round) {
  if (client.train.size() == 0) fail(ErrorKind::Config, "client " + std::to_string(client.id) + " has an empty shard");
  const auto names = model.param_names();
  ParameterSet w = merge_params(global, client.local, &names);

  const bool prox = cfg.aggregator == Aggregator::FedProx;
  auto rng = batch_rng(cfg.seed, client.id, round);
  std::vector<std::size_t> order(client.train.size());
  std::iota(order.begin(), order.end(), 0);

  ClientUpdateResult result;
  for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      const Batch batch = make_batch(client.train, std::span<const std::size_t>(order).subspan(start, n));
      Graph g;
      auto vars = g.parameters(w);
      Var loss = model.loss(g, vars, batch);
      ParameterSet grads = g.backward(loss);
      double value = loss.value().item();
      if (prox) {
        ProximalTerm term = proximal_penalty(w, global, cfg.prox_lambda);
        value = round_to_precision(value + term.value);
        for (auto& [name, pg] : term.grad) {
          Tensor& dst = grads.at(name);
          for (std::size_t i = 0; i < dst.numel(); ++i) dst[i] += pg[i];
          dst.round_to_precision();
        }
      }
      if (!std::isfinite(value)) {
        fail(ErrorKind::Divergence, "non-finite training loss at round " + std::to_string(round) + ", client " +
                                        std::to_string(client.id) + ", epoch " + std::to_string(epoch));
      }
      result.losses.push_back(value);
      w = sgd_step(w, grads, cfg.lr);
    }
  }
  for (auto& [name, t] : w) {
    (global.contains(name) ? result.global : result.local).insert(name, std::move(t));
  }
  return result;
}

ParameterSet aggregate_weighted(std::span<const WeightedUpdate> updates, bool strict_f16) {
  if (updates.empty()) fail(ErrorKind::Config, "aggregation needs at least one update");
  std::size_t total = 0;
  for (std::size_t i = 0; i < updates.size(); ++i) {
    if (updates[i].samples < 1) fail(ErrorKind::Config, "update " + std::to_string(i) + " has zero samples");
    const std::string diff = name_list_diff(updates[0].params, updates[i].params);
    if (!diff.empty()) fail(ErrorKind::Name, "update name sets differ on: " + diff);
    for (const auto& [name, t] : updates[0].params) {
      if (updates[i].params.at(name).shape() != t.shape()) {
        fail(ErrorKind::Dimension, "update " + std::to_string(i) + " parameter '" + name + "' has shape " +
                                       shape_str(updates[i].params.at(name).shape()) + ", expected " + shape_str(t.shape()));
      }
    }
    total += updates[i].samples;
  }
  const double N = static_cast<double>(total);
  ParameterSet out;
  for (const auto& [name, first] : updates[0].params) {
    Tensor acc(first.shape());
    for (std::size_t k = 0; k < acc.numel(); ++k) {
      double s = 0.0;
      if (strict_f16) {
        for (const auto& u : updates) {
          s = f16_roundtrip(s + f16_roundtrip(static_cast<double>(u.samples) / N * u.params.at(name)[k]));
        }
        acc[k] = s;
      } else {
        for (const auto& u : updates) s += static_cast<double>(u.samples) * u.params.at(name)[k];
        acc[k] = s / N;
      }
    }
    acc.round_to_precision();
    out.insert(name, std::move(acc));
  }
  return out;
}

ParameterSet server_adam_step(ServerOptState& state, const ParameterSet& current, const ParameterSet& aggregated,
                              const FedConfig& cfg) {
  const std::string diff = name_list_diff(current, aggregated);
  if (!diff.empty()) fail(ErrorKind::Name, "server update name sets differ on: " + diff);
  ParameterSet next;
  for (const auto& [name, g] : current) {
    const Tensor& agg = aggregated.at(name);
    if (agg.shape() != g.shape()) fail(ErrorKind::Dimension, "server update shape mismatch for '" + name + "'");
    if (!state.m.contains(name)) {
      state.m.insert(name, Tensor(g.shape()));
      state.v.insert(name, Tensor(g.shape()));
    }
    Tensor& m = state.m.at(name);
    Tensor& v = state.v.at(name);
    Tensor out = g;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double delta = agg[i] - g[i];
      if (!std::isfinite(delta)) fail(ErrorKind::Divergence, "non-finite pseudo-gradient for '" + name + "'");
      m[i] = round_to_precision(cfg.beta1 * m[i] + (1.0 - cfg.beta1) * delta);
      v[i] = round_to_precision(cfg.beta2 * v[i] + (1.0 - cfg.beta2) * delta * delta);
      out[i] = round_to_precision(g[i] + cfg.server_lr * m[i] / (std::sqrt(v[i]) + cfg.adam_eps));
    }
    next.insert(name, std::move(out));
  }
  ++state.step;
  return next;
}

double evaluate(const Model& model, const ParameterSet& params, const LabeledDataset& ds) {
  if (ds.size() == 0) return 0.0;
  std::vector<double> pred, truth;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += kEvalBatch) {
    const std::size_t n = std::min(kEvalBatch, ds.size() - start);
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), start);
    const Batch batch = make_batch(ds, idx);
    const Tensor logits = model.logits(params, batch);
    const std::size_t C = logits.cols();
    for (std::size_t r = 0; r < n; ++r) {
      if (ds.regression()) {
        pred.push_back(logits[r]);
        truth.push_back(batch.scores[r]);
      } else {
        const double* row = logits.data().data() + r * C;
        const auto arg = static_cast<int>(std::max_element(row, row + C) - row);
        correct += arg == batch.labels[r] ? 1 : 0;
      }
    }
  }
  if (!ds.regression()) return static_cast<double>(correct) / static_cast<double>(ds.size());
  const double n = static_cast<double>(pred.size());
  const double mp = std::accumulate(pred.begin(), pred.end(), 0.0) / n;
  const double mt = std::accumulate(truth.begin(), truth.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sxy += (pred[i] - mp) * (truth[i] - mt);
    sxx += (pred[i] - mp) * (pred[i] - mp);
    syy += (truth[i] - mt) * (truth[i] - mt);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

Federation::Federation(Model model, SplitSpec split, FedConfig cfg, const ParameterSet& init,
                       std::vector<ClientState> clients)
    : model_(std::move(model)),
      split_(split),
      cfg_(cfg),
      clients_(std::move(clients)),
      selection_rng_(derive_rng({cfg.seed, static_cast<std::uint64_t>(Stream::Selection)})) {
  cfg_.validate();
  split_.validate();
  if (split_.layers != model_.config().layers) fail(ErrorKind::Config, "split depth does not match the model");
  if (clients_.size() != cfg_.clients) {
    fail(ErrorKind::Config, "expected " + std::to_string(cfg_.clients) + " clients, got " + std::to_string(clients_.size()));
  }
  SplitParts parts = split_params(init, split_);
  global_ = transmit(parts.global);
  for (std::size_t i = 0; i < clients_.size(); ++i) {
    if (clients_[i].id != i) fail(ErrorKind::Config, "client ids must be 0..K-1 in order");
    if (clients_[i].sample_count() < 1) fail(ErrorKind::Config, "client " + std::to_string(i) + " has no training data");
    clients_[i].local = parts.local;
  }
}

ParameterSet Federation::transmit(const ParameterSet& g) const {
  if (!cfg_.quantize || g.empty()) return g;
  return decode_global_payload(encode_global_payload(g, DType::F16));
}

ParameterSet Federation::client_model(std::size_t i) const { return merge_params(global_, clients_.at(i).local); }

double Federation::evaluate_client(std::size_t i) const {
  return evaluate(model_, client_model(i), clients_.at(i).test);
}

RoundRecord Federation::run_round(std::size_t t) {
  const auto started = std::chrono::steady_clock::now();
  RoundRecord rec;
  rec.round = t;
  rec.selected = select_clients(selection_rng_, cfg_.clients, cfg_.selected_per_round());
  const DType wire = cfg_.quantize ? DType::F16 : DType::F32;
  if (!global_.empty()) {
    rec.client_bytes = payload_size(global_, wire);
    rec.client_data_bytes = payload_data_bytes(global_, wire);
  }

  // Client updates are pure functions of (global snapshot, client state, round).
  const std::size_t S = rec.selected.size();
  std::vector<ClientUpdateResult> results(S);
  std::vector<std::exception_ptr> errors(S);
  auto work = [&](std::size_t slot) {
    try {
      results[slot] = client_update(model_, clients_[rec.selected[slot]], global_, cfg_, t);
    } catch (...) {
      errors[slot] = std::current_exception();
    }
  };
  const std::size_t workers = std::min(cfg_.threads, S);
  if (workers <= 1) {
    for (std::size_t s = 0; s < S; ++s) work(s);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t s; (s = next.fetch_add(1)) < S;) work(s);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Barrier: aggregate in ascending client order.
  if (!global_.empty()) {
    std::vector<WeightedUpdate> uploads;
    uploads.reserve(S);
    for (std::size_t s = 0; s < S; ++s) {
      uploads.push_back({transmit(results[s].global), clients_[rec.selected[s]].sample_count()});
    }
    ParameterSet aggregated = aggregate_weighted(uploads, cfg_.quantize && cfg_.strict_f16_accumulate);
    if (cfg_.aggregator == Aggregator::FedAdam) aggregated = server_adam_step(server_opt_, global_, aggregated, cfg_);
    global_ = transmit(aggregated);
  }
  for (std::size_t s = 0; s < S; ++s) {
    clients_[rec.selected[s]].local = std::move(results[s].local);
    rec.train_loss.push_back(results[s].mean_loss());
  }
  for (std::size_t s = 0; s < S; ++s) rec.test_metric.push_back(evaluate_client(rec.selected[s]));
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  next_round_ = t + 1;
  return rec;
}

TrainingResult Federation::run_training(std::size_t rounds) {
  if (rounds < 1) fail(ErrorKind::Config, "training needs at least one round");
  TrainingResult result;
  const std::size_t first = next_round_;
  for (std::size_t t = first; t < first + rounds; ++t) result.rounds.push_back(run_round(t));
  for (std::size_t i = 0; i < clients_.size(); ++i) result.final_metric.push_back(evaluate_client(i));
  return result;
}

}  // namespace fedsplit
