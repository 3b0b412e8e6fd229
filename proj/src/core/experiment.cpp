// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fedsplit/autograd.hpp"
#include "fedsplit/data.hpp"
#include "fedsplit/error.hpp"
#include "fedsplit/experiment.hpp"
#include "fedsplit/quant.hpp"
#include "fedsplit/rng.hpp"

namespace fedsplit {
namespace fs = std::filesystem;

namespace {

std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string client_tag(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02zu", i);
  return buf;
}

std::vector<LabeledDataset> build_shards(const ExperimentConfig& cfg) {
  const auto& d = cfg.data;
  if (d.task == TaskKind::Regression) {
    RegressionTaskSpec spec;
    spec.vocab_size = cfg.model.vocab_size;
    spec.seq_len = cfg.model.seq_len;
    spec.samples = d.samples_per_client * cfg.federation.clients;
    spec.seed = d.seed;
    return partition_sorted(generate_regression_task(spec), cfg.federation.clients);
  }
  const LabelDistScheme scheme(d.scheme);
  // A pool with max-demand samples per class keeps every scheme feasible.
  std::vector<std::size_t> demand(scheme.classes(), 0);
  for (std::size_t i = 0; i < scheme.clients(); ++i) {
    const auto q = largest_remainder(scheme.row(i), d.samples_per_client);
    for (std::size_t c = 0; c < q.size(); ++c) demand[c] += q[c];
  }
  const std::size_t per_class = std::max<std::size_t>(1, *std::max_element(demand.begin(), demand.end()));
  ClassificationTaskSpec spec;
  spec.vocab_size = cfg.model.vocab_size;
  spec.num_classes = cfg.model.num_classes;
  spec.seq_len = cfg.model.seq_len;
  spec.samples = per_class * cfg.model.num_classes;
  spec.keyword_strength = d.keyword_strength;
  spec.seed = d.seed;
  return partition_label_skew(generate_classification_task(spec), scheme, d.seed, d.samples_per_client);
}

// Files written by one run; removed again unless commit() is reached.
class OutputGuard {
 public:
  explicit OutputGuard(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    created_dir_ = !fs::exists(dir_, ec);
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) fail(ErrorKind::Io, "cannot create output directory '" + dir_.string() + "'");
  }
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : files_) fs::remove(p, ec);
    if (created_dir_ && fs::is_empty(dir_, ec)) fs::remove(dir_, ec);
  }
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;

  fs::path track(const std::string& name) {
    fs::path p = dir_ / name;
    files_.push_back(p);
    return p;
  }
  std::ofstream open(const std::string& name) {
    const fs::path p = track(name);
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write '" + p.string() + "'");
    return out;
  }
  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  std::vector<fs::path> files_;
  bool created_dir_ = false;
  bool committed_ = false;
};

void check_stream(std::ofstream& out, const std::string& what) {
  out.flush();
  if (!out) fail(ErrorKind::Io, "write failed for " + what);
}

}  // namespace

void CommLedger::record(const RoundRecord& rec) {
  for (std::size_t client : rec.selected) {
    Row row{rec.round, client, rec.client_bytes, rec.client_bytes, rec.client_data_bytes, rec.client_data_bytes};
    total_up_ += row.bytes_up;
    total_down_ += row.bytes_down;
    total_data_up_ += row.data_bytes_up;
    total_data_down_ += row.data_bytes_down;
    rows_.push_back(row);
  }
}

std::vector<ClientState> build_clients(const ExperimentConfig& cfg) {
  cfg.validate();
  auto shards = build_shards(cfg);
  std::vector<ClientState> clients;
  clients.reserve(shards.size());
  for (std::size_t i = 0; i < shards.size(); ++i) {
    const std::uint64_t split_seed = derive_rng({cfg.data.seed, static_cast<std::uint64_t>(Stream::TrainTest), i})();
    auto [train, test] = split_train_test(shards[i], cfg.data.train_frac, split_seed);
    ClientState c;
    c.id = i;
    c.train = std::move(train);
    c.test = std::move(test);
    clients.push_back(std::move(c));
  }
  return clients;
}

std::string resolve_output_dir(const ExperimentConfig& cfg) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv("FSB_OUT_DIR"); env && *env) return env;
  fail(ErrorKind::Config, "output.dir: not set and FSB_OUT_DIR is empty");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  result.output_dir = resolve_output_dir(cfg);
  PrecisionScope precision(cfg.precision);

  std::vector<ClientState> clients = build_clients(cfg);
  for (const auto& c : clients) result.train_samples.push_back(c.sample_count());
  const Model model(cfg.model);
  const ParameterSet init = model.init_params(cfg.federation.seed);
  Federation fed(model, cfg.split_spec(), cfg.federation, init, std::move(clients));

  OutputGuard out(result.output_dir);
  {
    auto echo = out.open("config.resolved");
    echo << cfg.to_text();
    check_stream(echo, "config.resolved");
  }
  auto metrics = out.open("metrics.csv");
  auto ledger = out.open("ledger.csv");
  auto summary = out.open("summary.csv");
  metrics << "round,client_id,train_loss,test_metric,bytes_up,bytes_down\n";
  ledger << "round,client_id,bytes_up,bytes_down,data_bytes_up,data_bytes_down,cumulative_bytes\n";
  summary << "round,mean_train_loss,mean_test_metric_uniform,mean_test_metric_weighted,bytes_up,bytes_down,"
             "cumulative_bytes\n";

  std::uint64_t cumulative = 0;
  for (std::size_t t = 0; t < cfg.federation.rounds; ++t) {
    RoundRecord rec = fed.run_round(t);
    result.ledger.record(rec);
    double loss_sum = 0.0, metric_sum = 0.0, weighted = 0.0, weight = 0.0;
    for (std::size_t s = 0; s < rec.selected.size(); ++s) {
      const std::size_t id = rec.selected[s];
      const double n = static_cast<double>(result.train_samples[id]);
      metrics << t << ',' << id << ',' << fmt9(rec.train_loss[s]) << ',' << fmt9(rec.test_metric[s]) << ','
              << rec.client_bytes << ',' << rec.client_bytes << '\n';
      cumulative += 2 * rec.client_bytes;
      ledger << t << ',' << id << ',' << rec.client_bytes << ',' << rec.client_bytes << ',' << rec.client_data_bytes
             << ',' << rec.client_data_bytes << ',' << cumulative << '\n';
      loss_sum += rec.train_loss[s];
      metric_sum += rec.test_metric[s];
      weighted += n * rec.test_metric[s];
      weight += n;
    }
    const double S = static_cast<double>(rec.selected.size());
    summary << t << ',' << fmt9(loss_sum / S) << ',' << fmt9(metric_sum / S) << ',' << fmt9(weighted / weight) << ','
            << rec.bytes_up() << ',' << rec.bytes_down() << ',' << cumulative << '\n';
    check_stream(metrics, "metrics.csv");
    check_stream(ledger, "ledger.csv");
    check_stream(summary, "summary.csv");
    result.training.rounds.push_back(std::move(rec));
  }

  auto final_csv = out.open("final.csv");
  final_csv << "client_id,train_samples,test_samples,test_metric\n";
  double uniform = 0.0, weighted = 0.0, weight = 0.0;
  for (std::size_t i = 0; i < fed.clients().size(); ++i) {
    const double m = fed.evaluate_client(i);
    result.training.final_metric.push_back(m);
    const auto& c = fed.clients()[i];
    final_csv << i << ',' << c.train.size() << ',' << c.test.size() << ',' << fmt9(m) << '\n';
    uniform += m;
    weighted += static_cast<double>(c.train.size()) * m;
    weight += static_cast<double>(c.train.size());
    save_checkpoint(fed.client_model(i), out.track("client_" + client_tag(i) + ".fsbc").string());
  }
  check_stream(final_csv, "final.csv");
  result.final_mean_uniform = uniform / static_cast<double>(fed.clients().size());
  result.final_mean_weighted = weighted / weight;

  auto totals = out.open("final_summary.csv");
  totals << "mean_test_metric_uniform,mean_test_metric_weighted,total_bytes_up,total_bytes_down,total_data_bytes_up,"
            "total_data_bytes_down\n";
  totals << fmt9(result.final_mean_uniform) << ',' << fmt9(result.final_mean_weighted) << ','
         << result.ledger.total_up() << ',' << result.ledger.total_down() << ',' << result.ledger.total_data_up()
         << ',' << result.ledger.total_data_down() << '\n';
  check_stream(totals, "final_summary.csv");

  out.commit();
  return result;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const std::string& key,
                                const std::vector<std::string>& values) {
  if (values.empty()) fail(ErrorKind::Config, "sweep needs at least one value");
  const std::string full_key = key == "c" ? "federation.critical_layer" : key;
  const std::string short_key = full_key.substr(full_key.rfind('.') + 1);
  const fs::path base = resolve_output_dir(cfg);

  // Validate every point before running any of them.
  std::vector<ExperimentConfig> points;
  for (const auto& v : values) {
    ExperimentConfig point = cfg;
    apply_override(point, full_key, v);
    point.output_dir = (base / (short_key + "_" + v)).string();
    point.validate();
    points.push_back(std::move(point));
  }

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const ExperimentResult r = run_experiment(points[i]);
    rows.push_back({values[i], r.final_mean_uniform, r.final_mean_weighted, r.ledger.total_up() + r.ledger.total_down()});
  }

  std::error_code ec;
  fs::create_directories(base, ec);
  const fs::path path = base / "sweep.csv";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << short_key << ",final_mean_test_metric_uniform,final_mean_test_metric_weighted,total_bytes\n";
  for (const auto& r : rows)
    out << r.value << ',' << fmt9(r.final_mean_uniform) << ',' << fmt9(r.final_mean_weighted) << ',' << r.total_bytes
        << '\n';
  out.flush();
  if (!out) fail(ErrorKind::Io, "write failed for '" + path.string() + "'");
  return rows;
}

GradCheckReport run_gradcheck(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& gc = cfg.gradcheck;
  ModelConfig mc = cfg.model;
  mc.layers = gc.layers;
  mc.hidden = gc.hidden;
  mc.heads = gc.heads;
  mc.seq_len = gc.seq_len;
  const Model model(mc);

  LabeledDataset ds;
  if (mc.regression()) {
    RegressionTaskSpec spec{mc.vocab_size, mc.seq_len, gc.batch, cfg.data.seed};
    ds = generate_regression_task(spec);
  } else {
    ClassificationTaskSpec spec{mc.vocab_size, mc.num_classes, mc.seq_len, gc.batch, cfg.data.keyword_strength,
                                cfg.data.seed};
    ds = generate_classification_task(spec);
  }
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), 0);
  const Batch batch = make_batch(ds, all);

  PrecisionScope precision(gc.precision);
  const ParameterSet params = model.init_params(cfg.federation.seed);
  GradCheckOptions opts;
  opts.probes = gc.probes;
  opts.eps = gc.eps;
  opts.abs_floor = gc.abs_floor;
  opts.seed = cfg.federation.seed;
  return finite_diff_check(
      [&](Graph& g, const std::map<std::string, Var>& vars) { return model.loss(g, vars, batch); }, params, opts);
}

std::string partition_report(const ExperimentConfig& cfg) {
  const auto clients = build_clients(cfg);
  std::ostringstream out;
  char buf[128];
  for (const auto& c : clients) {
    const std::size_t total = c.train.size() + c.test.size();
    out << "client " << c.id << ": " << total << " samples (train " << c.train.size() << ", test " << c.test.size()
        << ")\n";
    if (cfg.data.task == TaskKind::Regression) {
      double lo = 5.0, hi = 0.0, sum = 0.0;
      for (const auto* ds : {&c.train, &c.test}) {
        for (const auto& s : ds->samples) {
          lo = std::min(lo, s.score);
          hi = std::max(hi, s.score);
          sum += s.score;
        }
      }
      std::snprintf(buf, sizeof buf, "  score min %.3f mean %.3f max %.3f\n", lo, sum / static_cast<double>(total), hi);
      out << buf;
      continue;
    }
    const auto tr = c.train.class_histogram();
    const auto te = c.test.class_histogram();
    const LabelDistScheme scheme(cfg.data.scheme);
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const std::size_t n = tr[k] + te[k];
      std::snprintf(buf, sizeof buf, "  class %zu: %5zu  %6.2f%%  (target %6.2f%%)  train %zu test %zu\n", k, n,
                    100.0 * static_cast<double>(n) / static_cast<double>(total), 100.0 * scheme.row(c.id)[k], tr[k],
                    te[k]);
      out << buf;
    }
  }
  return out.str();
}

}  // namespace fedsplit
