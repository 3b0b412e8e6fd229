// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fedsplit/data.hpp"
#include "fedsplit/error.hpp"
#include "fedsplit/experiment.hpp"

namespace fedsplit {
namespace {

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end || v.empty()) fail(ErrorKind::Config, key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end || v.empty()) fail(ErrorKind::Config, key + ": expected an unsigned integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end || v.empty()) fail(ErrorKind::Config, key + ": expected a number, got '" + v + "'");
  if (!std::isfinite(out)) fail(ErrorKind::Config, key + ": must be finite");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  fail(ErrorKind::Config, key + ": expected true/false, got '" + v + "'");
}

Precision parse_precision(const std::string& key, const std::string& v) {
  if (v == "f32" || v == "32") return Precision::F32;
  if (v == "f64" || v == "64") return Precision::F64;
  fail(ErrorKind::Config, key + ": expected f32 or f64, got '" + v + "'");
}

const char* precision_name(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

// "80%/20%; 0.5/0.5" -> rows. Entries with a % suffix are divided by 100.
std::vector<std::vector<double>> parse_scheme(const std::string& key, const std::string& v) {
  std::vector<std::vector<double>> rows;
  std::stringstream rs(v);
  std::string row;
  while (std::getline(rs, row, ';')) {
    row = trim(row);
    if (row.empty()) continue;
    std::vector<double> cells;
    std::stringstream cs(row);
    std::string cell;
    while (std::getline(cs, cell, '/')) {
      cell = trim(cell);
      double scale = 1.0;
      if (!cell.empty() && cell.back() == '%') {
        cell.pop_back();
        cell = trim(cell);
        scale = 0.01;
      }
      const double x = parse_double(key, cell) * scale;
      if (x < 0.0) fail(ErrorKind::Config, key + ": fractions must be >= 0");
      cells.push_back(x);
    }
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) fail(ErrorKind::Config, key + ": needs at least one row");
  return rows;
}

std::string scheme_text(const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i) out += "; ";
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      if (j) out += "/";
      out += fmt_double(rows[i][j]);
    }
  }
  return out;
}

struct KeyDef {
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define FSB_SIZE_KEY(path)                                                                           \
  KeyDef {                                                                                           \
    [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.path = parse_size(k, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.path); }                              \
  }
#define FSB_DOUBLE_KEY(path)                                                                           \
  KeyDef {                                                                                             \
    [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.path = parse_double(k, v); }, \
        [](const ExperimentConfig& c) { return fmt_double(c.path); }                                    \
  }
#define FSB_BOOL_KEY(path)                                                                           \
  KeyDef {                                                                                           \
    [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.path = parse_bool(k, v); }, \
        [](const ExperimentConfig& c) { return std::string(c.path ? "true" : "false"); }              \
  }
#define FSB_U64_KEY(path)                                                                            \
  KeyDef {                                                                                           \
    [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.path = parse_u64(k, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.path); }                              \
  }

const std::map<std::string, KeyDef>& key_table() {
  static const std::map<std::string, KeyDef> table = {
      {"model.vocab_size", FSB_SIZE_KEY(model.vocab_size)},
      {"model.seq_len", FSB_SIZE_KEY(model.seq_len)},
      {"model.hidden", FSB_SIZE_KEY(model.hidden)},
      {"model.heads", FSB_SIZE_KEY(model.heads)},
      {"model.layers", FSB_SIZE_KEY(model.layers)},
      {"model.ff_mult", FSB_SIZE_KEY(model.ff_mult)},
      {"model.num_classes", FSB_SIZE_KEY(model.num_classes)},
      {"federation.clients", FSB_SIZE_KEY(federation.clients)},
      {"federation.clients_per_round", FSB_SIZE_KEY(federation.clients_per_round)},
      {"federation.rounds", FSB_SIZE_KEY(federation.rounds)},
      {"federation.local_epochs", FSB_SIZE_KEY(federation.local_epochs)},
      {"federation.batch_size", FSB_SIZE_KEY(federation.batch_size)},
      {"federation.lr", FSB_DOUBLE_KEY(federation.lr)},
      {"federation.aggregator",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          try {
            c.federation.aggregator = parse_aggregator(v);
          } catch (const Error&) {
            fail(ErrorKind::Config, k + ": expected fedavg, fedprox or fedadam, got '" + v + "'");
          }
        },
        [](const ExperimentConfig& c) { return std::string(to_string(c.federation.aggregator)); }}},
      {"federation.prox_lambda", FSB_DOUBLE_KEY(federation.prox_lambda)},
      {"federation.server_lr", FSB_DOUBLE_KEY(federation.server_lr)},
      {"federation.beta1", FSB_DOUBLE_KEY(federation.beta1)},
      {"federation.beta2", FSB_DOUBLE_KEY(federation.beta2)},
      {"federation.adam_eps", FSB_DOUBLE_KEY(federation.adam_eps)},
      {"federation.quantize", FSB_BOOL_KEY(federation.quantize)},
      {"federation.strict_f16_accumulate", FSB_BOOL_KEY(federation.strict_f16_accumulate)},
      {"federation.seed", FSB_U64_KEY(federation.seed)},
      {"federation.threads", FSB_SIZE_KEY(federation.threads)},
      {"federation.critical_layer", FSB_SIZE_KEY(critical_layer)},
      {"federation.head_global",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          if (v == "auto")
            c.head_global.reset();
          else
            c.head_global = parse_bool(k, v);
        },
        [](const ExperimentConfig& c) {
          return std::string(!c.head_global ? "auto" : (*c.head_global ? "true" : "false"));
        }}},
      {"data.task",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          if (v == "classification")
            c.data.task = TaskKind::Classification;
          else if (v == "regression")
            c.data.task = TaskKind::Regression;
          else
            fail(ErrorKind::Config, k + ": expected classification or regression, got '" + v + "'");
        },
        [](const ExperimentConfig& c) {
          return std::string(c.data.task == TaskKind::Classification ? "classification" : "regression");
        }}},
      {"data.scheme",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.scheme = parse_scheme(k, v); },
        [](const ExperimentConfig& c) { return scheme_text(c.data.scheme); }}},
      {"data.samples_per_client", FSB_SIZE_KEY(data.samples_per_client)},
      {"data.keyword_strength", FSB_DOUBLE_KEY(data.keyword_strength)},
      {"data.train_frac", FSB_DOUBLE_KEY(data.train_frac)},
      {"data.seed", FSB_U64_KEY(data.seed)},
      {"output.dir",
       {[](ExperimentConfig& c, const std::string&, const std::string& v) { c.output_dir = v; },
        [](const ExperimentConfig& c) { return c.output_dir; }}},
      {"runtime.precision",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) { c.precision = parse_precision(k, v); },
        [](const ExperimentConfig& c) { return std::string(precision_name(c.precision)); }}},
      {"gradcheck.layers", FSB_SIZE_KEY(gradcheck.layers)},
      {"gradcheck.hidden", FSB_SIZE_KEY(gradcheck.hidden)},
      {"gradcheck.heads", FSB_SIZE_KEY(gradcheck.heads)},
      {"gradcheck.seq_len", FSB_SIZE_KEY(gradcheck.seq_len)},
      {"gradcheck.batch", FSB_SIZE_KEY(gradcheck.batch)},
      {"gradcheck.probes", FSB_SIZE_KEY(gradcheck.probes)},
      {"gradcheck.eps", FSB_DOUBLE_KEY(gradcheck.eps)},
      {"gradcheck.abs_floor", FSB_DOUBLE_KEY(gradcheck.abs_floor)},
      {"gradcheck.threshold", FSB_DOUBLE_KEY(gradcheck.threshold)},
      {"gradcheck.precision",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          c.gradcheck.precision = parse_precision(k, v);
        },
        [](const ExperimentConfig& c) { return std::string(precision_name(c.gradcheck.precision)); }}},
  };
  return table;
}

#undef FSB_SIZE_KEY
#undef FSB_DOUBLE_KEY
#undef FSB_BOOL_KEY
#undef FSB_U64_KEY

// Message without the leading "config error: " so wrapped errors read once.
std::string detail(const Error& e) {
  std::string m = e.what();
  const std::string prefix = std::string(to_string(ErrorKind::Config)) + ": ";
  if (m.starts_with(prefix)) m.erase(0, prefix.size());
  return m;
}

void require(bool ok, const std::string& field, const std::string& constraint) {
  if (!ok) fail(ErrorKind::Config, field + ": " + constraint);
}

}  // namespace

void ExperimentConfig::validate() const {
  // Model and federation fields carry their own messages; rethrow them as
  // config errors so the exit code is consistent.
  try {
    model.validate();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    fail(ErrorKind::Config, std::string("model: ") + e.what());
  }
  try {
    federation.validate();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    fail(ErrorKind::Config, std::string("federation: ") + e.what());
  }
  require(critical_layer <= model.layers, "federation.critical_layer",
          "must be <= model.layers (" + std::to_string(model.layers) + "), got " + std::to_string(critical_layer));
  require(data.samples_per_client >= 2, "data.samples_per_client", "must be >= 2");
  require(data.train_frac > 0.0 && data.train_frac < 1.0, "data.train_frac", "must lie in (0, 1)");
  if (data.task == TaskKind::Classification) {
    require(!model.regression(), "model.num_classes", "must be >= 2 for a classification task");
    require(data.scheme.size() == federation.clients, "data.scheme",
            "needs one row per client (federation.clients = " + std::to_string(federation.clients) + "), got " +
                std::to_string(data.scheme.size()));
    for (std::size_t i = 0; i < data.scheme.size(); ++i)
      require(data.scheme[i].size() == model.num_classes, "data.scheme",
              "row " + std::to_string(i) + " needs " + std::to_string(model.num_classes) + " entries (model.num_classes)");
    try {
      LabelDistScheme check(data.scheme);
      (void)check;
    } catch (const Error& e) {
      fail(ErrorKind::Config, std::string("data.scheme: ") + e.what());
    }
    require(data.keyword_strength > 0.5 && data.keyword_strength <= 1.0, "data.keyword_strength",
            "must lie in (0.5, 1]");
    require(model.vocab_size >= 1 + kKeywordsPerClass * model.num_classes + kMinBackgroundTokens, "model.vocab_size",
            "too small for " + std::to_string(model.num_classes) + " keyword classes");
  } else {
    require(model.regression(), "model.num_classes", "must be 1 for a regression task");
    require(model.vocab_size >= 9 + kMinBackgroundTokens, "model.vocab_size", "too small for the regression task");
  }
  require(gradcheck.layers >= 1, "gradcheck.layers", "must be >= 1");
  require(gradcheck.hidden >= 1 && gradcheck.heads >= 1 && gradcheck.hidden % gradcheck.heads == 0, "gradcheck.hidden",
          "must be a positive multiple of gradcheck.heads");
  require(gradcheck.seq_len >= 1, "gradcheck.seq_len", "must be >= 1");
  require(gradcheck.batch >= 1, "gradcheck.batch", "must be >= 1");
  require(gradcheck.probes >= 1, "gradcheck.probes", "must be >= 1");
  require(gradcheck.eps > 0.0, "gradcheck.eps", "must be > 0");
  require(gradcheck.abs_floor > 0.0, "gradcheck.abs_floor", "must be > 0");
  require(gradcheck.threshold > 0.0, "gradcheck.threshold", "must be > 0");
}

SplitSpec ExperimentConfig::split_spec() const { return SplitSpec{model.layers, critical_layer, head_global}; }

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& [key, def] : key_table()) out += key + " = " + def.get(*this) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, def] : key_table()) keys.push_back(key);
  return keys;
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = key_table();
  auto it = table.find(key);
  if (it == table.end()) fail(ErrorKind::Config, "unknown key '" + key + "'");
  it->second.set(cfg, key, trim(value));
}

ExperimentConfig parse_config(const std::string& text, const std::vector<std::pair<std::string, std::string>>& overrides) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::Config, "line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!seen.insert(key).second) fail(ErrorKind::Config, "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    try {
      apply_override(cfg, key, value);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Config) throw;
      fail(ErrorKind::Config, "line " + std::to_string(lineno) + ": " + detail(e));
    }
  }
  for (const auto& [key, value] : overrides) {
    apply_override(cfg, key, value);
    seen.insert(key);
  }
  // Class count and client count follow the scheme unless given explicitly.
  if (cfg.data.task == TaskKind::Regression) {
    if (!seen.contains("model.num_classes")) cfg.model.num_classes = 1;
  } else if (!cfg.data.scheme.empty()) {
    if (!seen.contains("model.num_classes")) cfg.model.num_classes = cfg.data.scheme.front().size();
    if (!seen.contains("federation.clients")) cfg.federation.clients = cfg.data.scheme.size();
  }
  if (!seen.contains("federation.critical_layer")) cfg.critical_layer = cfg.model.layers / 2;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Config) throw;
    fail(ErrorKind::Config, path + ": " + detail(e));
  }
}

}  // namespace fedsplit
