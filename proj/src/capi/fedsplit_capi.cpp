// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsplit/fedsplit.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fedsplit/error.hpp"
#include "fedsplit/experiment.hpp"
#include "fedsplit/quant.hpp"

struct fsb_config {
  std::string text;
  std::vector<std::pair<std::string, std::string>> overrides;
  fedsplit::ExperimentConfig cfg;
};

struct fsb_result {
  fedsplit::ExperimentResult result;
};

struct fsb_checkpoint {
  struct Entry {
    std::string name;
    int dtype;
    std::vector<std::uint64_t> dims;
  };
  std::vector<Entry> entries;
};

namespace {

thread_local std::string g_last_error;

fsb_status status_for(fedsplit::ErrorKind kind) {
  using fedsplit::ErrorKind;
  switch (kind) {
    case ErrorKind::Config: return FSB_ERR_CONFIG;
    case ErrorKind::Divergence: return FSB_ERR_DIVERGENCE;
    case ErrorKind::Io: return FSB_ERR_IO;
    case ErrorKind::Format: return FSB_ERR_FORMAT;
    case ErrorKind::Dimension: return FSB_ERR_DIMENSION;
    case ErrorKind::Index: return FSB_ERR_INDEX;
    case ErrorKind::Name: return FSB_ERR_NAME;
    case ErrorKind::Numeric: return FSB_ERR_NUMERIC;
    case ErrorKind::Infeasible: return FSB_ERR_INFEASIBLE;
  }
  return FSB_ERR_INTERNAL;
}

template <class F>
fsb_status guarded(F&& body) {
  g_last_error.clear();
  try {
    return body();
  } catch (const fedsplit::Error& e) {
    g_last_error = e.what();
    return status_for(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return FSB_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FSB_ERR_INTERNAL;
  }
}

fsb_status usage(const char* msg) {
  g_last_error = msg;
  return FSB_ERR_USAGE;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* fsb_version(void) { return "1.0.0"; }

const char* fsb_last_error(void) { return g_last_error.c_str(); }

const char* fsb_status_name(fsb_status status) {
  switch (status) {
    case FSB_OK: return "ok";
    case FSB_ERR_USAGE: return "usage error";
    case FSB_ERR_CONFIG: return "config error";
    case FSB_ERR_DIVERGENCE: return "divergence";
    case FSB_ERR_IO: return "I/O error";
    case FSB_ERR_FORMAT: return "format error";
    case FSB_ERR_DIMENSION: return "dimension error";
    case FSB_ERR_INDEX: return "index error";
    case FSB_ERR_NAME: return "name error";
    case FSB_ERR_NUMERIC: return "numeric error";
    case FSB_ERR_INFEASIBLE: return "infeasible partition";
    case FSB_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

fsb_status fsb_config_parse(const char* text, fsb_config** out) {
  if (!text || !out) return usage("fsb_config_parse: null argument");
  return guarded([&] {
    auto h = std::make_unique<fsb_config>();
    h->text = text;
    h->cfg = fedsplit::parse_config(h->text);
    *out = h.release();
    return FSB_OK;
  });
}

fsb_status fsb_config_load(const char* path, fsb_config** out) {
  if (!path || !out) return usage("fsb_config_load: null argument");
  return guarded([&] {
    std::ifstream in(path, std::ios::binary);
    if (!in) fedsplit::fail(fedsplit::ErrorKind::Io, std::string("cannot open config '") + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    auto h = std::make_unique<fsb_config>();
    h->text = ss.str();
    try {
      h->cfg = fedsplit::parse_config(h->text);
    } catch (const fedsplit::Error& e) {
      throw fedsplit::Error(e.kind(), std::string(path) + ": " + e.what());
    }
    *out = h.release();
    return FSB_OK;
  });
}

fsb_status fsb_config_set(fsb_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return usage("fsb_config_set: null argument");
  return guarded([&] {
    auto overrides = cfg->overrides;
    overrides.emplace_back(key, value);
    cfg->cfg = fedsplit::parse_config(cfg->text, overrides);
    cfg->overrides = std::move(overrides);
    return FSB_OK;
  });
}

fsb_status fsb_config_resolved(const fsb_config* cfg, char** out_text) {
  if (!cfg || !out_text) return usage("fsb_config_resolved: null argument");
  return guarded([&] {
    *out_text = dup_string(cfg->cfg.to_text());
    return FSB_OK;
  });
}

void fsb_config_free(fsb_config* cfg) { delete cfg; }

fsb_status fsb_run(const fsb_config* cfg, fsb_result** out) {
  if (!cfg || !out) return usage("fsb_run: null argument");
  return guarded([&] {
    auto h = std::make_unique<fsb_result>();
    h->result = fedsplit::run_experiment(cfg->cfg);
    *out = h.release();
    return FSB_OK;
  });
}

size_t fsb_result_rounds(const fsb_result* r) { return r ? r->result.training.rounds.size() : 0; }

size_t fsb_result_clients(const fsb_result* r) { return r ? r->result.training.final_metric.size() : 0; }

double fsb_result_client_metric(const fsb_result* r, size_t client) {
  if (!r || client >= r->result.training.final_metric.size()) return 0.0;
  return r->result.training.final_metric[client];
}

double fsb_result_final_mean(const fsb_result* r, int weighted) {
  if (!r) return 0.0;
  return weighted ? r->result.final_mean_weighted : r->result.final_mean_uniform;
}

uint64_t fsb_result_total_bytes(const fsb_result* r) {
  return r ? r->result.ledger.total_up() + r->result.ledger.total_down() : 0;
}

uint64_t fsb_result_total_data_bytes(const fsb_result* r) {
  return r ? r->result.ledger.total_data_up() + r->result.ledger.total_data_down() : 0;
}

const char* fsb_result_output_dir(const fsb_result* r) { return r ? r->result.output_dir.c_str() : ""; }

void fsb_result_free(fsb_result* r) { delete r; }

fsb_status fsb_sweep(const fsb_config* cfg, const char* key, const char* const* values, size_t n,
                     double* out_uniform) {
  if (!cfg || !key || (!values && n > 0)) return usage("fsb_sweep: null argument");
  return guarded([&] {
    std::vector<std::string> vals;
    for (size_t i = 0; i < n; ++i) {
      if (!values[i]) fedsplit::fail(fedsplit::ErrorKind::Config, "sweep value " + std::to_string(i) + " is null");
      vals.emplace_back(values[i]);
    }
    const auto rows = fedsplit::run_sweep(cfg->cfg, key, vals);
    if (out_uniform)
      for (size_t i = 0; i < rows.size(); ++i) out_uniform[i] = rows[i].final_mean_uniform;
    return FSB_OK;
  });
}

fsb_status fsb_gradcheck(const fsb_config* cfg, double* max_rel_error, double* threshold) {
  if (!cfg) return usage("fsb_gradcheck: null argument");
  return guarded([&] {
    const auto report = fedsplit::run_gradcheck(cfg->cfg);
    const double limit = cfg->cfg.gradcheck.threshold;
    if (max_rel_error) *max_rel_error = report.max_rel_error;
    if (threshold) *threshold = limit;
    if (!(report.max_rel_error < limit)) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "max relative error %.3e at %s[%zu] exceeds %.3e", report.max_rel_error,
                    report.worst_param.c_str(), report.worst_index, limit);
      g_last_error = buf;
      return FSB_ERR_NUMERIC;
    }
    return FSB_OK;
  });
}

fsb_status fsb_partition_report(const fsb_config* cfg, char** out_text) {
  if (!cfg || !out_text) return usage("fsb_partition_report: null argument");
  return guarded([&] {
    *out_text = dup_string(fedsplit::partition_report(cfg->cfg));
    return FSB_OK;
  });
}

fsb_status fsb_checkpoint_open(const char* path, fsb_checkpoint** out) {
  if (!path || !out) return usage("fsb_checkpoint_open: null argument");
  return guarded([&] {
    auto h = std::make_unique<fsb_checkpoint>();
    for (const auto& e : fedsplit::inspect_checkpoint(path)) {
      h->entries.push_back({e.name, static_cast<int>(e.dtype), std::vector<std::uint64_t>(e.shape.begin(), e.shape.end())});
    }
    *out = h.release();
    return FSB_OK;
  });
}

size_t fsb_checkpoint_count(const fsb_checkpoint* ck) { return ck ? ck->entries.size() : 0; }

fsb_status fsb_checkpoint_entry(const fsb_checkpoint* ck, size_t index, const char** name, int* dtype, size_t* rank,
                                const uint64_t** dims) {
  if (!ck) return usage("fsb_checkpoint_entry: null handle");
  if (index >= ck->entries.size()) {
    g_last_error = "index error: checkpoint entry " + std::to_string(index) + " out of range";
    return FSB_ERR_INDEX;
  }
  const auto& e = ck->entries[index];
  if (name) *name = e.name.c_str();
  if (dtype) *dtype = e.dtype;
  if (rank) *rank = e.dims.size();
  if (dims) *dims = e.dims.data();
  return FSB_OK;
}

void fsb_checkpoint_free(fsb_checkpoint* ck) { delete ck; }

void fsb_string_free(char* s) { std::free(s); }

}  // extern "C"
