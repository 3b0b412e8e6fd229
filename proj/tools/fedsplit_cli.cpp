// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end over the C API.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedsplit/fedsplit.h"

namespace {

// 0 success, 2 config, 3 divergence, 4 I/O or file format, 1 anything else.
int exit_code(fsb_status s) {
  switch (s) {
    case FSB_OK: return 0;
    case FSB_ERR_CONFIG:
    case FSB_ERR_INFEASIBLE: return 2;
    case FSB_ERR_DIVERGENCE: return 3;
    case FSB_ERR_IO:
    case FSB_ERR_FORMAT: return 4;
    default: return 1;
  }
}

int report(fsb_status s) {
  if (s != FSB_OK) std::fprintf(stderr, "fedsplit: %s\n", fsb_last_error());
  return exit_code(s);
}

struct ConfigHandle {
  fsb_config* cfg = nullptr;
  ~ConfigHandle() { fsb_config_free(cfg); }
};

fsb_status load(const std::string& path, const std::vector<std::string>& sets, ConfigHandle& h) {
  fsb_status s = fsb_config_load(path.c_str(), &h.cfg);
  for (const auto& kv : sets) {
    if (s != FSB_OK) break;
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "fedsplit: --set expects key=value, got '%s'\n", kv.c_str());
      return FSB_ERR_USAGE;
    }
    s = fsb_config_set(h.cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
  }
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

int cmd_run(const std::string& path, const std::vector<std::string>& sets, bool print_config) {
  ConfigHandle h;
  if (fsb_status s = load(path, sets, h); s != FSB_OK) return s == FSB_ERR_USAGE ? 1 : report(s);
  if (print_config) {
    char* text = nullptr;
    if (fsb_config_resolved(h.cfg, &text) == FSB_OK) std::fputs(text, stdout);
    fsb_string_free(text);
  }
  fsb_result* r = nullptr;
  if (fsb_status s = fsb_run(h.cfg, &r); s != FSB_OK) return report(s);
  std::printf("output: %s\n", fsb_result_output_dir(r));
  for (size_t i = 0; i < fsb_result_clients(r); ++i)
    std::printf("client %zu final test metric: %.6f\n", i, fsb_result_client_metric(r, i));
  std::printf("mean test metric: uniform %.6f, weighted %.6f\n", fsb_result_final_mean(r, 0),
              fsb_result_final_mean(r, 1));
  std::printf("total bytes: %llu (payload data %llu)\n", static_cast<unsigned long long>(fsb_result_total_bytes(r)),
              static_cast<unsigned long long>(fsb_result_total_data_bytes(r)));
  fsb_result_free(r);
  return 0;
}

int cmd_gradcheck(const std::string& path, const std::vector<std::string>& sets) {
  ConfigHandle h;
  if (fsb_status s = load(path, sets, h); s != FSB_OK) return s == FSB_ERR_USAGE ? 1 : report(s);
  double err = 0.0, limit = 0.0;
  const fsb_status s = fsb_gradcheck(h.cfg, &err, &limit);
  if (s == FSB_OK || s == FSB_ERR_NUMERIC) {
    std::printf("max relative error: %.3e (threshold %.1e) %s\n", err, limit, s == FSB_OK ? "ok" : "FAILED");
  }
  return report(s);
}

int cmd_partition(const std::string& path, const std::vector<std::string>& sets) {
  ConfigHandle h;
  if (fsb_status s = load(path, sets, h); s != FSB_OK) return s == FSB_ERR_USAGE ? 1 : report(s);
  char* text = nullptr;
  const fsb_status s = fsb_partition_report(h.cfg, &text);
  if (s == FSB_OK) std::fputs(text, stdout);
  fsb_string_free(text);
  return report(s);
}

int cmd_inspect(const std::string& path) {
  fsb_checkpoint* ck = nullptr;
  if (fsb_status s = fsb_checkpoint_open(path.c_str(), &ck); s != FSB_OK) return report(s);
  for (size_t i = 0; i < fsb_checkpoint_count(ck); ++i) {
    const char* name = nullptr;
    int dtype = 0;
    size_t rank = 0;
    const uint64_t* dims = nullptr;
    fsb_checkpoint_entry(ck, i, &name, &dtype, &rank, &dims);
    std::string shape = "[";
    for (size_t k = 0; k < rank; ++k) shape += (k ? " x " : "") + std::to_string(dims[k]);
    shape += "]";
    std::printf("%-24s %-16s %s\n", name, shape.c_str(), dtype == 0 ? "f32" : "f16");
  }
  fsb_checkpoint_free(ck);
  return 0;
}

int cmd_sweep(const std::string& path, const std::vector<std::string>& sets, const std::string& vary) {
  const auto eq = vary.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == vary.size()) {
    std::fprintf(stderr, "fedsplit: --vary expects key=v1,v2,..., got '%s'\n", vary.c_str());
    return 1;
  }
  const std::string key = vary.substr(0, eq);
  const auto values = split_list(vary.substr(eq + 1));
  ConfigHandle h;
  if (fsb_status s = load(path, sets, h); s != FSB_OK) return s == FSB_ERR_USAGE ? 1 : report(s);
  std::vector<const char*> ptrs;
  for (const auto& v : values) ptrs.push_back(v.c_str());
  std::vector<double> means(values.size());
  const fsb_status s = fsb_sweep(h.cfg, key.c_str(), ptrs.data(), ptrs.size(), means.data());
  if (s == FSB_OK) {
    for (size_t i = 0; i < values.size(); ++i)
      std::printf("%s=%s mean test metric %.6f\n", key.c_str(), values[i].c_str(), means[i]);
  }
  return report(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated split-learning simulator"};
  app.set_version_flag("--version", std::string(fsb_version()));
  app.require_subcommand(1);

  std::string config, checkpoint, vary;
  std::vector<std::string> sets;
  bool print_config = false;

  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("config", config, "Config file")->required();
  run->add_option("--set", sets, "Override a config key (key=value)");
  run->add_flag("--print-config", print_config, "Print the resolved config first");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  gradcheck->add_option("config", config, "Config file")->required();
  gradcheck->add_option("--set", sets, "Override a config key (key=value)");

  auto* partition = app.add_subcommand("partition", "Print client shard histograms without training");
  partition->add_option("config", config, "Config file")->required();
  partition->add_option("--set", sets, "Override a config key (key=value)");

  auto* inspect = app.add_subcommand("inspect", "List checkpoint entries");
  inspect->add_option("checkpoint", checkpoint, "FSBC checkpoint file")->required();

  auto* sweep = app.add_subcommand("sweep", "Run one experiment per value of a config key");
  sweep->add_option("config", config, "Config file")->required();
  sweep->add_option("--vary", vary, "key=v1,v2,... (c is short for federation.critical_layer)")->required();
  sweep->add_option("--set", sets, "Override a config key (key=value)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (run->parsed()) return cmd_run(config, sets, print_config);
  if (gradcheck->parsed()) return cmd_gradcheck(config, sets);
  if (partition->parsed()) return cmd_partition(config, sets);
  if (inspect->parsed()) return cmd_inspect(checkpoint);
  if (sweep->parsed()) return cmd_sweep(config, sets, vary);
  return 1;
}
