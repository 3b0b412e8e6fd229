// Exercises the shared library through its C header only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "fedsplit/fedsplit.h"

namespace fs = std::filesystem;

namespace {

const char* kTiny =
    "model.vocab_size = 40\nmodel.seq_len = 6\nmodel.hidden = 8\nmodel.heads = 2\nmodel.layers = 2\n"
    "model.ff_mult = 2\ndata.samples_per_client = 40\nfederation.rounds = 1\nfederation.local_epochs = 1\n"
    "federation.batch_size = 8\nfederation.lr = 0.05\n";

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(fsb_version()).size() > 0);
  CHECK(std::string(fsb_status_name(FSB_ERR_CONFIG)) == "config error");
}

TEST_CASE("config errors surface as status codes") {
  fsb_config* cfg = nullptr;
  CHECK(fsb_config_parse("federation.prox_lambda = -1\n", &cfg) == FSB_ERR_CONFIG);
  CHECK(cfg == nullptr);
  CHECK(std::string(fsb_last_error()).find("federation.prox_lambda") != std::string::npos);
  CHECK(fsb_config_load("/nonexistent.cfg", &cfg) == FSB_ERR_IO);
  CHECK(fsb_config_parse(nullptr, &cfg) == FSB_ERR_USAGE);

  REQUIRE(fsb_config_parse(kTiny, &cfg) == FSB_OK);
  CHECK(fsb_config_set(cfg, "federation.critical_layer", "3") == FSB_ERR_CONFIG);
  CHECK(fsb_config_set(cfg, "federation.critical_layer", "1") == FSB_OK);
  char* text = nullptr;
  REQUIRE(fsb_config_resolved(cfg, &text) == FSB_OK);
  CHECK(std::string(text).find("federation.critical_layer = 1\n") != std::string::npos);
  fsb_string_free(text);
  fsb_config_free(cfg);
}

TEST_CASE("run, inspect and gradcheck through the C API") {
  const fs::path dir = fs::temp_directory_path() / "fsb_capi_run";
  fs::remove_all(dir);
  fsb_config* cfg = nullptr;
  REQUIRE(fsb_config_parse(kTiny, &cfg) == FSB_OK);
  REQUIRE(fsb_config_set(cfg, "output.dir", dir.string().c_str()) == FSB_OK);

  fsb_result* r = nullptr;
  REQUIRE(fsb_run(cfg, &r) == FSB_OK);
  CHECK(fsb_result_rounds(r) == 1);
  CHECK(fsb_result_clients(r) == 3);
  CHECK(fsb_result_total_bytes(r) > fsb_result_total_data_bytes(r));
  const double m = fsb_result_final_mean(r, 0);
  CHECK(m >= 0.0);
  CHECK(m <= 1.0);
  fsb_result_free(r);

  fsb_checkpoint* ck = nullptr;
  REQUIRE(fsb_checkpoint_open((dir / "client_00.fsbc").string().c_str(), &ck) == FSB_OK);
  CHECK(fsb_checkpoint_count(ck) == 2 + 16 * 2 + 2);
  const char* name = nullptr;
  int dtype = -1;
  size_t rank = 0;
  const uint64_t* dims = nullptr;
  REQUIRE(fsb_checkpoint_entry(ck, 0, &name, &dtype, &rank, &dims) == FSB_OK);
  CHECK(std::string(name) == "emb.pos");
  CHECK(dtype == 0);
  CHECK(rank == 2);
  CHECK(dims[0] == 6);
  CHECK(fsb_checkpoint_entry(ck, 999, &name, &dtype, &rank, &dims) == FSB_ERR_INDEX);
  fsb_checkpoint_free(ck);
  CHECK(fsb_checkpoint_open((dir / "metrics.csv").string().c_str(), &ck) == FSB_ERR_FORMAT);

  double err = 1.0, limit = 0.0;
  CHECK(fsb_gradcheck(cfg, &err, &limit) == FSB_OK);
  CHECK(err < limit);
  REQUIRE(fsb_config_set(cfg, "gradcheck.threshold", "1e-300") == FSB_OK);
  CHECK(fsb_gradcheck(cfg, &err, &limit) == FSB_ERR_NUMERIC);

  char* report = nullptr;
  REQUIRE(fsb_partition_report(cfg, &report) == FSB_OK);
  CHECK(std::string(report).find("client 2") != std::string::npos);
  fsb_string_free(report);
  fsb_config_free(cfg);
  fs::remove_all(dir);
}

TEST_CASE("divergence maps to its own status") {
  fsb_config* cfg = nullptr;
  REQUIRE(fsb_config_parse(kTiny, &cfg) == FSB_OK);
  const fs::path dir = fs::temp_directory_path() / "fsb_capi_div";
  REQUIRE(fsb_config_set(cfg, "output.dir", dir.string().c_str()) == FSB_OK);
  REQUIRE(fsb_config_set(cfg, "federation.lr", "1e30") == FSB_OK);
  fsb_result* r = nullptr;
  CHECK(fsb_run(cfg, &r) == FSB_ERR_DIVERGENCE);
  CHECK(r == nullptr);
  CHECK_FALSE(fs::exists(dir));
  fsb_config_free(cfg);
}
