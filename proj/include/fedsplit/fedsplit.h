/* Copyright 2026 The FedSplit Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the federated split-learning simulator.
 *
 * Every fallible call returns an fsb_status; on failure the message is
 * available from fsb_last_error() until the next call on the same thread.
 * Handles are opaque and owned by the caller; release them with the matching
 * *_free function. Strings returned through char** are freed with
 * fsb_string_free.
 */
#ifndef FEDSPLIT_FEDSPLIT_H
#define FEDSPLIT_FEDSPLIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(FEDSPLIT_BUILDING_LIBRARY)
#    define FSB_API __declspec(dllexport)
#  else
#    define FSB_API __declspec(dllimport)
#  endif
#else
#  define FSB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fsb_status {
  FSB_OK = 0,
  FSB_ERR_USAGE = 1,
  FSB_ERR_CONFIG = 2,
  FSB_ERR_DIVERGENCE = 3,
  FSB_ERR_IO = 4,
  FSB_ERR_FORMAT = 5,
  FSB_ERR_DIMENSION = 6,
  FSB_ERR_INDEX = 7,
  FSB_ERR_NAME = 8,
  FSB_ERR_NUMERIC = 9,
  FSB_ERR_INFEASIBLE = 10,
  FSB_ERR_INTERNAL = 11
} fsb_status;

typedef struct fsb_config fsb_config;
typedef struct fsb_result fsb_result;
typedef struct fsb_checkpoint fsb_checkpoint;

FSB_API const char* fsb_version(void);
FSB_API const char* fsb_last_error(void);
FSB_API const char* fsb_status_name(fsb_status status);

/* Configuration. fsb_config_set re-resolves defaults and revalidates; on
 * failure the handle keeps its previous state. */
FSB_API fsb_status fsb_config_load(const char* path, fsb_config** out);
FSB_API fsb_status fsb_config_parse(const char* text, fsb_config** out);
FSB_API fsb_status fsb_config_set(fsb_config* cfg, const char* key, const char* value);
FSB_API fsb_status fsb_config_resolved(const fsb_config* cfg, char** out_text);
FSB_API void fsb_config_free(fsb_config* cfg);

/* Runs one experiment and writes its outputs. */
FSB_API fsb_status fsb_run(const fsb_config* cfg, fsb_result** out);
FSB_API size_t fsb_result_rounds(const fsb_result* r);
FSB_API size_t fsb_result_clients(const fsb_result* r);
FSB_API double fsb_result_client_metric(const fsb_result* r, size_t client);
/* weighted = 0: uniform mean over clients; otherwise weighted by train size. */
FSB_API double fsb_result_final_mean(const fsb_result* r, int weighted);
FSB_API uint64_t fsb_result_total_bytes(const fsb_result* r);
FSB_API uint64_t fsb_result_total_data_bytes(const fsb_result* r);
FSB_API const char* fsb_result_output_dir(const fsb_result* r);
FSB_API void fsb_result_free(fsb_result* r);

/* One run per value; out_uniform (may be NULL) receives n final means. */
FSB_API fsb_status fsb_sweep(const fsb_config* cfg, const char* key, const char* const* values, size_t n,
                             double* out_uniform);

/* Finite-difference check of the configured gradcheck model. Returns
 * FSB_ERR_NUMERIC when the error exceeds the configured threshold. */
FSB_API fsb_status fsb_gradcheck(const fsb_config* cfg, double* max_rel_error, double* threshold);

FSB_API fsb_status fsb_partition_report(const fsb_config* cfg, char** out_text);

/* Checkpoint inspection. dtype is 0 for f32, 1 for f16. */
FSB_API fsb_status fsb_checkpoint_open(const char* path, fsb_checkpoint** out);
FSB_API size_t fsb_checkpoint_count(const fsb_checkpoint* ck);
FSB_API fsb_status fsb_checkpoint_entry(const fsb_checkpoint* ck, size_t index, const char** name, int* dtype,
                                        size_t* rank, const uint64_t** dims);
FSB_API void fsb_checkpoint_free(fsb_checkpoint* ck);

FSB_API void fsb_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* FEDSPLIT_FEDSPLIT_H */
