/* SPDX-License-Identifier: Apache-2.0 */
#ifndef RDA_RDA_H
#define RDA_RDA_H

/*
 * C interface to the RDA laboratory. Structured results come back as
 * UTF-8 JSON strings owned by the caller (release with rda_string_free).
 * Every call returns an rda_status; on failure rda_last_error() holds a
 * message for the calling thread.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32) || defined(__CYGWIN__)
#  if defined(RDA_BUILDING_LIBRARY)
#    define RDA_API __declspec(dllexport)
#  else
#    define RDA_API __declspec(dllimport)
#  endif
#elif defined(__GNUC__) && __GNUC__ >= 4
#  define RDA_API __attribute__((visibility("default")))
#else
#  define RDA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rda_status {
  RDA_OK = 0,
  RDA_ERR_CONFIG = 2,
  RDA_ERR_NUMERICAL = 3,
  RDA_ERR_ASSERTION = 4,
  RDA_ERR_USAGE = 5,
  RDA_ERR_IO = 6,
  RDA_ERR_PROTOCOL = 7,
  RDA_ERR_INTERNAL = 9
} rda_status;

typedef struct rda_trainer rda_trainer;

RDA_API const char* rda_version(void);
RDA_API const char* rda_last_error(void);
RDA_API void rda_string_free(char* s);

/* Experiment config JSON (dataset, source, train, seeds, output_dir, ...).
 * Writes per-seed CSVs/plots and summary.json; returns the summary. */
RDA_API rda_status rda_run_experiment(const char* config_json, char** summary_json);

/* methods_csv: e.g. "rda,fixmatch,fixmatch_da". Returns the comparison table. */
RDA_API rda_status rda_compare(const char* config_json, const char* methods_csv,
                               char** table_json);

/* Returns RDA_ERR_ASSERTION (with the report still written) when a check fails. */
RDA_API rda_status rda_verify_theorem1(const uint64_t* class_counts, size_t count, uint64_t trials,
                                       uint64_t seed, char** report_json);
RDA_API rda_status rda_verify_reverse(uint64_t trials, uint64_t seed, char** report_json);
RDA_API rda_status rda_gradcheck(uint64_t seed, double tolerance, char** report_json);

/* dataset_json: a "dataset" object. Returns per-class labeled/unlabeled counts. */
RDA_API rda_status rda_dataset_counts(const char* dataset_json, char** counts_json);
/* run_json: {dataset, source, train, test_per_class}. Writes the materialized
 * splits as CSV (split,class,f0,...). */
RDA_API rda_status rda_dataset_export_csv(const char* run_json, const char* path);

RDA_API rda_status rda_trainer_create(const char* run_json, rda_trainer** out);
RDA_API rda_status rda_trainer_load_checkpoint(const char* path, rda_trainer** out);
RDA_API rda_status rda_trainer_save_checkpoint(const rda_trainer* trainer, const char* path);
/* One training step; returns the step's losses, mask rate and pseudo-label marginal. */
RDA_API rda_status rda_trainer_step(rda_trainer* trainer, char** step_json);
/* Runs to completion; returns the run's metrics. */
RDA_API rda_status rda_trainer_train(rda_trainer* trainer, char** metrics_json);
RDA_API rda_status rda_trainer_metrics(const rda_trainer* trainer, char** metrics_json);
RDA_API uint64_t rda_trainer_step_count(const rda_trainer* trainer);
RDA_API uint64_t rda_trainer_total_steps(const rda_trainer* trainer);
RDA_API void rda_trainer_destroy(rda_trainer* trainer);

#ifdef __cplusplus
}
#endif

#endif /* RDA_RDA_H */
