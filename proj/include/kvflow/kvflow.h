/* C interface to the kvflow simulator. Strings returned through char**
 * are heap-allocated; release them with kvf_string_free. */
#ifndef KVFLOW_H
#define KVFLOW_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define KVF_API __declspec(dllexport)
#else
#define KVF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum kvf_status {
    KVF_OK = 0,
    KVF_ERR_RUNTIME = 1,
    KVF_ERR_CONFIG = 2,
    KVF_ERR_IO = 3,
    KVF_ERR_ARGUMENT = 4
} kvf_status;

typedef struct kvf_experiment kvf_experiment;
typedef struct kvf_result kvf_result;
typedef struct kvf_batch kvf_batch;
typedef struct kvf_comparison kvf_comparison;

KVF_API const char* kvf_version(void);
/* Message and offending config field (may be "") of the last failure on
 * this thread. */
KVF_API const char* kvf_last_error(void);
KVF_API const char* kvf_last_error_field(void);
KVF_API void kvf_string_free(char* s);

/* experiments */
KVF_API kvf_status kvf_experiment_load_file(const char* path, kvf_experiment** out);
KVF_API kvf_status kvf_experiment_load_json(const char* json, const char* base_dir, kvf_experiment** out);
KVF_API void kvf_experiment_free(kvf_experiment* exp);
KVF_API kvf_status kvf_experiment_set_seeds(kvf_experiment* exp, const uint64_t* seeds, size_t count);
KVF_API size_t kvf_experiment_seed_count(const kvf_experiment* exp);
KVF_API uint64_t kvf_experiment_seed(const kvf_experiment* exp, size_t index);
KVF_API size_t kvf_experiment_policy_count(const kvf_experiment* exp);
KVF_API kvf_status kvf_experiment_policy_label(const kvf_experiment* exp, size_t index, char** out);
/* *ok = 1 when the policy can run on the workload; otherwise *reason explains. */
KVF_API kvf_status kvf_experiment_policy_applicable(const kvf_experiment* exp, size_t index, int* ok,
                                                    char** reason);
KVF_API kvf_status kvf_experiment_name(const kvf_experiment* exp, char** out);
KVF_API kvf_status kvf_experiment_outputs(const kvf_experiment* exp, char** out);
KVF_API kvf_status kvf_experiment_emit(const kvf_experiment* exp, int* metrics_json, int* metrics_csv,
                                       int* series_csv, int* event_log);

/* single runs */
KVF_API kvf_status kvf_run(const kvf_experiment* exp, size_t policy_index, uint64_t seed, int record_events,
                           kvf_result** out);
KVF_API void kvf_result_free(kvf_result* res);
KVF_API uint64_t kvf_result_seed(const kvf_result* res);
KVF_API kvf_status kvf_result_metrics_json(const kvf_result* res, char** out);
/* header line plus one row */
KVF_API kvf_status kvf_result_metrics_csv(const kvf_result* res, char** out);
KVF_API kvf_status kvf_result_series_csv(const kvf_result* res, char** out);
KVF_API kvf_status kvf_result_events_csv(const kvf_result* res, char** out);
KVF_API kvf_status kvf_result_json(const kvf_result* res, int include_events, char** out);

/* every configured seed of one policy, up to jobs at a time */
KVF_API kvf_status kvf_run_batch(const kvf_experiment* exp, size_t policy_index, unsigned jobs, int record_events,
                                 kvf_batch** out);
KVF_API void kvf_batch_free(kvf_batch* batch);
KVF_API size_t kvf_batch_size(const kvf_batch* batch);
/* borrowed; valid until the batch is freed */
KVF_API const kvf_result* kvf_batch_result(const kvf_batch* batch, size_t index);
KVF_API kvf_status kvf_batch_aggregate_csv(const kvf_batch* batch, int include_header, char** out);
KVF_API kvf_status kvf_aggregate_csv_header(char** out);

/* comparisons; seed_count 0 uses each config's own seeds */
KVF_API kvf_status kvf_compare(const kvf_experiment* const* exps, size_t count, const uint64_t* seeds,
                               size_t seed_count, unsigned jobs, kvf_comparison** out);
KVF_API void kvf_comparison_free(kvf_comparison* cmp);
KVF_API size_t kvf_comparison_rows(const kvf_comparison* cmp);
KVF_API kvf_status kvf_comparison_csv(const kvf_comparison* cmp, char** out);
KVF_API kvf_status kvf_comparison_json(const kvf_comparison* cmp, char** out);
/* slot, then one U_t column per applicable row (first seed) */
KVF_API kvf_status kvf_comparison_usage_csv(const kvf_comparison* cmp, char** out);
/* one row: its label, applicability and slot,usage series */
KVF_API kvf_status kvf_comparison_row_label(const kvf_comparison* cmp, size_t index, char** out);
KVF_API int kvf_comparison_row_applicable(const kvf_comparison* cmp, size_t index);
KVF_API kvf_status kvf_comparison_row_usage_csv(const kvf_comparison* cmp, size_t index, char** out);

KVF_API kvf_status kvf_stability_json(const kvf_experiment* exp, char** out);

/* family: flow_unknown | flow_known | alpha. grid may be NULL for the
 * default grid. */
KVF_API kvf_status kvf_budget_search(const kvf_experiment* exp, const char* family, const char* objective,
                                     const double* grid, size_t grid_count, unsigned jobs, char** csv,
                                     double* best);

KVF_API kvf_status kvf_oracle_solve_json(const char* instance_json, char** out);
KVF_API kvf_status kvf_oracle_solve_config(const kvf_experiment* exp, uint64_t seed, const char* objective,
                                           char** out);

/* Reads a trace; summary is JSON, normalized is one
 * {"id","prompt_tokens","output_tokens"} object per line. Either output may
 * be NULL. */
KVF_API kvf_status kvf_ingest(const char* path, const char* format, char** summary, char** normalized);

#ifdef __cplusplus
}
#endif

#endif
