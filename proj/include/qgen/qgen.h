#ifndef QGEN_QGEN_H
#define QGEN_QGEN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define QG_API __declspec(dllexport)
#else
#define QG_API __attribute__((visibility("default")))
#endif

typedef enum qg_status {
  QG_OK = 0,
  QG_INVALID_ARGUMENT = 1,
  QG_IO = 2,
  QG_FORMAT = 3,
  QG_CONFIG = 4,
  QG_STAGE = 5,
  QG_NOT_FOUND = 6,
  QG_DEGENERATE = 7,
  QG_CONFLICT = 8,
  QG_INTERNAL = 9
} qg_status;

typedef enum qg_ground { QG_GROUND_EUCLIDEAN = 0, QG_GROUND_COSINE = 1 } qg_ground;

typedef struct qg_pipeline qg_pipeline;
typedef struct qg_questionnaire qg_questionnaire;
typedef struct qg_embeddings qg_embeddings;
typedef struct qg_service qg_service;

/* Message for the calling thread's most recent failure; "" after success. */
QG_API const char* qg_last_error(void);
QG_API const char* qg_version(void);
/* 0 = trace ... 6 = off */
QG_API void qg_set_log_level(int level);
/* Frees strings returned through char** out-parameters. */
QG_API void qg_string_free(char* s);

/* Pipeline ---------------------------------------------------------------- */

QG_API qg_status qg_pipeline_open(const char* config_path, qg_pipeline** out);
QG_API void qg_pipeline_free(qg_pipeline* p);
QG_API qg_status qg_pipeline_set_jobs(qg_pipeline* p, int jobs);
QG_API qg_status qg_pipeline_set_out_dir(qg_pipeline* p, const char* dir);
QG_API qg_status qg_pipeline_set_assume_relevant(qg_pipeline* p, int assume);
QG_API qg_status qg_pipeline_check_inputs(const qg_pipeline* p);
/* Path of an artifact under the output directory. */
QG_API qg_status qg_pipeline_artifact(const qg_pipeline* p, const char* name, char** out);
QG_API qg_status qg_pipeline_config_hash(const qg_pipeline* p, char** out);
/* *skipped (optional) is set to 1 when the stage was already up to date. */
QG_API qg_status qg_pipeline_run_stage(qg_pipeline* p, const char* stage, int force, int* skipped);
QG_API qg_status qg_pipeline_run(qg_pipeline* p, int force);

/* Questionnaires ---------------------------------------------------------- */

QG_API qg_status qg_questionnaire_load(const char* path, qg_questionnaire** out);
QG_API void qg_questionnaire_free(qg_questionnaire* q);
QG_API const char* qg_questionnaire_id(const qg_questionnaire* q);
QG_API size_t qg_questionnaire_feature_count(const qg_questionnaire* q);
QG_API size_t qg_questionnaire_path_count(const qg_questionnaire* q);
/* features: one 0/1 byte per cluster feature. */
QG_API qg_status qg_questionnaire_predict(const qg_questionnaire* q, const uint8_t* features,
                                          size_t n_features, double* probability);
QG_API qg_status qg_questionnaire_markdown(const qg_questionnaire* q, char** out);

/* Validation -------------------------------------------------------------- */

/* Writes the full sheet (with duplicate map) as JSON. */
QG_API qg_status qg_sheet_write(const qg_questionnaire* q, uint64_t seed, const char* json_path,
                                const char* tsv_path);
/* Reads a sheet JSON and a score TSV; writes report.tsv, report.md,
 * table2.tsv and reliability.tsv into out_dir. */
QG_API qg_status qg_report_write(const qg_questionnaire* q, const char* sheet_path,
                                 const char* scores_path, const char* out_dir);
/* Curve plot data from a sweep TSV (k, auc, max_cluster_size). */
QG_API qg_status qg_curve_write(const char* sweep_tsv, double max_cluster_frac,
                                const char* out_path, int* selected_k);

/* Word Mover's Distance ---------------------------------------------------- */

QG_API qg_status qg_embeddings_load(const char* path, qg_embeddings** out);
QG_API void qg_embeddings_free(qg_embeddings* e);
/* *defined is 0 (and *distance untouched) when a phrase has no known word. */
QG_API qg_status qg_wmd(const qg_embeddings* e, const char* a, const char* b, qg_ground ground,
                        double* distance, int* defined);
/* Exact transportation problem; plan (m*n, row-major) may be NULL. */
QG_API qg_status qg_solve_transport(const double* supply, size_t m, const double* demand,
                                    size_t n, const double* cost, double* plan, double* total);

/* Metrics ----------------------------------------------------------------- */

QG_API qg_status qg_auc(const double* scores, const uint8_t* labels, size_t n, double* out);
QG_API qg_status qg_pearson(const double* x, const double* y, size_t n, double* out);
QG_API qg_status qg_cohen_kappa(const int* a, const int* b, size_t n, double* out);

/* Synthetic corpus --------------------------------------------------------- */

/* spec_path may be NULL for the defaults. */
QG_API qg_status qg_synth_generate(const char* spec_path, const char* out_dir);

/* HTTP service ------------------------------------------------------------- */

typedef struct qg_service_options {
  const char* data_dir;
  const char* event_log;   /* may be NULL */
  const char* cors_origin; /* may be NULL */
  const char* rater_token; /* may be NULL */
} qg_service_options;

QG_API qg_status qg_service_create(const qg_service_options* options, qg_service** out);
QG_API void qg_service_free(qg_service* s);
/* Serves on a background thread; port 0 picks a free port. */
QG_API qg_status qg_service_start(qg_service* s, const char* host, int port, int* bound_port);
/* Blocks until qg_service_stop is called from another thread. */
QG_API qg_status qg_service_listen(qg_service* s, const char* host, int port);
QG_API void qg_service_stop(qg_service* s);

#ifdef __cplusplus
}
#endif

#endif
