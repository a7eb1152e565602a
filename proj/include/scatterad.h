/*
 * scatterad — multivariate time-series anomaly detection.
 *
 * C API over the C++ core: opaque handles, integer status codes, and
 * library-owned strings released with sad_string_free(). Functions returning
 * sad_status report SAD_OK on success; on failure sad_last_error() carries a
 * thread-local message. Functions returning pointers yield NULL on failure.
 */
#ifndef SCATTERAD_H
#define SCATTERAD_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sad_status {
    SAD_OK = 0,
    SAD_ERR_CONFIG = 1, /* bad key, bad value, inconsistent options */
    SAD_ERR_DATA = 2,   /* unreadable or malformed input data */
    SAD_ERR_NUMERIC = 3 /* shape/domain violations, non-finite losses */
} sad_status;

typedef struct sad_config sad_config;
typedef struct sad_dataset sad_dataset;
typedef struct sad_model sad_model;

typedef struct sad_metric_report {
    double aff_p, aff_r, aff_f;
    double pa_p, pa_r, pa_f;
    double auc_roc, auc_pr;
    double r_a_r, r_a_p;
    double v_roc, v_pr;
} sad_metric_report;

const char* sad_version(void);
const char* sad_last_error(void);
void sad_string_free(char* s);

/* ---- configuration (key=value; every key has a documented default) ---- */
sad_config* sad_config_new(void);
void sad_config_free(sad_config* cfg);
sad_status sad_config_set(sad_config* cfg, const char* key, const char* value);
/* Returns NULL for unknown keys. */
const char* sad_config_get(const sad_config* cfg, const char* key);
sad_status sad_config_load_file(sad_config* cfg, const char* path);
size_t sad_config_key_count(void);
sad_status sad_config_key_info(size_t index, const char** key, const char** def,
                               const char** doc);

/* ---- datasets ---- */
sad_dataset* sad_dataset_load_csv(const char* train_csv, const char* test_csv,
                                  const char* labels_csv);
sad_dataset* sad_dataset_generate(const sad_config* cfg);
sad_status sad_dataset_save_csv(const sad_dataset* ds, const char* train_csv,
                                const char* test_csv, const char* labels_csv);
/* Additive Gaussian noise (normalized units) on the test split. */
sad_dataset* sad_dataset_with_test_noise(const sad_dataset* ds, double sigma,
                                         uint64_t seed);
void sad_dataset_free(sad_dataset* ds);
size_t sad_dataset_channels(const sad_dataset* ds);
size_t sad_dataset_train_points(const sad_dataset* ds);
size_t sad_dataset_test_points(const sad_dataset* ds);

/* ---- models ---- */
sad_model* sad_model_new(const sad_config* cfg, size_t channels);
sad_model* sad_model_load(const char* path);
sad_status sad_model_save(const sad_model* m, const char* path);
void sad_model_free(sad_model* m);
/* Full training loop; the per-step loss log is returned as CSV when
 * loss_log_csv is non-NULL. */
sad_status sad_model_train(sad_model* m, const sad_dataset* ds, char** loss_log_csv);
/* Per-point anomaly scores over the covered test prefix. Call with
 * scores == NULL to query the length. */
sad_status sad_model_score(sad_model* m, const sad_dataset* ds, const sad_config* cfg,
                           double* scores, size_t capacity, size_t* length);
/* Per-point online-encoder embeddings over the covered test prefix, as CSV
 * (index, one column per dimension) for external projection tools. */
sad_status sad_model_embed_csv(sad_model* m, const sad_dataset* ds, char** csv);
/* "index,score,label_pred" rows. */
sad_status sad_model_detect_csv(sad_model* m, const sad_dataset* ds,
                                const sad_config* cfg, char** csv);
/* Twelve-metric report; csv_row/text_table are optional outputs. */
sad_status sad_model_evaluate(sad_model* m, const sad_dataset* ds, const sad_config* cfg,
                              sad_metric_report* report, char** csv_row,
                              char** text_table);

/* ---- analysis protocols (CSV tables) ---- */
sad_status sad_protocol_delta_sweep(sad_model* m, const sad_dataset* ds,
                                    const sad_config* cfg, char** csv);
sad_status sad_protocol_shift_sensitivity(const sad_dataset* ds, const sad_config* cfg,
                                          char** csv);
sad_status sad_protocol_scatter_sweep(sad_model* m, const sad_dataset* ds,
                                      const sad_config* cfg, char** csv);
sad_status sad_protocol_stability(const sad_dataset* ds, const sad_config* cfg,
                                  char** csv);
/* arms_csv: comma list of ablation arms, or "all". */
sad_status sad_protocol_ablation(const sad_dataset* ds, const sad_config* cfg,
                                 const char* arms_csv, char** csv);

#ifdef __cplusplus
}
#endif

#endif /* SCATTERAD_H */
