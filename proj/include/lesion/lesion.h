/*
 * C interface to the lesion classifier: multi-scale vision transformer,
 * weighted/attention-regularized training, metrics and Grad-CAM.
 *
 * All objects are opaque handles created by the create/load functions and
 * released by the matching destroy function. Every fallible call returns an
 * lsn_status; on failure lsn_last_error() describes the problem (the text
 * is thread-local and valid until the next failing call on that thread).
 *
 * String outputs follow one convention: the caller passes (buf, cap); the
 * full length (excluding the terminator) is stored in *needed, and at most
 * cap-1 bytes plus a terminator are written. Pass cap = 0 to query.
 */
#ifndef LESION_LESION_H
#define LESION_LESION_H

#include <stddef.h>
#include <stdint.h>

#if defined(LESION_BUILDING_LIBRARY)
#define LSN_API __attribute__((visibility("default")))
#else
#define LSN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lsn_status {
  LSN_OK = 0,
  LSN_ERR_INVALID_ARGUMENT = 1, /* bad key/value, out-of-range class, null handle */
  LSN_ERR_DATA = 2,             /* malformed file, dimension mismatch, unreadable path */
  LSN_ERR_NUMERIC = 3,          /* NaN/Inf in values or gradients */
  LSN_ERR_INTERNAL = 4
} lsn_status;

typedef struct lsn_config lsn_config;
typedef struct lsn_dataset lsn_dataset;
typedef struct lsn_model lsn_model;

LSN_API const char* lsn_last_error(void);
/* 64 for the default build, 32 when built with LESION_FLOAT32. */
LSN_API int lsn_scalar_bits(void);

/* ---- configuration (KEY=VALUE pairs shared by model and training) ---- */

LSN_API lsn_status lsn_config_create(lsn_config** out);
LSN_API void lsn_config_destroy(lsn_config* config);
LSN_API lsn_status lsn_config_set(lsn_config* config, const char* key, const char* value);
/* "key=value" in one string. */
LSN_API lsn_status lsn_config_set_assignment(lsn_config* config, const char* assignment);
/* Fully resolved key=value lines. */
LSN_API lsn_status lsn_config_dump(const lsn_config* config, char* buf, size_t cap, size_t* needed);
/* Comma-separated list of valid keys. */
LSN_API lsn_status lsn_config_keys(char* buf, size_t cap, size_t* needed);

/* ---- datasets ---- */

/* Synthetic lesions; proportions has num_classes entries (need not sum to 1). */
LSN_API lsn_status lsn_dataset_synth(size_t n, uint64_t seed, size_t height, size_t width,
                                     const double* proportions, size_t num_classes, lsn_dataset** out);
/* Writes images/<id>.ppm, masks/<id>.pgm and manifest.csv under dir. */
LSN_API lsn_status lsn_dataset_write(const lsn_dataset* dataset, const char* dir);
/* Loads a manifest; images are resized to the config's image dims. */
LSN_API lsn_status lsn_dataset_load(const char* manifest_path, const lsn_config* config, lsn_dataset** out);
/* Seeded split; the input is left untouched. */
LSN_API lsn_status lsn_dataset_split(const lsn_dataset* dataset, double eval_fraction, uint64_t seed,
                                     lsn_dataset** train, lsn_dataset** eval);
LSN_API size_t lsn_dataset_size(const lsn_dataset* dataset);
LSN_API lsn_status lsn_dataset_label(const lsn_dataset* dataset, size_t index, size_t* label);
/* Class counts into counts[0..num_classes). */
LSN_API lsn_status lsn_dataset_class_counts(const lsn_dataset* dataset, size_t* counts, size_t num_classes);
LSN_API void lsn_dataset_destroy(lsn_dataset* dataset);

/* ---- model ---- */

LSN_API lsn_status lsn_model_create(const lsn_config* config, lsn_model** out);
LSN_API lsn_status lsn_model_load(const char* checkpoint_path, lsn_model** out);
LSN_API lsn_status lsn_model_save(const lsn_model* model, const char* checkpoint_path);
/* A copy of the model's run configuration. */
LSN_API lsn_status lsn_model_config(const lsn_model* model, lsn_config** out);
LSN_API size_t lsn_model_num_classes(const lsn_model* model);
LSN_API uint64_t lsn_model_global_step(const lsn_model* model);
LSN_API void lsn_model_destroy(lsn_model* model);

/* pixels: height*width*channels interleaved values in [0,1]; probs: num_classes. */
LSN_API lsn_status lsn_model_predict(const lsn_model* model, const double* pixels, size_t height, size_t width,
                                     size_t channels, double* probs, size_t num_classes);

/* ---- training ---- */

typedef struct lsn_step_log {
  uint64_t step;
  uint64_t epoch;
  double l_ce;
  double l_attn;
  double lambda_attn;
  double total;
} lsn_step_log;

/* Return nonzero to stop training early. The model handle reflects the
 * completed step when the callback runs, so it may be evaluated there. */
typedef int (*lsn_step_callback)(const lsn_step_log* log, void* user);

/*
 * Trains with the model's run configuration, continuing from the model's
 * optimizer state and step counter. max_steps = 0 trains to the configured
 * epoch count. log_path (nullable) receives `step,epoch,l_ce,l_attn,total`
 * lines, appended when resuming.
 */
LSN_API lsn_status lsn_train(lsn_model* model, const lsn_dataset* train, uint64_t max_steps, const char* log_path,
                             lsn_step_callback callback, void* user);

/* ---- metrics ---- */

typedef struct lsn_metrics {
  double acc;
  double auc; /* NaN when auc_defined == 0 */
  double f1;
  double precision;
  int auc_defined;
  size_t n;
  size_t num_classes;
} lsn_metrics;

/* confusion (nullable) receives num_classes^2 counts, rows = true class. */
LSN_API lsn_status lsn_evaluate(const lsn_model* model, const lsn_dataset* dataset, lsn_metrics* out,
                                int64_t* confusion, size_t confusion_cap);
/* Mean focus-map mass inside the lesion masks (masked samples only). */
LSN_API lsn_status lsn_focus_mass(const lsn_model* model, const lsn_dataset* dataset, double* out);
/* Columns ACC, AUC, F1-Score, Precision. */
LSN_API lsn_status lsn_metrics_table(const lsn_metrics* metrics, char* buf, size_t cap, size_t* needed);
/* metric=value lines. */
LSN_API lsn_status lsn_metrics_lines(const lsn_metrics* metrics, const int64_t* confusion, char* buf, size_t cap,
                                     size_t* needed);

/* ---- Grad-CAM ---- */

/* grid receives grid_rows*grid_cols values in [0,1]. */
LSN_API lsn_status lsn_gradcam(const lsn_model* model, const double* pixels, size_t height, size_t width,
                               size_t channels, size_t target_class, double* grid, size_t grid_cap,
                               size_t* argmax_row, size_t* argmax_col);
/*
 * Reads a PPM/PGM image and writes <prefix>.heat.pgm (heatmap upsampled to
 * image size) and <prefix>.overlay.ppm (image blended 50/50 with a red heat
 * layer).
 */
LSN_API lsn_status lsn_gradcam_files(const lsn_model* model, const char* image_path, size_t target_class,
                                     const char* prefix, size_t* argmax_row, size_t* argmax_col);

#ifdef __cplusplus
}
#endif

#endif /* LESION_LESION_H */
