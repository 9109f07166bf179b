#ifndef SELEKT_SELEKT_H
#define SELEKT_SELEKT_H

#include <stddef.h>
#include <stdint.h>

#if defined(SELEKT_BUILDING_LIBRARY)
#define SELEKT_API __attribute__((visibility("default")))
#else
#define SELEKT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum selekt_status {
  SELEKT_OK = 0,
  SELEKT_INVALID_ARGUMENT = 1,
  SELEKT_NOT_FOUND = 2,
  SELEKT_IO = 3,
  SELEKT_SHAPE_MISMATCH = 4,
  SELEKT_NON_FINITE = 5,
  SELEKT_DIVERGED_RUN = 6,
  SELEKT_RUNTIME = 7,
  SELEKT_INTERNAL = 8
} selekt_status;

typedef struct selekt_model selekt_model;
typedef struct selekt_dataset selekt_dataset;

/* Library and error state. Error details are per thread and describe the
   most recent failing call. */
SELEKT_API const char* selekt_version(void);
SELEKT_API const char* selekt_status_name(selekt_status status);
SELEKT_API const char* selekt_last_error(void);
/* Config field or flag the last error refers to; "" if none. */
SELEKT_API const char* selekt_last_error_field(void);
/* trace, debug, info, warn, error, off */
SELEKT_API selekt_status selekt_set_log_level(const char* level);
/* Frees strings returned through char** out-parameters. */
SELEKT_API void selekt_string_free(char* s);

/* Models. Pixels are NCHW float32 in [0,1]. */
SELEKT_API selekt_status selekt_model_create(const char* arch_json, uint64_t seed,
                                             selekt_model** out);
/* Batchnorm running statistics start at mean 0, variance 1. */
SELEKT_API selekt_status selekt_model_from_params(const char* arch_json, const float* params,
                                                  size_t count, selekt_model** out);
SELEKT_API selekt_status selekt_model_load(const char* path, selekt_model** out);
SELEKT_API selekt_status selekt_model_save(const selekt_model* model, const char* path);
SELEKT_API void selekt_model_free(selekt_model* model);
SELEKT_API selekt_status selekt_model_input_size(const selekt_model* model, size_t* out);
SELEKT_API selekt_status selekt_model_classes(const selekt_model* model, size_t* out);
SELEKT_API selekt_status selekt_model_param_count(const selekt_model* model, size_t* out);
SELEKT_API selekt_status selekt_model_params(const selekt_model* model, float* out, size_t count);
/* logits: n x classes, row major. */
SELEKT_API selekt_status selekt_model_forward(const selekt_model* model, const float* pixels,
                                              size_t n, float* logits);
/* Per-unit activations of ReLU layer `layer` (spatial means): n x units. */
SELEKT_API selekt_status selekt_model_layer_count(const selekt_model* model, size_t* out);
SELEKT_API selekt_status selekt_model_layer_units(const selekt_model* model, size_t layer,
                                                  size_t* out);
SELEKT_API selekt_status selekt_model_activations(const selekt_model* model, const float* pixels,
                                                  size_t n, size_t layer, float* out);
/* Jacobian of the logits at one sample: classes x input_size, row major. */
SELEKT_API selekt_status selekt_model_jacobian(const selekt_model* model, const float* sample,
                                               double* out);

/* Attacks on plain cross-entropy; out receives n x input_size pixels. */
SELEKT_API selekt_status selekt_fgsm(const selekt_model* model, const float* pixels,
                                     const int* labels, size_t n, double epsilon, float* out);
SELEKT_API selekt_status selekt_pgd(const selekt_model* model, const float* pixels,
                                    const int* labels, size_t n, double epsilon,
                                    double step_size, int steps, float* out);

/* Selectivity index of each row of a units x classes mean table (row major). */
SELEKT_API selekt_status selekt_selectivity_index(const double* means, size_t units,
                                                  size_t classes, double* out);
/* Number of principal components explaining `threshold` of the variance of a
   rows x cols row-major matrix. */
SELEKT_API selekt_status selekt_dims_to_variance(const double* matrix, size_t rows, size_t cols,
                                                 double threshold, int center, int* out);
/* out[0..2] = mean, lower, upper. */
SELEKT_API selekt_status selekt_bootstrap_ci(const double* values, size_t n, double level,
                                             int resamples, uint64_t seed, double* out);

/* Datasets (descriptor JSON as in the "dataset" config section). */
SELEKT_API selekt_status selekt_dataset_load(const char* descriptor_json, selekt_dataset** out);
SELEKT_API void selekt_dataset_free(selekt_dataset* dataset);
/* split: 0 = train pool, 1 = test. */
SELEKT_API selekt_status selekt_dataset_size(const selekt_dataset* dataset, int split,
                                             size_t* out);
SELEKT_API selekt_status selekt_dataset_copy(const selekt_dataset* dataset, int split,
                                             float* pixels, int* labels);
SELEKT_API selekt_status selekt_dataset_materialize(const selekt_dataset* dataset,
                                                    const char* dir);

/* Commands. `runs_root` may be NULL for $SELEKT_RUNS_DIR or "runs". Result
   documents are JSON strings owned by the caller. */
SELEKT_API selekt_status selekt_cmd_train(const char* config_path, const char* alpha,
                                          const char* seed, const char* runs_root,
                                          char** record_json);
SELEKT_API selekt_status selekt_cmd_sweep(const char* config_path, const char* alphas,
                                          const char* seeds, const char* runs_root,
                                          char** records_json);
/* request_json: {"kind": ..., kind-specific options}. */
SELEKT_API selekt_status selekt_cmd_evaluate(const char* runs_root, const char* run_id,
                                             const char* request_json, char** record_json);
SELEKT_API selekt_status selekt_cmd_report(const char* runs_dir, const char* out_dir,
                                           char** summary_json);
/* kind and out_dir may be NULL. */
SELEKT_API selekt_status selekt_cmd_plot(const char* summary_path, const char* fig,
                                         const char* kind, const char* out_dir,
                                         char** written_path);
SELEKT_API selekt_status selekt_cmd_materialize(const char* config_path, const char* out_dir);
/* problems_json: array of problem strings, empty when every record is valid. */
SELEKT_API selekt_status selekt_cmd_validate(const char* runs_dir, char** problems_json);

#ifdef __cplusplus
}
#endif

#endif
