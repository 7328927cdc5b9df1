#ifndef COOC_COOC_H
#define COOC_COOC_H

/* C interface to the co-occurrence re-identification library. All handles are
 * opaque; every fallible call returns a cooc_status and leaves a message for
 * cooc_last_error() on the calling thread. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(COOC_BUILDING)
#    define COOC_API __declspec(dllexport)
#  else
#    define COOC_API __declspec(dllimport)
#  endif
#else
#  define COOC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cooc_status {
  COOC_OK = 0,
  COOC_ERR_IO = 1,
  COOC_ERR_DECODE = 2,
  COOC_ERR_UNSUPPORTED_FORMAT = 3,
  COOC_ERR_ARGUMENT = 4,
  COOC_ERR_INDEX = 5,
  COOC_ERR_SHAPE = 6,
  COOC_ERR_RANK = 7,
  COOC_ERR_NUMERIC = 8,
  COOC_ERR_EVALUATION = 9,
  COOC_ERR_INTERNAL = 10
} cooc_status;

typedef struct cooc_config cooc_config;
typedef struct cooc_image cooc_image;
typedef struct cooc_codebook cooc_codebook;
typedef struct cooc_descriptor cooc_descriptor;
typedef struct cooc_model cooc_model;

typedef void (*cooc_log_fn)(const char* line, void* user);

COOC_API const char* cooc_version(void);
COOC_API const char* cooc_status_string(cooc_status status);
/* Message of the last failed call on this thread; "" if none. */
COOC_API const char* cooc_last_error(void);

/* Configuration: "key = value" settings shared by all commands. */
COOC_API cooc_status cooc_config_new(cooc_config** out);
COOC_API cooc_status cooc_config_load(const char* path, cooc_config** out);
COOC_API cooc_status cooc_config_set(cooc_config* cfg, const char* key, const char* value);
COOC_API void cooc_config_free(cooc_config* cfg);

COOC_API cooc_status cooc_cmd_synth(const cooc_config* cfg, cooc_log_fn log, void* user);
COOC_API cooc_status cooc_cmd_train_codebook(const cooc_config* cfg, cooc_log_fn log, void* user);
COOC_API cooc_status cooc_cmd_encode(const cooc_config* cfg, cooc_log_fn log, void* user);
/* rates may be NULL; otherwise receives min(capacity, gallery size) CMC values
 * and *count the full curve length. */
COOC_API cooc_status cooc_cmd_run(const cooc_config* cfg, cooc_log_fn log, void* user,
                                  double* rates, size_t capacity, size_t* count);

/* Codeword images. */
COOC_API cooc_status cooc_image_new(uint32_t width, uint32_t height, uint32_t codewords,
                                    const uint16_t* labels, cooc_image** out);
COOC_API cooc_status cooc_image_load(const char* path, cooc_image** out);
COOC_API cooc_status cooc_image_save(const cooc_image* img, const char* path);
COOC_API uint32_t cooc_image_width(const cooc_image* img);
COOC_API uint32_t cooc_image_height(const cooc_image* img);
COOC_API uint32_t cooc_image_codewords(const cooc_image* img);
COOC_API cooc_status cooc_image_label(const cooc_image* img, uint32_t row, uint32_t col, uint16_t* out);
COOC_API void cooc_image_free(cooc_image* img);

/* Codebooks. */
COOC_API cooc_status cooc_codebook_load(const char* path, cooc_codebook** out);
COOC_API uint32_t cooc_codebook_size(const cooc_codebook* cb);
COOC_API uint32_t cooc_codebook_dim(const cooc_codebook* cb);
COOC_API cooc_status cooc_codebook_encode_raster(const cooc_codebook* cb, const char* raster_path,
                                                 uint32_t patch_size, uint32_t stride, cooc_image** out);
COOC_API void cooc_codebook_free(cooc_codebook* cb);

/* Co-occurrence descriptors. kernel is one of identity, rbf, rbf-bound,
 * latent, latent-bound. */
COOC_API cooc_status cooc_descriptor_compute(const cooc_image* img1, const cooc_image* img2,
                                             const char* kernel, double sigma, cooc_descriptor** out);
COOC_API cooc_status cooc_descriptor_load(const char* path, cooc_descriptor** out);
COOC_API cooc_status cooc_descriptor_save(const cooc_descriptor* d, const char* path);
COOC_API uint32_t cooc_descriptor_codewords(const cooc_descriptor* d);
COOC_API size_t cooc_descriptor_nnz(const cooc_descriptor* d);
COOC_API cooc_status cooc_descriptor_value(const cooc_descriptor* d, uint32_t m, uint32_t n, double* out);
COOC_API cooc_status cooc_descriptor_normalize(cooc_descriptor* d, double max_value);
COOC_API void cooc_descriptor_free(cooc_descriptor* d);

/* Linear models. */
COOC_API cooc_status cooc_model_load(const char* path, cooc_model** out);
COOC_API double cooc_model_bias(const cooc_model* model);
COOC_API double cooc_model_c(const cooc_model* model);
COOC_API cooc_status cooc_model_score(const cooc_model* model, const cooc_descriptor* d, double* out);
COOC_API void cooc_model_free(cooc_model* model);

#ifdef __cplusplus
}
#endif

#endif
