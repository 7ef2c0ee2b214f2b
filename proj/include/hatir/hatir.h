/* C interface to the hatir library.
 *
 * Objects are opaque handles released with their matching *_free call.
 * Every function returns a hatir_status; on failure hatir_last_error()
 * returns a message for the calling thread, valid until its next call.
 * Output handles are written only on success.
 */
#ifndef HATIR_H
#define HATIR_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(HATIR_BUILDING)
#    define HATIR_API __declspec(dllexport)
#  else
#    define HATIR_API __declspec(dllimport)
#  endif
#else
#  define HATIR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hatir_status {
  HATIR_OK = 0,
  HATIR_ERR_FORMAT = 1,       /* bad magic or malformed file */
  HATIR_ERR_LENGTH = 2,       /* truncated payload */
  HATIR_ERR_DATA = 3,         /* non-finite values */
  HATIR_ERR_IO = 4,
  HATIR_ERR_SHAPE = 5,
  HATIR_ERR_RANGE = 6,
  HATIR_ERR_PRECONDITION = 7,
  HATIR_ERR_CONFIG = 8,
  HATIR_ERR_ARGUMENT = 9,     /* null handle or pointer */
  HATIR_ERR_INTERNAL = 10
} hatir_status;

typedef struct hatir_video hatir_video;
typedef struct hatir_config hatir_config;

HATIR_API const char* hatir_version(void);
HATIR_API const char* hatir_status_string(hatir_status status);
HATIR_API const char* hatir_last_error(void);

/* ---- Video tensors (T x H x W x C, float32) ---- */

/* `data` may be NULL for a zero-filled tensor; otherwise T*H*W*C floats. */
HATIR_API hatir_status hatir_video_create(uint32_t frames, uint32_t height, uint32_t width, uint32_t channels,
                                          const float* data, hatir_video** out);
HATIR_API void hatir_video_free(hatir_video* video);
/* dims = {T, H, W, C} */
HATIR_API hatir_status hatir_video_shape(const hatir_video* video, uint32_t dims[4]);
/* Borrowed pointer into the tensor; valid until the handle is freed. */
HATIR_API const float* hatir_video_data(const hatir_video* video);
HATIR_API hatir_status hatir_video_load(const char* path, hatir_video** out);
HATIR_API hatir_status hatir_video_save(const hatir_video* video, const char* path);
/* Single-channel frame `frame` as min-max scaled P5 PGM. */
HATIR_API hatir_status hatir_video_save_pgm(const hatir_video* video, uint32_t frame, const char* path);

/* ---- Configuration (flat key=value) ---- */

HATIR_API hatir_status hatir_config_create(hatir_config** out);
HATIR_API hatir_status hatir_config_load(const char* path, hatir_config** out);
HATIR_API void hatir_config_free(hatir_config* config);
HATIR_API hatir_status hatir_config_set(hatir_config* config, const char* key, const char* value);
/* String outputs: copies at most `capacity` bytes including the terminator
 * into `buffer` and stores the full required size (with terminator) in
 * `needed` when non-NULL. A too-small buffer is not an error. */
HATIR_API hatir_status hatir_config_get(const hatir_config* config, const char* key, char* buffer, size_t capacity,
                                        size_t* needed);
HATIR_API hatir_status hatir_config_to_text(const hatir_config* config, char* buffer, size_t capacity,
                                            size_t* needed);
HATIR_API hatir_status hatir_config_validate(const hatir_config* config);

/* ---- Operations ---- */

HATIR_API hatir_status hatir_set_threads(int threads);

/* 1 x H x W x 1 soft mask of a single-channel sequence. */
HATIR_API hatir_status hatir_phasor_mask(const hatir_video* video, int harmonic, double alpha, hatir_video** out);

/* Degradation driven by the config's turb.* keys and seed. */
HATIR_API hatir_status hatir_degrade(const hatir_video* hr, const hatir_config* config, hatir_video** out);
HATIR_API hatir_status hatir_turbulence_manifest(const hatir_config* config, char* buffer, size_t capacity,
                                                 size_t* needed);
/* `manifest_path` may be NULL for `<lr_path>.manifest.txt`. */
HATIR_API hatir_status hatir_make_pair(const char* hr_path, const hatir_config* config, const char* lr_path,
                                       const char* hr_copy_path, const char* manifest_path);

/* Pair flows as (T-1) x H x W x 2 tensors; flow.* keys select the estimator. */
HATIR_API hatir_status hatir_estimate_flows(const hatir_video* video, const hatir_config* config,
                                            hatir_video** forward, hatir_video** backward);
/* 1 x H x W x 1 magnitude of entry `index` of a flow tensor. */
HATIR_API hatir_status hatir_flow_magnitude(const hatir_video* flows, uint32_t index, hatir_video** out);

typedef struct hatir_loss_report {
  double thermal, edge, diff, total;
  double w_thermal, w_edge, w_diff;
} hatir_loss_report;

/* `mask` is H x W x 1 or 1 x H x W x 1. */
HATIR_API hatir_status hatir_losses(const hatir_video* pred, const hatir_video* gt, const hatir_video* mask,
                                    double w_thermal, double w_edge, double w_diff, hatir_loss_report* out);

/* peak <= 0 selects the reference maximum. `csv_path` and the mean outputs
 * may be NULL. */
HATIR_API hatir_status hatir_evaluate(const hatir_video* ref, const hatir_video* test, double peak,
                                      const char* csv_path, double* mean_psnr, double* mean_ssim);

/* Temporal profile along a line; writes the S x T profile CSV when
 * `csv_path` is non-NULL and per-sample variances into `variance` (length
 * `samples`) when non-NULL. */
HATIR_API hatir_status hatir_profile(const hatir_video* video, double x0, double y0, double x1, double y1,
                                     uint32_t samples, const char* csv_path, double* variance);

/* Noise prediction callback: fill `eps` (same layout as `z`) for step `t`.
 * Return 0 on success; any other value aborts the run. */
typedef int (*hatir_denoiser_fn)(const float* z, const uint32_t dims[4], int t, float* eps, void* user);

/* `clean` may be NULL; it is the oracle target when the config selects the
 * oracle denoiser. */
HATIR_API hatir_status hatir_restore(const hatir_video* lr, const hatir_config* config, const hatir_video* clean,
                                     hatir_video** out);
HATIR_API hatir_status hatir_restore_with(const hatir_video* lr, const hatir_config* config, hatir_denoiser_fn fn,
                                          void* user, hatir_video** out);

/* File-level restore: writes `output` and `<output>.manifest.txt`.
 * `clean_path`, `trajectory_dir`, `metrics_csv` and the mean outputs may be
 * NULL; metrics are produced only when the clean sequence matches the output
 * size. */
HATIR_API hatir_status hatir_run_pipeline(const hatir_config* config, const char* input, const char* output,
                                          const char* clean_path, const char* trajectory_dir,
                                          const char* metrics_csv, double* mean_psnr, double* mean_ssim);

#ifdef __cplusplus
}
#endif

#endif /* HATIR_H */
