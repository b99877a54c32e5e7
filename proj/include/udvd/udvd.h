#ifndef UDVD_H
#define UDVD_H
/*
 * C interface to the UDVD super-resolution toolkit.
 *
 * Conventions:
 *   - Every function returns 0 (UDVD_OK) on success or a udvd_status error
 *     code; udvd_last_error() then holds a one-line description for the
 *     calling thread until the next call on that thread.
 *   - Strings returned through char** out-parameters are heap-allocated and
 *     must be released with udvd_string_free().
 *   - Handles are opaque; every *_free accepts NULL.
 *   - All randomness is counter-based: the same inputs and seeds produce
 *     bit-identical outputs regardless of threading.
 */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define UDVD_API __declspec(dllexport)
#else
#define UDVD_API __attribute__((visibility("default")))
#endif

typedef enum udvd_status {
  UDVD_OK = 0,
  UDVD_ERR_PARAM = 1,   /* argument value out of range */
  UDVD_ERR_SHAPE = 2,   /* image/tensor dimension mismatch */
  UDVD_ERR_CONFIG = 3,  /* inconsistent model or training configuration */
  UDVD_ERR_IO = 4,      /* file read/write failure */
  UDVD_ERR_GRAPH = 5,   /* autodiff misuse (not reachable through this API) */
  UDVD_ERR_NUMERIC = 6, /* non-finite values where finite ones are required */
  UDVD_ERR_INTERNAL = 7
} udvd_status;

UDVD_API const char* udvd_version(void);

/* Description of the last failure on this thread; "" when the last call
 * succeeded. The pointer stays valid until the thread's next API call. */
UDVD_API const char* udvd_last_error(void);

UDVD_API void udvd_string_free(char* s);

/* ------------------------------------------------------------------ */
/* Degradation synthesis                                               */

/* Reads an RGB PNG whose dimensions are multiples of `scale`, applies
 * Gaussian blur of width eps, bicubic-downsamples by scale, adds white
 * Gaussian noise of level sigma (8-bit units), and writes the result.
 * eps in [0.2, 3.0]; sigma in [0, 75]; scale in {2, 3, 4}.
 * map_out (nullable): also writes the encoded degradation map, sized like
 * the low-resolution image, as a tensor file. basis_path (nullable) names
 * the encoding basis; when null a default basis is fitted in-process. */
UDVD_API int udvd_degrade_file(const char* hr_png, const char* lr_png, double eps, double sigma,
                               int scale, uint64_t seed, const char* basis_path,
                               const char* map_out);

/* Same pipeline with blur width ramping linearly from eps_lo at the left
 * output column to eps_hi at the right, and noise level likewise. */
UDVD_API int udvd_degrade_spatial_file(const char* hr_png, const char* lr_png, double eps_lo,
                                       double eps_hi, double sigma_lo, double sigma_hi, int scale,
                                       uint64_t seed, const char* basis_path,
                                       const char* map_out);

/* ------------------------------------------------------------------ */
/* Degradation-encoding basis                                          */

/* Fits the blur-kernel PCA basis used to encode degradation maps and saves
 * it to out_path. components=15, samples=1000, kernel_size=15 are the
 * defaults used everywhere else; pass those unless experimenting. */
UDVD_API int udvd_pca_fit_file(const char* out_path, int components, int samples, int kernel_size);

/* ------------------------------------------------------------------ */
/* Models                                                              */

typedef struct udvd_model udvd_model;

/* Loads a checkpoint (the tensor container plus its .json config sidecar). */
UDVD_API int udvd_model_load(const char* checkpoint, udvd_model** out);
UDVD_API void udvd_model_free(udvd_model* model);

/* Upscaling factor of the loaded model, or a negative error code. */
UDVD_API int udvd_model_scale(const udvd_model* model);

/* Super-resolves lr_png under the stated degradation: the basis at
 * basis_path encodes (eps, sigma) into the degradation map the network
 * conditions on. Writes the upscaled RGB PNG to out_png. */
UDVD_API int udvd_model_infer_file(const udvd_model* model, const char* lr_png,
                                   const char* basis_path, double eps, double sigma,
                                   const char* out_png);

/* Renders the per-pixel kernels block `block_index` predicts for lr_png
 * under degradation (eps_a, sigma_a) and under (eps_b, sigma_b), plus their
 * absolute difference, as a three-panel grayscale PNG. */
UDVD_API int udvd_model_viz_file(const udvd_model* model, const char* lr_png,
                                 const char* basis_path, double eps_a, double sigma_a,
                                 double eps_b, double sigma_b, int block_index,
                                 const char* out_png);

/* ------------------------------------------------------------------ */
/* Training                                                            */

/* Trains on every .png in data_dir (sorted by filename, so the dataset
 * order is platform-independent) according to the JSON config at
 * config_path. basis_path NULL fits the default basis in-process.
 * resume_checkpoint NULL starts fresh; otherwise training continues from
 * that checkpoint (whose architecture must match the config) and the log
 * is appended rather than rewritten. log_csv NULL disables logging.
 * On success writes checkpoint_out and fills final_step/final_loss if
 * non-NULL. */
UDVD_API int udvd_train_run(const char* config_path, const char* data_dir, const char* basis_path,
                            const char* resume_checkpoint, const char* checkpoint_out,
                            const char* log_csv, int64_t* final_step, double* final_loss);

/* ------------------------------------------------------------------ */
/* Evaluation                                                          */

/* Scores every PNG in pred_dir against the same-named PNG in gt_dir with
 * PSNR and SSIM on the Y channel, cropping a `scale`-pixel border. Returns
 * a JSON report (per-image items plus means) through json_out. */
UDVD_API int udvd_eval_dirs(const char* pred_dir, const char* gt_dir, int scale, char** json_out);

/* ------------------------------------------------------------------ */
/* Diagnostics                                                         */

/* Times the brute-force per-pixel convolution against the optimized
 * implementation on a (size x size) image with k x k kernels. Returns the
 * CSV row "op,size,k,ref_ms,opt_ms,speedup" through csv_row and the ratio
 * through speedup if non-NULL. */
UDVD_API int udvd_bench_dynconv(int size, int k, int reps, uint64_t seed, char** csv_row,
                                double* speedup);

/* Runs the full finite-difference gradient suite (every primitive plus a
 * small end-to-end model). Returns a JSON report through json_out if
 * non-NULL and sets *passed to 1 when at least 99% of samples match the
 * analytic gradients within tolerance. */
UDVD_API int udvd_grad_check(uint64_t seed, char** json_out, int* passed);

#ifdef __cplusplus
}
#endif

#endif /* UDVD_H */
