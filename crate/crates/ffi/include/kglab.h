#ifndef KGLAB_H
#define KGLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KgStage {
  KG_STAGE_SPECTRUM = 0,
  KG_STAGE_SCATTERING = 1,
  KG_STAGE_DFT_CHECK = 2,
  KG_STAGE_LINEAR_DECAY = 3,
  KG_STAGE_SHOOT = 4,
  KG_STAGE_EVOLVE = 5,
  KG_STAGE_DECAY_REPORT = 6,
} KgStage;

typedef enum KgStatus {
  KG_STATUS_OK = 0,
  /**
   * Null pointer, bad length or out-of-range argument.
   */
  KG_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Configuration or data rejected by validation.
   */
  KG_STATUS_CONFIG = 2,
  /**
   * The shooting bracket did not straddle the stable manifold.
   */
  KG_STATUS_BRACKET = 3,
  /**
   * A run expected to stay near the soliton escaped or blew up.
   */
  KG_STATUS_BLOW_UP = 4,
  KG_STATUS_THRESHOLD = 5,
  KG_STATUS_NUMERICAL = 6,
  KG_STATUS_IO = 7,
  KG_STATUS_PANIC = 8,
} KgStatus;

/**
 * Distorted Fourier basis on a grid.
 */
typedef struct KgBasis KgBasis;

/**
 * Stage driver writing into an output directory.
 */
typedef struct KgPipeline KgPipeline;

/**
 * Soliton profile and its linearized operator.
 */
typedef struct KgSoliton KgSoliton;

/**
 * Scattering coefficients at one frequency.
 */
typedef struct KgCoefficients {
  double k;
  double t_re;
  double t_im;
  double r_plus_re;
  double r_plus_im;
  double r_minus_re;
  double r_minus_im;
  double unitarity_defect;
} KgCoefficients;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated, truncated to
 * `len`) and returns the full message length without the terminator.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes of writes.
 */
size_t kg_last_error(char *buf, size_t len);

/**
 * Builds the soliton of power `alpha` on `[-half_width, half_width]` with spacing `dx`.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum KgStatus kg_soliton_new(double alpha, double half_width, double dx, struct KgSoliton **out);

/**
 * # Safety
 * `h` must be null or a handle from [`kg_soliton_new`] not yet freed.
 */
void kg_soliton_free(struct KgSoliton *h);

/**
 * Negative eigenvalue and growth rate of the closed-form model.
 *
 * # Safety
 * `h` must be a live soliton handle; outputs must be valid for writes.
 */
enum KgStatus kg_soliton_constants(const struct KgSoliton *h, double *lambda0, double *omega);

/**
 * Profile value at `x`; NaN for a null handle.
 *
 * # Safety
 * `h` must be null or a live soliton handle.
 */
double kg_soliton_profile(const struct KgSoliton *h, double x);

/**
 * Discretized ground eigenvalue, number of eigenvalues in `(0, 1)` and the L2 error of
 * the computed ground state.
 *
 * # Safety
 * `h` must be a live soliton handle; outputs must be valid for writes.
 */
enum KgStatus kg_soliton_spectrum(const struct KgSoliton *h,
                                  double *lambda0,
                                  size_t *gap_count,
                                  double *ground_state_error);

/**
 * Scattering coefficients of the soliton potential at frequency `k > 0`.
 *
 * # Safety
 * `h` must be a live soliton handle and `out` valid for one write.
 */
enum KgStatus kg_scattering(const struct KgSoliton *h, double k, struct KgCoefficients *out);

/**
 * Distorted Fourier basis of the soliton's linearized operator on
 * `[-half_width, half_width]`, with frequency step `dk` up to `k_max`.
 *
 * # Safety
 * `h` must be a live soliton handle and `out` valid for one pointer write.
 */
enum KgStatus kg_basis_new(const struct KgSoliton *h,
                           double half_width,
                           double dx,
                           double dk,
                           double k_max,
                           struct KgBasis **out);

/**
 * # Safety
 * `h` must be null or a handle from [`kg_basis_new`] not yet freed.
 */
void kg_basis_free(struct KgBasis *h);

/**
 * Number of grid nodes; 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live basis handle.
 */
size_t kg_basis_grid_len(const struct KgBasis *h);

/**
 * Number of frequencies (both signs); 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live basis handle.
 */
size_t kg_basis_freq_len(const struct KgBasis *h);

/**
 * Transform of the real samples `input[0..n]` (n = grid length) into `re`, `im`
 * (each of length `nk` = frequency count). Frequencies ascend from `-k_max`.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum KgStatus kg_basis_forward(const struct KgBasis *h,
                               const double *input,
                               size_t n,
                               double *re,
                               double *im,
                               size_t nk);

/**
 * Real part of the inverse transform of `(re, im)` into `output[0..n]`.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum KgStatus kg_basis_inverse(const struct KgBasis *h,
                               const double *re,
                               const double *im,
                               size_t nk,
                               double *output,
                               size_t n);

/**
 * Pipeline from TOML text (null for defaults) writing into `output_dir`.
 *
 * # Safety
 * Strings must be null or NUL-terminated; `out` valid for one pointer write.
 */
enum KgStatus kg_pipeline_new(const char *config_toml,
                              const char *output_dir,
                              struct KgPipeline **out);

/**
 * # Safety
 * `h` must be null or a handle from [`kg_pipeline_new`] not yet freed.
 */
void kg_pipeline_free(struct KgPipeline *h);

/**
 * Runs `stage` and its prerequisites, writing artifacts.
 *
 * # Safety
 * `h` must be a live pipeline handle not used concurrently.
 */
enum KgStatus kg_pipeline_run(struct KgPipeline *h, enum KgStage stage);

/**
 * Number of evaluated gates and, via `failed`, how many of them failed.
 *
 * # Safety
 * `h` must be a live pipeline handle; `failed` null or valid for one write.
 */
size_t kg_pipeline_gates(const struct KgPipeline *h, size_t *failed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KGLAB_H */
