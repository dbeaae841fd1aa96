#ifndef QUASIPROB_H
#define QUASIPROB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QpStatus {
  QP_STATUS_OK = 0,
  QP_STATUS_NULL_POINTER = 1,
  QP_STATUS_INVALID_ARGUMENT = 2,
  QP_STATUS_EMPTY_DATASET = 3,
  QP_STATUS_NON_EQUISPACED_GRID = 4,
  QP_STATUS_PARSE = 5,
  QP_STATUS_IO = 6,
  QP_STATUS_METADATA = 7,
  QP_STATUS_ACCURACY = 8,
  QP_STATUS_OSCILLATION_RESOLUTION = 9,
  QP_STATUS_ZERO_STD_ERR = 10,
  QP_STATUS_GRID_MISMATCH = 11,
  QP_STATUS_PANIC = 12,
} QpStatus;

// Quadrature dataset.
typedef struct QpDataset QpDataset;

// Pattern kernel for one filter width.
typedef struct QpKernel QpKernel;

// Reference evaluator for Gaussian states at one filter width.
typedef struct QpOracle QpOracle;

typedef struct QpPointEstimate {
  double value;
  double std_err;
  uint64_t n;
} QpPointEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failing call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *qp_last_error_message(void);

// Library version, a static nul-terminated string.
const char *qp_version(void);

// Simulates `n_per_phase` samples at each of `n_phases` equispaced phases.
//
// # Safety
// `out` must be a valid pointer; on success it receives a handle to free with
// `qp_dataset_free`.
enum QpStatus qp_dataset_simulate(double v_x,
                                  double v_p,
                                  double squeeze_angle,
                                  size_t n_phases,
                                  size_t n_per_phase,
                                  uint64_t seed,
                                  struct QpDataset **out);

// Loads a `phi_rad,x` CSV and its sidecar.
//
// # Safety
// `path` must be a nul-terminated string and `out` a valid pointer.
enum QpStatus qp_dataset_load(const char *path, struct QpDataset **out);

// # Safety
// `dataset` must be a live handle and `path` a nul-terminated string.
enum QpStatus qp_dataset_save(const struct QpDataset *dataset, const char *path);

// Number of samples; 0 for a null handle.
//
// # Safety
// `dataset` must be null or a live handle.
size_t qp_dataset_len(const struct QpDataset *dataset);

// Number of phases; 0 for a null handle.
//
// # Safety
// `dataset` must be null or a live handle.
size_t qp_dataset_n_phases(const struct QpDataset *dataset);

// # Safety
// `dataset` must be null or a handle not yet freed.
void qp_dataset_free(struct QpDataset *dataset);

// Builds the pattern kernel for filter width `width`; `fast` selects the
// dense cubic lookup over the sinc series.
//
// # Safety
// `out` must be a valid pointer.
enum QpStatus qp_kernel_new(double width, bool fast, struct QpKernel **out);

// `chi(xi; w)`; NaN for a null handle.
//
// # Safety
// `kernel` must be null or a live handle.
double qp_kernel_chi(const struct QpKernel *kernel, double xi);

// Sup-norm deviation of the sinc series from direct quadrature measured at
// build time; NaN for a null handle.
//
// # Safety
// `kernel` must be null or a live handle.
double qp_kernel_accuracy(const struct QpKernel *kernel);

// # Safety
// `kernel` must be null or a handle not yet freed.
void qp_kernel_free(struct QpKernel *kernel);

// Estimates `P_Omega` at `n` points `re[i] + i im[i]`, writing one estimate
// per point to `out`.
//
// # Safety
// `re`, `im` and `out` must each point to `n` elements; handles must be live.
enum QpStatus qp_estimate(const struct QpDataset *dataset,
                          const struct QpKernel *kernel,
                          const double *re,
                          const double *im,
                          size_t n,
                          uint64_t dither_seed,
                          struct QpPointEstimate *out);

// # Safety
// `out` must be a valid pointer.
enum QpStatus qp_oracle_new(double width, struct QpOracle **out);

// Continuous-phase `P_Omega(re + i im)` for the Gaussian state `(v_x, v_p)`.
//
// # Safety
// `oracle` must be a live handle and `out` a valid pointer.
enum QpStatus qp_oracle_quasiprob(const struct QpOracle *oracle,
                                  double v_x,
                                  double v_p,
                                  double squeeze_angle,
                                  double re,
                                  double im,
                                  double *out);

// Discrete-phase approximation with `n_phases` equispaced phases.
//
// # Safety
// `oracle` must be a live handle and `out` a valid pointer.
enum QpStatus qp_oracle_discrete_phase(const struct QpOracle *oracle,
                                       double v_x,
                                       double v_p,
                                       double squeeze_angle,
                                       double re,
                                       double im,
                                       size_t n_phases,
                                       double *out);

// # Safety
// `oracle` must be null or a handle not yet freed.
void qp_oracle_free(struct QpOracle *oracle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QUASIPROB_H */
