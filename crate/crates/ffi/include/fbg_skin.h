#ifndef FBG_SKIN_H
#define FBG_SKIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every entry point.
 */
typedef enum FbgStatus {
  FBG_STATUS_OK = 0,
  FBG_STATUS_INVALID_ARGUMENT = 1,
  FBG_STATUS_OUT_OF_DOMAIN = 2,
  FBG_STATUS_SHAPE_MISMATCH = 3,
  FBG_STATUS_IO = 4,
  FBG_STATUS_PARSE = 5,
  FBG_STATUS_NULL_POINTER = 6,
  FBG_STATUS_PANIC = 7,
  FBG_STATUS_OTHER = 8,
} FbgStatus;

/**
 * Opaque skin layout.
 */
typedef struct FbgLayout FbgLayout;

/**
 * Opaque trained pipeline.
 */
typedef struct FbgModel FbgModel;

/**
 * Opaque receptive-field parameters.
 */
typedef struct FbgParams FbgParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t fbg_last_error_message(char *buf, size_t len);

/**
 * Number of gratings in every layout.
 */
size_t fbg_sensor_count(void);

/**
 * Creates the default 16-grating layout.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum FbgStatus fbg_layout_new_default(struct FbgLayout **out);

/**
 * # Safety
 * `layout` must be null or a handle from [`fbg_layout_new_default`] not yet freed.
 */
void fbg_layout_free(struct FbgLayout *layout);

/**
 * Creates the calibrated default field parameters, optionally with the
 * dual-lobe preset for `layout` (pass a null layout for single lobes).
 *
 * # Safety
 * `layout` must be null or a live layout handle; `out` a valid handle slot.
 */
enum FbgStatus fbg_params_new_default(const struct FbgLayout *layout,
                                      bool dual_lobes,
                                      struct FbgParams **out);

/**
 * # Safety
 * `params` must be null or a live params handle.
 */
void fbg_params_free(struct FbgParams *params);

/**
 * Noiseless wavelength shifts (nm) for a contact of `force_n` at `(x_mm, y_mm)`.
 * `out_shifts` receives `fbg_sensor_count()` values; `len` must be at least that.
 *
 * # Safety
 * Handles must be live; `out_shifts` must point to `len` writable doubles.
 */
enum FbgStatus fbg_sensor_response(const struct FbgLayout *layout,
                                   const struct FbgParams *params,
                                   double x_mm,
                                   double y_mm,
                                   double force_n,
                                   double *out_shifts,
                                   size_t len);

/**
 * Loads a model bundle directory written by `fbg-skin train`.
 *
 * # Safety
 * `dir` must be a NUL-terminated UTF-8 path; `out` a valid handle slot.
 */
enum FbgStatus fbg_model_load(const char *dir, struct FbgModel **out);

/**
 * # Safety
 * `model` must be null or a live model handle.
 */
void fbg_model_free(struct FbgModel *model);

/**
 * Window length (frames) the model expects.
 *
 * # Safety
 * `model` must be live; `out` valid.
 */
enum FbgStatus fbg_model_window(const struct FbgModel *model, size_t *out);

/**
 * Runs the gated pipeline on `frames` rows of 16 shifts (nm), oldest first;
 * `frames` must equal the model window. `out_contact` is 0 for no contact,
 * 1 for contact; force and position are written only on contact.
 *
 * # Safety
 * `window` must point to `frames * 16` doubles; outputs must be valid.
 */
enum FbgStatus fbg_model_infer(const struct FbgModel *model,
                               const double *window,
                               size_t frames,
                               int32_t *out_contact,
                               double *out_force_n,
                               double *out_x_mm,
                               double *out_y_mm);

/**
 * Least-squares sigmoid `1 / (1 + exp(-a (x - b)))` through `n` (force, rate) pairs.
 *
 * # Safety
 * `forces_mn` and `rates` must point to `n` doubles; outputs must be valid.
 */
enum FbgStatus fbg_fit_sigmoid(const double *forces_mn,
                               const double *rates,
                               size_t n,
                               double *out_a,
                               double *out_b,
                               double *out_residual);

/**
 * Force (mN) at which the sigmoid `(a, b)` reaches probability `p`.
 *
 * # Safety
 * `out` must be valid.
 */
enum FbgStatus fbg_threshold_at(double a, double b, double p, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FBG_SKIN_H */
