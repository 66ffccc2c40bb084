#ifndef BGLRF_H
#define BGLRF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes; the non-zero values match the CLI exit codes where they overlap.
 */
typedef enum BglrfStatus {
  BGLRF_STATUS_OK = 0,
  /**
   * Null pointer, bad UTF-8 or malformed JSON argument.
   */
  BGLRF_STATUS_INVALID_ARGUMENT = 1,
  BGLRF_STATUS_VALIDATION = 2,
  BGLRF_STATUS_IO = 3,
  BGLRF_STATUS_NUMERICAL = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  BGLRF_STATUS_INTERNAL = 5,
} BglrfStatus;

/**
 * An H x W x B cube of `double` samples, band-major.
 */
typedef struct BglrfCube BglrfCube;

/**
 * Output of one fusion run.
 */
typedef struct BglrfFusionResult BglrfFusionResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *bglrf_version(void);

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next library call on the same thread.
 */
const char *bglrf_last_error(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void bglrf_string_free(char *s);

/**
 * Creates a cube from `height * width * bands` band-major samples, or zeros
 * when `data` is null.
 *
 * # Safety
 * `data`, when non-null, must point to that many readable doubles; `out`
 * must be writable.
 */
enum BglrfStatus bglrf_cube_new(size_t height,
                                size_t width,
                                size_t bands,
                                const double *data,
                                struct BglrfCube **out);

/**
 * Releases a cube. Null is ignored.
 *
 * # Safety
 * `cube` must come from this library and not have been freed already.
 */
void bglrf_cube_free(struct BglrfCube *cube);

/**
 * Reads an HXC1 file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum BglrfStatus bglrf_cube_read(const char *path, struct BglrfCube **out);

/**
 * Writes an HXC1 file; `dtype` is 0 for float32 and 1 for float64.
 *
 * # Safety
 * `cube` must be a live handle and `path` a NUL-terminated string.
 */
enum BglrfStatus bglrf_cube_write(const struct BglrfCube *cube, const char *path, uint8_t dtype);

/**
 * Reports the cube's height, width and band count.
 *
 * # Safety
 * `cube` must be a live handle; the out-pointers must be writable.
 */
enum BglrfStatus bglrf_cube_dims(const struct BglrfCube *cube,
                                 size_t *height,
                                 size_t *width,
                                 size_t *bands);

/**
 * Copies the band-major samples into `buffer`, whose length must be exactly
 * `height * width * bands`.
 *
 * # Safety
 * `cube` must be a live handle and `buffer` must hold `len` doubles.
 */
enum BglrfStatus bglrf_cube_copy_data(const struct BglrfCube *cube, double *buffer, size_t len);

/**
 * Runs the phantom simulator. `config_json` may be null for defaults.
 *
 * # Safety
 * `config_json`, when non-null, must be NUL-terminated; the out-pointers must
 * be writable.
 */
enum BglrfStatus bglrf_simulate(const char *config_json,
                                struct BglrfCube **truth,
                                struct BglrfCube **hsi,
                                struct BglrfCube **msi);

/**
 * Fuses `hsi` with `msi`. `config_json` (nullable) uses the library's JSON
 * config schema. A known kernel of `kernel_size x kernel_size` row-major
 * weights is passed for the non-blind mode; use null and 0 otherwise.
 *
 * # Safety
 * Handles must be live; `kernel`, when non-null, must hold
 * `kernel_size * kernel_size` doubles; `out` must be writable.
 */
enum BglrfStatus bglrf_fuse(const struct BglrfCube *hsi,
                            const struct BglrfCube *msi,
                            const char *config_json,
                            const double *kernel,
                            size_t kernel_size,
                            struct BglrfFusionResult **out);

/**
 * Releases a fusion result. Null is ignored.
 *
 * # Safety
 * `result` must come from this library and not have been freed already.
 */
void bglrf_result_free(struct BglrfFusionResult *result);

/**
 * Copies the super-resolved cube into a new handle.
 *
 * # Safety
 * `result` must be a live handle; `out` must be writable.
 */
enum BglrfStatus bglrf_result_sri(const struct BglrfFusionResult *result, struct BglrfCube **out);

/**
 * Side length of the estimated kernel.
 *
 * # Safety
 * `result` must be a live handle; `size` must be writable.
 */
enum BglrfStatus bglrf_result_kernel_size(const struct BglrfFusionResult *result, size_t *size);

/**
 * Copies the row-major kernel weights; `len` must equal `size * size`.
 *
 * # Safety
 * `result` must be a live handle and `buffer` must hold `len` doubles.
 */
enum BglrfStatus bglrf_result_kernel_copy(const struct BglrfFusionResult *result,
                                          double *buffer,
                                          size_t len);

/**
 * Run report (config echo, objective trace, iteration counts, timings) as
 * JSON. Free with [`bglrf_string_free`].
 *
 * # Safety
 * `result` must be a live handle; `out` must be writable.
 */
enum BglrfStatus bglrf_result_report_json(const struct BglrfFusionResult *result, char **out);

/**
 * Quality metrics of `estimate` against `truth` as JSON. Free with
 * [`bglrf_string_free`].
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum BglrfStatus bglrf_metrics_json(const struct BglrfCube *estimate,
                                    const struct BglrfCube *truth,
                                    size_t ratio,
                                    char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BGLRF_H */
