#ifndef FAIRPRICE_H
#define FAIRPRICE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum FpStatus {
  FP_STATUS_OK = 0,
  FP_STATUS_NULL_POINTER = 1,
  FP_STATUS_INVALID_UTF8 = 2,
  FP_STATUS_IO = 3,
  FP_STATUS_DATA = 4,
  FP_STATUS_INVALID_ARGUMENT = 5,
  FP_STATUS_NUMERICAL = 6,
  FP_STATUS_PANIC = 7,
} FpStatus;

// Opaque dataset handle.
typedef struct FpDataset FpDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *fp_last_error(void);

// Library version as a static NUL-terminated string.
const char *fp_version(void);

// Load a CSV file.
//
// `features` is a comma-separated column list, or null for every numeric
// column other than `sensitive` and `target`. `target` may be null.
//
// # Safety
// String arguments must be null or NUL-terminated; `out` must be writable.
enum FpStatus fp_dataset_load(const char *path,
                              const char *features,
                              const char *sensitive,
                              const char *target,
                              struct FpDataset **out);

// Release a dataset; null is ignored.
//
// # Safety
// `ds` must come from [`fp_dataset_load`] and not be used afterwards.
void fp_dataset_free(struct FpDataset *ds);

// # Safety
// `ds` must be a live handle and `out` writable.
enum FpStatus fp_dataset_n_rows(const struct FpDataset *ds, uintptr_t *out);

// Fairness audit of the 0/1 column `pred` against the dataset target, as a
// JSON object written to `*out_json`.
//
// # Safety
// `ds` must be a live handle, `pred` NUL-terminated and `out_json` writable.
enum FpStatus fp_audit_json(const struct FpDataset *ds, const char *pred, char **out_json);

// Squared Wasserstein-2 distance between two equally weighted samples.
//
// # Safety
// `a` and `b` must point to `na` and `nb` doubles; `out` must be writable.
enum FpStatus fp_wasserstein2(const double *a,
                              uintptr_t na,
                              const double *b,
                              uintptr_t nb,
                              double *out);

// Equality-of-odds fair linear predictor estimated from the dataset
// (numeric sensitive column and real target), as JSON.
//
// # Safety
// `ds` must be a live handle and `out_json` writable.
enum FpStatus fp_gaussian_eo_fit(const struct FpDataset *ds, char **out_json);

// Release a string returned by this library; null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void fp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FAIRPRICE_H */
