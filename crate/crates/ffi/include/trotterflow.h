#ifndef TROTTERFLOW_H
#define TROTTERFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum TfStatus {
  TF_STATUS_OK = 0,
  TF_STATUS_NULL_POINTER = 1,
  TF_STATUS_INVALID_ARGUMENT = 2,
  TF_STATUS_DIMENSION_MISMATCH = 3,
  TF_STATUS_NOT_SELF_ADJOINT = 4,
  TF_STATUS_NOT_UNITARY = 5,
  TF_STATUS_NUMERIC = 6,
  TF_STATUS_CONFIG = 7,
  TF_STATUS_IO = 8,
  TF_STATUS_PANIC = 9,
} TfStatus;

// Output format for [`tf_run_config`].
typedef enum TfFormat {
  TF_FORMAT_CSV = 0,
  TF_FORMAT_JSON = 1,
} TfFormat;

// Opaque handle to a validated structure `(H, W, R)`.
typedef struct TfStructure TfStructure;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static nul-terminated string.
const char *tf_version(void);

// Message of the last failed call on this thread, or null. Valid until the next failing call.
const char *tf_last_error_message(void);

// Frees a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void tf_string_free(char *s);

// Builds a structure from `H` (`d x d`), `W` (`dk x dk`) and `R` (`dk x d`).
//
// # Safety
// The arrays must hold `2 d^2`, `2 (dk)^2` and `2 dk d` doubles; `out` must be writable.
enum TfStatus tf_structure_new(uintptr_t d,
                               uintptr_t k,
                               const double *h,
                               const double *w,
                               const double *r,
                               struct TfStructure **out);

// Releases a structure handle. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void tf_structure_free(struct TfStructure *s);

// Writes the algebra dimension `d` and the noise dimension `k`.
//
// # Safety
// `s` must be a live handle; `d` and `k` must be writable.
enum TfStatus tf_structure_dims(const struct TfStructure *s, uintptr_t *d, uintptr_t *k);

// Structure of the two flows run side by side on noise `k1 + k2`.
//
// # Safety
// `a` and `b` must be live handles; `out` must be writable.
enum TfStatus tf_structure_combine(const struct TfStructure *a,
                                   const struct TfStructure *b,
                                   struct TfStructure **out);

// Vacuum generator as a `d^2 x d^2` matrix acting on column-stacked `x`.
//
// # Safety
// `s` must be a live handle; `out` must hold `2 d^4` doubles.
enum TfStatus tf_structure_generator(const struct TfStructure *s, double *out);

// Writes `exp(tL)(x)` for a `d x d` matrix `x`.
//
// # Safety
// `s` must be a live handle; `x` and `out` must hold `2 d^2` doubles.
enum TfStatus tf_semigroup_apply(const struct TfStructure *s,
                                 double t,
                                 const double *x,
                                 double *out);

// Discrete flow matrix element `<j_t(x) u e(f), v e(g)>` with constant `f`, `g` on `[0, t]`
// over `steps` polar-corrected steps. Null `f` or `g` means the zero function.
//
// # Safety
// `s` must be a live handle; `x` holds `2 d^2` doubles, `u` and `v` hold `2 d`, `f` and `g`
// (if not null) hold `2 k`; `re` and `im` must be writable.
enum TfStatus tf_flow_matrix_element(const struct TfStructure *s,
                                     double t,
                                     uintptr_t steps,
                                     const double *x,
                                     const double *u,
                                     const double *v,
                                     const double *f,
                                     const double *g,
                                     double *re,
                                     double *im);

// Runs an experiment config given as JSON text and returns the rendered result table.
//
// `seed` overrides the config seed when `use_seed` is nonzero. On success `*out_text`
// receives a string to release with [`tf_string_free`], and `*exit_code` the CLI exit
// code (0 all checks passed, 1 a check failed, 3 numeric failure). Config errors return
// [`TfStatus::Config`] and leave the outputs untouched.
//
// # Safety
// `config_json` must be a nul-terminated string; `out_text` and `exit_code` must be writable.
enum TfStatus tf_run_config(const char *config_json,
                            uint64_t seed,
                            int32_t use_seed,
                            enum TfFormat format,
                            char **out_text,
                            int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TROTTERFLOW_H */
