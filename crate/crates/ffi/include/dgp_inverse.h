/* C ABI for the deep-GP inverse problem laboratory. */

#ifndef DGP_INVERSE_H
#define DGP_INVERSE_H

/* Generated by cbindgen from crates/ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Forward problem selector.
typedef enum DgpinvProblem {
  // Linear debug mode: the forward map is the identity.
  DGPINV_PROBLEM_IDENTITY = 0,
  // Divergence-form diffusion with unit interior source.
  DGPINV_PROBLEM_DARCY = 1,
  // Stationary Schrodinger equation with unit boundary data.
  DGPINV_PROBLEM_SCHRODINGER = 2,
} DgpinvProblem;

// Result code of every fallible call.
typedef enum DgpinvStatus {
  DGPINV_STATUS_OK = 0,
  // Invalid configuration, argument, or document.
  DGPINV_STATUS_CONFIG = 2,
  // Numerical failure (solver divergence, rejection budget, non-finite).
  DGPINV_STATUS_NUMERIC = 3,
  // A required pointer argument was null.
  DGPINV_STATUS_NULL_ARGUMENT = 4,
  // A string argument was not valid UTF-8.
  DGPINV_STATUS_UTF8 = 5,
  // An internal panic was caught at the boundary.
  DGPINV_STATUS_PANIC = 6,
} DgpinvStatus;

// Opaque handle to a scalar field sampled on a tensor grid.
typedef struct DgpinvField DgpinvField;

// Opaque handle to a configured forward model.
typedef struct DgpinvModel DgpinvModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string; never freed.
const char *dgpinv_version(void);

// Message describing the calling thread's most recent failure, or an empty
// string after a success. The pointer is owned by the library and is valid
// until the same thread's next call.
const char *dgpinv_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be a pointer previously returned through a string out-parameter
// of this library, not yet freed.
void dgpinv_string_free(char *s);

// Builds a field on the centered hypercube grid from a dense value block
// (axis 0 fastest). `len` must equal `points_per_axis^dim`.
//
// # Safety
// `values` must point to `len` readable f64s; `out` must be a valid
// writable pointer.
enum DgpinvStatus dgpinv_field_new(size_t dim,
                                   size_t points_per_axis,
                                   double margin,
                                   const double *values,
                                   size_t len,
                                   struct DgpinvField **out);

// Parses a field document (the same JSON format the CLI reads and writes).
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum DgpinvStatus dgpinv_field_from_json(const char *json, struct DgpinvField **out);

// Serializes a field to its bit-exact JSON document.
//
// # Safety
// `field` must be a live field handle; `out` must be writable. The
// returned string is released with `dgpinv_string_free`.
enum DgpinvStatus dgpinv_field_to_json(const struct DgpinvField *field, char **out);

// Number of grid nodes (0 for a null handle).
//
// # Safety
// `field`, when non-null, must be a live field handle.
size_t dgpinv_field_len(const struct DgpinvField *field);

// Grid dimension (0 for a null handle).
//
// # Safety
// `field`, when non-null, must be a live field handle.
size_t dgpinv_field_dim(const struct DgpinvField *field);

// Copies all nodal values (axis 0 fastest) into `out`, which must hold
// exactly `dgpinv_field_len(field)` doubles.
//
// # Safety
// `field` must be a live field handle; `out` must point to `len` writable
// f64s.
enum DgpinvStatus dgpinv_field_values(const struct DgpinvField *field, double *out, size_t len);

// Releases a field handle. Null is ignored.
//
// # Safety
// `field` must be a handle from this library, not yet freed.
void dgpinv_field_free(struct DgpinvField *field);

// Configures a forward model on the centered hypercube grid. `k_min` is
// the diffusivity floor and is ignored unless `problem` is `Darcy`.
//
// # Safety
// `out` must be a valid writable pointer.
enum DgpinvStatus dgpinv_model_new(enum DgpinvProblem problem,
                                   size_t dim,
                                   size_t points_per_axis,
                                   double margin,
                                   double k_min,
                                   struct DgpinvModel **out);

// Applies the forward map to a parameter field sampled on the model grid.
//
// # Safety
// `model` and `theta` must be live handles; `out` must be writable.
enum DgpinvStatus dgpinv_model_apply(const struct DgpinvModel *model,
                                     const struct DgpinvField *theta,
                                     struct DgpinvField **out);

// Releases a model handle. Null is ignored.
//
// # Safety
// `model` must be a handle from this library, not yet freed.
void dgpinv_model_free(struct DgpinvModel *model);

// Draws the composed field of one conditioned deep-GP prior sample.
// Draws are deterministic in `(seed, replicate)` and match the CLI's
// `prior-sample` command.
//
// # Safety
// `out` must be a valid writable pointer.
enum DgpinvStatus dgpinv_dgp_sample(size_t ambient_d,
                                    uint32_t beta,
                                    double alpha_plus,
                                    size_t q_max,
                                    double m0,
                                    size_t points_per_axis,
                                    double margin,
                                    uint64_t n,
                                    uint64_t seed,
                                    uint32_t replicate,
                                    struct DgpinvField **out);

// Draws one canonically rescaled series-prior sample at sample size `n`.
// Draws are deterministic in `(seed, replicate)` and match the CLI.
//
// # Safety
// `out` must be a valid writable pointer.
enum DgpinvStatus dgpinv_baseline_sample(size_t ambient_d,
                                         double tau,
                                         uint32_t beta,
                                         size_t truncation,
                                         size_t points_per_axis,
                                         double margin,
                                         uint64_t n,
                                         uint64_t seed,
                                         uint32_t replicate,
                                         struct DgpinvField **out);

// Computes the exact rate-exponent table as a JSON document. `alpha` and
// the optional `tau` (may be null) accept integers, fractions like `7/2`,
// or short decimals. `problem` must be a PDE.
//
// # Safety
// `alpha` must be NUL-terminated; `tau` may be null; `out` must be
// writable. The returned string is released with `dgpinv_string_free`.
enum DgpinvStatus dgpinv_exponents_json(enum DgpinvProblem problem,
                                        const char *alpha,
                                        uint32_t beta,
                                        uint32_t d,
                                        const char *tau,
                                        char **out);

// Runs a full contraction-rate experiment from a plan document (the same
// JSON schema the CLI's `contract` command reads) and returns the report
// as JSON. `jobs` bounds the worker threads; 0 means one per core. The
// report is deterministic given the plan, independent of `jobs`.
//
// # Safety
// `plan_json` must be NUL-terminated; `out` must be writable. The
// returned string is released with `dgpinv_string_free`.
enum DgpinvStatus dgpinv_contract_json(const char *plan_json, size_t jobs, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DGP_INVERSE_H */
