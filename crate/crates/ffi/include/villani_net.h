#ifndef VILLANI_NET_H
#define VILLANI_NET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum VnStatus {
  VN_STATUS_OK = 0,
  VN_STATUS_NULL_POINTER = 1,
  VN_STATUS_INVALID_ARGUMENT = 2,
  VN_STATUS_DIMENSION_MISMATCH = 3,
  VN_STATUS_UNBOUNDED_ACTIVATION = 4,
  VN_STATUS_DIVERGED = 5,
  VN_STATUS_NUMERICAL = 6,
  VN_STATUS_PANIC = 7,
} VnStatus;

/**
 * Opaque problem handle.
 */
typedef struct VnProblem VnProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a problem from row-major `n × d` features, `n` labels in {−1, +1},
 * `p` outer weights and an activation such as `"sigmoid:1.0"`, `"tanh"` or `"softplus:4.0"`.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `out_problem` receives a handle to
 * release with [`vn_problem_free`].
 */
enum VnStatus vn_problem_new(const double *features,
                             const double *labels,
                             size_t n,
                             size_t d,
                             const double *outer,
                             size_t p,
                             const char *activation_name,
                             double lambda,
                             struct VnProblem **out_problem);

/**
 * # Safety
 * `problem` must come from [`vn_problem_new`] and not be used afterwards. Null is ignored.
 */
void vn_problem_free(struct VnProblem *problem);

/**
 * # Safety
 * `problem` must be a live handle; the outputs must be writable.
 */
enum VnStatus vn_problem_dims(const struct VnProblem *problem, size_t *n, size_t *d, size_t *p);

/**
 * Regularized risk at `w` (`p × d`, row-major).
 *
 * # Safety
 * `w` must hold `p·d` doubles.
 */
enum VnStatus vn_risk(const struct VnProblem *problem, const double *w, double *risk);

/**
 * Full gradient at `w`, written to `grad` (`p·d` doubles).
 *
 * # Safety
 * `w` and `grad` must hold `p·d` doubles and not overlap.
 */
enum VnStatus vn_gradient(const struct VnProblem *problem, const double *w, double *grad);

/**
 * Exact Laplacian with respect to `W` at `w`.
 *
 * # Safety
 * `w` must hold `p·d` doubles.
 */
enum VnStatus vn_laplacian(const struct VnProblem *problem, const double *w, double *lap);

/**
 * Threshold `λ_c`; `proof_variant` selects the factor-4 form.
 *
 * # Safety
 * `activation_name` must be a NUL-terminated string.
 */
enum VnStatus vn_lambda_c(const char *activation_name,
                          double a_norm,
                          double b_x,
                          bool proof_variant,
                          double *lambda_c);

/**
 * Gradient-Lipschitz bound for the problem; fails for unbounded activations.
 *
 * # Safety
 * `problem` must be a live handle.
 */
enum VnStatus vn_glip_bound(const struct VnProblem *problem, double *glip);

/**
 * Villani divergence check with default options at temperature `temp_s`.
 * The full report is returned as JSON in `report_json` (free with
 * [`vn_string_free`]); pass null to skip it.
 *
 * # Safety
 * `problem` must be a live handle; `verified` must be writable.
 */
enum VnStatus vn_verify_villani(const struct VnProblem *problem,
                                double temp_s,
                                uint64_t seed,
                                bool *verified,
                                char **report_json);

/**
 * Constant-step SGD from `w` (updated in place) for `num_steps` steps.
 *
 * # Safety
 * `w` must hold `p·d` doubles.
 */
enum VnStatus vn_run_sgd(const struct VnProblem *problem,
                         double *w,
                         double step_s,
                         size_t batch_b,
                         size_t num_steps,
                         uint64_t seed,
                         double *final_risk);

/**
 * Message for the last failed call on this thread, or null. Owned by the library.
 */
const char *vn_last_error_message(void);

/**
 * # Safety
 * `s` must come from this library. Null is ignored.
 */
void vn_string_free(char *s);

/**
 * Library version, static storage.
 */
const char *vn_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VILLANI_NET_H */
