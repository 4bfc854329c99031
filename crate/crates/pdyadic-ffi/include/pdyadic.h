#ifndef PDYADIC_H
#define PDYADIC_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes shared with the generated header.
 */
typedef enum PdStatus {
  PdOk = 0,
  PdNullPointer = 1,
  PdInvalidArgument = 2,
  PdOutOfRange = 3,
  PdSizeViolation = 4,
  PdNoConvergence = 5,
  PdIoError = 6,
  PdInternalError = 7,
} PdStatus;

/**
 * Opaque cell-value vector.
 */
typedef struct PdCellVector PdCellVector;

/**
 * Opaque kernel-coefficient table.
 */
typedef struct PdKernel PdKernel;

/**
 * Opaque weight (positive cell values plus cached averages).
 */
typedef struct PdWeight PdWeight;

/**
 * Operator constants, plain-old-data for the C side.
 */
typedef struct PdOperatorConstants {
  double size_sum;
  double size_plus;
  double size_minus;
  double bmo_t1;
  double bmo_t1star;
  double testing;
  double q;
} PdOperatorConstants;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message for this thread; empty string if none. The pointer is
 * owned by the library and must not be freed.
 */
const char *pd_last_error_message(void);

enum PdStatus pd_kernel_zeros(uint32_t depth, struct PdKernel **out);

/**
 * Kernel with entries uniform in `[-1/|I|, 1/|I|]`, deterministic per seed.
 */
enum PdStatus pd_kernel_random_uniform(uint32_t depth, uint64_t seed, struct PdKernel **out);

enum PdStatus pd_kernel_from_json(const char *json, bool allow_unnormalized, struct PdKernel **out);

/**
 * Serialize to JSON; free the result with `pd_string_free`.
 */
enum PdStatus pd_kernel_to_json(const struct PdKernel *kernel, char **out);

enum PdStatus pd_kernel_set(struct PdKernel *kernel,
                            uint32_t level,
                            uintptr_t index,
                            double kplus,
                            double kminus);

enum PdStatus pd_kernel_depth(const struct PdKernel *kernel, uint32_t *out);

enum PdStatus pd_kernel_apply(const struct PdKernel *kernel,
                              const struct PdCellVector *input,
                              struct PdCellVector **out);

enum PdStatus pd_kernel_apply_adjoint(const struct PdKernel *kernel,
                                      const struct PdCellVector *input,
                                      struct PdCellVector **out);

/**
 * Max-norm residual of the four-operator decomposition identity on `input`.
 */
enum PdStatus pd_kernel_decomposition_residual(const struct PdKernel *kernel,
                                               const struct PdCellVector *input,
                                               double *out);

enum PdStatus pd_kernel_constants(const struct PdKernel *kernel, struct PdOperatorConstants *out);

void pd_kernel_free(struct PdKernel *kernel);

/**
 * Build from `1 << depth` cell values.
 */
enum PdStatus pd_cellvector_new(uint32_t depth,
                                const double *values,
                                uintptr_t len,
                                struct PdCellVector **out);

enum PdStatus pd_cellvector_len(const struct PdCellVector *v, uintptr_t *out);

/**
 * Copy the cell values into a caller-provided buffer of length `len`.
 */
enum PdStatus pd_cellvector_copy(const struct PdCellVector *v, double *buffer, uintptr_t len);

void pd_cellvector_free(struct PdCellVector *v);

/**
 * Weight from `1 << depth` positive cell values.
 */
enum PdStatus pd_weight_new(uint32_t depth,
                            const double *values,
                            uintptr_t len,
                            struct PdWeight **out);

enum PdStatus pd_weight_a2(const struct PdWeight *w, double *out);

enum PdStatus pd_weight_ainfty(const struct PdWeight *w, double *out);

enum PdStatus pd_weight_rh1(const struct PdWeight *w, double *out);

void pd_weight_free(struct PdWeight *w);

/**
 * `L^2(u)`-vs-`L^2(v)` operator norm of the kernel; `v_inv` holds the cell
 * values of `v^{-1}`.
 */
enum PdStatus pd_weighted_norm(const struct PdKernel *kernel,
                               const struct PdWeight *v_inv,
                               const struct PdWeight *u,
                               double *out);

/**
 * Largest constant in the nine-condition two-weight battery.
 */
enum PdStatus pd_two_weight_h(const struct PdKernel *kernel,
                              const struct PdWeight *v_inv,
                              const struct PdWeight *u,
                              double *out);

/**
 * Free a string returned by this library.
 */
void pd_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PDYADIC_H */
