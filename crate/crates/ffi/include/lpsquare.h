#ifndef LPSQUARE_H
#define LPSQUARE_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LpStatus {
  LP_STATUS_OK = 0,
  LP_STATUS_NULL_POINTER = 1,
  LP_STATUS_INVALID_ARGUMENT = 2,
  LP_STATUS_UNKNOWN_NAME = 3,
  LP_STATUS_UNCERTIFIED = 4,
  LP_STATUS_LENGTH_MISMATCH = 5,
  LP_STATUS_INTERNAL = 6,
} LpStatus;

/*
 A finite family of cubes over which constants are maximised.
 */
typedef struct LpFamily LpFamily;

/*
 Grid geometry: dimension, box side and samples per axis.
 */
typedef struct LpGrid LpGrid;

/*
 A kernel, optionally carrying its certification.
 */
typedef struct LpKernel LpKernel;

/*
 A positive weight sampled on a grid.
 */
typedef struct LpWeight LpWeight;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *lp_last_error(void);

enum LpStatus lp_grid_new(size_t dim, double side, size_t res, struct LpGrid **out);

/*
 Total number of samples, `N^n`; 0 for a null handle.
 */
size_t lp_grid_len(const struct LpGrid *grid);

void lp_grid_free(struct LpGrid *grid);

/*
 A weight from `len = N^n` positive samples in row-major order.
 */
enum LpStatus lp_weight_new(const struct LpGrid *grid,
                            const double *values,
                            size_t len,
                            struct LpWeight **out);

/*
 `max(|x - c|, h)^{-alpha}` with `c = (cx, cy)`.
 */
enum LpStatus lp_weight_power(const struct LpGrid *grid,
                              double cx,
                              double cy,
                              double alpha,
                              struct LpWeight **out);

void lp_weight_free(struct LpWeight *weight);

/*
 Every dyadic cube of levels `0..=max_level`.
 */
enum LpStatus lp_family_dyadic(const struct LpGrid *grid,
                               uint32_t max_level,
                               struct LpFamily **out);

size_t lp_family_len(const struct LpFamily *family);

void lp_family_free(struct LpFamily *family);

/*
 Looks up a registered kernel such as `"poisson-derivative"`.
 */
enum LpStatus lp_kernel_by_name(const char *name, size_t dim, struct LpKernel **out);

/*
 Certifies the kernel in place. `passed` receives 1 or 0 and `residual`
 the vanishing-mean residual; either may be null.
 */
enum LpStatus lp_kernel_certify(struct LpKernel *kernel,
                                size_t probe_budget,
                                int *passed,
                                double *residual);

void lp_kernel_free(struct LpKernel *kernel);

enum LpStatus lp_a1_constant(const struct LpWeight *weight,
                             const struct LpFamily *family,
                             double *out);

enum LpStatus lp_bmo_norm(const struct LpGrid *grid,
                          const double *f,
                          size_t len,
                          const struct LpWeight *weight,
                          const struct LpFamily *family,
                          double *out);

enum LpStatus lp_blo_constant(const struct LpGrid *grid,
                              const double *f,
                              size_t len,
                              const struct LpWeight *weight,
                              const struct LpFamily *family,
                              double *out);

/*
 Writes `𝒢f` at every sample into `out` (length `len`). Non-positive
 `t_min`/`t_max` select `2h` and `L/4`. The kernel must be certified.
 */
enum LpStatus lp_g_function(const struct LpKernel *kernel,
                            const struct LpGrid *grid,
                            const double *f,
                            size_t len,
                            double t_min,
                            double t_max,
                            size_t scales,
                            double *out);

/*
 The area integral `𝒮f`, with the conventions of [`lp_g_function`].
 */
enum LpStatus lp_area_integral(const struct LpKernel *kernel,
                               const struct LpGrid *grid,
                               const double *f,
                               size_t len,
                               double t_min,
                               double t_max,
                               size_t scales,
                               double *out);

/*
 `𝒢*_λ f`, with the conventions of [`lp_g_function`].
 */
enum LpStatus lp_g_star(const struct LpKernel *kernel,
                        const struct LpGrid *grid,
                        const double *f,
                        size_t len,
                        double lambda,
                        double t_min,
                        double t_max,
                        size_t scales,
                        double *out);

/*
 Checks the BLO tail bound on the dyadic root cube `(level, pos0, pos1)`.
 `measured` and `bound` receive one value per threshold; `passed`
 receives 1 when every measured tail lies under its bound.
 */
enum LpStatus lp_jn_blo_verify(const struct LpGrid *grid,
                               const double *f,
                               size_t len,
                               const struct LpWeight *weight,
                               uint32_t root_level,
                               size_t root_pos0,
                               size_t root_pos1,
                               const double *lambdas,
                               size_t n_lambdas,
                               double *measured,
                               double *bound,
                               int *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LPSQUARE_H */
