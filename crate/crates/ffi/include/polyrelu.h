#ifndef POLYRELU_H
#define POLYRELU_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every call.
 */
typedef enum PolyreluStatus {
  POLYRELU_STATUS_OK = 0,
  POLYRELU_STATUS_INVALID_ARGUMENT = 1,
  POLYRELU_STATUS_DIMENSION_MISMATCH = 2,
  POLYRELU_STATUS_DOMAIN = 3,
  POLYRELU_STATUS_CAP_EXCEEDED = 4,
  POLYRELU_STATUS_NUMERICAL = 5,
  POLYRELU_STATUS_IO = 6,
  POLYRELU_STATUS_PARSE = 7,
  POLYRELU_STATUS_NULL_POINTER = 8,
  POLYRELU_STATUS_PANIC = 9,
} PolyreluStatus;

/*
 Sparse-recovery program used by [`polyrelu_cs_fit`].
 */
typedef enum PolyreluCsVariant {
  /*
   `parameter` is the residual tolerance η.
   */
  POLYRELU_CS_VARIANT_QCBP = 0,
  /*
   `parameter` is the regularization weight μ.
   */
  POLYRELU_CS_VARIANT_LASSO = 1,
  /*
   `parameter` is the regularization weight μ.
   */
  POLYRELU_CS_VARIANT_SR_LASSO = 2,
} PolyreluCsVariant;

/*
 A Legendre expansion.
 */
typedef struct PolyreluExpansion PolyreluExpansion;

/*
 A downward-closed set of multi-indices.
 */
typedef struct PolyreluIndexSet PolyreluIndexSet;

/*
 A trained ReLU network.
 */
typedef struct PolyreluNetwork PolyreluNetwork;

/*
 A test function on `[-1, 1]^d`.
 */
typedef struct PolyreluTarget PolyreluTarget;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *polyrelu_last_error(void);

/*
 Orthonormal Legendre polynomial of degree `nu` at `x`.

 # Safety
 `result` must be a valid pointer.
 */
enum PolyreluStatus polyrelu_legendre(uint32_t nu, double x, double *result);

/*
 `|Λ^HC_s|` in dimension `d`.

 # Safety
 `result` must be a valid pointer.
 */
enum PolyreluStatus polyrelu_hc_cardinality(size_t d, size_t s, uint64_t *result);

/*
 Hyperbolic cross of degree `s` in dimension `d`.

 # Safety
 `set` must be a valid pointer; on success it receives a handle to free
 with [`polyrelu_index_set_free`].
 */
enum PolyreluStatus polyrelu_index_set_hyperbolic_cross(size_t d,
                                                        size_t s,
                                                        struct PolyreluIndexSet **set);

/*
 # Safety
 `set` must be a handle from this library and `result` a valid pointer.
 */
enum PolyreluStatus polyrelu_index_set_len(const struct PolyreluIndexSet *set, size_t *result);

/*
 # Safety
 `set` must be a handle from this library and `result` a valid pointer.
 */
enum PolyreluStatus polyrelu_index_set_dim(const struct PolyreluIndexSet *set, size_t *result);

/*
 Copies the `i`-th multi-index (in graded order) into `nu[0..dim]`.

 # Safety
 `nu` must point to at least `dim` writable values.
 */
enum PolyreluStatus polyrelu_index_set_get(const struct PolyreluIndexSet *set,
                                           size_t i,
                                           uint32_t *nu,
                                           size_t dim);

/*
 # Safety
 `set` must be null or a handle from this library not yet freed.
 */
void polyrelu_index_set_free(struct PolyreluIndexSet *set);

/*
 Builds a target from its JSON description, for example
 `{"name":"exp_cos","d":4}` or `{"name":"logsin","k":1}`.

 # Safety
 `json` must be a NUL-terminated string and `target` a valid pointer.
 */
enum PolyreluStatus polyrelu_target_from_json(const char *json, struct PolyreluTarget **target);

/*
 Evaluates the target at the `m` rows of the row-major `m × d` array `x`.

 # Safety
 `x` must hold `m * d` values and `y` room for `m`.
 */
enum PolyreluStatus polyrelu_target_eval(const struct PolyreluTarget *target,
                                         const double *x,
                                         size_t m,
                                         size_t d,
                                         double *y);

/*
 # Safety
 `target` must be null or a handle from this library not yet freed.
 */
void polyrelu_target_free(struct PolyreluTarget *target);

/*
 Recovers Legendre coefficients on `set` from `m` samples by (weighted)
 ℓ¹ minimization. `x` is row-major `m × d`.

 # Safety
 Pointers must be valid for the stated lengths; `expansion` receives a
 handle to free with [`polyrelu_expansion_free`].
 */
enum PolyreluStatus polyrelu_cs_fit(const struct PolyreluIndexSet *set,
                                    const double *x,
                                    const double *y,
                                    size_t m,
                                    size_t d,
                                    enum PolyreluCsVariant variant,
                                    double parameter,
                                    bool weighted,
                                    size_t max_iterations,
                                    struct PolyreluExpansion **expansion);

/*
 # Safety
 `expansion` must be a handle from this library and `result` a valid pointer.
 */
enum PolyreluStatus polyrelu_expansion_len(const struct PolyreluExpansion *expansion,
                                           size_t *result);

/*
 Copies the coefficients, in the order of the index set, into `values[0..len]`.

 # Safety
 `values` must have room for `len` entries.
 */
enum PolyreluStatus polyrelu_expansion_coefficients(const struct PolyreluExpansion *expansion,
                                                    double *values,
                                                    size_t len);

/*
 Evaluates the expansion at the rows of the row-major `m × d` array `x`.

 # Safety
 `x` must hold `m * d` values and `y` room for `m`.
 */
enum PolyreluStatus polyrelu_expansion_eval(const struct PolyreluExpansion *expansion,
                                            const double *x,
                                            size_t m,
                                            size_t d,
                                            double *y);

/*
 # Safety
 `expansion` must be null or a handle from this library not yet freed.
 */
void polyrelu_expansion_free(struct PolyreluExpansion *expansion);

/*
 Trains a `hidden_layers × width` ReLU network with Adam and the default
 exponentially decaying learning rate, stopping when the loss reaches
 `tolerance` or after `epochs` epochs. `final_loss` may be null.

 # Safety
 Pointers must be valid for the stated lengths; `network` receives a
 handle to free with [`polyrelu_network_free`].
 */
enum PolyreluStatus polyrelu_network_train(const double *x,
                                           const double *y,
                                           size_t m,
                                           size_t d,
                                           size_t hidden_layers,
                                           size_t width,
                                           size_t epochs,
                                           double tolerance,
                                           uint64_t seed,
                                           bool single_precision,
                                           struct PolyreluNetwork **network,
                                           double *final_loss);

/*
 Evaluates the network at the rows of the row-major `m × d` array `x`.

 # Safety
 `x` must hold `m * d` values and `y` room for `m`.
 */
enum PolyreluStatus polyrelu_network_eval(const struct PolyreluNetwork *network,
                                          const double *x,
                                          size_t m,
                                          size_t d,
                                          double *y);

/*
 Largest absolute weight or bias.

 # Safety
 `network` must be a handle from this library and `result` a valid pointer.
 */
enum PolyreluStatus polyrelu_network_max_abs_weight(const struct PolyreluNetwork *network,
                                                    double *result);

/*
 # Safety
 `network` must be null or a handle from this library not yet freed.
 */
void polyrelu_network_free(struct PolyreluNetwork *network);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLYRELU_H */
