#ifndef PATHEXPLAIN_H
#define PATHEXPLAIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum PeStatus {
  PE_STATUS_OK = 0,
  PE_STATUS_NULL_POINTER = 1,
  PE_STATUS_INVALID_ARGUMENT = 2,
  PE_STATUS_PARSE = 3,
  PE_STATUS_SHAPE = 4,
  // A second-order quantity was requested from a ReLU network.
  PE_STATUS_SECOND_DERIVATIVE_UNDEFINED = 5,
  PE_STATUS_BUDGET = 6,
  PE_STATUS_INTRACTABLE_DIMENSION = 7,
  PE_STATUS_DIVERGENCE = 8,
  // A Rust panic was caught at the boundary; the library state is intact.
  PE_STATUS_PANIC = 9,
  PE_STATUS_OTHER = 10,
} PeStatus;

// Riemann rule for path quadrature.
typedef enum PeRule {
  PE_RULE_RIGHT = 0,
  PE_RULE_MIDPOINT = 1,
} PeRule;

// Opaque feed-forward network.
typedef struct PeNetwork PeNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread; empty after a success.
//
// The pointer stays valid until the next library call on the same thread.
const char *pe_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *pe_version(void);

// Parse a network from its JSON document.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum PeStatus pe_network_from_json(const char *json, struct PeNetwork **out);

// Serialize a network to JSON; free the result with [`pe_string_free`].
//
// # Safety
// `net` must be a live handle; `out` must be writable.
enum PeStatus pe_network_to_json(const struct PeNetwork *net, char **out);

// Release a network handle. NULL is ignored.
//
// # Safety
// `net` must come from this library and must not be used afterwards.
void pe_network_free(struct PeNetwork *net);

// Release a string returned by the library. NULL is ignored.
//
// # Safety
// `s` must come from this library and must not be used afterwards.
void pe_string_free(char *s);

// # Safety
// `net` must be a live handle; `out` must be writable.
enum PeStatus pe_network_input_dim(const struct PeNetwork *net, size_t *out);

// Scalar output `f(x)`.
//
// # Safety
// `x` holds `len` doubles; `out` is writable.
enum PeStatus pe_network_forward(const struct PeNetwork *net,
                                 const double *x,
                                 size_t len,
                                 double *out);

// Input gradient into `out[len]`.
//
// # Safety
// `x` holds `len` doubles; `out` has room for `len`.
enum PeStatus pe_network_gradient(const struct PeNetwork *net,
                                  const double *x,
                                  size_t len,
                                  double *out);

// Input Hessian into `out[len * len]`, row-major.
//
// # Safety
// `x` holds `len` doubles; `out` has room for `len * len`.
enum PeStatus pe_network_hessian(const struct PeNetwork *net,
                                 const double *x,
                                 size_t len,
                                 double *out);

// New handle with every ReLU replaced by SoftPlus of sharpness `beta`.
//
// # Safety
// `net` must be a live handle; `out` must be writable.
enum PeStatus pe_network_softplus_surgery(const struct PeNetwork *net,
                                          double beta,
                                          struct PeNetwork **out);

// Integrated Gradients with `k` steps into `out[len]`.
//
// # Safety
// `x` and `baseline` hold `len` doubles; `out` has room for `len`.
enum PeStatus pe_integrated_gradients(const struct PeNetwork *net,
                                      const double *x,
                                      const double *baseline,
                                      size_t len,
                                      size_t k,
                                      enum PeRule rule,
                                      double *out);

// Integrated Hessians on a `k x m` grid into `out[len * len]`, row-major.
//
// # Safety
// `x` and `baseline` hold `len` doubles; `out` has room for `len * len`.
enum PeStatus pe_integrated_hessians(const struct PeNetwork *net,
                                     const double *x,
                                     const double *baseline,
                                     size_t len,
                                     size_t k,
                                     size_t m,
                                     enum PeRule rule,
                                     double *out);

// Exact Shapley Interaction Index (at most 20 inputs) into `out[len * len]`.
//
// The diagonal holds Shapley values.
//
// # Safety
// `x` and `baseline` hold `len` doubles; `out` has room for `len * len`.
enum PeStatus pe_sii_exact(const struct PeNetwork *net,
                           const double *x,
                           const double *baseline,
                           size_t len,
                           double *out);

// Permutation-sampled Shapley Interaction Index into `out[len * len]`.
//
// `std_error` may be NULL; otherwise it receives per-entry standard errors.
//
// # Safety
// `x` and `baseline` hold `len` doubles; `out` and a non-NULL `std_error`
// have room for `len * len`.
enum PeStatus pe_sii_monte_carlo(const struct PeNetwork *net,
                                 const double *x,
                                 const double *baseline,
                                 size_t len,
                                 size_t n_samples,
                                 uint64_t seed,
                                 double *out,
                                 double *std_error);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PATHEXPLAIN_H */
