#ifndef VQE_H
#define VQE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum VqeStatus {
  VqeStatus_Ok = 0,
  VqeStatus_NullPointer = 1,
  VqeStatus_InvalidArgument = 2,
  VqeStatus_Dimension = 3,
  VqeStatus_Capacity = 4,
  VqeStatus_NotHermitian = 5,
  VqeStatus_Parse = 6,
  VqeStatus_Validation = 7,
  VqeStatus_BoundInapplicable = 8,
  VqeStatus_Degenerate = 9,
  VqeStatus_BudgetExhausted = 10,
  VqeStatus_Io = 11,
  VqeStatus_Internal = 12,
  VqeStatus_Panic = 13,
} VqeStatus;

/**
 * Sampling mode for [`vqe_estimate`].
 */
typedef enum VqeEstimatorMode {
  VqeEstimatorMode_Frequentist = 0,
  VqeEstimatorMode_Bayesian = 1,
} VqeEstimatorMode;

/**
 * Qubit Hamiltonian handle.
 */
typedef struct VqeHamiltonian VqeHamiltonian;

/**
 * State-vector handle.
 */
typedef struct VqeState VqeState;

/**
 * Outcome of [`vqe_estimate`].
 */
typedef struct VqeEstimate {
  double value;
  double variance;
  uint64_t preparations;
} VqeEstimate;

/**
 * Bounds from [`vqe_certify`]. Inapplicable bounds are NaN.
 */
typedef struct VqeCertificate {
  double weinstein_low;
  double weinstein_high;
  double ground_overlap;
  double excited_overlap;
} VqeCertificate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`) and returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
uintptr_t vqe_last_error_message(char *buf, uintptr_t len);

/**
 * Parses a Hamiltonian from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VqeStatus vqe_hamiltonian_from_json(const char *json, struct VqeHamiltonian **out);

/**
 * Builds the Jordan-Wigner qubit Hamiltonian from integral-file text.
 *
 * # Safety
 * `integrals` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VqeStatus vqe_hamiltonian_from_integrals(const char *integrals, struct VqeHamiltonian **out);

/**
 * # Safety
 * `h` must come from this library and not be used afterwards. Null is ignored.
 */
void vqe_hamiltonian_free(struct VqeHamiltonian *h);

/**
 * # Safety
 * `h` must be a live handle and `out` a valid pointer.
 */
enum VqeStatus vqe_hamiltonian_n_qubits(const struct VqeHamiltonian *h, uintptr_t *out);

/**
 * Number of stored Pauli terms.
 *
 * # Safety
 * `h` must be a live handle and `out` a valid pointer.
 */
enum VqeStatus vqe_hamiltonian_n_terms(const struct VqeHamiltonian *h, uintptr_t *out);

/**
 * Lowest eigenvalue by dense diagonalization.
 *
 * # Safety
 * `h` must be a live handle and `out` a valid pointer.
 */
enum VqeStatus vqe_hamiltonian_ground_energy(const struct VqeHamiltonian *h, double *out);

/**
 * Computational basis state `|index>` on `n_qubits` qubits.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum VqeStatus vqe_state_basis(uintptr_t n_qubits, uintptr_t index, struct VqeState **out);

/**
 * State from `len` interleaved `(re, im)` pairs, normalized on input.
 *
 * # Safety
 * `re_im` must point to `2 * len` doubles and `out` must be valid.
 */
enum VqeStatus vqe_state_from_amplitudes(const double *re_im, uintptr_t len, struct VqeState **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is ignored.
 */
void vqe_state_free(struct VqeState *s);

/**
 * Exact `<H>` and `Var[H]` in the state.
 *
 * # Safety
 * Handles must be live; `mean` and `variance` must be valid pointers.
 */
enum VqeStatus vqe_expectation(const struct VqeHamiltonian *h,
                               const struct VqeState *s,
                               double *mean,
                               double *variance);

/**
 * Sampled estimate of `<H>` to precision `epsilon` with a covariance-aware
 * grouping. `max_preparations` of zero means unlimited.
 *
 * # Safety
 * Handles must be live and `out` a valid pointer.
 */
enum VqeStatus vqe_estimate(const struct VqeHamiltonian *h,
                            const struct VqeState *s,
                            double epsilon,
                            enum VqeEstimatorMode mode,
                            uint64_t seed,
                            uint64_t max_preparations,
                            struct VqeEstimate *out);

/**
 * Weinstein interval and overlap bounds from a mean, a variance and a gap
 * lower bound.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum VqeStatus vqe_certify(double mean, double variance, double gap, struct VqeCertificate *out);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vqe_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VQE_H */
