/* C interface to the wigner-push ion-crystal gate simulator. */

#ifndef WIGNER_PUSH_H
#define WIGNER_PUSH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call in this ABI.
typedef enum WpStatus {
  // Success; out-parameters are valid.
  WpOk = 0,
  // A required pointer argument was null.
  WpNullArg = 1,
  // Invalid parameter value.
  WpConfig = 2,
  // Physically inadmissible request (resonant carrier, unconverged
  // crystal, ...).
  WpPrecondition = 3,
  // An iterative solver failed to converge.
  WpConvergence = 4,
  // Unexpected internal failure; see `wp_last_error`.
  WpInternal = 5,
} WpStatus;

// Pulse-envelope selector for [`WpGatePulse`].
typedef enum WpEnvelope {
  // `sin^2(pi t/tau)`; `param` ignored.
  WpEnvelopeSin2 = 0,
  // Blackman window; `param` ignored.
  WpEnvelopeBlackman = 1,
  // Taper-windowed Gaussian; `param` is the width as a fraction of tau.
  WpEnvelopeGaussian = 2,
  // Linear ramps around a flat top; `param` is the ramp fraction.
  WpEnvelopeTrapezoid = 3,
} WpEnvelope;

// Opaque minimized-crystal handle.
typedef struct WpCrystal WpCrystal;

// Opaque normal-mode handle.
typedef struct WpModes WpModes;

// Opaque trap-configuration handle.
typedef struct WpTrap WpTrap;

// Push-gate drive description.
typedef struct WpGatePulse {
  // First target ion index.
  uint32_t target_i;
  // Second target ion index.
  uint32_t target_j;
  // Peak force per ion, N; zero or negative requests calibration to an
  // entangling phase of magnitude pi.
  double force_peak_n;
  // Push direction on the first target (normalized internally).
  double direction_i[3];
  // Push direction on the second target.
  double direction_j[3];
  enum WpEnvelope envelope;
  // Envelope shape parameter; see [`WpEnvelope`].
  double envelope_param;
  // Pulse length, s.
  double tau_s;
  // Carrier modulation, ordinary Hz; 0 is the unmodulated push.
  double carrier_nu_hz;
} WpGatePulse;

// Scalar results of one gate simulation.
typedef struct WpGateReport {
  // Peak force the report describes, N.
  double force_peak_n;
  // Entangling phase between the targets, rad.
  double two_body_phase_rad;
  // Worst-case state fidelity at the requested temperature.
  double fidelity;
  // Residual motional quanta left in the crystal.
  double heating_quanta;
  // Largest residual coherent displacement on any mode.
  double residual_beta_max;
  // Peak force that calibrates this pulse shape to phase pi, N.
  double force_for_pi_n;
} WpGateReport;

// Heralded-link statistics.
typedef struct WpLinkStats {
  double success_probability;
  double expected_time_s;
  double fidelity;
} WpLinkStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the last error message on this thread into `buf` (NUL-terminated,
// truncated to `cap` bytes) and return the full message length in bytes.
// A null or empty buffer just queries the length.
//
// # Safety
// `buf` must be null or point to `cap` writable bytes.
size_t wp_last_error(char *buf, size_t cap);

// Create a trap configuration. Frequencies are ordinary hertz.
//
// # Safety
// `out` must be a valid pointer; the returned handle must be released with
// [`wp_trap_free`].
enum WpStatus wp_trap_new(uint32_t n_ions,
                          double omega_xy_hz,
                          double omega_z_hz,
                          double omega_r_hz,
                          double mass_amu,
                          double charge_e,
                          struct WpTrap **out);

// Release a trap handle; null is a no-op.
//
// # Safety
// `trap` must be a pointer from [`wp_trap_new`] not yet freed.
void wp_trap_free(struct WpTrap *trap);

// Minimize the crystal for a trap.
//
// # Safety
// `trap` must be a live handle; `out` valid; release the result with
// [`wp_crystal_free`].
enum WpStatus wp_crystal_solve(const struct WpTrap *trap, struct WpCrystal **out);

// Number of ions in a crystal; 0 for a null handle.
//
// # Safety
// `crystal` must be null or a live handle.
uint32_t wp_crystal_n_ions(const struct WpCrystal *crystal);

// Nearest-neighbor lattice spacing, m.
//
// # Safety
// `crystal` must be a live handle, `out` valid.
enum WpStatus wp_crystal_spacing_m(const struct WpCrystal *crystal, double *out);

// Copy ion positions as `[x0, y0, z0, x1, ...]` into `out` (capacity `cap`
// doubles, which must be at least `3 n_ions`).
//
// # Safety
// `crystal` must be a live handle; `out` must point to `cap` writable
// doubles.
enum WpStatus wp_crystal_positions(const struct WpCrystal *crystal, double *out, size_t cap);

// The two most central, adjacent ions; the default gate targets.
//
// # Safety
// `crystal` must be a live handle; `i`, `j` valid pointers.
enum WpStatus wp_crystal_center_pair(const struct WpCrystal *crystal, uint32_t *i, uint32_t *j);

// Release a crystal handle; null is a no-op.
//
// # Safety
// `crystal` must be a pointer from [`wp_crystal_solve`] not yet freed.
void wp_crystal_free(struct WpCrystal *crystal);

// Diagonalize the crystal's normal modes.
//
// # Safety
// `trap` and `crystal` must be live handles; `out` valid; release with
// [`wp_modes_free`].
enum WpStatus wp_modes_compute(const struct WpTrap *trap,
                               const struct WpCrystal *crystal,
                               struct WpModes **out);

// Number of normal modes (3 per ion); 0 for a null handle.
//
// # Safety
// `modes` must be null or a live handle.
uint32_t wp_modes_count(const struct WpModes *modes);

// Copy ascending mode frequencies (rad/s) into `out` (capacity `cap`
// doubles, at least the mode count).
//
// # Safety
// `modes` must be a live handle; `out` must point to `cap` writable
// doubles.
enum WpStatus wp_modes_frequencies(const struct WpModes *modes, double *out, size_t cap);

// Release a modes handle; null is a no-op.
//
// # Safety
// `modes` must be a pointer from [`wp_modes_compute`] not yet freed.
void wp_modes_free(struct WpModes *modes);

// Simulate one push gate at temperature `temperature_k` and fill `report`.
// A non-positive `force_peak_n` calibrates the gate to an entangling phase
// of magnitude pi.
//
// # Safety
// `trap` and `modes` must be live handles from the same crystal; `pulse`
// and `report` must be valid pointers.
enum WpStatus wp_gate_run(const struct WpTrap *trap,
                          const struct WpModes *modes,
                          const struct WpGatePulse *pulse,
                          double temperature_k,
                          struct WpGateReport *report);

// Parallel-edge suppression factor for a beam waist of `sigma` lattice
// spacings; NaN for a non-positive or non-finite waist.
double wp_epsilon(double sigma);

// Two-body phase written on an inclined cell edge by one sweep pass at
// mode frequency `omega_hz`.
//
// # Safety
// `trap` must be a live handle, `out` valid.
enum WpStatus wp_theta(const struct WpTrap *trap,
                       double omega_hz,
                       double waist_sigma,
                       double velocity_m_s,
                       double rabi_peak_hz,
                       double detuning_hz,
                       double spacing_m,
                       double *out);

// Closed-form two-click link statistics.
//
// # Safety
// `out` must be a valid pointer.
enum WpStatus wp_two_click(double eta, double eta_prime, double gamma_hz, struct WpLinkStats *out);

// Monte Carlo two-click link statistics over `trials` attempts,
// deterministic in `seed`.
//
// # Safety
// `out` must be a valid pointer.
enum WpStatus wp_two_click_mc(double eta,
                              double eta_prime,
                              double gamma_hz,
                              uint64_t seed,
                              uint64_t trials,
                              struct WpLinkStats *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WIGNER_PUSH_H */
