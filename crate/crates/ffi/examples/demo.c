/* Minimal C consumer of the wigner-push ABI.
 *
 * Build from the workspace root after `cargo build -p wigner-push-ffi`:
 *
 *   cc crates/ffi/examples/demo.c -Icrates/ffi/include \
 *      -Ltarget/debug -lwigner_push_ffi -lm -o demo
 *   LD_LIBRARY_PATH=target/debug ./demo
 */

#include <stdio.h>
#include <stdlib.h>

#include "wigner_push.h"

static void check(WpStatus status, const char *what) {
    if (status != WpOk) {
        char msg[256];
        wp_last_error(msg, sizeof msg);
        fprintf(stderr, "%s failed (status %d): %s\n", what, (int)status, msg);
        exit(1);
    }
}

int main(void) {
    WpTrap *trap = NULL;
    check(wp_trap_new(19, 200e3, 10e6, 50e3, 9.0121831, 1.0, &trap),
          "wp_trap_new");

    WpCrystal *crystal = NULL;
    check(wp_crystal_solve(trap, &crystal), "wp_crystal_solve");
    double spacing;
    check(wp_crystal_spacing_m(crystal, &spacing), "wp_crystal_spacing_m");
    printf("crystal: %u ions, spacing %.3f um\n", wp_crystal_n_ions(crystal),
           1e6 * spacing);

    WpModes *modes = NULL;
    check(wp_modes_compute(trap, crystal, &modes), "wp_modes_compute");
    printf("modes:   %u\n", wp_modes_count(modes));

    uint32_t i, j;
    check(wp_crystal_center_pair(crystal, &i, &j), "wp_crystal_center_pair");
    WpGatePulse pulse = {
        .target_i = i,
        .target_j = j,
        .force_peak_n = 0.0, /* calibrate to phase pi */
        .direction_i = {1.0, 0.0, 0.0},
        .direction_j = {1.0, 0.0, 0.0},
        .envelope = WpEnvelopeGaussian,
        .envelope_param = 0.13,
        .tau_s = 5e-6,
        .carrier_nu_hz = 2.2e6,
    };
    WpGateReport report;
    check(wp_gate_run(trap, modes, &pulse, 1e-3, &report), "wp_gate_run");
    printf("gate:    F_pi = %.4e N, phase = %.6f rad, infidelity = %.3e, "
           "heating = %.3e quanta\n",
           report.force_for_pi_n, report.two_body_phase_rad,
           1.0 - report.fidelity, report.heating_quanta);

    printf("epsilon(0.2) = %.6e\n", wp_epsilon(0.2));

    WpLinkStats link;
    check(wp_two_click(1e-3, 0.1, 10e6, &link), "wp_two_click");
    printf("link:    p = %.2e, expected time = %.4e s, F = %.3f\n",
           link.success_probability, link.expected_time_s, link.fidelity);

    wp_modes_free(modes);
    wp_crystal_free(crystal);
    wp_trap_free(trap);
    return 0;
}
