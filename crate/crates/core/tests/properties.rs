//! Randomized invariant checks: quantities that must hold for any valid
//! parameter choice, not just the frozen reference points.

use std::sync::OnceLock;

use proptest::prelude::*;

use wigner_push::cluster::{self, BeamSweep};
use wigner_push::crystal::{minimize, IonCrystal, MinimizeOpts, TrapConfig};
use wigner_push::error::Error;
use wigner_push::gatesim::{run_gate, Envelope, GateOpts, GatePulse};
use wigner_push::io::{merged_config, read_csv, write_csv};
use wigner_push::network::{
    one_click_comparison, time_to_target, two_click_analytic, ProtocolConfig,
};
use wigner_push::phonons::{modes_of, PhononModes};
use wigner_push::units::{AMU, BE9_AMU, QE, TWO_PI};

fn reference_trap(n: usize) -> TrapConfig {
    TrapConfig::new(
        n,
        TWO_PI * 200e3,
        TWO_PI * 10e6,
        TWO_PI * 50e3,
        BE9_AMU * AMU,
        QE,
    )
}

/// Two-ion crystal and modes, solved once for all cases.
fn pair_fixture() -> &'static (TrapConfig, IonCrystal, PhononModes) {
    static FIXTURE: OnceLock<(TrapConfig, IonCrystal, PhononModes)> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let trap = reference_trap(2);
        let crystal = minimize(&trap, None, &MinimizeOpts::default()).unwrap();
        let modes = modes_of(&trap, &crystal).unwrap();
        (trap, crystal, modes)
    })
}

fn envelope_strategy() -> impl Strategy<Value = Envelope> {
    prop_oneof![
        Just(Envelope::Sin2),
        Just(Envelope::Blackman),
        (0.08f64..0.4).prop_map(|sigma_frac| Envelope::Gaussian { sigma_frac }),
        (0.05f64..0.49).prop_map(|ramp_frac| Envelope::Trapezoid { ramp_frac }),
    ]
}

proptest! {
    #[test]
    fn envelope_values_stay_in_the_unit_band(
        envelope in envelope_strategy(),
        x in 0.0f64..=1.0,
        tau in 1e-7f64..1e-5,
    ) {
        let v = envelope.value(x * tau, tau);
        prop_assert!(v.is_finite());
        prop_assert!(v >= 0.0, "envelope {envelope:?} negative at {x}: {v}");
        prop_assert!(v <= 1.0 + 1e-12, "envelope {envelope:?} above 1 at {x}: {v}");
    }

    #[test]
    fn envelope_vanishes_identically_outside_the_window(
        envelope in envelope_strategy(),
        x in prop_oneof![-0.5f64..=-0.01, 1.01f64..=1.5],
        tau in 1e-7f64..1e-5,
    ) {
        prop_assert_eq!(envelope.value(x * tau, tau), 0.0);
    }

    #[test]
    fn parallel_suppression_changes_sign_only_at_the_balance_width(
        sigma in 0.05f64..3.0,
    ) {
        let balance = 11.0 - 8.0 * sigma * sigma;
        prop_assume!(balance.abs() > 1e-3);
        let eps = cluster::epsilon(sigma);
        prop_assert!(eps.is_finite());
        // The prefactor tends to -8 for huge waists; only waists below the
        // lattice spacing actually suppress the parallel edge.
        prop_assert!(eps.abs() < 8.0);
        if sigma <= 1.0 {
            prop_assert!(eps.abs() < 1.0, "no suppression at sigma {sigma}: {eps}");
        }
        prop_assert_eq!(eps > 0.0, balance > 0.0,
            "epsilon({}) = {} disagrees with 11 - 8 sigma^2 = {}", sigma, eps, balance);
    }

    #[test]
    fn edge_phases_are_positive_and_the_carrier_halves_and_flips_them(
        sigma in 0.05f64..1.0,
        velocity in 0.1f64..10.0,
        rabi_hz in 1e10f64..1e13,
        detuning_hz in 1e13f64..1e15,
        omega_hz in 1e6f64..1e8,
        spacing in 2e-6f64..5e-5,
    ) {
        let trap = reference_trap(3);
        let mut beam = BeamSweep {
            waist_sigma: sigma,
            velocity,
            xi: 80e-6,
            radius: 100e-6,
            omega_r: trap.omega_r,
            rabi_peak: TWO_PI * rabi_hz,
            detuning: TWO_PI * detuning_hz,
            carrier_nu: None,
        };
        let omega = TWO_PI * omega_hz;
        let theta = cluster::theta(omega, &beam, &trap, spacing);
        prop_assert!(theta.is_finite() && theta > 0.0);
        prop_assert_eq!(cluster::edge_phase(omega, &beam, &trap, spacing), theta);
        // Carrier-modulated sweeps pick up half the phase, with opposite
        // sign, evaluated at the modulation frequency.
        let nu = 11.0 * trap.omega_xy;
        beam.carrier_nu = Some(nu);
        let carrier = cluster::edge_phase(omega, &beam, &trap, spacing);
        prop_assert!(carrier < 0.0);
        let direct_at_nu = cluster::theta(nu, &beam, &trap, spacing);
        prop_assert!((carrier + 0.5 * direct_at_nu).abs() <= 1e-12 * direct_at_nu);
    }

    #[test]
    fn cell_weight_lookup_is_symmetric_and_finite(
        sigma in 0.05f64..1.0,
        omega_hz in 1e6f64..1e8,
        spacing in 2e-6f64..5e-5,
    ) {
        let trap = reference_trap(3);
        let beam = BeamSweep {
            waist_sigma: sigma,
            velocity: 1.0,
            xi: 80e-6,
            radius: 100e-6,
            omega_r: trap.omega_r,
            rabi_peak: TWO_PI * 4e12,
            detuning: TWO_PI * 200e12,
            carrier_nu: None,
        };
        let cell = cluster::cell_weights(TWO_PI * omega_hz, &beam, &trap, spacing).unwrap();
        prop_assert_eq!(cell.len(), 3);
        for i in 0..3usize {
            for j in (i + 1)..3 {
                let w = cell.weight(i, j);
                prop_assert_eq!(w, cell.weight(j, i));
                prop_assert!(w.unwrap().is_finite());
            }
        }
    }

    #[test]
    fn config_overrides_follow_last_write_wins(
        segments in prop::collection::vec("[a-z]{1,6}", 1..4),
        first in -1e6f64..1e6,
        second in -1e6f64..1e6,
    ) {
        let path = segments.join(".");
        let merged = merged_config(
            None,
            &[format!("{path}={first:?}"), format!("{path}={second:?}")],
        ).unwrap();
        let mut node = &merged;
        for seg in &segments {
            node = node.get(seg).expect("override must create the path");
        }
        prop_assert_eq!(node.as_f64(), Some(second));
        // Re-applying the winning override is a no-op.
        let again = merged_config(None, &[format!("{path}={second:?}")]).unwrap();
        let mut node2 = &again;
        for seg in &segments {
            node2 = node2.get(seg).unwrap();
        }
        prop_assert_eq!(node2.as_f64(), Some(second));
    }

    #[test]
    fn csv_tables_round_trip_every_float_exactly(
        rows in prop::collection::vec(
            prop::collection::vec(
                prop_oneof![
                    Just(0.0f64),
                    Just(-0.0f64),
                    Just(1e-320f64),
                    -1e300f64..1e300,
                ],
                3,
            ),
            1..20,
        ),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.csv");
        write_csv(&path, "probe", &["a", "b", "c"], &rows).unwrap();
        let (schema, parsed) = read_csv(&path).unwrap();
        prop_assert_eq!(schema, "probe");
        prop_assert_eq!(parsed.len(), rows.len());
        for (orig, read) in rows.iter().zip(&parsed) {
            for (a, b) in orig.iter().zip(read) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn thermal_occupations_grow_with_temperature(
        t_low in 1e-6f64..1e-2,
        factor in 1.0f64..100.0,
    ) {
        let (trap, _, modes) = pair_fixture();
        let cold = modes.thermal_occupation(trap, t_low).unwrap();
        let hot = modes.thermal_occupation(trap, t_low * factor).unwrap();
        for (k, (&nc, &nh)) in cold.occupations.iter().zip(&hot.occupations).enumerate() {
            if modes.zero_mode[k] {
                continue;
            }
            prop_assert!(nc >= 0.0);
            prop_assert!(nh >= nc * (1.0 - 1e-12), "mode {k}: {nc} > {nh}");
        }
    }

    #[test]
    fn link_plans_never_lose_to_either_candidate_scheme(
        eta in 1e-3f64..1.0,
        boost in 1.0f64..100.0,
        p in 1e-6f64..0.5,
        target in 1e-6f64..0.5,
    ) {
        let config = ProtocolConfig {
            eta,
            eta_prime: (eta * boost).min(1.0),
            gamma_rad: TWO_PI * 10e6,
            p_excite: p,
            target_infidelity: target,
            rng_seed: 0,
        };
        let two = two_click_analytic(&config).unwrap();
        let one_at_target = one_click_comparison(&ProtocolConfig {
            p_excite: target,
            ..config
        }).unwrap();
        let plan = time_to_target(&config).unwrap();
        let best = two.expected_time.min(one_at_target.expected_time);
        prop_assert!((plan.stats.expected_time - best).abs() <= 1e-12 * best);
        prop_assert!(plan.stats.fidelity >= 1.0 - target - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gate_results_stay_physical_for_random_pulses(
        envelope in envelope_strategy(),
        tau_periods in 0.5f64..2.0,
        nu_ratio in prop_oneof![Just(0.0), 6.0f64..16.0],
        vertical in any::<bool>(),
        temperature in 0.0f64..2e-3,
    ) {
        let (trap, _, modes) = pair_fixture();
        let axis = if vertical { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
        let pulse = GatePulse {
            targets: (0, 1),
            force_peak: 1e-21,
            directions: (axis, axis),
            envelope,
            tau: tau_periods * TWO_PI / trap.omega_xy,
            carrier_nu: nu_ratio * trap.omega_xy,
            laser: None,
        };
        let thermal = modes.thermal_occupation(trap, temperature).unwrap();
        match run_gate(trap, modes, &pulse, Some(&thermal), &GateOpts::default()) {
            Err(Error::Precondition(_)) => {
                // Carrier too close to a coupled mode; a legitimate refusal.
            }
            Err(e) => return Err(TestCaseError::fail(format!("unexpected error {e}"))),
            Ok(result) => {
                prop_assert!((0.0..=1.0).contains(&result.fidelity),
                    "fidelity {}", result.fidelity);
                prop_assert!(result.heating >= 0.0);
                prop_assert!(result.two_body_phase.is_finite());
                prop_assert!(result.force_for_pi > 0.0 && result.force_for_pi.is_finite());
                let pi_gate = result.with_force(result.force_for_pi).unwrap();
                prop_assert!((pi_gate.two_body_phase.abs() - std::f64::consts::PI).abs()
                    < 1e-6, "calibrated phase {}", pi_gate.two_body_phase);
            }
        }
    }
}
