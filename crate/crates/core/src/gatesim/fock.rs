//! Truncated Fock-space oracle for the push-gate channel.
//!
//! Independently of the coherent-state picture, each coupled mode is evolved
//! in a truncated number basis under the interaction-picture equation
//! `psi' = i lam(t) (a e^{-i w t} + a^dag e^{i w t}) psi` (the drive term of
//! `H = hbar w a^dag a - hbar lam (a + a^dag)`), seeded with every thermally
//! relevant Fock state. Channel coherences are reassembled from state
//! overlaps and pushed through the same worst-case fidelity functional as
//! the analytic path, cross-checking displacement, phase, and thermal
//! averaging at once.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::crystal::TrapConfig;
use crate::error::{Error, Result};
use crate::gatesim::fidelity::fidelity_from_overlap_matrix;
use crate::gatesim::{config_coefficients, oscillator, pulse_geometry, GatePulse};
use crate::phonons::{PhononModes, ThermalState};
use crate::units::TWO_PI;

/// Upper bound on the automatic Fock cutoff.
const N_MAX_CAP: usize = 6000;
/// Largest tolerated drift of a state norm during integration.
const NORM_DRIFT_TOL: f64 = 1e-5;

/// Numerical controls for [`gate_fidelity_fock`].
#[derive(Clone, Copy, Debug)]
pub struct FockOpts {
    /// Fock-space cutoff; `None` sizes it from the predicted displacement
    /// and thermal tail.
    pub n_max: Option<usize>,
    /// Integration steps per period of the fastest oscillation; at least 50.
    pub steps_per_period: f64,
    /// Thermal seed states are kept while their weight exceeds this.
    pub seed_cutoff: f64,
    /// Largest allowed final population in the top two Fock levels.
    pub truncation_tol: f64,
}

impl Default for FockOpts {
    fn default() -> Self {
        Self {
            n_max: None,
            steps_per_period: 60.0,
            seed_cutoff: 1e-8,
            truncation_tol: 1e-8,
        }
    }
}

/// Outcome of the Fock-basis channel reconstruction.
#[derive(Clone, Debug)]
pub struct FockReport {
    /// Worst-case fidelity against the ideal phase gate implied by the
    /// reconstructed coherences.
    pub fidelity: f64,
    /// Thermally averaged coherence matrix over the four configurations.
    pub overlaps: [[Complex64; 4]; 4],
}

/// Normalized thermal number-state weights `P(n) = nbar^n / (1+nbar)^(n+1)`,
/// truncated where the raw weight drops below `cutoff`.
pub(crate) fn thermal_seed_weights(nbar: f64, cutoff: f64) -> Vec<f64> {
    if nbar <= 0.0 {
        return vec![1.0];
    }
    let ratio = nbar / (1.0 + nbar);
    let mut p = 1.0 / (1.0 + nbar);
    let mut weights = Vec::new();
    while p >= cutoff && weights.len() < 100_000 {
        weights.push(p);
        p *= ratio;
    }
    if weights.is_empty() {
        weights.push(1.0);
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

/// Evolve `|seed>` under `psi' = i lam(t)(a e^{-i w t} + a^dag e^{i w t}) psi`
/// with fixed-step RK4.
pub(crate) fn evolve_fock_mode(
    omega: f64,
    lam: impl Fn(f64) -> f64,
    tau: f64,
    dt: f64,
    n_max: usize,
    seed: usize,
) -> Result<Vec<Complex64>> {
    if seed >= n_max {
        return Err(Error::Config(format!(
            "fock seed |{seed}> outside basis of size {n_max}"
        )));
    }
    let sqrt_n: Vec<f64> = (0..n_max).map(|n| (n as f64).sqrt()).collect();
    let apply = |t: f64, y: &[Complex64], out: &mut [Complex64]| {
        let l = lam(t);
        let down = Complex64::from_polar(1.0, -omega * t); // with a
        let up = down.conj();
        for n in 0..n_max {
            let mut acc = Complex64::new(0.0, 0.0);
            if n + 1 < n_max {
                acc += down * sqrt_n[n + 1] * y[n + 1];
            }
            if n > 0 {
                acc += up * sqrt_n[n] * y[n - 1];
            }
            out[n] = Complex64::i() * l * acc;
        }
    };
    let steps = (tau / dt).ceil().max(1.0) as usize;
    let h = tau / steps as f64;
    let mut psi = vec![Complex64::new(0.0, 0.0); n_max];
    psi[seed] = Complex64::new(1.0, 0.0);
    let mut k1 = psi.clone();
    let mut k2 = psi.clone();
    let mut k3 = psi.clone();
    let mut k4 = psi.clone();
    let mut tmp = psi.clone();
    for i in 0..steps {
        let t = i as f64 * h;
        apply(t, &psi, &mut k1);
        for n in 0..n_max {
            tmp[n] = psi[n] + 0.5 * h * k1[n];
        }
        apply(t + 0.5 * h, &tmp, &mut k2);
        for n in 0..n_max {
            tmp[n] = psi[n] + 0.5 * h * k2[n];
        }
        apply(t + 0.5 * h, &tmp, &mut k3);
        for n in 0..n_max {
            tmp[n] = psi[n] + h * k3[n];
        }
        apply(t + h, &tmp, &mut k4);
        for n in 0..n_max {
            psi[n] += h / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
        }
    }
    Ok(psi)
}

/// Reconstruct the gate channel in a truncated Fock basis and evaluate the
/// worst-case fidelity. Slow but assumption-free: serves as the oracle for
/// the analytic coherent-state path.
pub fn gate_fidelity_fock(
    trap: &TrapConfig,
    modes: &PhononModes,
    pulse: &GatePulse,
    thermal: Option<&ThermalState>,
    opts: &FockOpts,
) -> Result<FockReport> {
    if !(opts.steps_per_period >= 50.0) {
        return Err(Error::Config(format!(
            "steps_per_period = {} must be at least 50",
            opts.steps_per_period
        )));
    }
    for (name, v) in [
        ("seed_cutoff", opts.seed_cutoff),
        ("truncation_tol", opts.truncation_tol),
    ] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Config(format!("{name} = {v} outside (0, 1)")));
        }
    }
    if let Some(th) = thermal {
        if th.occupations.len() != modes.n_modes() {
            return Err(Error::Config(format!(
                "thermal state has {} modes, crystal has {}",
                th.occupations.len(),
                modes.n_modes()
            )));
        }
    }
    let geom = pulse_geometry(modes, pulse)?;
    if !geom.zero_coupled.is_empty() {
        return Err(Error::Precondition(
            "pulse couples a zero-frequency mode; the Fock oracle has no bound basis for it".into(),
        ));
    }
    let tau = pulse.tau;
    let nu = pulse.carrier_nu;
    let envelope = pulse.envelope;
    let f0 = pulse.force_peak;
    let bandwidth = TWO_PI / tau;

    let mut overlaps = [[Complex64::new(1.0, 0.0); 4]; 4];
    for mc in &geom.coupled {
        let nbar = thermal.map(|th| th.occupations[mc.mode]).unwrap_or(0.0);
        if !nbar.is_finite() {
            return Err(Error::Precondition(format!(
                "mode {} has unbounded thermal occupation",
                mc.mode
            )));
        }
        let weights = thermal_seed_weights(nbar, opts.seed_cutoff);
        let coeff = config_coefficients(mc.a, mc.b);
        let c_max = coeff.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let lam_unit = mc.alpha / (std::f64::consts::SQRT_2 * trap.hbar);
        let fastest = mc.omega.max(nu).max(bandwidth);
        let dt_base = TWO_PI / (opts.steps_per_period * fastest);

        // Size the basis from the coherent-path displacement prediction.
        let n_max = match opts.n_max {
            Some(n) => n.max(weights.len() + 2),
            None => {
                let probe = oscillator::integrate_mode(
                    mc.omega,
                    mc.alpha,
                    trap.hbar,
                    move |t| envelope.value(t, tau) * (nu * t).cos(),
                    tau,
                    dt_base,
                    fastest,
                )?;
                let beta_max = c_max * f0 * probe.max_beta;
                let reach = ((weights.len() as f64).sqrt() + beta_max + 7.0).powi(2);
                (reach.ceil() as usize + 4).max(weights.len() + 2)
            }
        };
        if n_max > N_MAX_CAP {
            return Err(Error::Precondition(format!(
                "mode {} needs a Fock basis of {n_max} > {N_MAX_CAP} levels; \
                 displacement too large for the oracle",
                mc.mode
            )));
        }

        let lam_rate = lam_unit * c_max * f0;
        let dt_stiff = 0.05 / (lam_rate * (n_max as f64).sqrt()).max(1e-300);
        let dt = dt_base.min(dt_stiff);

        let tasks: Vec<(usize, usize)> = (0..4)
            .flat_map(|s| (0..weights.len()).map(move |n| (s, n)))
            .collect();
        let states: Vec<Vec<Complex64>> = tasks
            .par_iter()
            .map(|&(s, n)| {
                let scale = lam_unit * coeff[s] * f0;
                let psi = evolve_fock_mode(
                    mc.omega,
                    move |t| scale * envelope.value(t, tau) * (nu * t).cos(),
                    tau,
                    dt,
                    n_max,
                    n,
                )?;
                let norm_sq: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
                if (norm_sq.sqrt() - 1.0).abs() > NORM_DRIFT_TOL {
                    return Err(Error::Convergence(format!(
                        "fock state norm drifted to {:.8} on mode {}; step too coarse",
                        norm_sq.sqrt(),
                        mc.mode
                    )));
                }
                let top = psi[n_max - 1].norm_sqr() + psi[n_max - 2].norm_sqr();
                if top > opts.truncation_tol {
                    return Err(Error::Precondition(format!(
                        "population {top:.3e} in the top Fock levels of mode {} \
                         (basis {n_max}); increase n_max",
                        mc.mode
                    )));
                }
                Ok(psi)
            })
            .collect::<Result<Vec<_>>>()?;
        let state = |s: usize, n: usize| &states[s * weights.len() + n];

        for (a, row) in overlaps.iter_mut().enumerate() {
            for (b, entry) in row.iter_mut().enumerate() {
                let mut o = Complex64::new(0.0, 0.0);
                for (n, &w) in weights.iter().enumerate() {
                    let (sa, sb) = (state(a, n), state(b, n));
                    // <psi_b | psi_a>
                    let mut ov = Complex64::new(0.0, 0.0);
                    for k in 0..n_max {
                        ov += sb[k].conj() * sa[k];
                    }
                    o += w * ov;
                }
                *entry *= o;
            }
        }
    }

    Ok(FockReport {
        fidelity: fidelity_from_overlap_matrix(&overlaps),
        overlaps,
    })
}
