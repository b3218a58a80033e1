//! Two-qubit push-gate pipeline: state-dependent forces on two target ions
//! excite the crystal's phonon modes, which imprint configuration-dependent
//! geometric phases and, through residual excitation, entangle the qubits
//! with the motion.
//!
//! The force on target `i` in qubit configuration `(s1, s2)` is
//! `s_i F0 env(t) cos(nu t) d_i` with `s_i = +-1`. Every mode `K` then sees
//! the scalar drive `C_s F0 env(t) cos(nu t)` with `C_s = s1 a_K + s2 b_K`,
//! `a_K = d_i . m_K(i)`, `b_K = d_j . m_K(j)`, so one unit-force integration
//! per mode fixes all four configurations: displacements scale with
//! `C_s F0` and phases with `(C_s F0)^2`.
//!
//! The per-configuration phases decompose exactly as
//! `phi_s = const + p1 s1 + p2 s2 + c s1 s2`; the single-qubit parts are
//! treated as calibrated away and `c` is the entangling two-body phase.
//! Fidelity against the realized phase gate is then limited purely by
//! residual motional entanglement, evaluated over a thermal motional state.

pub mod fidelity;
pub mod fock;
pub mod oscillator;
pub mod phase;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crystal::{IonCrystal, TrapConfig};
use crate::error::{Error, Result};
use crate::phonons::{PhononModes, ThermalState};
use crate::units::TWO_PI;

pub use fidelity::{DephasingChannel, CONFIGS};

/// Couplings below this fraction of the strongest mode coupling are ignored.
const COUPLING_CUTOFF: f64 = 1e-10;

/// Normalized pulse envelope: zero at both ends of `[0, tau]`, peak 1,
/// identically zero outside the window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    /// `sin^2(pi t / tau)`.
    Sin2,
    /// Blackman window `0.42 - 0.5 cos(2 pi x) + 0.08 cos(4 pi x)`.
    Blackman,
    /// Gaussian of width `sigma_frac * tau` multiplied by a `sin^2` taper so
    /// both the value and the slope vanish at the window edges. The taper
    /// removes the spectral leakage floor a truncated Gaussian would have.
    Gaussian { sigma_frac: f64 },
    /// Linear ramps of length `ramp_frac * tau` around a flat top; models a
    /// switched constant push.
    Trapezoid { ramp_frac: f64 },
}

impl Envelope {
    /// Envelope value at time `t` for a pulse of length `tau`.
    pub fn value(self, t: f64, tau: f64) -> f64 {
        if !(0.0..=tau).contains(&t) {
            return 0.0;
        }
        let x = t / tau;
        match self {
            Envelope::Sin2 => (std::f64::consts::PI * x).sin().powi(2),
            Envelope::Blackman => 0.42 - 0.5 * (TWO_PI * x).cos() + 0.08 * (2.0 * TWO_PI * x).cos(),
            Envelope::Gaussian { sigma_frac } => {
                let two_s2 = 2.0 * sigma_frac * sigma_frac;
                let g = (-(x - 0.5) * (x - 0.5) / two_s2).exp();
                g * (std::f64::consts::PI * x).sin().powi(2)
            }
            Envelope::Trapezoid { ramp_frac } => {
                if x < ramp_frac {
                    x / ramp_frac
                } else if x > 1.0 - ramp_frac {
                    (1.0 - x) / ramp_frac
                } else {
                    1.0
                }
            }
        }
    }

    /// Shape parameters must be finite and leave a nonempty flat region.
    pub fn validate(self) -> Result<()> {
        match self {
            Envelope::Sin2 | Envelope::Blackman => Ok(()),
            Envelope::Gaussian { sigma_frac } => {
                if sigma_frac.is_finite() && sigma_frac > 0.0 && sigma_frac <= 10.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "gaussian envelope: sigma_frac = {sigma_frac} outside (0, 10]"
                    )))
                }
            }
            Envelope::Trapezoid { ramp_frac } => {
                if ramp_frac.is_finite() && ramp_frac > 0.0 && ramp_frac <= 0.5 {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "trapezoid envelope: ramp_frac = {ramp_frac} outside (0, 0.5]"
                    )))
                }
            }
        }
    }
}

/// Laser parameters entering the spontaneous-scattering estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserSetup {
    /// Peak resonant Rabi frequency, rad/s.
    pub rabi_peak: f64,
    /// Detuning from the optical transition, rad/s.
    pub detuning: f64,
    /// Excited-state linewidth, rad/s.
    pub linewidth: f64,
    /// Number of beams that contribute scattering.
    pub n_beams: u32,
}

/// Probability of at least one spontaneous-scattering event during the
/// pulse. The envelope is taken to scale the Rabi frequency,
/// `Omega(t) = Omega_0 env(t)`, so each beam holds an excited-state
/// population `(Omega_0 env / (2 Delta))^2` and scatters at rate
/// `gamma / 2` of it.
pub fn spontaneous_error(laser: &LaserSetup, envelope: Envelope, tau: f64) -> f64 {
    let saturation = (laser.rabi_peak / (2.0 * laser.detuning)).powi(2);
    f64::from(laser.n_beams)
        * 0.5
        * laser.linewidth
        * saturation
        * phase::envelope_overlap(envelope, tau)
}

/// One state-dependent push pulse on a pair of ions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatePulse {
    /// Indices of the two target ions.
    pub targets: (usize, usize),
    /// Peak magnitude of the state-dependent force, N.
    pub force_peak: f64,
    /// Push directions on the two targets; normalized internally.
    pub directions: ([f64; 3], [f64; 3]),
    pub envelope: Envelope,
    /// Pulse length, s.
    pub tau: f64,
    /// Carrier modulation frequency, rad/s; `0` selects an unmodulated
    /// (quasistatic) push.
    pub carrier_nu: f64,
    /// Optional laser parameters for the scattering estimate.
    pub laser: Option<LaserSetup>,
}

/// Numerical controls for [`run_gate`].
#[derive(Clone, Copy, Debug)]
pub struct GateOpts {
    /// Minimum allowed `|nu - omega_K|` on coupled modes, in units of the
    /// pulse bandwidth `2 pi / tau`.
    pub resonance_margin: f64,
    /// Integration steps per period of the fastest timescale; at least 50.
    pub steps_per_period: f64,
}

impl Default for GateOpts {
    fn default() -> Self {
        Self {
            resonance_margin: 3.0,
            steps_per_period: 50.0,
        }
    }
}

/// Projection of the pulse onto one mode.
pub(crate) struct ModeCoupling {
    pub mode: usize,
    pub omega: f64,
    /// Ground-state length, m (infinite for zero modes).
    pub alpha: f64,
    /// `d_i . m_K(i)`.
    pub a: f64,
    /// `d_j . m_K(j)`.
    pub b: f64,
}

pub(crate) struct PulseGeometry {
    pub di: [f64; 3],
    pub dj: [f64; 3],
    /// Coupled finite-frequency modes.
    pub coupled: Vec<ModeCoupling>,
    /// Coupled zero-frequency modes.
    pub zero_coupled: Vec<ModeCoupling>,
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn unit3(v: [f64; 3], what: &str) -> Result<[f64; 3]> {
    let n = dot3(v, v).sqrt();
    if !n.is_finite() || n < 1e-12 {
        return Err(Error::Config(format!(
            "{what}: push direction must be a nonzero finite vector, got {v:?}"
        )));
    }
    Ok([v[0] / n, v[1] / n, v[2] / n])
}

/// Validate the pulse against the mode data and project it onto the modes.
pub(crate) fn pulse_geometry(modes: &PhononModes, pulse: &GatePulse) -> Result<PulseGeometry> {
    let (i, j) = pulse.targets;
    let n = modes.n_ions();
    if i >= n || j >= n || i == j {
        return Err(Error::Config(format!(
            "gate targets ({i}, {j}) must be two distinct ions below {n}"
        )));
    }
    if !(pulse.force_peak.is_finite() && pulse.force_peak >= 0.0) {
        return Err(Error::Config(format!(
            "force_peak = {} N must be finite and nonnegative",
            pulse.force_peak
        )));
    }
    if !(pulse.tau.is_finite() && pulse.tau > 0.0) {
        return Err(Error::Config(format!(
            "tau = {} s must be finite and positive",
            pulse.tau
        )));
    }
    if !(pulse.carrier_nu.is_finite() && pulse.carrier_nu >= 0.0) {
        return Err(Error::Config(format!(
            "carrier_nu = {} rad/s must be finite and nonnegative",
            pulse.carrier_nu
        )));
    }
    pulse.envelope.validate()?;
    let di = unit3(pulse.directions.0, "first target")?;
    let dj = unit3(pulse.directions.1, "second target")?;

    let raw: Vec<(usize, f64, f64)> = (0..modes.n_modes())
        .map(|k| {
            (
                k,
                dot3(di, modes.mode_at_ion(k, i)),
                dot3(dj, modes.mode_at_ion(k, j)),
            )
        })
        .collect();
    let strongest = raw
        .iter()
        .map(|&(_, a, b)| a.abs() + b.abs())
        .fold(0.0f64, f64::max);
    let cutoff = COUPLING_CUTOFF * strongest;
    let mut coupled = Vec::new();
    let mut zero_coupled = Vec::new();
    for (k, a, b) in raw {
        if a.abs() + b.abs() <= cutoff || strongest == 0.0 {
            continue;
        }
        let mc = ModeCoupling {
            mode: k,
            omega: modes.frequencies[k],
            alpha: modes.mode_lengths[k],
            a,
            b,
        };
        if modes.zero_mode[k] {
            zero_coupled.push(mc);
        } else {
            coupled.push(mc);
        }
    }
    Ok(PulseGeometry {
        di,
        dj,
        coupled,
        zero_coupled,
    })
}

/// `C_s = s1 a + s2 b` for the four configurations in [`CONFIGS`] order.
pub(crate) fn config_coefficients(a: f64, b: f64) -> [f64; 4] {
    let mut c = [0.0; 4];
    for (s, &(s1, s2)) in CONFIGS.iter().enumerate() {
        c[s] = s1 * a + s2 * b;
    }
    c
}

/// Residual excitation record for one mode.
#[derive(Clone, Debug)]
pub struct ModeExcitation {
    /// Index into the mode list.
    pub mode: usize,
    /// Mode frequency, rad/s.
    pub omega: f64,
    /// Thermal occupation assumed when the fidelity was evaluated.
    pub nbar: f64,
    /// Residual coherent displacement per configuration.
    pub betas: [Complex64; 4],
    /// Largest `|beta(t)|` reached during the pulse (worst configuration).
    pub max_beta: f64,
}

/// Outcome of one push-gate pulse.
#[derive(Clone, Debug)]
pub struct GateResult {
    /// Peak force the result was evaluated at, N.
    pub force_peak: f64,
    /// Accumulated phase per configuration, [`CONFIGS`] order.
    pub phases: [f64; 4],
    /// Coefficient of `s1 s2` in the phases: the entangling phase, rad.
    pub two_body_phase: f64,
    /// Same phase from the static form factor and envelope overlap.
    pub two_body_phase_closed_form: f64,
    /// Worst-case fidelity against the realized phase gate (decoherence
    /// limited; phase errors calibrated away).
    pub fidelity: f64,
    /// Largest motional energy left in the crystal over configurations,
    /// in quanta at zero temperature.
    pub heating: f64,
    /// Largest residual `|beta|` on any mode and configuration.
    pub residual_beta_max: f64,
    /// Largest `|beta|` reached at any time during the pulse.
    pub transient_beta_max: f64,
    /// Largest momentum kick onto a zero-frequency mode, N s. Free-mode
    /// dynamics are not otherwise modeled: a non-negligible value means the
    /// pulse leaks into unconfined motion and the result is incomplete.
    pub zero_mode_impulse: f64,
    /// Peak force that would bring `|two_body_phase|` to pi with the same
    /// shape (independent of `force_peak`).
    pub force_for_pi: f64,
    /// Scattering-error estimate, present when laser parameters were given.
    pub spontaneous_error: Option<f64>,
    /// Per-mode excitations (coupled finite-frequency modes only).
    pub excitations: Vec<ModeExcitation>,
}

impl GateResult {
    fn damping_with(&self, nbar_of: impl Fn(&ModeExcitation) -> f64) -> [[f64; 4]; 4] {
        let mut d = [[1.0f64; 4]; 4];
        for exc in &self.excitations {
            let weight = 2.0 * nbar_of(exc) + 1.0;
            for (a, row) in d.iter_mut().enumerate() {
                for (b, damp) in row.iter_mut().enumerate() {
                    let diff = exc.betas[a] - exc.betas[b];
                    *damp *= (-0.5 * diff.norm_sqr() * weight).exp();
                }
            }
        }
        d
    }

    /// Dephasing channel at the occupations stored in the result.
    pub fn channel(&self) -> DephasingChannel {
        DephasingChannel {
            phases: self.phases,
            damping: self.damping_with(|e| e.nbar),
        }
    }

    /// Dephasing channel re-evaluated on another thermal state.
    pub fn channel_at(&self, thermal: &ThermalState) -> Result<DephasingChannel> {
        for exc in &self.excitations {
            let nbar = *thermal.occupations.get(exc.mode).ok_or_else(|| {
                Error::Config(format!(
                    "thermal state covers {} modes but the gate excited mode {}",
                    thermal.occupations.len(),
                    exc.mode
                ))
            })?;
            if !nbar.is_finite() {
                return Err(Error::Precondition(format!(
                    "mode {} has unbounded thermal occupation",
                    exc.mode
                )));
            }
        }
        Ok(DephasingChannel {
            phases: self.phases,
            damping: self.damping_with(|e| thermal.occupations[e.mode]),
        })
    }

    /// Worst-case fidelity re-evaluated on another thermal state.
    pub fn fidelity_at(&self, thermal: &ThermalState) -> Result<f64> {
        Ok(self.channel_at(thermal)?.fidelity_realized())
    }

    /// Exact rescaling of the result to another peak force: displacements
    /// are linear and phases quadratic in the force. The scattering estimate
    /// scales linearly (intensity-tuned force at fixed detuning). Thermal
    /// occupations are kept, and the fidelity is re-evaluated.
    pub fn with_force(&self, force: f64) -> Result<GateResult> {
        if self.force_peak == 0.0 {
            return Err(Error::Config(
                "cannot rescale a gate result computed at zero force".into(),
            ));
        }
        let r = force / self.force_peak;
        let r2 = r * r;
        let excitations: Vec<ModeExcitation> = self
            .excitations
            .iter()
            .map(|e| ModeExcitation {
                mode: e.mode,
                omega: e.omega,
                nbar: e.nbar,
                betas: e.betas.map(|b| b * r),
                max_beta: e.max_beta * r.abs(),
            })
            .collect();
        let mut out = GateResult {
            force_peak: force,
            phases: self.phases.map(|p| p * r2),
            two_body_phase: self.two_body_phase * r2,
            two_body_phase_closed_form: self.two_body_phase_closed_form * r2,
            fidelity: 1.0,
            heating: self.heating * r2,
            residual_beta_max: self.residual_beta_max * r.abs(),
            transient_beta_max: self.transient_beta_max * r.abs(),
            zero_mode_impulse: self.zero_mode_impulse * r.abs(),
            force_for_pi: self.force_for_pi,
            spontaneous_error: self.spontaneous_error.map(|p| p * r.abs()),
            excitations,
        };
        out.fidelity = out.channel().fidelity_realized();
        Ok(out)
    }
}

/// Simulate one push pulse on the crystal's modes.
///
/// Each coupled finite-frequency mode is integrated once at unit force and
/// scaled onto the four qubit configurations. A nonzero carrier must sit
/// outside the coupled band and at least `resonance_margin` pulse
/// bandwidths away from every coupled mode. With `thermal = None` the
/// motion starts in the ground state.
pub fn run_gate(
    trap: &TrapConfig,
    modes: &PhononModes,
    pulse: &GatePulse,
    thermal: Option<&ThermalState>,
    opts: &GateOpts,
) -> Result<GateResult> {
    if !(opts.steps_per_period >= 50.0) {
        return Err(Error::Config(format!(
            "steps_per_period = {} must be at least 50",
            opts.steps_per_period
        )));
    }
    if !(opts.resonance_margin >= 0.0) {
        return Err(Error::Config(format!(
            "resonance_margin = {} must be nonnegative",
            opts.resonance_margin
        )));
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
    let (i, j) = pulse.targets;
    let nu = pulse.carrier_nu;
    let tau = pulse.tau;
    let envelope = pulse.envelope;

    // Resonance guard: the carrier must clear every coupled mode by the
    // stated number of pulse bandwidths.
    let bandwidth = TWO_PI / tau;
    if nu > 0.0 {
        for mc in &geom.coupled {
            if (nu - mc.omega).abs() < opts.resonance_margin * bandwidth {
                return Err(Error::Precondition(format!(
                    "carrier at {nu:.6e} rad/s is within {} pulse bandwidths of \
                     coupled mode {} at {:.6e} rad/s",
                    opts.resonance_margin, mc.mode, mc.omega
                )));
            }
        }
    }

    let omega_max = geom.coupled.iter().map(|m| m.omega).fold(0.0f64, f64::max);
    let fastest = nu.max(omega_max).max(bandwidth);
    let traces = if geom.coupled.is_empty() {
        Vec::new()
    } else {
        let dt = TWO_PI / (opts.steps_per_period * fastest);
        geom.coupled
            .par_iter()
            .map(|mc| {
                oscillator::integrate_mode(
                    mc.omega,
                    mc.alpha,
                    trap.hbar,
                    move |t| envelope.value(t, tau) * (nu * t).cos(),
                    tau,
                    dt,
                    fastest,
                )
            })
            .collect::<Result<Vec<_>>>()?
    };

    let f0 = pulse.force_peak;
    let mut phases = [0.0f64; 4];
    let mut unit_two_body = 0.0f64;
    let mut excitations = Vec::with_capacity(geom.coupled.len());
    let mut residual_beta_max = 0.0f64;
    let mut transient_beta_max = 0.0f64;
    let mut heating_per_config = [0.0f64; 4];
    for (mc, trace) in geom.coupled.iter().zip(&traces) {
        let coeff = config_coefficients(mc.a, mc.b);
        let mut betas = [Complex64::new(0.0, 0.0); 4];
        let c_max = coeff.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        for s in 0..4 {
            let scale = coeff[s] * f0;
            betas[s] = trace.beta * scale;
            phases[s] += scale * scale * trace.phase;
            heating_per_config[s] += betas[s].norm_sqr();
            residual_beta_max = residual_beta_max.max(betas[s].norm());
        }
        // (C_s)^2 = a^2 + b^2 + 2 a b s1 s2: the cross term is the
        // entangling part.
        unit_two_body += 2.0 * mc.a * mc.b * trace.phase;
        let max_beta = c_max * f0 * trace.max_beta;
        transient_beta_max = transient_beta_max.max(max_beta);
        let nbar = thermal.map(|th| th.occupations[mc.mode]).unwrap_or(0.0);
        if !nbar.is_finite() {
            return Err(Error::Precondition(format!(
                "mode {} has unbounded thermal occupation",
                mc.mode
            )));
        }
        excitations.push(ModeExcitation {
            mode: mc.mode,
            omega: mc.omega,
            nbar,
            betas,
            max_beta,
        });
    }

    // Momentum leaked into unconfined modes: reported, not evolved.
    let mut zero_mode_impulse = 0.0f64;
    if !geom.zero_coupled.is_empty() {
        let j_unit = simpson(|t| envelope.value(t, tau) * (nu * t).cos(), 0.0, tau, 4096);
        for mc in &geom.zero_coupled {
            zero_mode_impulse =
                zero_mode_impulse.max((mc.a.abs() + mc.b.abs()) * f0 * j_unit.abs());
        }
    }

    let closed_form = phase::two_body_phase_closed_form(
        trap, modes, i, j, geom.di, geom.dj, nu, f0, envelope, tau,
    )?;

    let force_for_pi = if unit_two_body != 0.0 {
        (std::f64::consts::PI / unit_two_body.abs()).sqrt()
    } else {
        f64::INFINITY
    };

    let mut result = GateResult {
        force_peak: f0,
        phases,
        two_body_phase: 0.0,
        two_body_phase_closed_form: closed_form,
        fidelity: 1.0,
        heating: heating_per_config.iter().fold(0.0f64, |m, &h| m.max(h)),
        residual_beta_max,
        transient_beta_max,
        zero_mode_impulse,
        force_for_pi,
        spontaneous_error: pulse
            .laser
            .as_ref()
            .map(|l| spontaneous_error(l, envelope, tau)),
        excitations,
    };
    let channel = result.channel();
    result.two_body_phase = channel.two_body_phase();
    result.fidelity = channel.fidelity_realized();
    Ok(result)
}

/// Reference gate pair for fidelity-vs-temperature comparisons: a
/// carrier-modulated lateral push against a quasistatic vertical push, both
/// on the given ion pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Temperatures to evaluate, K.
    pub temperatures: Vec<f64>,
    pub carrier_envelope: Envelope,
    /// Carrier-gate pulse length, s.
    pub carrier_tau: f64,
    /// Carrier modulation frequency, rad/s.
    pub carrier_nu: f64,
    pub vertical_envelope: Envelope,
    /// Vertical-gate pulse length, s.
    pub vertical_tau: f64,
}

impl SweepConfig {
    /// Reference choice: carrier gate over one lateral trap period at
    /// `11 omega_xy`, with a Gaussian envelope whose spectral leakage at the
    /// carrier-mode detunings is small enough to keep residual excitation
    /// (and with it any temperature dependence) negligible; vertical push
    /// over `1 / omega_xy` with a plain sine-squared envelope, whose
    /// leakage at the vertical band is the temperature-sensitive residual.
    pub fn for_trap(trap: &TrapConfig, temperatures: Vec<f64>) -> Self {
        Self {
            temperatures,
            carrier_envelope: Envelope::Gaussian { sigma_frac: 0.13 },
            carrier_tau: TWO_PI / trap.omega_xy,
            carrier_nu: 11.0 * trap.omega_xy,
            vertical_envelope: Envelope::Sin2,
            vertical_tau: 1.0 / trap.omega_xy,
        }
    }
}

/// One row of the fidelity-vs-temperature comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Temperature, K.
    pub temperature: f64,
    /// Worst-case fidelity of the carrier-modulated lateral gate.
    pub fidelity_carrier: f64,
    /// Worst-case fidelity of the switched vertical gate.
    pub fidelity_vertical: f64,
}

/// Fidelity of the two reference gates across temperatures, both calibrated
/// to an entangling phase of magnitude pi on the central ion pair.
pub fn temperature_sweep(
    trap: &TrapConfig,
    crystal: &IonCrystal,
    modes: &PhononModes,
    sweep: &SweepConfig,
    opts: &GateOpts,
) -> Result<Vec<SweepPoint>> {
    for &t in &sweep.temperatures {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Config(format!(
                "sweep temperature {t} K must be finite and nonnegative"
            )));
        }
    }
    let (i, j) = crystal.center_pair();
    let ri = crystal.positions[i];
    let rj = crystal.positions[j];
    let axis = unit3(
        [rj[0] - ri[0], rj[1] - ri[1], rj[2] - ri[2]],
        "central pair axis",
    )?;

    let calibrated = |pulse: &GatePulse| -> Result<GateResult> {
        let probe = run_gate(trap, modes, pulse, None, opts)?;
        if !probe.force_for_pi.is_finite() {
            return Err(Error::Precondition(format!(
                "pulse on pair ({i}, {j}) produces no entangling phase to calibrate"
            )));
        }
        probe.with_force(probe.force_for_pi)
    };
    let carrier = calibrated(&GatePulse {
        targets: (i, j),
        force_peak: 1e-21,
        directions: (axis, axis),
        envelope: sweep.carrier_envelope,
        tau: sweep.carrier_tau,
        carrier_nu: sweep.carrier_nu,
        laser: None,
    })?;
    let vertical = calibrated(&GatePulse {
        targets: (i, j),
        force_peak: 1e-21,
        directions: ([0.0, 0.0, 1.0], [0.0, 0.0, 1.0]),
        envelope: sweep.vertical_envelope,
        tau: sweep.vertical_tau,
        carrier_nu: 0.0,
        laser: None,
    })?;

    sweep
        .temperatures
        .iter()
        .map(|&t| {
            let thermal = modes.thermal_occupation(trap, t)?;
            Ok(SweepPoint {
                temperature: t,
                fidelity_carrier: carrier.fidelity_at(&thermal)?,
                fidelity_vertical: vertical.fidelity_at(&thermal)?,
            })
        })
        .collect()
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{minimize, MinimizeOpts};
    use crate::phonons::{self, Polarization};
    use crate::units::{AMU, BE9_AMU, QE};
    use approx::assert_relative_eq;

    fn setup(n: usize) -> (TrapConfig, IonCrystal, PhononModes) {
        let t = TrapConfig::new(
            n,
            TWO_PI * 200e3,
            TWO_PI * 10e6,
            TWO_PI * 50e3,
            BE9_AMU * AMU,
            QE,
        );
        let c = minimize(&t, None, &MinimizeOpts::default()).unwrap();
        let m = phonons::modes_of(&t, &c).unwrap();
        (t, c, m)
    }

    fn carrier_pulse(pair: (usize, usize), trap: &TrapConfig, force: f64) -> GatePulse {
        GatePulse {
            targets: pair,
            force_peak: force,
            directions: ([1.0, 0.0, 0.0], [1.0, 0.0, 0.0]),
            envelope: Envelope::Sin2,
            tau: 5e-6,
            carrier_nu: 11.0 * trap.omega_xy,
            laser: None,
        }
    }

    #[test]
    fn envelopes_vanish_at_edges_and_peak_at_one() {
        let tau = 3e-6;
        let shapes = [
            Envelope::Sin2,
            Envelope::Blackman,
            Envelope::Gaussian { sigma_frac: 0.18 },
            Envelope::Trapezoid { ramp_frac: 0.2 },
        ];
        for env in shapes {
            assert!(env.value(0.0, tau).abs() < 1e-12, "{env:?} at start");
            assert!(env.value(tau, tau).abs() < 1e-12, "{env:?} at end");
            assert_eq!(env.value(-0.1 * tau, tau), 0.0);
            assert_eq!(env.value(1.1 * tau, tau), 0.0);
            let peak = (0..=2000)
                .map(|k| env.value(k as f64 * tau / 2000.0, tau))
                .fold(0.0f64, f64::max);
            assert_relative_eq!(peak, 1.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn envelope_serde_round_trips_with_kind_tag() {
        let env = Envelope::Gaussian { sigma_frac: 0.25 };
        let text = serde_json::to_string(&env).unwrap();
        assert!(text.contains("\"kind\":\"gaussian\""), "{text}");
        assert_eq!(serde_json::from_str::<Envelope>(&text).unwrap(), env);
        let plain: Envelope = serde_json::from_str("{\"kind\":\"sin2\"}").unwrap();
        assert_eq!(plain, Envelope::Sin2);
    }

    #[test]
    fn envelope_parameter_bounds_enforced() {
        assert!(Envelope::Gaussian { sigma_frac: 0.0 }.validate().is_err());
        assert!(Envelope::Trapezoid { ramp_frac: 0.6 }.validate().is_err());
        assert!(Envelope::Trapezoid { ramp_frac: 0.5 }.validate().is_ok());
    }

    #[test]
    fn spontaneous_error_matches_frozen_value() {
        // Two beams, gamma = 2 pi 20 MHz, Omega_0 = 2 pi 1e11, Delta = 2 pi
        // 1e14, sin^2 envelope over 5 us.
        let laser = LaserSetup {
            rabi_peak: TWO_PI * 1e11,
            detuning: TWO_PI * 1e14,
            linewidth: TWO_PI * 20e6,
            n_beams: 2,
        };
        let p = spontaneous_error(&laser, Envelope::Sin2, 5e-6);
        assert_relative_eq!(p, 5.890486225480862e-5, max_relative = 1e-10);
    }

    #[test]
    fn carrier_two_body_phase_matches_closed_form() {
        let (t, c, m) = setup(2);
        let pulse = carrier_pulse(c.center_pair(), &t, 1e-21);
        let g = run_gate(&t, &m, &pulse, None, &GateOpts::default()).unwrap();
        assert!(g.two_body_phase != 0.0);
        assert_relative_eq!(
            g.two_body_phase,
            g.two_body_phase_closed_form,
            max_relative = 3e-2
        );
    }

    #[test]
    fn adiabatic_vertical_phase_matches_closed_form() {
        let (t, c, m) = setup(2);
        let pulse = GatePulse {
            targets: c.center_pair(),
            force_peak: 1e-20,
            directions: ([0.0, 0.0, 1.0], [0.0, 0.0, 1.0]),
            envelope: Envelope::Sin2,
            tau: 5e-6,
            carrier_nu: 0.0,
            laser: None,
        };
        let g = run_gate(&t, &m, &pulse, None, &GateOpts::default()).unwrap();
        assert!(g.two_body_phase != 0.0);
        assert_relative_eq!(
            g.two_body_phase,
            g.two_body_phase_closed_form,
            max_relative = 1e-3
        );
    }

    #[test]
    fn phases_scale_with_force_squared() {
        let (t, c, m) = setup(2);
        let pair = c.center_pair();
        let g1 = run_gate(
            &t,
            &m,
            &carrier_pulse(pair, &t, 1e-21),
            None,
            &GateOpts::default(),
        )
        .unwrap();
        let g2 = run_gate(
            &t,
            &m,
            &carrier_pulse(pair, &t, 2e-21),
            None,
            &GateOpts::default(),
        )
        .unwrap();
        assert_relative_eq!(
            g2.two_body_phase,
            4.0 * g1.two_body_phase,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            g2.residual_beta_max,
            2.0 * g1.residual_beta_max,
            max_relative = 1e-12
        );
    }

    #[test]
    fn with_force_matches_fresh_run() {
        let (t, c, m) = setup(2);
        let pair = c.center_pair();
        let base = run_gate(
            &t,
            &m,
            &carrier_pulse(pair, &t, 1e-21),
            None,
            &GateOpts::default(),
        )
        .unwrap();
        let scaled = base.with_force(2.5e-21).unwrap();
        let fresh = run_gate(
            &t,
            &m,
            &carrier_pulse(pair, &t, 2.5e-21),
            None,
            &GateOpts::default(),
        )
        .unwrap();
        for s in 0..4 {
            assert_relative_eq!(scaled.phases[s], fresh.phases[s], max_relative = 1e-12);
        }
        assert_relative_eq!(scaled.fidelity, fresh.fidelity, max_relative = 1e-12);
        assert_relative_eq!(scaled.heating, fresh.heating, max_relative = 1e-12);
        assert_eq!(scaled.force_for_pi, fresh.force_for_pi);
    }

    #[test]
    fn force_for_pi_calibration_reaches_pi() {
        let (t, c, m) = setup(2);
        let probe = run_gate(
            &t,
            &m,
            &carrier_pulse(c.center_pair(), &t, 1e-21),
            None,
            &GateOpts::default(),
        )
        .unwrap();
        assert!(probe.force_for_pi.is_finite() && probe.force_for_pi > 0.0);
        let cal = probe.with_force(probe.force_for_pi).unwrap();
        assert_relative_eq!(
            cal.two_body_phase.abs(),
            std::f64::consts::PI,
            max_relative = 1e-12
        );
    }

    #[test]
    fn zero_force_gives_identity_channel_with_finite_calibration() {
        let (t, c, m) = setup(2);
        let g = run_gate(
            &t,
            &m,
            &carrier_pulse(c.center_pair(), &t, 0.0),
            None,
            &GateOpts::default(),
        )
        .unwrap();
        assert_eq!(g.two_body_phase, 0.0);
        assert_eq!(g.fidelity, 1.0);
        assert!(g.force_for_pi.is_finite() && g.force_for_pi > 0.0);
    }

    #[test]
    fn resonant_carrier_rejected() {
        let (t, c, m) = setup(2);
        let mut pulse = carrier_pulse(c.center_pair(), &t, 1e-21);
        pulse.carrier_nu = t.omega_xy;
        match run_gate(&t, &m, &pulse, None, &GateOpts::default()) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("carrier"), "{msg}"),
            other => panic!("expected resonance rejection, got {other:?}"),
        }
    }

    #[test]
    fn invalid_pulses_rejected() {
        let (t, c, m) = setup(2);
        let good = carrier_pulse(c.center_pair(), &t, 1e-21);
        let opts = GateOpts::default();

        let mut same_targets = good.clone();
        same_targets.targets = (0, 0);
        assert!(matches!(
            run_gate(&t, &m, &same_targets, None, &opts),
            Err(Error::Config(_))
        ));

        let mut zero_dir = good.clone();
        zero_dir.directions.0 = [0.0, 0.0, 0.0];
        assert!(matches!(
            run_gate(&t, &m, &zero_dir, None, &opts),
            Err(Error::Config(_))
        ));

        let mut bad_tau = good.clone();
        bad_tau.tau = -1.0;
        assert!(matches!(
            run_gate(&t, &m, &bad_tau, None, &opts),
            Err(Error::Config(_))
        ));

        let mut bad_force = good;
        bad_force.force_peak = f64::NAN;
        assert!(matches!(
            run_gate(&t, &m, &bad_force, None, &opts),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn vertical_push_excites_only_vertical_modes() {
        let (t, c, m) = setup(7);
        let pulse = GatePulse {
            targets: c.center_pair(),
            force_peak: 1e-21,
            directions: ([0.0, 0.0, 1.0], [0.0, 0.0, 1.0]),
            envelope: Envelope::Sin2,
            tau: 2e-6,
            carrier_nu: 0.0,
            laser: None,
        };
        let g = run_gate(&t, &m, &pulse, None, &GateOpts::default()).unwrap();
        assert!(!g.excitations.is_empty());
        for exc in &g.excitations {
            assert_eq!(m.polarization[exc.mode], Polarization::Vertical);
        }
    }

    #[test]
    fn vertical_pi_gate_fidelity_decreases_with_temperature() {
        // A pi-calibrated vertical push leaves a small non-adiabatic
        // residual whose damping grows with the thermal occupation.
        let (t, c, m) = setup(2);
        let pulse = GatePulse {
            targets: c.center_pair(),
            force_peak: 1e-21,
            directions: ([0.0, 0.0, 1.0], [0.0, 0.0, 1.0]),
            envelope: Envelope::Sin2,
            tau: 1.0 / t.omega_xy,
            carrier_nu: 0.0,
            laser: None,
        };
        let probe = run_gate(&t, &m, &pulse, None, &GateOpts::default()).unwrap();
        let cal = probe.with_force(probe.force_for_pi).unwrap();
        let f: Vec<f64> = [0.0, 1e-3, 2e-3]
            .iter()
            .map(|&temp| {
                cal.fidelity_at(&m.thermal_occupation(&t, temp).unwrap())
                    .unwrap()
            })
            .collect();
        assert!(f[0] > f[1] && f[1] > f[2], "fidelities {f:?}");
        assert!(f[0] < 1.0 && f[0] > 0.9, "T = 0 fidelity {}", f[0]);
        assert!(f[2] > 0.5, "2 mK fidelity {}", f[2]);
    }

    #[test]
    fn fidelity_at_reproduces_run_fidelity() {
        let (t, c, m) = setup(2);
        let thermal = m.thermal_occupation(&t, 1e-3).unwrap();
        let pulse = GatePulse {
            targets: c.center_pair(),
            force_peak: 2e-20,
            directions: ([0.0, 0.0, 1.0], [0.0, 0.0, 1.0]),
            envelope: Envelope::Trapezoid { ramp_frac: 0.05 },
            tau: 1.0 / t.omega_xy,
            carrier_nu: 0.0,
            laser: None,
        };
        let g = run_gate(&t, &m, &pulse, Some(&thermal), &GateOpts::default()).unwrap();
        assert_relative_eq!(
            g.fidelity_at(&thermal).unwrap(),
            g.fidelity,
            epsilon = 1e-14
        );
        assert!(g.fidelity < 1.0);
    }

    #[test]
    fn temperature_sweep_keeps_carrier_flat_and_dominant() {
        let (t, c, m) = setup(2);
        let sweep = SweepConfig::for_trap(&t, vec![0.0, 1e-3, 2e-3]);
        let rows = temperature_sweep(&t, &c, &m, &sweep, &GateOpts::default()).unwrap();
        assert_eq!(rows.len(), 3);
        for row in &rows {
            assert!((row.fidelity_carrier - rows[0].fidelity_carrier).abs() < 1e-4);
            assert!(row.fidelity_carrier >= row.fidelity_vertical - 1e-12);
            assert!(row.fidelity_carrier > 0.99);
        }
        assert!(rows[2].fidelity_vertical < rows[0].fidelity_vertical);
    }
}
