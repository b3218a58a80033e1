//! C ABI over the wigner-push library.
//!
//! Conventions:
//! - Handles (`WpTrap`, `WpCrystal`, `WpModes`) are opaque pointers created
//!   by `wp_*_new`/`wp_*_solve`/`wp_*_compute` and released by the matching
//!   `wp_*_free`; `free(NULL)` is a no-op.
//! - Every fallible call returns a [`WpStatus`]; on anything but `WP_OK`
//!   the thread-local message retrieved by [`wp_last_error`] explains why.
//! - Frequencies cross this boundary as ordinary hertz (`*_hz`) and are
//!   converted to angular frequencies internally; masses are atomic mass
//!   units, charges elementary charges, lengths meters, times seconds.
//! - Out-parameters are written only on `WP_OK`.
//!
//! The companion header `include/wigner_push.h` is generated from this file
//! by cbindgen at build time.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use wigner_push::cluster::{self, BeamSweep};
use wigner_push::crystal::{minimize, IonCrystal, MinimizeOpts, TrapConfig};
use wigner_push::gatesim::{run_gate, Envelope, GateOpts, GatePulse};
use wigner_push::network::{two_click_analytic, two_click_monte_carlo, ProtocolConfig};
use wigner_push::phonons::{modes_of, PhononModes};
use wigner_push::units::{AMU, QE, TWO_PI};
use wigner_push::Error;

/// Result of every fallible call in this ABI.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WpStatus {
    /// Success; out-parameters are valid.
    WpOk = 0,
    /// A required pointer argument was null.
    WpNullArg = 1,
    /// Invalid parameter value.
    WpConfig = 2,
    /// Physically inadmissible request (resonant carrier, unconverged
    /// crystal, ...).
    WpPrecondition = 3,
    /// An iterative solver failed to converge.
    WpConvergence = 4,
    /// Unexpected internal failure; see `wp_last_error`.
    WpInternal = 5,
}

/// Opaque trap-configuration handle.
pub struct WpTrap(TrapConfig);
/// Opaque minimized-crystal handle.
pub struct WpCrystal(IonCrystal);
/// Opaque normal-mode handle.
pub struct WpModes(PhononModes);

/// Pulse-envelope selector for [`WpGatePulse`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WpEnvelope {
    /// `sin^2(pi t/tau)`; `param` ignored.
    WpEnvelopeSin2 = 0,
    /// Blackman window; `param` ignored.
    WpEnvelopeBlackman = 1,
    /// Taper-windowed Gaussian; `param` is the width as a fraction of tau.
    WpEnvelopeGaussian = 2,
    /// Linear ramps around a flat top; `param` is the ramp fraction.
    WpEnvelopeTrapezoid = 3,
}

/// Push-gate drive description.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct WpGatePulse {
    /// First target ion index.
    pub target_i: u32,
    /// Second target ion index.
    pub target_j: u32,
    /// Peak force per ion, N; zero or negative requests calibration to an
    /// entangling phase of magnitude pi.
    pub force_peak_n: f64,
    /// Push direction on the first target (normalized internally).
    pub direction_i: [f64; 3],
    /// Push direction on the second target.
    pub direction_j: [f64; 3],
    pub envelope: WpEnvelope,
    /// Envelope shape parameter; see [`WpEnvelope`].
    pub envelope_param: f64,
    /// Pulse length, s.
    pub tau_s: f64,
    /// Carrier modulation, ordinary Hz; 0 is the unmodulated push.
    pub carrier_nu_hz: f64,
}

/// Scalar results of one gate simulation.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct WpGateReport {
    /// Peak force the report describes, N.
    pub force_peak_n: f64,
    /// Entangling phase between the targets, rad.
    pub two_body_phase_rad: f64,
    /// Worst-case state fidelity at the requested temperature.
    pub fidelity: f64,
    /// Residual motional quanta left in the crystal.
    pub heating_quanta: f64,
    /// Largest residual coherent displacement on any mode.
    pub residual_beta_max: f64,
    /// Peak force that calibrates this pulse shape to phase pi, N.
    pub force_for_pi_n: f64,
}

/// Heralded-link statistics.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct WpLinkStats {
    pub success_probability: f64,
    pub expected_time_s: f64,
    pub fidelity: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.push_str(message);
    });
}

fn status_of(err: &Error) -> WpStatus {
    match err {
        Error::Config(_) => WpStatus::WpConfig,
        Error::Precondition(_) => WpStatus::WpPrecondition,
        Error::Convergence(_) => WpStatus::WpConvergence,
        Error::Io(_) | Error::Serde(_) => WpStatus::WpInternal,
    }
}

/// Run a closure, translating panics and library errors into statuses.
fn guarded(body: impl FnOnce() -> Result<WpStatus, Error>) -> WpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(status)) => status,
        Ok(Err(err)) => {
            set_error(&err.to_string());
            status_of(&err)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in library call".into());
            set_error(&msg);
            WpStatus::WpInternal
        }
    }
}

fn null_arg(name: &str) -> Result<WpStatus, Error> {
    set_error(&format!("{name} must not be null"));
    Ok(WpStatus::WpNullArg)
}

/// Copy the last error message on this thread into `buf` (NUL-terminated,
/// truncated to `cap` bytes) and return the full message length in bytes.
/// A null or empty buffer just queries the length.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn wp_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Create a trap configuration. Frequencies are ordinary hertz.
///
/// # Safety
/// `out` must be a valid pointer; the returned handle must be released with
/// [`wp_trap_free`].
#[no_mangle]
pub unsafe extern "C" fn wp_trap_new(
    n_ions: u32,
    omega_xy_hz: f64,
    omega_z_hz: f64,
    omega_r_hz: f64,
    mass_amu: f64,
    charge_e: f64,
    out: *mut *mut WpTrap,
) -> WpStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let trap = TrapConfig::new(
            n_ions as usize,
            TWO_PI * omega_xy_hz,
            TWO_PI * omega_z_hz,
            TWO_PI * omega_r_hz,
            mass_amu * AMU,
            charge_e * QE,
        );
        trap.validate()?;
        *out = Box::into_raw(Box::new(WpTrap(trap)));
        Ok(WpStatus::WpOk)
    })
}

/// Release a trap handle; null is a no-op.
///
/// # Safety
/// `trap` must be a pointer from [`wp_trap_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wp_trap_free(trap: *mut WpTrap) {
    if !trap.is_null() {
        drop(Box::from_raw(trap));
    }
}

/// Minimize the crystal for a trap.
///
/// # Safety
/// `trap` must be a live handle; `out` valid; release the result with
/// [`wp_crystal_free`].
#[no_mangle]
pub unsafe extern "C" fn wp_crystal_solve(
    trap: *const WpTrap,
    out: *mut *mut WpCrystal,
) -> WpStatus {
    guarded(|| {
        if trap.is_null() {
            return null_arg("trap");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let crystal = minimize(&(*trap).0, None, &MinimizeOpts::default())?;
        *out = Box::into_raw(Box::new(WpCrystal(crystal)));
        Ok(WpStatus::WpOk)
    })
}

/// Number of ions in a crystal; 0 for a null handle.
///
/// # Safety
/// `crystal` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wp_crystal_n_ions(crystal: *const WpCrystal) -> u32 {
    if crystal.is_null() {
        0
    } else {
        (*crystal).0.positions.len() as u32
    }
}

/// Nearest-neighbor lattice spacing, m.
///
/// # Safety
/// `crystal` must be a live handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn wp_crystal_spacing_m(
    crystal: *const WpCrystal,
    out: *mut f64,
) -> WpStatus {
    guarded(|| {
        if crystal.is_null() {
            return null_arg("crystal");
        }
        if out.is_null() {
            return null_arg("out");
        }
        *out = (*crystal).0.spacing;
        Ok(WpStatus::WpOk)
    })
}

/// Copy ion positions as `[x0, y0, z0, x1, ...]` into `out` (capacity `cap`
/// doubles, which must be at least `3 n_ions`).
///
/// # Safety
/// `crystal` must be a live handle; `out` must point to `cap` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn wp_crystal_positions(
    crystal: *const WpCrystal,
    out: *mut f64,
    cap: usize,
) -> WpStatus {
    guarded(|| {
        if crystal.is_null() {
            return null_arg("crystal");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let positions = &(*crystal).0.positions;
        if cap < 3 * positions.len() {
            set_error(&format!(
                "position buffer holds {cap} doubles, need {}",
                3 * positions.len()
            ));
            return Ok(WpStatus::WpConfig);
        }
        for (k, p) in positions.iter().enumerate() {
            for (c, &v) in p.iter().enumerate() {
                *out.add(3 * k + c) = v;
            }
        }
        Ok(WpStatus::WpOk)
    })
}

/// The two most central, adjacent ions; the default gate targets.
///
/// # Safety
/// `crystal` must be a live handle; `i`, `j` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wp_crystal_center_pair(
    crystal: *const WpCrystal,
    i: *mut u32,
    j: *mut u32,
) -> WpStatus {
    guarded(|| {
        if crystal.is_null() {
            return null_arg("crystal");
        }
        if i.is_null() || j.is_null() {
            return null_arg("i/j");
        }
        let (a, b) = (*crystal).0.center_pair();
        *i = a as u32;
        *j = b as u32;
        Ok(WpStatus::WpOk)
    })
}

/// Release a crystal handle; null is a no-op.
///
/// # Safety
/// `crystal` must be a pointer from [`wp_crystal_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wp_crystal_free(crystal: *mut WpCrystal) {
    if !crystal.is_null() {
        drop(Box::from_raw(crystal));
    }
}

/// Diagonalize the crystal's normal modes.
///
/// # Safety
/// `trap` and `crystal` must be live handles; `out` valid; release with
/// [`wp_modes_free`].
#[no_mangle]
pub unsafe extern "C" fn wp_modes_compute(
    trap: *const WpTrap,
    crystal: *const WpCrystal,
    out: *mut *mut WpModes,
) -> WpStatus {
    guarded(|| {
        if trap.is_null() {
            return null_arg("trap");
        }
        if crystal.is_null() {
            return null_arg("crystal");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let modes = modes_of(&(*trap).0, &(*crystal).0)?;
        *out = Box::into_raw(Box::new(WpModes(modes)));
        Ok(WpStatus::WpOk)
    })
}

/// Number of normal modes (3 per ion); 0 for a null handle.
///
/// # Safety
/// `modes` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wp_modes_count(modes: *const WpModes) -> u32 {
    if modes.is_null() {
        0
    } else {
        (*modes).0.n_modes() as u32
    }
}

/// Copy ascending mode frequencies (rad/s) into `out` (capacity `cap`
/// doubles, at least the mode count).
///
/// # Safety
/// `modes` must be a live handle; `out` must point to `cap` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn wp_modes_frequencies(
    modes: *const WpModes,
    out: *mut f64,
    cap: usize,
) -> WpStatus {
    guarded(|| {
        if modes.is_null() {
            return null_arg("modes");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let freqs = &(*modes).0.frequencies;
        if cap < freqs.len() {
            set_error(&format!(
                "frequency buffer holds {cap} doubles, need {}",
                freqs.len()
            ));
            return Ok(WpStatus::WpConfig);
        }
        std::ptr::copy_nonoverlapping(freqs.as_ptr(), out, freqs.len());
        Ok(WpStatus::WpOk)
    })
}

/// Release a modes handle; null is a no-op.
///
/// # Safety
/// `modes` must be a pointer from [`wp_modes_compute`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wp_modes_free(modes: *mut WpModes) {
    if !modes.is_null() {
        drop(Box::from_raw(modes));
    }
}

fn envelope_of(pulse: &WpGatePulse) -> Envelope {
    match pulse.envelope {
        WpEnvelope::WpEnvelopeSin2 => Envelope::Sin2,
        WpEnvelope::WpEnvelopeBlackman => Envelope::Blackman,
        WpEnvelope::WpEnvelopeGaussian => Envelope::Gaussian {
            sigma_frac: pulse.envelope_param,
        },
        WpEnvelope::WpEnvelopeTrapezoid => Envelope::Trapezoid {
            ramp_frac: pulse.envelope_param,
        },
    }
}

/// Simulate one push gate at temperature `temperature_k` and fill `report`.
/// A non-positive `force_peak_n` calibrates the gate to an entangling phase
/// of magnitude pi.
///
/// # Safety
/// `trap` and `modes` must be live handles from the same crystal; `pulse`
/// and `report` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wp_gate_run(
    trap: *const WpTrap,
    modes: *const WpModes,
    pulse: *const WpGatePulse,
    temperature_k: f64,
    report: *mut WpGateReport,
) -> WpStatus {
    guarded(|| {
        if trap.is_null() {
            return null_arg("trap");
        }
        if modes.is_null() {
            return null_arg("modes");
        }
        if pulse.is_null() {
            return null_arg("pulse");
        }
        if report.is_null() {
            return null_arg("report");
        }
        let trap = &(*trap).0;
        let modes = &(*modes).0;
        let pulse = &*pulse;
        let calibrate = pulse.force_peak_n.is_nan() || pulse.force_peak_n <= 0.0;
        let gate_pulse = GatePulse {
            targets: (pulse.target_i as usize, pulse.target_j as usize),
            force_peak: if calibrate { 1e-21 } else { pulse.force_peak_n },
            directions: (pulse.direction_i, pulse.direction_j),
            envelope: envelope_of(pulse),
            tau: pulse.tau_s,
            carrier_nu: TWO_PI * pulse.carrier_nu_hz,
            laser: None,
        };
        let thermal = modes.thermal_occupation(trap, temperature_k)?;
        let mut result = run_gate(
            trap,
            modes,
            &gate_pulse,
            Some(&thermal),
            &GateOpts::default(),
        )?;
        if calibrate {
            result = result.with_force(result.force_for_pi)?;
        }
        *report = WpGateReport {
            force_peak_n: result.force_peak,
            two_body_phase_rad: result.two_body_phase,
            fidelity: result.fidelity,
            heating_quanta: result.heating,
            residual_beta_max: result.residual_beta_max,
            force_for_pi_n: result.force_for_pi,
        };
        Ok(WpStatus::WpOk)
    })
}

/// Parallel-edge suppression factor for a beam waist of `sigma` lattice
/// spacings; NaN for a non-positive or non-finite waist.
#[no_mangle]
pub extern "C" fn wp_epsilon(sigma: f64) -> f64 {
    if sigma.is_finite() && sigma > 0.0 {
        cluster::epsilon(sigma)
    } else {
        f64::NAN
    }
}

/// Two-body phase written on an inclined cell edge by one sweep pass at
/// mode frequency `omega_hz`.
///
/// # Safety
/// `trap` must be a live handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn wp_theta(
    trap: *const WpTrap,
    omega_hz: f64,
    waist_sigma: f64,
    velocity_m_s: f64,
    rabi_peak_hz: f64,
    detuning_hz: f64,
    spacing_m: f64,
    out: *mut f64,
) -> WpStatus {
    guarded(|| {
        if trap.is_null() {
            return null_arg("trap");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let trap = &(*trap).0;
        // The edge phase is independent of the sweep-line geometry; park the
        // beam on a valid dummy chord.
        let beam = BeamSweep {
            waist_sigma,
            velocity: velocity_m_s,
            xi: 80e-6,
            radius: 100e-6,
            omega_r: trap.omega_r,
            rabi_peak: TWO_PI * rabi_peak_hz,
            detuning: TWO_PI * detuning_hz,
            carrier_nu: None,
        };
        beam.validate()?;
        if !(omega_hz > 0.0 && omega_hz.is_finite()) {
            return Err(Error::Config(format!(
                "omega_hz = {omega_hz} must be positive and finite"
            )));
        }
        if !(spacing_m > 0.0 && spacing_m.is_finite()) {
            return Err(Error::Config(format!(
                "spacing_m = {spacing_m} must be positive and finite"
            )));
        }
        *out = cluster::theta(TWO_PI * omega_hz, &beam, trap, spacing_m);
        Ok(WpStatus::WpOk)
    })
}

/// Closed-form two-click link statistics.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wp_two_click(
    eta: f64,
    eta_prime: f64,
    gamma_hz: f64,
    out: *mut WpLinkStats,
) -> WpStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let stats = two_click_analytic(&protocol(eta, eta_prime, gamma_hz, 0)?)?;
        *out = WpLinkStats {
            success_probability: stats.success_probability,
            expected_time_s: stats.expected_time,
            fidelity: stats.fidelity,
        };
        Ok(WpStatus::WpOk)
    })
}

/// Monte Carlo two-click link statistics over `trials` attempts,
/// deterministic in `seed`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wp_two_click_mc(
    eta: f64,
    eta_prime: f64,
    gamma_hz: f64,
    seed: u64,
    trials: u64,
    out: *mut WpLinkStats,
) -> WpStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let stats = two_click_monte_carlo(&protocol(eta, eta_prime, gamma_hz, seed)?, trials)?;
        *out = WpLinkStats {
            success_probability: stats.success_probability,
            expected_time_s: stats.expected_time,
            fidelity: stats.fidelity,
        };
        Ok(WpStatus::WpOk)
    })
}

fn protocol(eta: f64, eta_prime: f64, gamma_hz: f64, seed: u64) -> Result<ProtocolConfig, Error> {
    let config = ProtocolConfig {
        eta,
        eta_prime,
        gamma_rad: TWO_PI * gamma_hz,
        p_excite: 1e-4,
        target_infidelity: 1e-4,
        rng_seed: seed,
    };
    config.validate()?;
    Ok(config)
}
