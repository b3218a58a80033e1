//! Closed-form two-body phases: the pulse-shape-independent form factor and
//! its contraction with the force envelope overlap integral.
//!
//! For push directions `d_i`, `d_j` on ions `i`, `j` the form factor is
//! `S_ij(nu) = -sum_K alpha_K^2 omega_K m_iK m_jK / (4 hbar^2 (nu^2 - omega_K^2))`
//! with `m_iK = d_i . M_iK`; zero modes are excluded from the sum (their
//! drive is tracked separately). The two-body phase for forces
//! `F(t) = F0 env(t) cos(nu t)` on both ions is `2 S_ij(nu) F0^2 int env^2 dt`
//! (the cos^2 average is folded into S); the unmodulated `nu = 0` push keeps
//! its full weight, giving `4 S_ij(0) F0^2 int env^2 dt`. The factor 2 (or 4)
//! makes the result the coefficient of `sigma_i^z sigma_j^z` for the
//! unordered pair, matching the four-configuration decomposition of the
//! integrated phases.

use crate::crystal::TrapConfig;
use crate::error::{Error, Result};
use crate::gatesim::Envelope;
use crate::phonons::PhononModes;

/// Couplings below this fraction of the largest `|m_iK m_jK|` are treated as
/// zero when locating the coupled band.
const COUPLING_CUTOFF: f64 = 1e-10;

/// Form factor `S_ij(nu)` for unit push directions `di`, `dj`; rad/(N^2 s).
///
/// `nu = 0` selects the unmodulated adiabatic variant. A nonzero `nu` must
/// lie outside the band of coupled mode frequencies.
pub fn form_factor(
    trap: &TrapConfig,
    modes: &PhononModes,
    i: usize,
    j: usize,
    di: [f64; 3],
    dj: [f64; 3],
    nu: f64,
) -> Result<f64> {
    let n = modes.n_ions();
    if i >= n || j >= n {
        return Err(Error::Config(format!(
            "form_factor: ions ({i}, {j}) out of range for {n}-ion crystal"
        )));
    }
    let couplings: Vec<(usize, f64, f64)> = (0..modes.n_modes())
        .filter(|&k| !modes.zero_mode[k])
        .map(|k| {
            let mi = modes.mode_at_ion(k, i);
            let mj = modes.mode_at_ion(k, j);
            (
                k,
                di[0] * mi[0] + di[1] * mi[1] + di[2] * mi[2],
                dj[0] * mj[0] + dj[1] * mj[1] + dj[2] * mj[2],
            )
        })
        .collect();
    if nu != 0.0 {
        let cutoff = COUPLING_CUTOFF
            * couplings
                .iter()
                .map(|(_, a, b)| (a * b).abs())
                .fold(0.0, f64::max);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for (k, a, b) in &couplings {
            if (a * b).abs() > cutoff {
                lo = lo.min(modes.frequencies[*k]);
                hi = hi.max(modes.frequencies[*k]);
            }
        }
        if lo.is_finite() && nu >= lo * (1.0 - 1e-9) && nu <= hi * (1.0 + 1e-9) {
            return Err(Error::Precondition(format!(
                "carrier at {nu:.4e} rad/s sits inside the coupled band \
                 [{lo:.4e}, {hi:.4e}] rad/s"
            )));
        }
    }
    let h2 = trap.hbar * trap.hbar;
    let mut s = 0.0;
    for (k, a, b) in &couplings {
        let w = modes.frequencies[*k];
        let al = modes.mode_lengths[*k];
        s -= al * al * w * a * b / (4.0 * h2 * (nu * nu - w * w));
    }
    Ok(s)
}

/// `int_0^tau env(t)^2 dt` by composite Simpson.
pub fn envelope_overlap(envelope: Envelope, tau: f64) -> f64 {
    let n = 4096;
    let h = tau / n as f64;
    let f = |t: f64| {
        let e = envelope.value(t, tau);
        e * e
    };
    let mut acc = f(0.0) + f(tau);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(k as f64 * h);
    }
    acc * h / 3.0
}

/// Closed-form two-body phase for a symmetric pair push of peak force `f0`
/// along `di`, `dj`: the coefficient of `sigma_i^z sigma_j^z`.
#[allow(clippy::too_many_arguments)]
pub fn two_body_phase_closed_form(
    trap: &TrapConfig,
    modes: &PhononModes,
    i: usize,
    j: usize,
    di: [f64; 3],
    dj: [f64; 3],
    nu: f64,
    f0: f64,
    envelope: Envelope,
    tau: f64,
) -> Result<f64> {
    let s = form_factor(trap, modes, i, j, di, dj, nu)?;
    let mult = if nu == 0.0 { 4.0 } else { 2.0 };
    Ok(mult * s * f0 * f0 * envelope_overlap(envelope, tau))
}
