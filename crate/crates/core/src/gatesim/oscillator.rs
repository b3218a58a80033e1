//! Single driven harmonic mode: exact fixed-step integration of the
//! displacement/phase pair and the carrier adiabatic-elimination amplitudes.
//!
//! With drive strength `lambda(t) = alpha f(t) / (sqrt(2) hbar)` the mode
//! obeys `beta' = -i omega beta + i lambda(t)` and `phi' = lambda(t) Re beta`.
//! `phi` is the geometric phase the mode hands back to the qubits; `beta` is
//! the residual coherent displacement.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Result of integrating one mode over a pulse.
#[derive(Clone, Copy, Debug)]
pub struct ModeTrace {
    /// Displacement at the end of the pulse.
    pub beta: Complex64,
    /// Accumulated phase, rad.
    pub phase: f64,
    /// Largest |beta(t)| seen during the pulse.
    pub max_beta: f64,
}

/// Fixed-step RK4 for the driven mode. `force(t)` is the full state-dependent
/// force projected on the mode (N), `alpha` the mode ground-state length (m).
///
/// `dt` must resolve the fastest scale: at most `2 pi / (50 max(omega, nu))`
/// where `nu` is the fastest frequency present in `force`. The caller states
/// that frequency via `fastest`; passing a larger `dt` is a config error.
pub fn integrate_mode(
    omega: f64,
    alpha: f64,
    hbar: f64,
    force: impl Fn(f64) -> f64,
    tau: f64,
    dt: f64,
    fastest: f64,
) -> Result<ModeTrace> {
    if !(tau > 0.0) || !(dt > 0.0) {
        return Err(Error::Config(format!(
            "integrate_mode: tau and dt must be positive (tau={tau}, dt={dt})"
        )));
    }
    let dt_max = 2.0 * std::f64::consts::PI / (50.0 * omega.max(fastest).max(1.0 / tau));
    if dt > dt_max * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "integrate_mode: dt = {dt:.3e} s exceeds resolution limit {dt_max:.3e} s"
        )));
    }
    let lam = |t: f64| alpha * force(t) / (hbar * std::f64::consts::SQRT_2);
    // State (Re beta, Im beta, phi).
    let deriv = |t: f64, y: [f64; 3]| -> [f64; 3] {
        let l = lam(t);
        [omega * y[1], -omega * y[0] + l, l * y[0]]
    };
    let n = (tau / dt).ceil() as usize;
    let h = tau / n as f64;
    let mut y = [0.0f64; 3];
    let mut max_beta2 = 0.0f64;
    for i in 0..n {
        let t = i as f64 * h;
        let k1 = deriv(t, y);
        let k2 = deriv(t + 0.5 * h, step(y, k1, 0.5 * h));
        let k3 = deriv(t + 0.5 * h, step(y, k2, 0.5 * h));
        let k4 = deriv(t + h, step(y, k3, h));
        for j in 0..3 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let b2 = y[0] * y[0] + y[1] * y[1];
        if b2 > max_beta2 {
            max_beta2 = b2;
        }
    }
    Ok(ModeTrace {
        beta: Complex64::new(y[0], y[1]),
        phase: y[2],
        max_beta: max_beta2.sqrt(),
    })
}

fn step(y: [f64; 3], k: [f64; 3], h: f64) -> [f64; 3] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]]
}

/// Quasi-steady amplitudes of the carrier-driven mode: with
/// `f(t) cos(nu t)` and a slow envelope, `beta(t) ~ beta_+ e^{i nu t} +
/// beta_- e^{-i nu t}` with `beta_pm = alpha f / (2 sqrt(2) hbar (omega +- nu))`.
///
/// `min_split` guards the poles: both `|omega + nu|` and `|omega - nu|`
/// must exceed it.
pub fn carrier_beta_amplitudes(
    omega: f64,
    alpha: f64,
    hbar: f64,
    f_now: f64,
    nu: f64,
    min_split: f64,
) -> Result<(f64, f64)> {
    let plus = omega + nu;
    let minus = omega - nu;
    if plus.abs() <= min_split || minus.abs() <= min_split {
        return Err(Error::Precondition(format!(
            "carrier resonant with mode: |omega - nu| = {:.3e} rad/s (guard {:.3e})",
            minus.abs(),
            min_split
        )));
    }
    let common = alpha * f_now / (2.0 * std::f64::consts::SQRT_2 * hbar);
    Ok((common / plus, common / minus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const HBAR: f64 = crate::units::HBAR;

    fn alpha(m: f64, w: f64) -> f64 {
        (HBAR / (m * w)).sqrt()
    }

    #[test]
    fn zero_force_stays_at_rest() {
        let w = 1e6;
        let tr = integrate_mode(w, 1e-8, HBAR, |_| 0.0, 1e-5, 1e-9, w).unwrap();
        assert_eq!(tr.beta, Complex64::new(0.0, 0.0));
        assert_eq!(tr.phase, 0.0);
    }

    #[test]
    fn step_size_precondition_enforced() {
        let w = 1e7;
        match integrate_mode(w, 1e-8, HBAR, |_| 0.0, 1e-5, 1e-6, w) {
            Err(Error::Config(_)) => {}
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn constant_force_matches_closed_form() {
        // beta' = -i w beta + i lam: from rest, beta(t) = (lam/w)(1 - e^{-iwt}).
        let m = 1.5e-26;
        let w = 2e6;
        let a = alpha(m, w);
        let f0 = 1e-21;
        let tau = 3.7e-6;
        let dt = 2.0 * std::f64::consts::PI / (200.0 * w);
        let tr = integrate_mode(w, a, HBAR, |_| f0, tau, dt, w).unwrap();
        let lam = a * f0 / (HBAR * std::f64::consts::SQRT_2);
        let expect = (lam / w) * (Complex64::new(1.0, 0.0) - (Complex64::i() * (-w * tau)).exp());
        assert_relative_eq!(tr.beta.re, expect.re, max_relative = 1e-7, epsilon = 1e-12);
        assert_relative_eq!(tr.beta.im, expect.im, max_relative = 1e-7, epsilon = 1e-12);
    }

    #[test]
    fn slow_envelope_returns_mode_to_rest() {
        // Adiabatic sin^2 pulse: final |beta| far below the mid-pulse peak.
        let m = 1.5e-26;
        let w = 2.0 * std::f64::consts::PI * 1e7;
        let a = alpha(m, w);
        let tau = 5e-6; // w tau = 314 >> 1
        let dt = 2.0 * std::f64::consts::PI / (60.0 * w);
        let env = |t: f64| (std::f64::consts::PI * t / tau).sin().powi(2);
        let tr = integrate_mode(w, a, HBAR, |t| 1e-21 * env(t), tau, dt, w).unwrap();
        assert!(tr.max_beta > 0.0);
        assert!(
            tr.beta.norm() < 1e-3 * tr.max_beta,
            "residual {} vs peak {}",
            tr.beta.norm(),
            tr.max_beta
        );
    }

    #[test]
    fn halving_dt_confirms_step_convergence() {
        let m = 1.5e-26;
        let w = 2.0 * std::f64::consts::PI * 2e5;
        let nu = 10.0 * w;
        let a = alpha(m, w);
        let tau = 5e-6;
        let env = move |t: f64| (std::f64::consts::PI * t / tau).sin().powi(2);
        let f = move |t: f64| 1e-20 * env(t) * (nu * t).cos();
        let dt = 2.0 * std::f64::consts::PI / (50.0 * nu);
        let c = integrate_mode(w, a, HBAR, f, tau, dt, nu).unwrap();
        let fine = integrate_mode(w, a, HBAR, f, tau, dt / 2.0, nu).unwrap();
        // The coarse run carries the RK4 truncation error of 50 steps per
        // carrier period, about 1.5e-6 relative.
        assert_relative_eq!(c.phase, fine.phase, max_relative = 5e-6);
    }

    #[test]
    fn carrier_pulse_phase_matches_averaged_closed_form() {
        // phi' = (alpha^2 f^2 / 2 hbar^2) w/(w^2-nu^2) cos^2(nu t) with the
        // cos^2 averaged to 1/2; for a sin^2 envelope int env^2 = 3 tau/8.
        let m = 1.5e-26;
        let w = 2.0 * std::f64::consts::PI * 2e5;
        let nu = 10.0 * w;
        let a = alpha(m, w);
        let tau = 5e-5; // many carrier cycles: averaging very accurate
        let f0 = 1e-20;
        let env = move |t: f64| (std::f64::consts::PI * t / tau).sin().powi(2);
        let f = move |t: f64| f0 * env(t) * (nu * t).cos();
        let dt = 2.0 * std::f64::consts::PI / (80.0 * nu);
        let tr = integrate_mode(w, a, HBAR, f, tau, dt, nu).unwrap();
        let closed = (a * a * f0 * f0 / (2.0 * HBAR * HBAR)) * w / (w * w - nu * nu)
            * 0.5
            * (3.0 * tau / 8.0);
        assert_relative_eq!(tr.phase, closed, max_relative = 1e-2);
    }

    #[test]
    fn adiabatic_phase_matches_quasistatic_closed_form() {
        // nu = 0: phi' = (alpha^2 f^2/2 hbar^2)/w when the envelope is slow.
        let m = 1.5e-26;
        let w = 2.0 * std::f64::consts::PI * 1e7;
        let a = alpha(m, w);
        let tau = 2e-5;
        let f0 = 1e-20;
        let env = move |t: f64| (std::f64::consts::PI * t / tau).sin().powi(2);
        let f = move |t: f64| f0 * env(t);
        let dt = 2.0 * std::f64::consts::PI / (60.0 * w);
        let tr = integrate_mode(w, a, HBAR, f, tau, dt, w).unwrap();
        let closed = (a * a * f0 * f0 / (2.0 * HBAR * HBAR)) / w * (3.0 * tau / 8.0);
        assert_relative_eq!(tr.phase, closed, max_relative = 1e-3);
    }

    #[test]
    fn phase_invariant_under_time_origin_shift() {
        let m = 1.5e-26;
        let w = 2.0 * std::f64::consts::PI * 2e5;
        let nu = 8.0 * w;
        let a = alpha(m, w);
        let tau = 5e-6;
        let t0 = 1.3e-6;
        let env = move |t: f64| {
            if (0.0..=tau).contains(&t) {
                (std::f64::consts::PI * t / tau).sin().powi(2)
            } else {
                0.0
            }
        };
        let dt = 2.0 * std::f64::consts::PI / (50.0 * nu);
        let base = integrate_mode(
            w,
            a,
            HBAR,
            move |t| 1e-20 * env(t) * (nu * t).cos(),
            tau,
            dt,
            nu,
        )
        .unwrap();
        let shifted = integrate_mode(
            w,
            a,
            HBAR,
            move |t| 1e-20 * env(t - t0) * (nu * (t - t0)).cos(),
            tau + 2.0 * t0,
            dt,
            nu,
        )
        .unwrap();
        assert_relative_eq!(base.phase, shifted.phase, max_relative = 1e-6);
    }

    #[test]
    fn quasisteady_amplitudes_bracket_ode_envelope() {
        // Over one carrier cycle at the pulse peak, |beta(t)| swings between
        // ||b+| - |b-|| and |b+| + |b-|.
        let m = 1.5e-26;
        let w = 2.0 * std::f64::consts::PI * 2e5;
        let nu = 10.0 * w;
        let a = alpha(m, w);
        let tau = 5e-5;
        let f0 = 1e-20;
        let env = move |t: f64| (std::f64::consts::PI * t / tau).sin().powi(2);
        let f = move |t: f64| f0 * env(t) * (nu * t).cos();
        let dt = 2.0 * std::f64::consts::PI / (400.0 * nu);
        let (bp, bm) =
            carrier_beta_amplitudes(w, a, HBAR, f0 * env(0.5 * tau), nu, 1e-3 * w).unwrap();
        let lo = (bp.abs() - bm.abs()).abs();
        let hi = bp.abs() + bm.abs();
        // March the ODE to mid-pulse, then scan one carrier period.
        let period = 2.0 * std::f64::consts::PI / nu;
        let mut seen_min = f64::INFINITY;
        let mut seen_max = 0.0f64;
        let n_scan = 80;
        for k in 0..=n_scan {
            let t_end = 0.5 * tau - 0.5 * period + k as f64 * period / n_scan as f64;
            let tr = integrate_mode(w, a, HBAR, f, t_end, dt, nu).unwrap();
            let b = tr.beta.norm();
            seen_min = seen_min.min(b);
            seen_max = seen_max.max(b);
        }
        assert_relative_eq!(seen_max, hi, max_relative = 0.05);
        assert_relative_eq!(seen_min, lo, max_relative = 0.05);
    }

    #[test]
    fn resonance_guard_trips_near_pole() {
        let w = 1e6;
        match carrier_beta_amplitudes(w, 1e-8, HBAR, 1e-20, w * (1.0 + 1e-9), 1e-3 * w) {
            Err(Error::Precondition(_)) => {}
            other => panic!("expected resonance error, got {other:?}"),
        }
        let (bp, bm) = carrier_beta_amplitudes(w, 1e-8, HBAR, 0.0, 10.0 * w, 1e-3 * w).unwrap();
        assert_eq!(bp, 0.0);
        assert_eq!(bm, 0.0);
    }
}
