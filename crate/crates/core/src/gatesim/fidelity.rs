//! Worst-case gate fidelity of a qubit-diagonal (dephasing) channel against
//! an ideal phase gate.
//!
//! The channel is described by a 4x4 coherence matrix over the qubit
//! configurations `s = (s1, s2)`: `rho_out[s,s'] = a_s conj(a_s') R_{ss'}`
//! for input amplitudes `a`. Comparing against the ideal diagonal unitary
//! with phases `theta_s`, the fidelity of a pure input reduces to
//! `F = p^T Re[e^{i(theta_s - theta_s')} R_{ss'}] p` with `p_s = |a_s|^2`
//! (the input phases cancel), so the minimum over all pure inputs is the
//! minimum of a quadratic form over the probability simplex, found exactly
//! by enumerating the faces of the simplex.
//!
//! Single-qubit z-rotations are treated as calibrated away: the ideal phases
//! share the channel's constant and one-body components, and differ (at
//! most) in the two-body component when a target phase is imposed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Configuration order used throughout: `(s1, s2)` =
/// `(+1,+1), (+1,-1), (-1,+1), (-1,-1)`.
pub const CONFIGS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

/// Two-qubit dephasing channel: deterministic per-configuration phases plus
/// pairwise damping of coherences.
#[derive(Clone, Debug)]
pub struct DephasingChannel {
    /// Accumulated phase per configuration, rad (continuous, not wrapped).
    pub phases: [f64; 4],
    /// Symmetric damping factors in [0, 1]; diagonal 1.
    pub damping: [[f64; 4]; 4],
}

impl DephasingChannel {
    /// Coefficient of `s1 s2` in the phase decomposition
    /// `phi_s = const + a s1 + b s2 + c s1 s2`: the realized two-body phase.
    pub fn two_body_phase(&self) -> f64 {
        0.25 * (self.phases[0] - self.phases[1] - self.phases[2] + self.phases[3])
    }

    /// Worst-case fidelity against the ideal gate with the channel's own
    /// phases (decoherence-limited fidelity).
    pub fn fidelity_realized(&self) -> f64 {
        min_quadratic_on_simplex(&self.damping)
    }

    /// Worst-case fidelity against an ideal gate whose two-body phase is
    /// `target` rad, with one-body components still calibrated away.
    pub fn fidelity_vs_target(&self, target: f64) -> f64 {
        let mismatch = self.two_body_phase() - target;
        let mut m = self.damping;
        for (a, &(s1a, s2a)) in CONFIGS.iter().enumerate() {
            for (b, &(s1b, s2b)) in CONFIGS.iter().enumerate() {
                let dg = s1a * s2a - s1b * s2b;
                m[a][b] *= (mismatch * dg).cos();
            }
        }
        min_quadratic_on_simplex(&m)
    }
}

/// Worst-case fidelity from a measured coherence matrix `R` (PSD, unit
/// diagonal), absorbing all deterministic per-configuration phases into the
/// ideal gate. Used by state-vector oracles where phases are only known
/// modulo 2 pi.
pub fn fidelity_from_overlap_matrix(r: &[[Complex64; 4]; 4]) -> f64 {
    let theta: Vec<f64> = (0..4).map(|s| -r[s][0].arg()).collect();
    let mut m = [[0.0f64; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let rot = Complex64::from_polar(1.0, theta[a] - theta[b]);
            m[a][b] = (rot * r[a][b]).re;
        }
    }
    min_quadratic_on_simplex(&m)
}

/// Exact minimum of `p^T M p` over the probability simplex (M symmetric).
///
/// The minimum of a quadratic form on a simplex is attained on some face;
/// on the relative interior of a face `S` the stationarity condition is
/// `(M p)_S = lambda 1` with `sum p = 1`. All 15 faces of the 3-simplex are
/// enumerated and infeasible candidates (negative weights, singular
/// subsystems) discarded; vertices always provide a fallback.
pub fn min_quadratic_on_simplex(m: &[[f64; 4]; 4]) -> f64 {
    let value = |p: &[f64; 4]| {
        let mut v = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                v += p[a] * m[a][b] * p[b];
            }
        }
        v
    };
    let mut best = f64::INFINITY;
    for mask in 1u8..16 {
        let idx: Vec<usize> = (0..4).filter(|&i| mask & (1 << i) != 0).collect();
        let k = idx.len();
        if k == 1 {
            best = best.min(m[idx[0]][idx[0]]);
            continue;
        }
        let sub = DMatrix::from_fn(k, k, |r, c| m[idx[r]][idx[c]]);
        let ones = DVector::from_element(k, 1.0);
        let Some(y) = sub.lu().solve(&ones) else {
            continue;
        };
        let total: f64 = y.iter().sum();
        if total.abs() < 1e-300 {
            continue;
        }
        let mut p = [0.0f64; 4];
        let mut feasible = true;
        for (r, &i) in idx.iter().enumerate() {
            let w = y[r] / total;
            if w < -1e-12 {
                feasible = false;
                break;
            }
            p[i] = w.max(0.0);
        }
        if feasible {
            best = best.min(value(&p));
        }
    }
    best
}
