//! Normal modes of the ion crystal: mass-weighted Hessian, eigendecomposition,
//! polarization bookkeeping, and thermal occupations.
//!
//! Mode `K` has angular frequency `omega_K`, ground-state length
//! `alpha_K = sqrt(hbar/(m omega_K))`, and a unit displacement-pattern column
//! in the orthogonal matrix `M` (rows are ion coordinates in `x,y,z` ion-major
//! order). Disk-rotation zero modes are kept and flagged, never dropped.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::crystal::{self, IonCrystal, TrapConfig};
use crate::error::{Error, Result};

/// Residual-force ceiling (in scaled force units `m omega_xy^2 l`) above
/// which a crystal is rejected as unconverged for second-order expansion.
pub const HESSIAN_RESIDUAL_TOL: f64 = 1e-8;

/// Modes with `omega < ZERO_MODE_FRACTION * omega_xy` are treated as zero
/// modes (crystal-rotation degeneracy).
pub const ZERO_MODE_FRACTION: f64 = 1e-6;

/// Dominant displacement direction of a mode. `Vertical` means at least 99%
/// of the squared amplitude lies in z components, `Lateral` at most 1%.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    Lateral,
    Vertical,
    Mixed,
}

/// Eigendecomposition of the mass-weighted Hessian, sorted by frequency.
#[derive(Clone, Debug)]
pub struct PhononModes {
    /// Angular frequencies, rad/s, ascending. Zero modes clamped to 0.
    pub frequencies: Vec<f64>,
    /// 3N x 3N orthogonal matrix; column K is the displacement pattern of
    /// mode K, rows ordered `[x0, y0, z0, x1, ...]`.
    pub mode_matrix: DMatrix<f64>,
    pub polarization: Vec<Polarization>,
    /// Ground-state lengths `sqrt(hbar/(m omega_K))`, m; infinite for zero
    /// modes.
    pub mode_lengths: Vec<f64>,
    /// Crystal-rotation (and other symmetry) zero modes.
    pub zero_mode: Vec<bool>,
}

impl PhononModes {
    pub fn n_modes(&self) -> usize {
        self.frequencies.len()
    }

    pub fn n_ions(&self) -> usize {
        self.frequencies.len() / 3
    }

    /// Displacement 3-vector of mode `k` at ion `i`.
    pub fn mode_at_ion(&self, k: usize, i: usize) -> [f64; 3] {
        [
            self.mode_matrix[(3 * i, k)],
            self.mode_matrix[(3 * i + 1, k)],
            self.mode_matrix[(3 * i + 2, k)],
        ]
    }

    /// Project per-ion force vectors onto the modes: `f_K = sum_i F_i . M_iK`.
    pub fn project_forces(&self, forces: &[[f64; 3]]) -> Vec<f64> {
        let n = self.n_ions();
        assert_eq!(forces.len(), n, "one force vector per ion");
        (0..self.n_modes())
            .map(|k| {
                let mut f = 0.0;
                for (i, fi) in forces.iter().enumerate() {
                    let m = self.mode_at_ion(k, i);
                    f += fi[0] * m[0] + fi[1] * m[1] + fi[2] * m[2];
                }
                f
            })
            .collect()
    }

    /// Indices of non-zero modes with the given polarization.
    pub fn modes_with_polarization(&self, p: Polarization) -> Vec<usize> {
        (0..self.n_modes())
            .filter(|&k| !self.zero_mode[k] && self.polarization[k] == p)
            .collect()
    }

    /// Mean thermal phonon numbers at temperature `t_kelvin`.
    pub fn thermal_occupation(&self, trap: &TrapConfig, t_kelvin: f64) -> Result<ThermalState> {
        if !(t_kelvin >= 0.0) || !t_kelvin.is_finite() {
            return Err(Error::Config(format!(
                "temperature must be finite and nonnegative, got {t_kelvin}"
            )));
        }
        let occupations = self
            .frequencies
            .iter()
            .zip(&self.zero_mode)
            .map(|(&w, &zero)| {
                if zero {
                    f64::INFINITY
                } else if t_kelvin == 0.0 {
                    0.0
                } else {
                    1.0 / (trap.hbar * w / (trap.k_b * t_kelvin)).exp_m1()
                }
            })
            .collect();
        Ok(ThermalState {
            temperature: t_kelvin,
            occupations,
        })
    }
}

/// Bose-Einstein occupations per mode at a given temperature. Zero modes
/// carry infinite occupation and are excluded from gate damping sums.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThermalState {
    pub temperature: f64,
    pub occupations: Vec<f64>,
}

/// Mass-weighted Hessian of the potential at the crystal configuration,
/// units s^-2. Requires a converged crystal (residual force below
/// [`HESSIAN_RESIDUAL_TOL`] scaled units).
pub fn hessian(trap: &TrapConfig, crystal: &IonCrystal) -> Result<DMatrix<f64>> {
    trap.validate()?;
    if crystal.positions.len() != trap.n_ions {
        return Err(Error::Config(format!(
            "crystal has {} ions, trap expects {}",
            crystal.positions.len(),
            trap.n_ions
        )));
    }
    if crystal.gradient_norm > HESSIAN_RESIDUAL_TOL * trap.force_scale() {
        return Err(Error::Precondition(format!(
            "crystal not converged: residual force {:.3e} N exceeds {:.3e} N",
            crystal.gradient_norm,
            HESSIAN_RESIDUAL_TOL * trap.force_scale()
        )));
    }
    let x = crystal.scaled_positions(trap);
    let a2 = trap.aspect() * trap.aspect();
    Ok(crystal::hessian_scaled(a2, &x) * (trap.omega_xy * trap.omega_xy))
}

/// Diagonalize a mass-weighted Hessian into [`PhononModes`].
///
/// Frequencies come back sorted ascending with deterministic column signs
/// (largest-magnitude entry positive). A negative eigenvalue beyond
/// `-1e-10 * max|eigenvalue|` means the configuration is not a minimum.
pub fn normal_modes(trap: &TrapConfig, hessian_si: &DMatrix<f64>) -> Result<PhononModes> {
    let dim = hessian_si.nrows();
    if hessian_si.ncols() != dim || dim == 0 || !dim.is_multiple_of(3) {
        return Err(Error::Config(format!(
            "hessian must be square 3N x 3N, got {}x{}",
            dim,
            hessian_si.ncols()
        )));
    }
    let sym_err = (hessian_si - hessian_si.transpose()).abs().max();
    let scale = hessian_si.abs().max();
    if sym_err > 1e-10 * scale {
        return Err(Error::Precondition(format!(
            "hessian not symmetric: max asymmetry {sym_err:.3e} of scale {scale:.3e}"
        )));
    }
    // Work in units of omega_xy^2 for conditioning.
    let w2 = trap.omega_xy * trap.omega_xy;
    let scaled = hessian_si / w2;
    let eig = scaled.clone().symmetric_eigen();
    let max_abs = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());

    let mut frequencies = Vec::with_capacity(dim);
    let mut mode_matrix = DMatrix::<f64>::zeros(dim, dim);
    for (k, &src) in order.iter().enumerate() {
        let lam = eig.eigenvalues[src];
        if lam < -1e-10 * max_abs {
            return Err(Error::Precondition(format!(
                "unstable equilibrium: eigenvalue {:.6e} omega_xy^2",
                lam
            )));
        }
        frequencies.push(lam.max(0.0).sqrt() * trap.omega_xy);
        let col = eig.eigenvectors.column(src);
        let mut dominant = 0;
        for r in 0..dim {
            if col[r].abs() > col[dominant].abs() {
                dominant = r;
            }
        }
        let sign = if col[dominant] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..dim {
            mode_matrix[(r, k)] = sign * col[r];
        }
    }

    let zero_mode: Vec<bool> = frequencies
        .iter()
        .map(|&w| w < ZERO_MODE_FRACTION * trap.omega_xy)
        .collect();
    let mode_lengths: Vec<f64> = frequencies
        .iter()
        .zip(&zero_mode)
        .map(|(&w, &zero)| {
            if zero {
                f64::INFINITY
            } else {
                (trap.hbar / (trap.mass * w)).sqrt()
            }
        })
        .collect();
    let polarization: Vec<Polarization> = (0..dim)
        .map(|k| {
            let mut z = 0.0;
            let mut total = 0.0;
            for i in 0..dim / 3 {
                let m = [
                    mode_matrix[(3 * i, k)],
                    mode_matrix[(3 * i + 1, k)],
                    mode_matrix[(3 * i + 2, k)],
                ];
                z += m[2] * m[2];
                total += m[0] * m[0] + m[1] * m[1] + m[2] * m[2];
            }
            let frac = z / total;
            if frac >= 0.99 {
                Polarization::Vertical
            } else if frac <= 0.01 {
                Polarization::Lateral
            } else {
                Polarization::Mixed
            }
        })
        .collect();

    Ok(PhononModes {
        frequencies,
        mode_matrix,
        polarization,
        mode_lengths,
        zero_mode,
    })
}

/// Convenience pipeline: Hessian plus eigendecomposition.
pub fn modes_of(trap: &TrapConfig, crystal: &IonCrystal) -> Result<PhononModes> {
    let h = hessian(trap, crystal)?;
    normal_modes(trap, &h)
}
