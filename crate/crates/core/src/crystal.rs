//! Equilibrium structure of an ion Wigner crystal in the effective co-rotating
//! harmonic potential.
//!
//! The potential is `sum_i m/2 (omega_xy^2 (x_i^2+y_i^2) + omega_z^2 z_i^2) +
//! sum_{i<j} k_C / r_ij` with `k_C = q^2/(4 pi eps0)`. All minimization work
//! happens in the scaled units of [`crate::units`]; positions, energies and
//! forces on the public structs are SI.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

fn default_hbar() -> f64 {
    units::HBAR
}
fn default_eps0() -> f64 {
    units::EPS0
}
fn default_kb() -> f64 {
    units::KB
}

/// Trap and ion parameters. Frequencies are angular (rad/s).
///
/// `omega_xy` is the effective lateral confinement in the frame co-rotating
/// with the crystal, `omega_z` the axial confinement along the magnetic field,
/// `omega_r` the crystal rotation rate (used only by sweep kinematics).
/// The physical constants ride along so a single struct fixes the unit
/// system; they default to CODATA values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrapConfig {
    pub n_ions: usize,
    pub omega_xy: f64,
    pub omega_z: f64,
    pub omega_r: f64,
    /// Ion mass, kg.
    pub mass: f64,
    /// Ion charge, C.
    pub charge: f64,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    #[serde(default = "default_kb")]
    pub k_b: f64,
}

impl TrapConfig {
    /// CODATA constants filled in.
    pub fn new(
        n_ions: usize,
        omega_xy: f64,
        omega_z: f64,
        omega_r: f64,
        mass: f64,
        charge: f64,
    ) -> Self {
        TrapConfig {
            n_ions,
            omega_xy,
            omega_z,
            omega_r,
            mass,
            charge,
            hbar: units::HBAR,
            eps0: units::EPS0,
            k_b: units::KB,
        }
    }

    /// Coulomb coupling `q^2 / (4 pi eps0)`, J m.
    pub fn coulomb_k(&self) -> f64 {
        self.charge * self.charge / (4.0 * std::f64::consts::PI * self.eps0)
    }

    /// Scaled length unit `l = (k_C/(m omega_xy^2))^(1/3)`, m.
    pub fn length_scale(&self) -> f64 {
        (self.coulomb_k() / (self.mass * self.omega_xy * self.omega_xy)).cbrt()
    }

    /// Energy unit `m omega_xy^2 l^2`, J.
    pub fn energy_scale(&self) -> f64 {
        let l = self.length_scale();
        self.mass * self.omega_xy * self.omega_xy * l * l
    }

    /// Force unit `m omega_xy^2 l`, N.
    pub fn force_scale(&self) -> f64 {
        self.mass * self.omega_xy * self.omega_xy * self.length_scale()
    }

    /// Aspect ratio `omega_z / omega_xy`.
    pub fn aspect(&self) -> f64 {
        self.omega_z / self.omega_xy
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ions == 0 {
            return Err(Error::Config("n_ions must be at least 1".into()));
        }
        for (name, v) in [
            ("omega_xy", self.omega_xy),
            ("omega_z", self.omega_z),
            ("mass", self.mass),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.charge == 0.0 || !self.charge.is_finite() {
            return Err(Error::Config("charge must be nonzero".into()));
        }
        if self.omega_r < 0.0 || !self.omega_r.is_finite() {
            return Err(Error::Config("omega_r must be nonnegative".into()));
        }
        for (name, v) in [("hbar", self.hbar), ("eps0", self.eps0), ("k_b", self.k_b)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// A converged crystal configuration, SI units.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IonCrystal {
    /// Equilibrium positions, m, laid out `[x, y, z]` per ion.
    pub positions: Vec<[f64; 3]>,
    /// Total potential energy, J.
    pub energy: f64,
    /// Euclidean norm of the residual force vector, N.
    pub gradient_norm: f64,
    /// Minimum pair distance, m. The nearest-neighbor spacing `d`.
    pub spacing: f64,
    /// Newton/gradient iterations spent.
    pub iterations: usize,
}

impl IonCrystal {
    /// Positions in scaled lengths.
    pub fn scaled_positions(&self, trap: &TrapConfig) -> Vec<f64> {
        let l = trap.length_scale();
        let mut out = Vec::with_capacity(self.positions.len() * 3);
        for p in &self.positions {
            out.extend_from_slice(&[p[0] / l, p[1] / l, p[2] / l]);
        }
        out
    }

    /// Largest |z| over all ions, m.
    pub fn max_abs_z(&self) -> f64 {
        self.positions
            .iter()
            .map(|p| p[2].abs())
            .fold(0.0, f64::max)
    }

    /// Indices of the two adjacent ions closest to the trap center:
    /// the innermost ion and its nearest neighbor (ties broken by index).
    pub fn center_pair(&self) -> (usize, usize) {
        let r2 = |p: &[f64; 3]| p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        let mut inner = 0;
        for (i, p) in self.positions.iter().enumerate() {
            if r2(p) < r2(&self.positions[inner]) {
                inner = i;
            }
        }
        let pi = self.positions[inner];
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (j, p) in self.positions.iter().enumerate() {
            if j == inner {
                continue;
            }
            let d = dist(&pi, p);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        (inner.min(best), inner.max(best))
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Scaled potential energy; `a2 = (omega_z/omega_xy)^2`, `x` is `[x,y,z]*n`.
pub(crate) fn energy_scaled(a2: f64, x: &[f64]) -> f64 {
    let n = x.len() / 3;
    let mut u = 0.0;
    for i in 0..n {
        let (xi, yi, zi) = (x[3 * i], x[3 * i + 1], x[3 * i + 2]);
        u += 0.5 * (xi * xi + yi * yi + a2 * zi * zi);
        for j in (i + 1)..n {
            let dx = xi - x[3 * j];
            let dy = yi - x[3 * j + 1];
            let dz = zi - x[3 * j + 2];
            u += 1.0 / (dx * dx + dy * dy + dz * dz).sqrt();
        }
    }
    u
}

/// Scaled gradient of [`energy_scaled`] into `g`.
pub(crate) fn gradient_scaled(a2: f64, x: &[f64], g: &mut [f64]) {
    let n = x.len() / 3;
    for i in 0..n {
        g[3 * i] = x[3 * i];
        g[3 * i + 1] = x[3 * i + 1];
        g[3 * i + 2] = a2 * x[3 * i + 2];
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[3 * i] - x[3 * j];
            let dy = x[3 * i + 1] - x[3 * j + 1];
            let dz = x[3 * i + 2] - x[3 * j + 2];
            let r2 = dx * dx + dy * dy + dz * dz;
            let inv_r3 = 1.0 / (r2 * r2.sqrt());
            g[3 * i] -= dx * inv_r3;
            g[3 * i + 1] -= dy * inv_r3;
            g[3 * i + 2] -= dz * inv_r3;
            g[3 * j] += dx * inv_r3;
            g[3 * j + 1] += dy * inv_r3;
            g[3 * j + 2] += dz * inv_r3;
        }
    }
}

/// Scaled Hessian of [`energy_scaled`]; eigenvalues are `(omega_K/omega_xy)^2`
/// once mass-weighted (the scaling already divides by m).
pub(crate) fn hessian_scaled(a2: f64, x: &[f64]) -> DMatrix<f64> {
    let n = x.len() / 3;
    let mut h = DMatrix::<f64>::zeros(3 * n, 3 * n);
    for i in 0..n {
        h[(3 * i, 3 * i)] = 1.0;
        h[(3 * i + 1, 3 * i + 1)] = 1.0;
        h[(3 * i + 2, 3 * i + 2)] = a2;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let d = [
                x[3 * i] - x[3 * j],
                x[3 * i + 1] - x[3 * j + 1],
                x[3 * i + 2] - x[3 * j + 2],
            ];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            let r = r2.sqrt();
            let inv_r3 = 1.0 / (r2 * r);
            let inv_r5 = inv_r3 / r2;
            for a in 0..3 {
                for b in 0..3 {
                    // d^2 (1/r) / dx_i^a dx_j^b = (delta_ab - 3 r^a r^b / r^2)/r^3
                    let block = if a == b { inv_r3 } else { 0.0 } - 3.0 * d[a] * d[b] * inv_r5;
                    h[(3 * i + a, 3 * j + b)] += block;
                    h[(3 * j + a, 3 * i + b)] += block;
                    h[(3 * i + a, 3 * i + b)] -= block;
                    h[(3 * j + a, 3 * j + b)] -= block;
                }
            }
        }
    }
    h
}

/// Potential energy of an arbitrary configuration, J. Positions in m.
pub fn potential_energy(trap: &TrapConfig, positions: &[[f64; 3]]) -> f64 {
    let l = trap.length_scale();
    let x: Vec<f64> = positions
        .iter()
        .flat_map(|p| p.iter().map(move |c| c / l))
        .collect();
    let a2 = trap.aspect() * trap.aspect();
    energy_scaled(a2, &x) * trap.energy_scale()
}

/// How strongly out-of-plane stacking is suppressed before the seed goes 3D.
/// Crystals with `omega_z/omega_xy` at or above this seed as a single plane.
pub const PLANARITY_THRESHOLD_DEFAULT: f64 = 10.0;

/// Triangular-lattice seed. Sites of a hexagonal lattice are sorted by
/// (radius, angle, index) and the first `n_ions` taken, so N = 7 is a
/// centered hexagon and N = 147 a seven-shell disk. For aspect ratios below
/// `planarity_threshold` the seed is split into two stacked layers.
/// Collinear seeds (all sites on one line, N >= 3) get a deterministic
/// index-keyed jitter so the minimizer cannot start on a symmetry saddle.
pub fn seed_lattice(trap: &TrapConfig, planarity_threshold: f64) -> Vec<[f64; 3]> {
    let n = trap.n_ions;
    let l = trap.length_scale();
    let two_ion = 2f64.cbrt();
    // Denser packing for larger crystals; the minimizer fixes the profile.
    let a = if n <= 7 {
        two_ion
    } else {
        two_ion * (7.0 / n as f64).powf(1.0 / 6.0)
    };
    let k = (n as f64).sqrt() as i64 + 3;
    let mut sites: Vec<(f64, f64, [f64; 2])> = Vec::new();
    for i in -k..=k {
        for j in -k..=k {
            let x = a * (i as f64 + 0.5 * j as f64);
            let y = a * (3f64.sqrt() / 2.0) * j as f64;
            let r = (x * x + y * y).sqrt();
            let ang = y.atan2(x);
            sites.push((r, ang, [x, y]));
        }
    }
    sites.sort_by(|p, q| {
        p.0.partial_cmp(&q.0)
            .unwrap()
            .then(p.1.partial_cmp(&q.1).unwrap())
    });
    let mut pos: Vec<[f64; 3]> = sites
        .iter()
        .take(n)
        .map(|(_, _, xy)| [xy[0], xy[1], 0.0])
        .collect();

    if trap.aspect() < planarity_threshold && n > 1 {
        for (i, p) in pos.iter_mut().enumerate() {
            p[2] = if i % 2 == 0 { 0.5 * a } else { -0.5 * a };
        }
    }

    // Deterministic symmetry-breaking jitter. Perfectly symmetric seeds ride
    // gradient flow onto saddle points (shell rearrangements are blocked by
    // the seed's point group); 1e-6 of a site spacing is plenty to leave the
    // symmetric manifold and vanishes in the converged result.
    if n >= 3 {
        for (i, p) in pos.iter_mut().enumerate() {
            let ph = i as f64;
            p[0] += 1e-6 * a * (7.0 * ph + 1.0).sin();
            p[1] += 1e-6 * a * (3.0 * ph + 2.0).cos();
        }
    }

    pos.iter().map(|p| [p[0] * l, p[1] * l, p[2] * l]).collect()
}

fn is_collinear(pos: &[[f64; 3]]) -> bool {
    if pos.len() < 3 {
        return false;
    }
    // Direction from the two most separated points; all cross products small.
    let (mut a, mut b, mut best) = (0, 1, 0.0);
    for i in 0..pos.len() {
        for j in (i + 1)..pos.len() {
            let d = dist(&pos[i], &pos[j]);
            if d > best {
                best = d;
                a = i;
                b = j;
            }
        }
    }
    if best == 0.0 {
        return true;
    }
    let u = [
        (pos[b][0] - pos[a][0]) / best,
        (pos[b][1] - pos[a][1]) / best,
        (pos[b][2] - pos[a][2]) / best,
    ];
    pos.iter().all(|p| {
        let v = [p[0] - pos[a][0], p[1] - pos[a][1], p[2] - pos[a][2]];
        let cx = u[1] * v[2] - u[2] * v[1];
        let cy = u[2] * v[0] - u[0] * v[2];
        let cz = u[0] * v[1] - u[1] * v[0];
        (cx * cx + cy * cy + cz * cz).sqrt() < 1e-9 * best
    })
}

/// Minimizer options. `grad_tol` is in scaled force units
/// (`m omega_xy^2 l`); the converged SI residual is `grad_tol * force_scale`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinimizeOpts {
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for MinimizeOpts {
    fn default() -> Self {
        MinimizeOpts {
            grad_tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

/// Find the equilibrium crystal: gradient descent with backtracking line
/// search to get near the basin, then damped Newton to polish. Deterministic.
/// `seed` positions in m; `None` uses [`seed_lattice`].
pub fn minimize(
    trap: &TrapConfig,
    seed: Option<&[[f64; 3]]>,
    opts: &MinimizeOpts,
) -> Result<IonCrystal> {
    trap.validate()?;
    let seeded;
    let seed = match seed {
        Some(s) => {
            if s.len() != trap.n_ions {
                return Err(Error::Config(format!(
                    "seed has {} positions for {} ions",
                    s.len(),
                    trap.n_ions
                )));
            }
            s
        }
        None => {
            seeded = seed_lattice(trap, PLANARITY_THRESHOLD_DEFAULT);
            &seeded
        }
    };
    let l = trap.length_scale();
    let mut x: Vec<f64> = seed
        .iter()
        .flat_map(|p| p.iter().map(move |c| c / l))
        .collect();
    let n = trap.n_ions;

    for i in 0..n {
        for j in (i + 1)..n {
            let d = [
                x[3 * i] - x[3 * j],
                x[3 * i + 1] - x[3 * j + 1],
                x[3 * i + 2] - x[3 * j + 2],
            ];
            if (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() < 1e-9 {
                return Err(Error::Precondition(format!(
                    "degenerate seed: ions {i} and {j} coincide"
                )));
            }
        }
    }
    {
        let mut pos3: Vec<[f64; 3]> = x.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        if n >= 3 && is_collinear(&pos3) {
            for (i, p) in pos3.iter_mut().enumerate() {
                let ph = i as f64;
                p[0] += 1e-6 * (7.0 * ph + 1.0).sin();
                p[1] += 1e-6 * (3.0 * ph + 2.0).cos();
            }
            x = pos3.iter().flat_map(|p| p.iter().copied()).collect();
        }
    }

    let a2 = trap.aspect() * trap.aspect();
    let mut g = vec![0.0; 3 * n];
    let mut u = energy_scaled(a2, &x);
    let mut iters = 0usize;

    // Stage 1: gradient descent until the quadratic basin is plausible.
    let mut step = 1e-2;
    loop {
        gradient_scaled(a2, &x, &mut g);
        let gnorm = norm(&g);
        if gnorm < 1e-3 || iters >= opts.max_iter / 2 {
            break;
        }
        let mut t = step;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect();
            let ut = energy_scaled(a2, &trial);
            if ut < u - 1e-4 * t * gnorm * gnorm {
                x = trial;
                u = ut;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        step = (t * 1.5).min(0.5);
        iters += 1;
    }

    // Stage 2: damped Newton. The disk-rotation direction is an exact zero
    // mode of the Hessian; project it out of each step so the regularized
    // solve cannot drift along it without making progress.
    let mut mu = 1e-10;
    let mut gt = vec![0.0; 3 * n];
    let mut escapes = 0usize;
    loop {
        gradient_scaled(a2, &x, &mut g);
        let gnorm = norm(&g);
        if gnorm < opts.grad_tol {
            break;
        }
        if iters >= opts.max_iter {
            return Err(Error::Convergence(format!(
                "minimize: |grad| = {gnorm:.3e} after {iters} iterations (tol {:.1e})",
                opts.grad_tol
            )));
        }
        let h = hessian_scaled(a2, &x);
        let rhs = DVector::from_iterator(3 * n, g.iter().map(|v| -v));
        let rot = rotation_generator(&x);
        let mut solved = false;
        while mu < 1e8 {
            let mut hd = h.clone();
            for i in 0..3 * n {
                hd[(i, i)] += mu;
            }
            if let Some(chol) = hd.cholesky() {
                let mut delta = chol.solve(&rhs);
                if let Some(v) = &rot {
                    let along: f64 = delta.iter().zip(v).map(|(d, vi)| d * vi).sum();
                    for (d, vi) in delta.iter_mut().zip(v) {
                        *d -= along * vi;
                    }
                }
                let trial: Vec<f64> = x.iter().enumerate().map(|(i, xi)| xi + delta[i]).collect();
                let ut = energy_scaled(a2, &trial);
                gradient_scaled(a2, &trial, &mut gt);
                let gnorm_t = norm(&gt);
                let ceiling = u + 1e-14 * u.abs();
                if ut <= ceiling && (ut < u - 1e-15 * u.abs() || gnorm_t < gnorm) {
                    x = trial;
                    u = ut;
                    mu = (mu / 3.0).max(1e-14);
                    solved = true;
                    break;
                }
            }
            mu *= 10.0;
        }
        if !solved {
            // Stalled: either a saddle (negative curvature, typically reached
            // from a symmetric seed) or the numerical floor. Try a descent
            // step along the most negative curvature direction.
            if escapes >= 50 || !escape_negative_curvature(a2, &mut x, &mut u, &h) {
                return Err(Error::Convergence(format!(
                    "minimize: Newton damping exhausted at |grad| = {gnorm:.3e}"
                )));
            }
            escapes += 1;
            mu = 1e-6;
        }
        iters += 1;
    }

    align_outermost_with_x(&mut x);
    gradient_scaled(a2, &x, &mut g);
    let gnorm = norm(&g);
    u = energy_scaled(a2, &x);

    let positions: Vec<[f64; 3]> = x
        .chunks(3)
        .map(|c| [c[0] * l, c[1] * l, c[2] * l])
        .collect();
    let spacing = median_nn_spacing(&positions);
    Ok(IonCrystal {
        positions,
        energy: u * trap.energy_scale(),
        gradient_norm: gnorm * trap.force_scale(),
        spacing,
        iterations: iters,
    })
}

/// Saddle escape: if the Hessian has a clearly negative eigenvalue, line
/// search along its eigenvector (both signs) and keep any energy decrease.
fn escape_negative_curvature(a2: f64, x: &mut [f64], u: &mut f64, h: &DMatrix<f64>) -> bool {
    let eig = h.clone().symmetric_eigen();
    let mut min_i = 0;
    for i in 0..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[min_i] {
            min_i = i;
        }
    }
    let max_abs = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if eig.eigenvalues[min_i] >= -1e-12 * max_abs {
        return false;
    }
    let dir = eig.eigenvectors.column(min_i);
    let mut step = 0.1;
    for _ in 0..40 {
        for sign in [1.0, -1.0] {
            let trial: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(i, xi)| xi + sign * step * dir[i])
                .collect();
            let ut = energy_scaled(a2, &trial);
            if ut < *u - 1e-14 * u.abs() {
                x.copy_from_slice(&trial);
                *u = ut;
                return true;
            }
        }
        step *= 0.5;
    }
    false
}

/// Unit generator of rigid rotation about z at configuration `x`:
/// per-ion `(-y, x, 0)`, normalized. `None` when every ion sits on the axis.
fn rotation_generator(x: &[f64]) -> Option<Vec<f64>> {
    let n = x.len() / 3;
    let mut v = vec![0.0; 3 * n];
    for i in 0..n {
        v[3 * i] = -x[3 * i + 1];
        v[3 * i + 1] = x[3 * i];
    }
    let nv = norm(&v);
    if nv < 1e-12 {
        return None;
    }
    for vi in &mut v {
        *vi /= nv;
    }
    Some(v)
}

/// Rotational orientation tie-break: rotate about z so the ion farthest from
/// the z axis (ties by lowest index) lands on the +x axis.
fn align_outermost_with_x(x: &mut [f64]) {
    let n = x.len() / 3;
    let mut outer = 0;
    let mut best = -1.0;
    for i in 0..n {
        let r2 = x[3 * i] * x[3 * i] + x[3 * i + 1] * x[3 * i + 1];
        if r2 > best + 1e-15 {
            best = r2;
            outer = i;
        }
    }
    if best < 1e-24 {
        return;
    }
    let ang = x[3 * outer + 1].atan2(x[3 * outer]);
    let (s, c) = ang.sin_cos();
    for i in 0..n {
        let xi = x[3 * i];
        let yi = x[3 * i + 1];
        x[3 * i] = c * xi + s * yi;
        x[3 * i + 1] = -s * xi + c * yi;
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Median over ions of the nearest-neighbor distance. The crystal's
/// characteristic spacing `d`; 0 for a single ion.
fn median_nn_spacing(positions: &[[f64; 3]]) -> f64 {
    let n = positions.len();
    if n < 2 {
        return 0.0;
    }
    let mut nn: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| dist(&positions[i], &positions[j]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nn.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if n % 2 == 1 {
        nn[n / 2]
    } else {
        0.5 * (nn[n / 2 - 1] + nn[n / 2])
    }
}
