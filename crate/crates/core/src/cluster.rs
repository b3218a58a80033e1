//! Weighted-graph phases written by a push beam swept through the rotating
//! crystal, and the lab-frame beam trajectory that realizes the sweep.
//!
//! A Gaussian beam of waist `sigma * d` (with `d` the lattice spacing) moving
//! along a lattice direction at half the height of a triangular cell leaves a
//! two-body phase `theta` on the two cell edges inclined to the sweep line
//! and `epsilon * theta` on the edge parallel to it. Narrowing the waist
//! makes `epsilon` small while `theta` is tuned to pi with laser power, so
//! each cell ends up with two pi edges and one null edge: a cluster state on
//! the triangular lattice. With a fast carrier modulation at `nu` the same
//! sweep writes `-theta(nu)/2` per edge instead.
//!
//! Because the crystal rotates at `omega_r`, a straight constant-velocity
//! path in the crystal frame maps to a curved lab-frame trajectory. The
//! closed-form displacement pair implemented here keeps the beam at radial
//! distance `xi` with tangential speed `xi omega_r tan(chi)/chi` (both to
//! first order in `omega_r t`), where `chi = arccos(xi/R)` limits the sweep
//! window; outside `|omega_r t| <= chi` the beam rests at its parking radius
//! `R`.
//!
//! Frame convention (not fixed by the closed forms themselves): the crystal
//! orientation angle is `-omega_r t`, so mapping a lab point into the
//! crystal frame rotates it by `+omega_r t`. Under this choice the swept
//! path in the crystal frame advances along `+y` at `x ~ xi`, which the
//! speed-constancy test pins down, and the sweep line used by
//! [`swept_graph`] is `x = xi`.

use serde::{Deserialize, Serialize};

use crate::crystal::{IonCrystal, TrapConfig};
use crate::error::{Error, Result};

/// Pair separations above this multiple of the lattice spacing are not
/// lattice edges.
const NEIGHBOR_CUT: f64 = 1.35;
/// An edge is parallel to the sweep direction when its component across the
/// sweep line is below this multiple of the lattice spacing.
const PARALLEL_CUT: f64 = 0.25;
/// Ions farther than this many beam waists from the sweep line are not
/// addressed.
const REACH_SIGMAS: f64 = 3.0;

/// Beam and sweep geometry for cluster-state generation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamSweep {
    /// Beam waist in units of the lattice spacing.
    pub waist_sigma: f64,
    /// Sweep speed in the crystal frame, m/s. Enters the accumulated phase;
    /// a kinematically consistent setup also has it equal to
    /// [`BeamSweep::geometric_speed`].
    pub velocity: f64,
    /// Distance of the sweep line from the trap center, m.
    pub xi: f64,
    /// Parking radius of the beam, m. Must exceed `xi`.
    pub radius: f64,
    /// Crystal rotation rate, rad/s.
    pub omega_r: f64,
    /// Peak resonant Rabi frequency at the beam center, rad/s.
    pub rabi_peak: f64,
    /// Laser detuning from the internal transition, rad/s.
    pub detuning: f64,
    /// Carrier modulation frequency; `Some(nu)` switches every edge phase to
    /// `-theta(nu)/2`.
    pub carrier_nu: Option<f64>,
}

impl BeamSweep {
    /// All lengths, rates and laser parameters must be positive and finite,
    /// with `xi < radius` so the sweep chord exists.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("waist_sigma", self.waist_sigma),
            ("velocity", self.velocity),
            ("xi", self.xi),
            ("radius", self.radius),
            ("omega_r", self.omega_r),
            ("rabi_peak", self.rabi_peak),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!(
                    "beam sweep: {name} must be positive, got {v}"
                )));
            }
        }
        if !self.detuning.is_finite() || self.detuning == 0.0 {
            return Err(Error::Config(format!(
                "beam sweep: detuning must be nonzero, got {}",
                self.detuning
            )));
        }
        if self.xi >= self.radius {
            return Err(Error::Config(format!(
                "beam sweep: xi = {} must lie inside the parking radius {}",
                self.xi, self.radius
            )));
        }
        if let Some(nu) = self.carrier_nu {
            if !nu.is_finite() || nu <= 0.0 {
                return Err(Error::Config(format!(
                    "beam sweep: carrier_nu must be positive, got {nu}"
                )));
            }
        }
        Ok(())
    }

    /// Half-opening angle `chi = arccos(xi/R)` of the sweep window.
    pub fn chi(&self) -> f64 {
        (self.xi / self.radius).acos()
    }

    /// Crystal-frame tangential speed realized by the trajectory,
    /// `xi omega_r tan(chi)/chi`, m/s.
    pub fn geometric_speed(&self) -> f64 {
        let chi = self.chi();
        self.xi * self.omega_r * chi.tan() / chi
    }

    /// Duration of the sweep window: the beam moves for `|t| <= chi/omega_r`.
    pub fn window(&self) -> f64 {
        self.chi() / self.omega_r
    }
}

/// Suppression factor of the cell edge parallel to the sweep,
/// `exp(-3/(8 sigma^2)) (11 - 8 sigma^2) / (sigma^2 + 8)`.
///
/// Vanishes identically at `sigma = sqrt(11/8)` and essentially (through the
/// exponential) as `sigma -> 0`; the cluster regime sits near `sigma ~ 0.2`
/// where it is ~1e-4.
pub fn epsilon(sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    (-3.0 / (8.0 * s2)).exp() * (11.0 - 8.0 * s2) / (s2 + 8.0)
}

/// Two-body phase written on an inclined cell edge by one sweep pass,
///
/// `theta(omega) = Omega0^4/(omega^2 Delta^2) * alpha^4/d^4
///                 * q^2/(hbar eps0 v) * exp(-1/(2 sigma^2))/(sqrt(8 pi) sigma)
///                 * (1/sigma^2 + 1/8)`
///
/// with `alpha = sqrt(hbar/(m omega))` the ground-state length of the mode at
/// `omega`, `d` the lattice spacing and `q` the ion charge. Which `omega`
/// enters (vertical confinement for an out-of-plane push, a lateral band
/// frequency otherwise) is the caller's choice.
pub fn theta(omega: f64, beam: &BeamSweep, trap: &TrapConfig, spacing: f64) -> f64 {
    let sigma = beam.waist_sigma;
    let s2 = sigma * sigma;
    let alpha2 = trap.hbar / (trap.mass * omega);
    let laser = beam.rabi_peak.powi(4) / (omega * omega * beam.detuning * beam.detuning);
    let geometry = alpha2 * alpha2 / spacing.powi(4);
    let coupling = trap.charge * trap.charge / (trap.hbar * trap.eps0 * beam.velocity);
    let waist = (-0.5 / s2).exp() / ((8.0 * std::f64::consts::PI).sqrt() * sigma);
    laser * geometry * coupling * waist * (1.0 / s2 + 0.125)
}

/// Phase on an inclined cell edge for the configured drive: `theta(omega)`
/// unmodulated, `-theta(nu)/2` with a carrier at `nu`.
pub fn edge_phase(omega: f64, beam: &BeamSweep, trap: &TrapConfig, spacing: f64) -> f64 {
    match beam.carrier_nu {
        Some(nu) => -0.5 * theta(nu, beam, trap, spacing),
        None => theta(omega, beam, trap, spacing),
    }
}

/// One weighted edge of the graph state, stored once with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub i: usize,
    pub j: usize,
    /// Two-body phase on the edge, rad.
    pub weight: f64,
}

/// Symmetric weighted edge set of a graph state; absent pairs carry zero
/// phase.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphWeights {
    /// Sorted by `(i, j)` with `i < j`; each unordered pair appears at most
    /// once.
    pub edges: Vec<GraphEdge>,
}

impl GraphWeights {
    fn insert(&mut self, i: usize, j: usize, weight: f64) {
        debug_assert_ne!(i, j, "graph edges connect distinct ions");
        let (i, j) = (i.min(j), i.max(j));
        self.edges.push(GraphEdge { i, j, weight });
    }

    fn finish(mut self) -> Self {
        self.edges.sort_by_key(|e| (e.i, e.j));
        self
    }

    /// Weight of the unordered pair, if present.
    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by_key(&key, |e| (e.i, e.j))
            .ok()
            .map(|k| self.edges[k].weight)
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Edge weights of one triangular cell swept along its base: ions 0 and 1
/// span the edge parallel to the sweep (weight `epsilon * phase`), ion 2 is
/// the apex (both inclined edges get `phase`).
pub fn cell_weights(
    omega: f64,
    beam: &BeamSweep,
    trap: &TrapConfig,
    spacing: f64,
) -> Result<GraphWeights> {
    beam.validate()?;
    let phase = edge_phase(omega, beam, trap, spacing);
    let mut g = GraphWeights::default();
    g.insert(0, 1, epsilon(beam.waist_sigma) * phase);
    g.insert(0, 2, phase);
    g.insert(1, 2, phase);
    Ok(g.finish())
}

/// Graph written on a planar crystal by one sweep along the line `x = xi`
/// (crystal-frame coordinates, sweep direction `+y`).
///
/// Lattice edges (pairs closer than [`NEIGHBOR_CUT`] spacings with both
/// ions within [`REACH_SIGMAS`] waists of the sweep line) get the cell
/// phase: suppressed by `epsilon` when the edge runs parallel to the sweep
/// (`|dx| <` [`PARALLEL_CUT`] `* d`), full otherwise. Everything farther
/// from the line is untouched. Geometry only; the crystal need not be a
/// converged minimum, but it must be planar.
pub fn swept_graph(
    crystal: &IonCrystal,
    omega: f64,
    beam: &BeamSweep,
    trap: &TrapConfig,
) -> Result<GraphWeights> {
    beam.validate()?;
    let d = crystal.spacing;
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::Precondition(format!(
            "swept graph needs a positive lattice spacing, got {d}"
        )));
    }
    if crystal.max_abs_z() > 1e-6 * d {
        return Err(Error::Precondition(format!(
            "swept graph is defined for planar crystals; max |z| = {:.3e} m \
             exceeds 1e-6 of the spacing {:.3e} m",
            crystal.max_abs_z(),
            d
        )));
    }
    let phase = edge_phase(omega, beam, trap, d);
    let eps = epsilon(beam.waist_sigma);
    let reach = REACH_SIGMAS * beam.waist_sigma * d;
    let n = crystal.positions.len();
    let mut g = GraphWeights::default();
    for i in 0..n {
        let pi = crystal.positions[i];
        if (pi[0] - beam.xi).abs() > reach {
            continue;
        }
        for j in (i + 1)..n {
            let pj = crystal.positions[j];
            if (pj[0] - beam.xi).abs() > reach {
                continue;
            }
            let dx = pj[0] - pi[0];
            let dy = pj[1] - pi[1];
            if (dx * dx + dy * dy).sqrt() > NEIGHBOR_CUT * d {
                continue;
            }
            let w = if dx.abs() < PARALLEL_CUT * d {
                eps * phase
            } else {
                phase
            };
            g.insert(i, j, w);
        }
    }
    Ok(g.finish())
}

/// Lab-frame beam displacement `(dx, dy)` at time `t` relative to the
/// parking point:
///
/// `dx(t) = [R - xi/cos(omega_r t)] Theta(chi - |omega_r t|)`
/// `dy(t) = xi [omega_r t tan(chi)/chi - tan(omega_r t)] Theta(chi - |omega_r t|)`
///
/// Both components vanish continuously at the window edges `|omega_r t| =
/// chi` and outside them.
pub fn sweep_trajectory(beam: &BeamSweep, t: f64) -> (f64, f64) {
    let chi = beam.chi();
    let phi = beam.omega_r * t;
    if phi.abs() > chi {
        return (0.0, 0.0);
    }
    let dx = beam.radius - beam.xi / phi.cos();
    let dy = beam.xi * (phi * chi.tan() / chi - phi.tan());
    (dx, dy)
}

/// Lab-frame beam position: parked at `(R, 0)`, displaced to
/// `(R - dx, dy)` during the sweep window (so the beam sits at `(xi, 0)` at
/// `t = 0`).
pub fn lab_position(beam: &BeamSweep, t: f64) -> [f64; 2] {
    let (dx, dy) = sweep_trajectory(beam, t);
    [beam.radius - dx, dy]
}

/// Beam position in the crystal frame: the lab position rotated by
/// `+omega_r t` (the crystal orientation angle being `-omega_r t`). During
/// the window this stays at radius `xi` and advances along `+y` with speed
/// [`BeamSweep::geometric_speed`], both up to corrections of order
/// `(omega_r t)^2`.
pub fn rotating_position(beam: &BeamSweep, t: f64) -> [f64; 2] {
    let [x, y] = lab_position(beam, t);
    let (sin, cos) = (beam.omega_r * t).sin_cos();
    [cos * x - sin * y, sin * x + cos * y]
}
