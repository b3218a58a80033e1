//! Command-line front end: one subcommand per pipeline, parameters from an
//! optional JSON config file overridden by repeatable `--set key.path=value`
//! flags, artifacts (CSV tables with schema headers, JSON records) under
//! `--out`, and a one-line JSON summary on stdout.
//!
//! Unit convention for config keys: every `*_hz` key is an ordinary
//! frequency in hertz and is multiplied by `2 pi` at this boundary; the
//! library works in angular frequencies throughout. Masses are in atomic
//! mass units (`*_amu`), charges in elementary charges (`*_e`), lengths in
//! meters, times in seconds, temperatures in kelvin.
//!
//! Unknown keys inside a recognized config section are rejected (they are
//! almost always typos); unrecognized top-level sections are ignored so one
//! config file can drive several subcommands. Parallelism is inherited from
//! the library; cap it with the `RAYON_NUM_THREADS` environment variable.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cluster::{self, BeamSweep, GraphWeights};
use crate::crystal::{minimize, IonCrystal, MinimizeOpts, TrapConfig};
use crate::error::{Error, Result};
use crate::gatesim::{
    run_gate, temperature_sweep, Envelope, GateOpts, GatePulse, GateResult, LaserSetup,
    SweepConfig, SweepPoint,
};
use crate::io::{merged_config, write_csv, write_json};
use crate::network::{
    one_click_comparison, time_to_target, two_click_analytic, two_click_monte_carlo,
    ProtocolConfig, ProtocolStats, SchemePlan,
};
use crate::phonons::{self, PhononModes, Polarization};
use crate::units::{AMU, QE, TWO_PI};

#[derive(Debug, Parser)]
#[command(
    name = "wigner-push",
    version,
    about = "Push-gate, cluster-state and photonic-link simulations on planar ion Wigner crystals"
)]
pub struct Cli {
    /// JSON run configuration; `--set` overrides win over file values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config value by dotted path, e.g. `trap.n_ions=19`;
    /// repeatable.
    #[arg(long = "set", global = true, value_name = "KEY.PATH=VALUE")]
    pub sets: Vec<String>,
    /// Directory for artifact files.
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Clone, Copy, Debug, Subcommand)]
pub enum CliCommand {
    /// Minimize the ion crystal and write its positions.
    Crystal,
    /// Crystal plus normal modes: spectrum table and thermal occupations.
    Phonons,
    /// Run one push gate and report phases, fidelity and calibration.
    Gate,
    /// Compare carrier and vertical reference gates across temperatures.
    SweepTemperature,
    /// Beam-sweep graph phases, cell pattern and lab-frame trajectory.
    Cluster,
    /// Heralded-link statistics: closed forms, Monte Carlo, scheme choice.
    Network,
    /// Full reference bundle: spectrum, force profiles, force ratio and
    /// fidelity-vs-temperature curves at one trap configuration.
    Figure2,
}

/// Execute the parsed command line; returns the stdout summary.
pub fn run(cli: &Cli) -> Result<Value> {
    let cfg = merged_config(cli.config.as_deref(), &cli.sets)?;
    std::fs::create_dir_all(&cli.out)?;
    match cli.command {
        CliCommand::Crystal => run_crystal(&cfg, &cli.out),
        CliCommand::Phonons => run_phonons(&cfg, &cli.out),
        CliCommand::Gate => run_gate_cmd(&cfg, &cli.out),
        CliCommand::SweepTemperature => run_sweep(&cfg, &cli.out),
        CliCommand::Cluster => run_cluster(&cfg, &cli.out),
        CliCommand::Network => run_network(&cfg, &cli.out),
        CliCommand::Figure2 => run_figure2(&cfg, &cli.out),
    }
}

/// Deserialize one config section, using defaults when absent.
fn section<T: DeserializeOwned + Default>(cfg: &Value, key: &str) -> Result<T> {
    match cfg.get(key) {
        None | Some(Value::Null) => Ok(T::default()),
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| Error::Config(format!("config section `{key}`: {e}"))),
    }
}

/// Temperature for thermal occupations, kelvin (top-level key
/// `temperature_k`).
fn temperature(cfg: &Value) -> Result<f64> {
    match cfg.get("temperature_k") {
        None | Some(Value::Null) => Ok(1e-3),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::Config(format!("temperature_k must be a number, got {v}"))),
    }
}

/// Trap section; defaults are the reference operating point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrapParams {
    pub n_ions: usize,
    /// Lateral confinement, ordinary Hz.
    pub omega_xy_hz: f64,
    /// Vertical confinement, ordinary Hz.
    pub omega_z_hz: f64,
    /// Crystal rotation, ordinary Hz.
    pub omega_r_hz: f64,
    /// Ion mass, atomic mass units.
    pub mass_amu: f64,
    /// Ion charge, elementary charges.
    pub charge_e: f64,
}

impl Default for TrapParams {
    fn default() -> Self {
        TrapParams {
            n_ions: 147,
            omega_xy_hz: 200e3,
            omega_z_hz: 10e6,
            omega_r_hz: 50e3,
            mass_amu: crate::units::BE9_AMU,
            charge_e: 1.0,
        }
    }
}

impl TrapParams {
    pub fn to_trap(&self) -> Result<TrapConfig> {
        let trap = TrapConfig::new(
            self.n_ions,
            TWO_PI * self.omega_xy_hz,
            TWO_PI * self.omega_z_hz,
            TWO_PI * self.omega_r_hz,
            self.mass_amu * AMU,
            self.charge_e * QE,
        );
        trap.validate()?;
        Ok(trap)
    }
}

/// Push direction on the gate targets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DirectionSpec {
    /// Along the line joining the two target ions (in plane).
    #[default]
    PairAxis,
    /// Out of the crystal plane.
    Vertical,
    /// An explicit vector, normalized internally.
    Fixed { vector: [f64; 3] },
}

impl DirectionSpec {
    fn resolve(&self, crystal: &IonCrystal, targets: (usize, usize)) -> Result<[f64; 3]> {
        match self {
            DirectionSpec::Vertical => Ok([0.0, 0.0, 1.0]),
            DirectionSpec::Fixed { vector } => Ok(*vector),
            DirectionSpec::PairAxis => {
                let a = crystal.positions[targets.0];
                let b = crystal.positions[targets.1];
                let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if n == 0.0 {
                    return Err(Error::Precondition(format!(
                        "targets {targets:?} coincide; no pair axis"
                    )));
                }
                Ok([d[0] / n, d[1] / n, d[2] / n])
            }
        }
    }
}

/// Laser parameters for the spontaneous-scattering estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserParams {
    /// Peak resonant Rabi frequency, ordinary Hz.
    pub rabi_peak_hz: f64,
    /// Detuning from the internal transition, ordinary Hz.
    pub detuning_hz: f64,
    /// Radiative linewidth, ordinary Hz.
    pub linewidth_hz: f64,
    pub n_beams: u32,
}

impl LaserParams {
    fn to_setup(self) -> LaserSetup {
        LaserSetup {
            rabi_peak: TWO_PI * self.rabi_peak_hz,
            detuning: TWO_PI * self.detuning_hz,
            linewidth: TWO_PI * self.linewidth_hz,
            n_beams: self.n_beams,
        }
    }
}

/// Gate section; defaults run the carrier gate at the reference operating
/// point (these are literal values, not tied to the trap section).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateParams {
    /// Target ion pair; the central adjacent pair when absent.
    pub targets: Option<(usize, usize)>,
    /// Peak force per ion, newtons; when absent the gate is calibrated to
    /// an entangling phase of magnitude pi.
    pub force_peak_n: Option<f64>,
    pub direction: DirectionSpec,
    pub envelope: Envelope,
    /// Pulse length, s.
    pub tau_s: f64,
    /// Carrier modulation, ordinary Hz; 0 runs the unmodulated adiabatic
    /// push.
    pub carrier_nu_hz: f64,
    pub laser: Option<LaserParams>,
    /// ODE resolution, integration steps per fastest period.
    pub steps_per_period: f64,
    /// Minimum carrier detuning from any coupled mode, in units of the
    /// pulse bandwidth `2 pi / tau`.
    pub resonance_margin: f64,
}

impl Default for GateParams {
    fn default() -> Self {
        GateParams {
            targets: None,
            force_peak_n: None,
            direction: DirectionSpec::PairAxis,
            envelope: Envelope::Gaussian { sigma_frac: 0.13 },
            tau_s: 5e-6,
            carrier_nu_hz: 2.2e6,
            laser: None,
            steps_per_period: 50.0,
            resonance_margin: 3.0,
        }
    }
}

impl GateParams {
    fn opts(&self) -> GateOpts {
        GateOpts {
            steps_per_period: self.steps_per_period,
            resonance_margin: self.resonance_margin,
        }
    }

    fn to_pulse(&self, crystal: &IonCrystal) -> Result<GatePulse> {
        let targets = match self.targets {
            Some((i, j)) => {
                let n = crystal.positions.len();
                if i >= n || j >= n || i == j {
                    return Err(Error::Config(format!(
                        "gate targets ({i}, {j}) invalid for {n} ions"
                    )));
                }
                (i, j)
            }
            None => crystal.center_pair(),
        };
        let axis = self.direction.resolve(crystal, targets)?;
        Ok(GatePulse {
            targets,
            force_peak: self.force_peak_n.unwrap_or(1e-21),
            directions: (axis, axis),
            envelope: self.envelope,
            tau: self.tau_s,
            carrier_nu: TWO_PI * self.carrier_nu_hz,
            laser: self.laser.map(LaserParams::to_setup),
        })
    }
}

/// Temperature-sweep section. Unset gate fields fall back to the reference
/// gates derived from the trap (carrier: tapered Gaussian over one lateral
/// period at 11 omega_xy; vertical: sine-squared over `1/omega_xy`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub t_min_k: f64,
    pub t_max_k: f64,
    pub points: usize,
    pub carrier_envelope: Option<Envelope>,
    pub carrier_tau_s: Option<f64>,
    pub carrier_nu_hz: Option<f64>,
    pub vertical_envelope: Option<Envelope>,
    pub vertical_tau_s: Option<f64>,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            t_min_k: 0.0,
            t_max_k: 2e-3,
            points: 9,
            carrier_envelope: None,
            carrier_tau_s: None,
            carrier_nu_hz: None,
            vertical_envelope: None,
            vertical_tau_s: None,
        }
    }
}

impl SweepParams {
    fn to_sweep(&self, trap: &TrapConfig) -> Result<SweepConfig> {
        if self.points < 2 {
            return Err(Error::Config(format!(
                "sweep needs at least 2 temperature points, got {}",
                self.points
            )));
        }
        let span = self.t_max_k - self.t_min_k;
        if !(span.is_finite() && span > 0.0 && self.t_min_k >= 0.0) {
            return Err(Error::Config(format!(
                "sweep temperature range [{}, {}] K is not increasing and nonnegative",
                self.t_min_k, self.t_max_k
            )));
        }
        let temps = (0..self.points)
            .map(|k| self.t_min_k + span * k as f64 / (self.points - 1) as f64)
            .collect();
        let mut sweep = SweepConfig::for_trap(trap, temps);
        if let Some(env) = self.carrier_envelope {
            sweep.carrier_envelope = env;
        }
        if let Some(tau) = self.carrier_tau_s {
            sweep.carrier_tau = tau;
        }
        if let Some(nu) = self.carrier_nu_hz {
            sweep.carrier_nu = TWO_PI * nu;
        }
        if let Some(env) = self.vertical_envelope {
            sweep.vertical_envelope = env;
        }
        if let Some(tau) = self.vertical_tau_s {
            sweep.vertical_tau = tau;
        }
        Ok(sweep)
    }
}

/// Beam-sweep section for cluster-state generation. The lattice spacing
/// comes from the minimized crystal unless `spacing_m` short-circuits it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterParams {
    /// Beam waist in units of the lattice spacing.
    pub waist_sigma: f64,
    /// Crystal-frame sweep speed, m/s.
    pub velocity_m_s: f64,
    /// Sweep-line distance from the trap center, m.
    pub xi_m: f64,
    /// Beam parking radius, m.
    pub radius_m: f64,
    /// Peak resonant Rabi frequency, ordinary Hz.
    pub rabi_peak_hz: f64,
    /// Detuning, ordinary Hz.
    pub detuning_hz: f64,
    /// Carrier modulation, ordinary Hz; absent runs the unmodulated sweep.
    pub carrier_nu_hz: Option<f64>,
    /// Mode frequency entering the edge phase, ordinary Hz (vertical
    /// confinement by default).
    pub omega_hz: f64,
    /// Lattice spacing override, m; skips crystal minimization.
    pub spacing_m: Option<f64>,
    /// Trajectory table resolution.
    pub trajectory_samples: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            waist_sigma: 0.2,
            velocity_m_s: 1.0,
            xi_m: 80e-6,
            radius_m: 100e-6,
            rabi_peak_hz: 4e12,
            detuning_hz: 200e12,
            carrier_nu_hz: None,
            omega_hz: 10e6,
            spacing_m: None,
            trajectory_samples: 801,
        }
    }
}

impl ClusterParams {
    fn to_beam(&self, trap: &TrapConfig) -> BeamSweep {
        BeamSweep {
            waist_sigma: self.waist_sigma,
            velocity: self.velocity_m_s,
            xi: self.xi_m,
            radius: self.radius_m,
            omega_r: trap.omega_r,
            rabi_peak: TWO_PI * self.rabi_peak_hz,
            detuning: TWO_PI * self.detuning_hz,
            carrier_nu: self.carrier_nu_hz.map(|nu| TWO_PI * nu),
        }
    }
}

/// Photonic-link section.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkParams {
    pub eta: f64,
    pub eta_prime: f64,
    /// Radiative rate, ordinary Hz.
    pub gamma_hz: f64,
    pub p_excite: f64,
    pub target_infidelity: f64,
    pub rng_seed: u64,
    /// Monte Carlo attempts; 0 skips the stochastic path.
    pub trials: u64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            eta: 1e-3,
            eta_prime: 0.1,
            gamma_hz: 10e6,
            p_excite: 1e-4,
            target_infidelity: 1e-4,
            rng_seed: 1,
            trials: 0,
        }
    }
}

impl NetworkParams {
    fn to_protocol(self) -> ProtocolConfig {
        ProtocolConfig {
            eta: self.eta,
            eta_prime: self.eta_prime,
            gamma_rad: TWO_PI * self.gamma_hz,
            p_excite: self.p_excite,
            target_infidelity: self.target_infidelity,
            rng_seed: self.rng_seed,
        }
    }
}

// ---------------------------------------------------------------------------
// Artifacts. Each JSON file holds exactly one of these records.

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrystalArtifact {
    pub trap: TrapParams,
    pub crystal: IonCrystal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhononArtifact {
    pub trap: TrapParams,
    pub temperature_k: f64,
    /// Mode frequencies, rad/s, ascending.
    pub frequencies_rad_s: Vec<f64>,
    pub polarization: Vec<Polarization>,
    /// Thermal occupations at `temperature_k`; `null` marks symmetry zero
    /// modes, whose occupation diverges.
    pub occupations: Vec<Option<f64>>,
    /// Indices of the symmetry zero modes.
    pub zero_modes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateArtifact {
    pub trap: TrapParams,
    pub gate: GateParams,
    pub temperature_k: f64,
    pub targets: (usize, usize),
    /// Peak force actually applied, N.
    pub force_peak_n: f64,
    /// Force reaching an entangling phase of magnitude pi, N.
    pub force_for_pi_n: f64,
    /// Entangling phase coefficient of `z z / 4` between the targets, rad.
    pub two_body_phase_rad: f64,
    /// Same phase from the closed-form pulse-shape integral, rad.
    pub two_body_phase_closed_form_rad: f64,
    /// Worst-case state fidelity at `temperature_k`.
    pub fidelity: f64,
    /// Motional quanta left behind, summed over modes and averaged over
    /// qubit configurations.
    pub heating_quanta: f64,
    pub residual_beta_max: f64,
    pub transient_beta_max: f64,
    /// Photon-scattering error per gate, when laser parameters were given.
    pub spontaneous_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepArtifact {
    pub trap: TrapParams,
    /// Carrier reference gate actually used.
    pub carrier: (Envelope, f64, f64),
    /// Vertical reference gate actually used: envelope and tau (s).
    pub vertical: (Envelope, f64),
    pub points: Vec<SweepPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterArtifact {
    pub trap: TrapParams,
    pub params: ClusterParams,
    /// Lattice spacing used, m.
    pub spacing_m: f64,
    /// Parallel-edge suppression factor.
    pub epsilon: f64,
    /// Phase on the two inclined cell edges, rad.
    pub inclined_phase_rad: f64,
    /// Phase on the sweep-parallel cell edge, rad.
    pub parallel_phase_rad: f64,
    /// The three-ion cell (0, 1 parallel pair; 2 apex).
    pub cell: GraphWeights,
    /// Sweep half-angle, rad.
    pub chi_rad: f64,
    /// Crystal-frame speed realized by the trajectory, m/s.
    pub geometric_speed_m_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkArtifact {
    pub params: NetworkParams,
    pub two_click: ProtocolStats,
    /// Two-click with `eta' = eta`: no cavity assistance.
    pub direct: ProtocolStats,
    pub one_click: ProtocolStats,
    pub plan: SchemePlan,
    pub monte_carlo: Option<ProtocolStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Figure2Summary {
    pub trap: TrapParams,
    /// Envelope, tau (s) and carrier frequency (rad/s) shared by both
    /// calibrated gates in the force comparison.
    pub matched_pulse: (Envelope, f64, f64),
    pub force_for_pi_carrier_n: f64,
    pub force_for_pi_vertical_n: f64,
    /// Vertical-to-carrier force ratio at matched pulse shape.
    pub force_ratio: f64,
    /// `(omega_z / nu)^2`, the leading-order expectation for the ratio.
    pub force_ratio_leading_order: f64,
    /// Top of the lateral phonon band, rad/s.
    pub lateral_band_top_rad_s: f64,
    /// Bottom of the vertical phonon band, rad/s.
    pub vertical_band_bottom_rad_s: f64,
    /// Infidelity the pi-calibrated carrier gate reaches at
    /// `temperature_k`.
    pub carrier_infidelity: f64,
    pub carrier_heating_quanta: f64,
    pub temperature_k: f64,
}

// ---------------------------------------------------------------------------
// Command bodies.

fn artifact_list(paths: &[&Path]) -> Value {
    Value::Array(
        paths
            .iter()
            .map(|p| Value::String(p.display().to_string()))
            .collect(),
    )
}

fn solve_crystal(cfg: &Value) -> Result<(TrapParams, TrapConfig, IonCrystal)> {
    let params: TrapParams = section(cfg, "trap")?;
    let trap = params.to_trap()?;
    let crystal = minimize(&trap, None, &MinimizeOpts::default())?;
    Ok((params, trap, crystal))
}

fn run_crystal(cfg: &Value, out: &Path) -> Result<Value> {
    let (params, _trap, crystal) = solve_crystal(cfg)?;
    let json_path = out.join("crystal.json");
    let csv_path = out.join("positions.csv");
    let rows: Vec<Vec<f64>> = crystal
        .positions
        .iter()
        .enumerate()
        .map(|(i, p)| vec![i as f64, p[0], p[1], p[2]])
        .collect();
    write_csv(&csv_path, "positions", &["ion", "x_m", "y_m", "z_m"], &rows)?;
    write_json(
        &json_path,
        &CrystalArtifact {
            trap: params,
            crystal: crystal.clone(),
        },
    )?;
    Ok(json!({
        "command": "crystal",
        "n_ions": params.n_ions,
        "spacing_m": crystal.spacing,
        "energy_j": crystal.energy,
        "iterations": crystal.iterations,
        "artifacts": artifact_list(&[&json_path, &csv_path]),
    }))
}

fn run_phonons(cfg: &Value, out: &Path) -> Result<Value> {
    let (params, trap, crystal) = solve_crystal(cfg)?;
    let temperature_k = temperature(cfg)?;
    let modes = phonons::modes_of(&trap, &crystal)?;
    let thermal = modes.thermal_occupation(&trap, temperature_k)?;
    let rows: Vec<Vec<f64>> = modes
        .frequencies
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            let pol = match modes.polarization[k] {
                Polarization::Lateral => 0.0,
                Polarization::Vertical => 1.0,
                Polarization::Mixed => 2.0,
            };
            vec![k as f64, w, w / trap.omega_xy, pol, thermal.occupations[k]]
        })
        .collect();
    let csv_path = out.join("spectrum.csv");
    write_csv(
        &csv_path,
        "spectrum",
        &[
            "mode",
            "omega_rad_s",
            "omega_over_omega_xy",
            "polarization",
            "nbar",
        ],
        &rows,
    )?;
    let json_path = out.join("phonons.json");
    let zero_modes: Vec<usize> = modes
        .zero_mode
        .iter()
        .enumerate()
        .filter_map(|(k, &z)| z.then_some(k))
        .collect();
    write_json(
        &json_path,
        &PhononArtifact {
            trap: params,
            temperature_k,
            frequencies_rad_s: modes.frequencies.clone(),
            polarization: modes.polarization.clone(),
            occupations: thermal
                .occupations
                .iter()
                .map(|&n| n.is_finite().then_some(n))
                .collect(),
            zero_modes: zero_modes.clone(),
        },
    )?;
    Ok(json!({
        "command": "phonons",
        "n_modes": modes.frequencies.len(),
        "zero_modes": zero_modes.len(),
        "max_omega_rad_s": modes.frequencies.last().copied().unwrap_or(0.0),
        "artifacts": artifact_list(&[&json_path, &csv_path]),
    }))
}

fn run_gate_cmd(cfg: &Value, out: &Path) -> Result<Value> {
    let (params, trap, crystal) = solve_crystal(cfg)?;
    let gate: GateParams = section(cfg, "gate")?;
    let temperature_k = temperature(cfg)?;
    let modes = phonons::modes_of(&trap, &crystal)?;
    let thermal = modes.thermal_occupation(&trap, temperature_k)?;
    let pulse = gate.to_pulse(&crystal)?;
    let mut result = run_gate(&trap, &modes, &pulse, Some(&thermal), &gate.opts())?;
    if gate.force_peak_n.is_none() {
        result = result.with_force(result.force_for_pi)?;
    }
    let artifact = gate_artifact(&params, &gate, temperature_k, pulse.targets, &result);
    let json_path = out.join("gate.json");
    write_json(&json_path, &artifact)?;
    let csv_path = out.join("gate_modes.csv");
    let rows: Vec<Vec<f64>> = result
        .excitations
        .iter()
        .map(|ex| {
            vec![
                ex.mode as f64,
                ex.omega,
                ex.nbar,
                ex.betas[0].norm(),
                ex.betas[1].norm(),
                ex.betas[2].norm(),
                ex.betas[3].norm(),
            ]
        })
        .collect();
    write_csv(
        &csv_path,
        "gate-modes",
        &[
            "mode",
            "omega_rad_s",
            "nbar",
            "residual_beta_pp",
            "residual_beta_pm",
            "residual_beta_mp",
            "residual_beta_mm",
        ],
        &rows,
    )?;
    Ok(json!({
        "command": "gate",
        "targets": artifact.targets,
        "fidelity": artifact.fidelity,
        "two_body_phase_rad": artifact.two_body_phase_rad,
        "force_peak_n": artifact.force_peak_n,
        "force_for_pi_n": artifact.force_for_pi_n,
        "heating_quanta": artifact.heating_quanta,
        "artifacts": artifact_list(&[&json_path, &csv_path]),
    }))
}

fn gate_artifact(
    params: &TrapParams,
    gate: &GateParams,
    temperature_k: f64,
    targets: (usize, usize),
    result: &GateResult,
) -> GateArtifact {
    GateArtifact {
        trap: *params,
        gate: gate.clone(),
        temperature_k,
        targets,
        force_peak_n: result.force_peak,
        force_for_pi_n: result.force_for_pi,
        two_body_phase_rad: result.two_body_phase,
        two_body_phase_closed_form_rad: result.two_body_phase_closed_form,
        fidelity: result.fidelity,
        heating_quanta: result.heating,
        residual_beta_max: result.residual_beta_max,
        transient_beta_max: result.transient_beta_max,
        spontaneous_error: result.spontaneous_error,
    }
}

fn run_sweep(cfg: &Value, out: &Path) -> Result<Value> {
    let (params, trap, crystal) = solve_crystal(cfg)?;
    let sweep_params: SweepParams = section(cfg, "sweep")?;
    let sweep = sweep_params.to_sweep(&trap)?;
    let modes = phonons::modes_of(&trap, &crystal)?;
    let points = temperature_sweep(&trap, &crystal, &modes, &sweep, &GateOpts::default())?;
    let csv_path = out.join("sweep.csv");
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|p| vec![p.temperature, p.fidelity_carrier, p.fidelity_vertical])
        .collect();
    write_csv(
        &csv_path,
        "fidelity-vs-temperature",
        &["temperature_k", "fidelity_carrier", "fidelity_vertical"],
        &rows,
    )?;
    let json_path = out.join("sweep.json");
    write_json(
        &json_path,
        &SweepArtifact {
            trap: params,
            carrier: (sweep.carrier_envelope, sweep.carrier_tau, sweep.carrier_nu),
            vertical: (sweep.vertical_envelope, sweep.vertical_tau),
            points: points.clone(),
        },
    )?;
    let first = points.first().expect("at least two sweep points");
    let last = points.last().expect("at least two sweep points");
    Ok(json!({
        "command": "sweep-temperature",
        "points": points.len(),
        "carrier_fidelity_range": [first.fidelity_carrier, last.fidelity_carrier],
        "vertical_fidelity_range": [first.fidelity_vertical, last.fidelity_vertical],
        "artifacts": artifact_list(&[&json_path, &csv_path]),
    }))
}

fn run_cluster(cfg: &Value, out: &Path) -> Result<Value> {
    let params: TrapParams = section(cfg, "trap")?;
    let trap = params.to_trap()?;
    let cluster_params: ClusterParams = section(cfg, "cluster")?;
    let spacing = match cluster_params.spacing_m {
        Some(d) if d.is_finite() && d > 0.0 => d,
        Some(d) => {
            return Err(Error::Config(format!(
                "cluster.spacing_m must be positive, got {d}"
            )))
        }
        None => minimize(&trap, None, &MinimizeOpts::default())?.spacing,
    };
    let beam = cluster_params.to_beam(&trap);
    beam.validate()?;
    let omega = TWO_PI * cluster_params.omega_hz;
    let cell = cluster::cell_weights(omega, &beam, &trap, spacing)?;
    let inclined = cluster::edge_phase(omega, &beam, &trap, spacing);
    let epsilon = cluster::epsilon(beam.waist_sigma);
    let n = cluster_params.trajectory_samples.max(2);
    let window = beam.window();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let t = -1.1 * window + 2.2 * window * k as f64 / (n - 1) as f64;
            let (dx, dy) = cluster::sweep_trajectory(&beam, t);
            let lab = cluster::lab_position(&beam, t);
            let rot = cluster::rotating_position(&beam, t);
            vec![t, dx, dy, lab[0], lab[1], rot[0], rot[1]]
        })
        .collect();
    let csv_path = out.join("trajectory.csv");
    write_csv(
        &csv_path,
        "sweep-trajectory",
        &[
            "t_s",
            "dx_m",
            "dy_m",
            "lab_x_m",
            "lab_y_m",
            "crystal_x_m",
            "crystal_y_m",
        ],
        &rows,
    )?;
    let json_path = out.join("cluster.json");
    let artifact = ClusterArtifact {
        trap: params,
        params: cluster_params,
        spacing_m: spacing,
        epsilon,
        inclined_phase_rad: inclined,
        parallel_phase_rad: epsilon * inclined,
        cell,
        chi_rad: beam.chi(),
        geometric_speed_m_s: beam.geometric_speed(),
    };
    write_json(&json_path, &artifact)?;
    Ok(json!({
        "command": "cluster",
        "epsilon": artifact.epsilon,
        "inclined_phase_rad": artifact.inclined_phase_rad,
        "parallel_phase_rad": artifact.parallel_phase_rad,
        "chi_rad": artifact.chi_rad,
        "artifacts": artifact_list(&[&json_path, &csv_path]),
    }))
}

fn run_network(cfg: &Value, out: &Path) -> Result<Value> {
    let params: NetworkParams = section(cfg, "network")?;
    let protocol = params.to_protocol();
    let two_click = two_click_analytic(&protocol)?;
    let direct = two_click_analytic(&ProtocolConfig {
        eta_prime: protocol.eta,
        ..protocol
    })?;
    let one_click = one_click_comparison(&protocol)?;
    let plan = time_to_target(&protocol)?;
    let monte_carlo = if params.trials > 0 {
        Some(two_click_monte_carlo(&protocol, params.trials)?)
    } else {
        None
    };
    let artifact = NetworkArtifact {
        params,
        two_click,
        direct,
        one_click,
        plan,
        monte_carlo,
    };
    let json_path = out.join("network.json");
    write_json(&json_path, &artifact)?;
    Ok(json!({
        "command": "network",
        "two_click_time_s": two_click.expected_time,
        "direct_time_s": direct.expected_time,
        "one_click_time_s": one_click.expected_time,
        "chosen_scheme": plan.scheme,
        "monte_carlo_rate": monte_carlo.map(|m| m.success_probability),
        "artifacts": artifact_list(&[&json_path]),
    }))
}

fn run_figure2(cfg: &Value, out: &Path) -> Result<Value> {
    let (params, trap, crystal) = solve_crystal(cfg)?;
    let gate: GateParams = section(cfg, "gate")?;
    let sweep_params: SweepParams = section(cfg, "sweep")?;
    let temperature_k = temperature(cfg)?;
    if gate.carrier_nu_hz <= 0.0 {
        return Err(Error::Config(
            "figure2 compares a carrier gate against the vertical push; \
             set gate.carrier_nu_hz > 0"
                .into(),
        ));
    }
    let modes = phonons::modes_of(&trap, &crystal)?;

    // Spectrum table.
    let spectrum_path = out.join("spectrum.csv");
    let rows: Vec<Vec<f64>> = modes
        .frequencies
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            let pol = match modes.polarization[k] {
                Polarization::Lateral => 0.0,
                Polarization::Vertical => 1.0,
                Polarization::Mixed => 2.0,
            };
            vec![k as f64, w, w / trap.omega_xy, pol]
        })
        .collect();
    write_csv(
        &spectrum_path,
        "spectrum",
        &["mode", "omega_rad_s", "omega_over_omega_xy", "polarization"],
        &rows,
    )?;
    let (lateral_top, vertical_bottom) = band_edges(&modes);

    // Matched-shape force comparison: same envelope and tau for both gates,
    // only then does the force ratio reduce to (omega_z/nu)^2 at leading
    // order.
    let carrier_pulse = gate.to_pulse(&crystal)?;
    let vertical_pulse = GatePulse {
        directions: ([0.0, 0.0, 1.0], [0.0, 0.0, 1.0]),
        carrier_nu: 0.0,
        ..carrier_pulse.clone()
    };
    let thermal = modes.thermal_occupation(&trap, temperature_k)?;
    let opts = gate.opts();
    let carrier = run_gate(&trap, &modes, &carrier_pulse, Some(&thermal), &opts)?;
    let carrier = carrier.with_force(carrier.force_for_pi)?;
    let vertical = run_gate(&trap, &modes, &vertical_pulse, Some(&thermal), &opts)?;
    let vertical = vertical.with_force(vertical.force_for_pi)?;
    let force_ratio = vertical.force_peak / carrier.force_peak;

    // Force profiles of both calibrated gates.
    let profile_path = out.join("force_profile.csv");
    let samples = 2001usize;
    let rows: Vec<Vec<f64>> = (0..samples)
        .map(|k| {
            let t = carrier_pulse.tau * k as f64 / (samples - 1) as f64;
            let env = carrier_pulse.envelope.value(t, carrier_pulse.tau);
            vec![
                t,
                carrier.force_peak * env * (carrier_pulse.carrier_nu * t).cos(),
                vertical.force_peak * env,
            ]
        })
        .collect();
    write_csv(
        &profile_path,
        "force-profile",
        &["t_s", "force_carrier_n", "force_vertical_n"],
        &rows,
    )?;

    // Per-gate reference shapes for the temperature curves.
    let sweep = sweep_params.to_sweep(&trap)?;
    let points = temperature_sweep(&trap, &crystal, &modes, &sweep, &opts)?;
    let fidelity_path = out.join("fidelity_vs_t.csv");
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|p| vec![p.temperature, p.fidelity_carrier, p.fidelity_vertical])
        .collect();
    write_csv(
        &fidelity_path,
        "fidelity-vs-temperature",
        &["temperature_k", "fidelity_carrier", "fidelity_vertical"],
        &rows,
    )?;

    let summary = Figure2Summary {
        trap: params,
        matched_pulse: (
            carrier_pulse.envelope,
            carrier_pulse.tau,
            carrier_pulse.carrier_nu,
        ),
        force_for_pi_carrier_n: carrier.force_peak,
        force_for_pi_vertical_n: vertical.force_peak,
        force_ratio,
        force_ratio_leading_order: (trap.omega_z / carrier_pulse.carrier_nu).powi(2),
        lateral_band_top_rad_s: lateral_top,
        vertical_band_bottom_rad_s: vertical_bottom,
        carrier_infidelity: 1.0 - carrier.fidelity,
        carrier_heating_quanta: carrier.heating,
        temperature_k,
    };
    let summary_path = out.join("summary.json");
    write_json(&summary_path, &summary)?;
    Ok(json!({
        "command": "figure2",
        "force_ratio": force_ratio,
        "carrier_infidelity": summary.carrier_infidelity,
        "lateral_band_top_rad_s": lateral_top,
        "vertical_band_bottom_rad_s": vertical_bottom,
        "artifacts": artifact_list(&[
            &summary_path,
            &spectrum_path,
            &profile_path,
            &fidelity_path,
        ]),
    }))
}

/// Highest lateral and lowest vertical mode frequency, rad/s.
fn band_edges(modes: &PhononModes) -> (f64, f64) {
    let mut lateral_top = 0.0f64;
    let mut vertical_bottom = f64::INFINITY;
    for (k, &w) in modes.frequencies.iter().enumerate() {
        match modes.polarization[k] {
            Polarization::Vertical => vertical_bottom = vertical_bottom.min(w),
            _ => lateral_top = lateral_top.max(w),
        }
    }
    (lateral_top, vertical_bottom)
}
