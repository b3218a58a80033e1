//! End-to-end tests of the `wigner-push` binary: artifact round-trips,
//! config-file/override precedence, and the exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::tempdir;

use wigner_push::cli::{CrystalArtifact, Figure2Summary, NetworkArtifact, PhononArtifact};
use wigner_push::io::read_csv;

fn run_cli(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wigner-push"))
        .arg("--out")
        .arg(out_dir)
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn stdout_json(output: &Output) -> Value {
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout should be one JSON summary")
}

fn stderr_json(output: &Output) -> Value {
    serde_json::from_slice(&output.stderr).expect("stderr should be one JSON error record")
}

#[test]
fn crystal_artifacts_round_trip_through_json_and_csv() {
    let dir = tempdir().unwrap();
    let out = run_cli(dir.path(), &["--set", "trap.n_ions=7", "crystal"]);
    let summary = stdout_json(&out);
    assert_eq!(summary["command"], "crystal");
    assert_eq!(summary["n_ions"], 7);

    let text = std::fs::read_to_string(dir.path().join("crystal.json")).unwrap();
    let artifact: CrystalArtifact = serde_json::from_str(&text).unwrap();
    assert_eq!(artifact.trap.n_ions, 7);
    assert_eq!(artifact.crystal.positions.len(), 7);
    // Serializing the parsed artifact reproduces the file byte for byte:
    // every float survives the JSON round trip.
    let reserialized = format!("{}\n", serde_json::to_string_pretty(&artifact).unwrap());
    assert_eq!(text, reserialized);

    let (schema, rows) = read_csv(&dir.path().join("positions.csv")).unwrap();
    assert_eq!(schema, "positions");
    assert_eq!(rows.len(), 7);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], i as f64);
        assert_eq!(row[1..4], artifact.crystal.positions[i]);
    }
}

#[test]
fn phonon_artifacts_expose_spectrum_and_occupations() {
    let dir = tempdir().unwrap();
    let out = run_cli(dir.path(), &["--set", "trap.n_ions=7", "phonons"]);
    let summary = stdout_json(&out);
    assert_eq!(summary["n_modes"], 21);

    let text = std::fs::read_to_string(dir.path().join("phonons.json")).unwrap();
    let artifact: PhononArtifact = serde_json::from_str(&text).unwrap();
    assert_eq!(artifact.frequencies_rad_s.len(), 21);
    assert_eq!(artifact.occupations.len(), 21);
    for (k, occ) in artifact.occupations.iter().enumerate() {
        if artifact.zero_modes.contains(&k) {
            assert_eq!(*occ, None, "zero mode {k} must serialize as null");
        } else {
            assert!(occ.unwrap() >= 0.0);
        }
    }

    let (schema, rows) = read_csv(&dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(schema, "spectrum");
    assert_eq!(rows.len(), 21);
    // Frequencies ascend and match the JSON record.
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[1], artifact.frequencies_rad_s[k]);
        if k > 0 {
            assert!(row[1] >= rows[k - 1][1]);
        }
    }
}

#[test]
fn set_overrides_win_over_the_config_file() {
    let dir = tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{"trap": {"n_ions": 7, "omega_xy_hz": 100e3}}"#).unwrap();
    let out = run_cli(
        dir.path(),
        &[
            "--config",
            config.to_str().unwrap(),
            "--set",
            "trap.omega_xy_hz=200e3",
            "crystal",
        ],
    );
    stdout_json(&out);
    let text = std::fs::read_to_string(dir.path().join("crystal.json")).unwrap();
    let artifact: CrystalArtifact = serde_json::from_str(&text).unwrap();
    // File value survives where not overridden; override wins where given.
    assert_eq!(artifact.trap.n_ions, 7);
    assert_eq!(artifact.trap.omega_xy_hz, 200e3);
}

#[test]
fn config_errors_exit_2_with_a_structured_report() {
    let dir = tempdir().unwrap();
    let out = run_cli(dir.path(), &["--set", "trap.n_ions=0", "crystal"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "config");

    // Unknown key inside a recognized section.
    let out = run_cli(dir.path(), &["--set", "trap.n_ion=7", "crystal"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "config");

    // Malformed override.
    let out = run_cli(dir.path(), &["--set", "trap.n_ions", "crystal"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "config");
}

#[test]
fn resonant_carrier_exits_3_as_a_precondition_failure() {
    let dir = tempdir().unwrap();
    let out = run_cli(
        dir.path(),
        &[
            "--set",
            "trap.n_ions=7",
            "--set",
            "gate.carrier_nu_hz=200e3",
            "gate",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "precondition");
}

#[test]
fn figure2_bundle_reproduces_the_force_ratio_on_a_reduced_crystal() {
    let dir = tempdir().unwrap();
    let out = run_cli(
        dir.path(),
        &[
            "--set",
            "trap.n_ions=19",
            "--set",
            "sweep.points=3",
            "figure2",
        ],
    );
    let summary = stdout_json(&out);
    let ratio = summary["force_ratio"].as_f64().unwrap();
    assert!((16.0..=25.0).contains(&ratio), "force ratio {ratio}");

    let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let artifact: Figure2Summary = serde_json::from_str(&text).unwrap();
    assert_eq!(artifact.force_ratio, ratio);
    let leading = artifact.force_ratio_leading_order;
    assert!(
        (ratio - leading).abs() <= 0.2 * leading,
        "ratio {ratio} vs leading order {leading}"
    );
    // Vertical gates need much larger force: the gap between bands shields
    // the carrier gate.
    assert!(artifact.force_for_pi_vertical_n > artifact.force_for_pi_carrier_n);
    assert!(artifact.lateral_band_top_rad_s < artifact.vertical_band_bottom_rad_s);

    let (schema, rows) = read_csv(&dir.path().join("fidelity_vs_t.csv")).unwrap();
    assert_eq!(schema, "fidelity-vs-temperature");
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert!(
            row[1] >= row[2],
            "carrier must not lose to vertical: {row:?}"
        );
    }
    let (schema, profile) = read_csv(&dir.path().join("force_profile.csv")).unwrap();
    assert_eq!(schema, "force-profile");
    // Both profiles vanish at the window edges (up to rounding in sin(pi)).
    let scale = artifact.force_for_pi_vertical_n;
    assert!(profile.first().unwrap()[1].abs() < 1e-15 * scale);
    assert!(profile.last().unwrap()[2].abs() < 1e-15 * scale);
}

#[test]
fn network_monte_carlo_is_reported_when_trials_are_requested() {
    let dir = tempdir().unwrap();
    let out = run_cli(
        dir.path(),
        &[
            "--set",
            "network.eta=0.5",
            "--set",
            "network.eta_prime=0.5",
            "--set",
            "network.trials=65536",
            "network",
        ],
    );
    let summary = stdout_json(&out);
    let rate = summary["monte_carlo_rate"].as_f64().unwrap();
    // eta eta' = 0.25; 65536 trials put the 5 sigma band at +-0.0085.
    assert!((rate - 0.25).abs() < 0.01, "success rate {rate}");

    let text = std::fs::read_to_string(dir.path().join("network.json")).unwrap();
    let artifact: NetworkArtifact = serde_json::from_str(&text).unwrap();
    let mc = artifact.monte_carlo.unwrap();
    assert_eq!(mc.success_probability, rate);
    assert_eq!(mc.n_trials, 65536);
    assert_eq!(artifact.two_click.fidelity, 1.0);
}
