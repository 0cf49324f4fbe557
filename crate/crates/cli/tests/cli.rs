//! End-to-end tests of the binary: exit codes, file shapes, determinism,
//! override precedence, and agreement with the library the outputs come from.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use phonon_sim::dynamics::{iterate, StepParams};
use phonon_sim::fock::{thermal_distribution, TruncationPolicy};
use phonon_sim::tomography::total_variation;
use phonon_sim::PhononDistribution;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_phonon-sim"));
    // Isolate every invocation from ambient overrides.
    cmd.env_remove("PHONON_SIM_OUT");
    cmd.env_remove("PHONON_SIM_SEED");
    cmd
}

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Data rows of a CSV file: comment and header lines stripped, fields split.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip_while(|l| l.starts_with('#'))
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn simulate_is_deterministic_and_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = write_config(
        dir.path(),
        r#"
repetitions = 20

[initial]
type = "thermal"
n_bar = 1.19
n_max = 60

[step]
pulse_area_pi = 1.0
contrast = 0.97
eta_eff = 0.17
"#,
    );
    let args = [
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "simulate",
    ];
    assert_success(&run(&args, &[]));
    let acc_first = read(&out.join("accumulation.csv"));
    let sum_first = read(&out.join("summary.csv"));

    // Rerunning the identical configuration reproduces every byte.
    assert_success(&run(&args, &[]));
    assert_eq!(acc_first, read(&out.join("accumulation.csv")));
    assert_eq!(sum_first, read(&out.join("summary.csv")));

    // The k = 20 rows equal the library's state bit for bit.
    let d0 = thermal_distribution(1.19, 60).unwrap();
    let params = StepParams::new(PI, 0.97, 0.17).unwrap();
    let trace = iterate(&d0, &params, 20, &TruncationPolicy::default()).unwrap();
    let expect = trace.final_state();
    let rows: Vec<(usize, f64)> = csv_rows(&acc_first)
        .iter()
        .filter(|r| r[0] == "20")
        .map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap()))
        .collect();
    assert_eq!(rows.len(), expect.len());
    for (n, p) in rows {
        assert_eq!(
            p.to_bits(),
            expect.p(n).to_bits(),
            "P({n}) differs from the library"
        );
    }

    // Summary: one comment, one header, 21 rows (k = 0 through 20).
    assert_eq!(sum_first.lines().count(), 23);
    let header = sum_first.lines().nth(1).unwrap();
    assert!(header.starts_with("k,n_bar,fano,w00,ep,qng0_violated"), "{header}");
}

#[test]
fn simulate_json_format_carries_config_and_states() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_success(&run(
        &["--out", out.to_str().unwrap(), "--format", "json", "simulate"],
        &[],
    ));
    let summary: serde_json::Value =
        serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    assert_eq!(summary["config"]["command"], "simulate");
    assert_eq!(summary["rows"].as_array().unwrap().len(), 21);
    assert_eq!(summary["rows"][0]["k"], 0);

    let acc: serde_json::Value =
        serde_json::from_str(&read(&out.join("accumulation.json"))).unwrap();
    assert_eq!(acc["states"].as_array().unwrap().len(), 21);
    assert!(acc["config"]["pulse_area"].is_number());
}

#[test]
fn asymptote_matches_closed_form_band_sums() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");

    // Default pulse (pi) on the default thermal state.
    assert_success(&run(&["--out", out.to_str().unwrap(), "asymptote"], &[]));
    let report: serde_json::Value =
        serde_json::from_str(&read(&out.join("asymptote.json"))).unwrap();
    assert_eq!(report["fixed_points"], serde_json::json!([3, 15, 35]));
    let p3 = report["P_infinity"][3].as_f64().unwrap();
    assert!((p3 - 0.9128210997380758).abs() < 1e-12, "P_inf(3) = {p3}");
    assert!(out.join("p_infinity.csv").exists());

    // Area 2 pi / sqrt(21) parks a mean-8 thermal state on n = 20 with
    // probability 1 - (8/9)^21.
    let area = 2.0 * PI / 21f64.sqrt();
    let cfg = write_config(
        dir.path(),
        &format!(
            "[initial]\ntype = \"thermal\"\nn_bar = 8.0\nn_max = 200\n\n\
             [step]\npulse_area = {area:.17e}\n"
        ),
    );
    let out2 = dir.path().join("run2");
    assert_success(&run(
        &[
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out2.to_str().unwrap(),
            "asymptote",
        ],
        &[],
    ));
    let report: serde_json::Value =
        serde_json::from_str(&read(&out2.join("asymptote.json"))).unwrap();
    let points = report["fixed_points"].as_array().unwrap();
    assert_eq!(points[0], 20);
    assert_eq!(points[1], 83);
    let p20 = report["P_infinity"][20].as_f64().unwrap();
    let closed = 1.0 - (8.0f64 / 9.0).powi(21);
    assert!((p20 - closed).abs() < 1e-12, "P_inf(20) = {p20} vs {closed}");
}

#[test]
fn noiseless_ground_state_fit_recovers_the_vacuum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = write_config(
        dir.path(),
        r#"
[initial]
type = "fock"
n = 0
n_max = 3

[tomography]
noisy = false
points = 200
flops = 4.0
fit_n_max = 3
resamples = 8
"#,
    );
    let base = [
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    assert_success(&run(&[&base[..], &["tomo", "synth"]].concat(), &[]));
    let trace = out.join("rabi_trace.csv");
    assert_success(&run(
        &[&base[..], &["tomo", "fit", trace.to_str().unwrap()]].concat(),
        &[],
    ));
    let fit: serde_json::Value =
        serde_json::from_str(&read(&out.join("fit_result.json"))).unwrap();
    let p0 = fit["P"][0].as_f64().unwrap();
    assert!(p0 >= 0.999, "noiseless vacuum fit gave P(0) = {p0}");
}

#[test]
fn noisy_thermal_roundtrip_stays_within_tv_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = write_config(
        dir.path(),
        r#"
[initial]
type = "thermal"
n_bar = 1.19
n_max = 60

[tomography]
shots = 100
noisy = true
seed = 7
fit_n_max = 7
resamples = 50
"#,
    );
    let base = [
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    assert_success(&run(&[&base[..], &["tomo", "synth"]].concat(), &[]));
    let trace = out.join("rabi_trace.csv");
    assert_success(&run(
        &[&base[..], &["tomo", "fit", trace.to_str().unwrap()]].concat(),
        &[],
    ));
    let fit: serde_json::Value =
        serde_json::from_str(&read(&out.join("fit_result.json"))).unwrap();
    let probs: Vec<f64> = fit["P"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let fitted = PhononDistribution::from_probs(probs).unwrap();
    let truth = thermal_distribution(1.19, 7).unwrap().renormalize().unwrap();
    let tv = total_variation(&fitted, &truth);
    assert!(tv < 0.05, "100-shot reconstruction off by TV = {tv}");
}

#[test]
fn metrics_reports_both_klyshko_sign_conventions() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("fock1.csv");
    std::fs::write(&input, "n,P\n0,0.0\n1,1.0\n2,0.0\n").unwrap();
    let out = dir.path().join("run");

    assert_success(&run(
        &[
            "--out",
            out.to_str().unwrap(),
            "metrics",
            input.to_str().unwrap(),
        ],
        &[],
    ));
    let text = read(&out.join("witness.csv"));
    let rows = csv_rows(&text);
    let find = |metric: &str, index: &str| -> f64 {
        rows.iter()
            .find(|r| r[0] == metric && r[1] == index)
            .unwrap_or_else(|| panic!("missing {metric}[{index}]"))[2]
            .parse()
            .unwrap()
    };
    let k1 = find("klyshko", "1");
    assert_eq!(k1, 1.0, "K_1 of |1> is the level itself");
    assert_eq!(find("klyshko_neg", "1"), -k1);

    // The same report as JSON.
    assert_success(&run(
        &[
            "--out",
            out.to_str().unwrap(),
            "--format",
            "json",
            "metrics",
            input.to_str().unwrap(),
        ],
        &[],
    ));
    let report: serde_json::Value =
        serde_json::from_str(&read(&out.join("witness.json"))).unwrap();
    // Only level 1 lies inside the 3-entry input; it serializes as [n, K].
    assert_eq!(report["klyshko"][0][0], 1);
    assert_eq!(report["klyshko"][0][1].as_f64().unwrap(), 1.0);
    assert_eq!(report["config"]["command"], "metrics");
}

#[test]
fn caller_errors_exit_2_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");

    // Missing input file.
    let gone = dir.path().join("gone.csv");
    let res = run(
        &["--out", out.to_str().unwrap(), "metrics", gone.to_str().unwrap()],
        &[],
    );
    assert_eq!(exit_code(&res), 2, "{}", stderr(&res));

    // Unknown configuration field, named in the diagnostic.
    let cfg = write_config(dir.path(), "[step]\ncontrst = 0.9\n");
    let res = run(&["--config", cfg.to_str().unwrap(), "simulate"], &[]);
    assert_eq!(exit_code(&res), 2);
    assert!(stderr(&res).contains("contrst"), "{}", stderr(&res));

    // Out-of-range parameter, named with its section.
    let cfg = write_config(dir.path(), "[step]\neta_eff = 0.9\n");
    let res = run(&["--config", cfg.to_str().unwrap(), "simulate"], &[]);
    assert_eq!(exit_code(&res), 2);
    assert!(stderr(&res).contains("step:"), "{}", stderr(&res));

    // Malformed trace: wrong header, then an unparseable field.
    let bad_header = dir.path().join("bad_header.csv");
    std::fs::write(&bad_header, "time,p,shots\n0.0,0.5,100\n").unwrap();
    let res = run(
        &[
            "--out",
            out.to_str().unwrap(),
            "tomo",
            "fit",
            bad_header.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(exit_code(&res), 2);
    assert!(stderr(&res).contains("expected header"), "{}", stderr(&res));

    let bad_field = dir.path().join("bad_field.csv");
    std::fs::write(&bad_field, "t_us,p,shots\n0.0,abc,100\n").unwrap();
    let res = run(
        &[
            "--out",
            out.to_str().unwrap(),
            "tomo",
            "fit",
            bad_field.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(exit_code(&res), 2);
    let msg = stderr(&res);
    assert!(msg.contains("row 1") && msg.contains("'p'"), "{msg}");

    // No subcommand is a usage error.
    let res = run(&[], &[]);
    assert_eq!(exit_code(&res), 2);
}

#[test]
fn seed_precedence_is_flag_over_env_over_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = write_config(
        dir.path(),
        "[initial]\ntype = \"thermal\"\nn_bar = 1.19\nn_max = 60\n\n[tomography]\nseed = 3\n",
    );
    let base = [
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "tomo",
        "synth",
    ];
    let trace = out.join("rabi_trace.csv");

    assert_success(&run(&base, &[]));
    let from_file = read(&trace);

    assert_success(&run(&base, &[("PHONON_SIM_SEED", "4")]));
    let from_env = read(&trace);
    assert_ne!(from_file, from_env, "environment seed must override the file");

    assert_success(&run(
        &[&base[..], &["--seed", "3"]].concat(),
        &[("PHONON_SIM_SEED", "4")],
    ));
    assert_eq!(
        read(&trace),
        from_file,
        "flag seed must override the environment"
    );

    // An unparseable environment seed is a configuration error.
    let res = run(&base, &[("PHONON_SIM_SEED", "not-a-number")]);
    assert_eq!(exit_code(&res), 2);
    assert!(stderr(&res).contains("PHONON_SIM_SEED"), "{}", stderr(&res));
}

#[test]
fn output_directory_precedence_and_creation() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("from-env");
    let flag_dir = dir.path().join("deeply/nested/from-flag");

    assert_success(&run(
        &["tomo", "synth"],
        &[("PHONON_SIM_OUT", env_dir.to_str().unwrap())],
    ));
    assert!(env_dir.join("rabi_trace.csv").exists());

    assert_success(&run(
        &["--out", flag_dir.to_str().unwrap(), "tomo", "synth"],
        &[("PHONON_SIM_OUT", dir.path().join("unused").to_str().unwrap())],
    ));
    assert!(flag_dir.join("rabi_trace.csv").exists());
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn reproduce_fig2_spans_the_grid_and_reaches_the_parity_floor() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_success(&run(
        &["--out", out.to_str().unwrap(), "reproduce", "fig2"],
        &[],
    ));
    let rows = csv_rows(&read(&out.join("fig2.csv")));
    assert_eq!(rows.len(), 30);

    let first_w00: f64 = rows[0][4].parse().unwrap();
    let parity_floor = -2.0 / PI;
    assert!(
        (first_w00 - parity_floor).abs() < 0.05,
        "W(0,0) at the coldest point is {first_w00}, floor {parity_floor}"
    );
    for row in &rows {
        let k1: f64 = row[2].parse().unwrap();
        let minus_k1: f64 = row[3].parse().unwrap();
        assert!(k1 > 0.0, "single-step K_1 must stay positive, got {k1}");
        assert_eq!(minus_k1, -k1);
    }
}

#[test]
fn reproduce_fig3_entanglement_potential_is_nondecreasing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_success(&run(
        &["--out", out.to_str().unwrap(), "reproduce", "fig3"],
        &[],
    ));
    let rows = csv_rows(&read(&out.join("fig3_summary.csv")));
    assert_eq!(rows.len(), 63);

    for label in ["0.9", "1.0", "1.1"] {
        let eps: Vec<f64> = rows
            .iter()
            .filter(|r| r[0] == label)
            .map(|r| r[5].parse().unwrap())
            .collect();
        assert_eq!(eps.len(), 21);
        for (k, pair) in eps.windows(2).enumerate() {
            assert!(
                pair[1] >= pair[0] - 1e-6,
                "EP drops at gt = {label} pi, k = {k}: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }
}
