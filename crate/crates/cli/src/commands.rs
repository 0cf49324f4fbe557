//! Subcommand implementations.
//!
//! Every file written here embeds the fully resolved configuration (plus the
//! issuing command), so outputs are self-describing and a rerun with the same
//! configuration and seed is byte-identical.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use phonon_sim::asymptotics::{fixed_point_set, mixture_from_set, DEFAULT_PHASE_TOL};
use phonon_sim::dynamics::{ideal_step, iterate, StepParams};
use phonon_sim::fock::{thermal_distribution, PhononDistribution, TruncationPolicy};
use phonon_sim::io;
use phonon_sim::metrics::{
    entanglement_potential, entanglement_potentials, fano_factor, full_report, klyshko,
    wigner_origin, QngEnvelope, QngSearchConfig,
};
use phonon_sim::tomography::{
    default_probe_times, lamb_dicke_valid, monte_carlo_uncertainty, simulate_measurement,
    synthesize_rabi_with_shots,
};
use phonon_sim::Result;

use crate::config::{ExperimentConfig, OutputFormat};

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.outputs.dir)?;
    Ok(cfg.outputs.dir.clone())
}

/// Per-state summary line: occupation, metrics, and witness flags.
#[derive(Debug, Serialize)]
struct SummaryRow {
    k: usize,
    n_bar: f64,
    fano: Option<f64>,
    w00: f64,
    ep: Option<f64>,
    qng: Vec<QngFlag>,
}

#[derive(Debug, Serialize)]
struct QngFlag {
    level: usize,
    violated: bool,
    unreliable: bool,
}

/// Builds one envelope per level, then assesses every state against it; the
/// batch entanglement potential falls back to per-state evaluation so one
/// uncomputable state leaves a gap instead of failing the table.
fn summarize_states(
    states: &[PhononDistribution],
    levels: &[usize],
    qng: &QngSearchConfig,
) -> Result<Vec<SummaryRow>> {
    let envelopes: Vec<QngEnvelope> = levels
        .iter()
        .map(|&level| QngEnvelope::build(level, qng))
        .collect::<Result<_>>()?;
    let eps: Vec<Option<f64>> = match entanglement_potentials(states) {
        Ok(values) => values.into_iter().map(Some).collect(),
        Err(_) => states
            .iter()
            .map(|s| entanglement_potential(s).ok())
            .collect(),
    };
    Ok(states
        .iter()
        .enumerate()
        .map(|(k, state)| {
            let flags = envelopes
                .iter()
                .map(|env| {
                    let verdict = env.assess(state, qng.margin_tol);
                    QngFlag {
                        level: env.level,
                        violated: verdict.violated,
                        unreliable: verdict.unreliable,
                    }
                })
                .collect();
            SummaryRow {
                k,
                n_bar: state.mean_phonon().0,
                fano: fano_factor(state),
                w00: wigner_origin(state).0,
                ep: eps[k],
                qng: flags,
            }
        })
        .collect())
}

fn summary_header(levels: &[usize]) -> String {
    let mut header = String::from("k,n_bar,fano,w00,ep");
    for level in levels {
        header.push_str(&format!(",qng{level}_violated,qng{level}_unreliable"));
    }
    header.push('\n');
    header
}

fn summary_csv(rows: &[SummaryRow], levels: &[usize], config: &Value) -> Result<String> {
    let mut out = format!("# {}\n", serde_json::to_string(config)?);
    out.push_str(&summary_header(levels));
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}",
            row.k,
            io::fmt_f64(row.n_bar),
            row.fano.map(io::fmt_f64).unwrap_or_default(),
            io::fmt_f64(row.w00),
            row.ep.map(io::fmt_f64).unwrap_or_default(),
        ));
        for flag in &row.qng {
            out.push_str(&format!(
                ",{},{}",
                flag.violated as u8, flag.unreliable as u8
            ));
        }
        out.push('\n');
    }
    Ok(out)
}

/// An explicit state may legitimately sum below 1 (the deficit is mass beyond
/// its truncation), but a large deficit is usually a typo; say so once.
fn warn_if_incomplete(d0: &PhononDistribution, tail_tol: f64) {
    let deficit = 1.0 - d0.total();
    if deficit > tail_tol {
        eprintln!(
            "warning: initial state sums to {:.6}; the missing {deficit:.3e} is treated as mass beyond the truncation",
            d0.total()
        );
    }
}

/// Smallest level below which all but `tail` of the mass sits.
fn occupied_cut(d: &PhononDistribution, tail: f64) -> usize {
    let total = d.total();
    let mut cum = 0.0;
    for n in 0..d.len() {
        cum += d.p(n);
        if total - cum < tail {
            return n;
        }
    }
    d.n_max()
}

fn write_json_value(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

/// `simulate`: iterate the configured step and write the per-step
/// distributions plus a per-step metric summary.
pub fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    let dir = out_dir(cfg)?;
    let prov = cfg.provenance("simulate")?;
    let d0 = cfg.initial.build()?;
    warn_if_incomplete(&d0, cfg.truncation.tail_tol);
    let params = cfg.step.resolve(&cfg.hardware)?;
    let trace = iterate(&d0, &params, cfg.repetitions.0, &cfg.truncation)?;
    let rows = summarize_states(&trace.states, &cfg.metrics.levels, &cfg.metrics.qng)?;

    match cfg.outputs.format {
        OutputFormat::Csv => {
            let acc = dir.join("accumulation.csv");
            io::write_iteration_trace_csv(&acc, &trace, Some(&prov))?;
            announce(&acc);
            let sum = dir.join("summary.csv");
            std::fs::write(&sum, summary_csv(&rows, &cfg.metrics.levels, &prov)?)?;
            announce(&sum);
        }
        OutputFormat::Json => {
            let acc = dir.join("accumulation.json");
            io::write_iteration_trace_json(&acc, &trace, Some(&prov))?;
            announce(&acc);
            let sum = dir.join("summary.json");
            write_json_value(&sum, &json!({ "rows": rows, "config": prov }))?;
            announce(&sum);
        }
    }

    let last = trace.final_state();
    println!(
        "after {} steps: mean phonon {:.4}, mode P({}) = {:.4}, trimmed mass {:.3e}",
        cfg.repetitions.0,
        last.mean_phonon().0,
        last.argmax(),
        last.p(last.argmax()),
        trace.tail_loss,
    );
    Ok(())
}

/// `asymptote`: fixed points of the configured pulse and the k -> infinity
/// mixture of the configured initial state.
pub fn asymptote(cfg: &ExperimentConfig) -> Result<()> {
    let dir = out_dir(cfg)?;
    let prov = cfg.provenance("asymptote")?;
    let d0 = cfg.initial.build()?;
    warn_if_incomplete(&d0, cfg.truncation.tail_tol);
    let params = cfg.step.resolve(&cfg.hardware)?;
    let set = fixed_point_set(params.pulse_area, d0.n_max(), DEFAULT_PHASE_TOL)?;
    let mixture = mixture_from_set(&d0, &set);

    let path = dir.join("asymptote.json");
    io::write_asymptote_json(&path, &set, &mixture, Some(&prov))?;
    announce(&path);
    if cfg.outputs.format == OutputFormat::Csv {
        let csv_path = dir.join("p_infinity.csv");
        io::write_distribution_csv(&csv_path, &mixture.distribution, Some(&prov))?;
        announce(&csv_path);
    }

    println!(
        "pulse area {:.6} rad ({:.4} pi): fixed points {:?}",
        params.pulse_area,
        params.pulse_area / PI,
        set.points
    );
    for &n in &set.points {
        println!("  P_infinity({n}) = {:.6}", mixture.distribution.p(n));
    }
    println!("  unassigned tail {:.3e}", mixture.unassigned_tail);
    Ok(())
}

/// `tomo synth`: forward-synthesize a sideband trace for the configured
/// initial state, optionally with simulated projection noise.
pub fn tomo_synth(cfg: &ExperimentConfig) -> Result<()> {
    let dir = out_dir(cfg)?;
    let prov = cfg.provenance("tomo synth")?;
    let d0 = cfg.initial.build()?;
    warn_if_incomplete(&d0, cfg.truncation.tail_tol);
    let t = &cfg.tomography;
    let times = default_probe_times(&t.model, t.points, t.flops);
    let ideal = synthesize_rabi_with_shots(&d0, &t.model, &times, t.shots)?;
    let trace = if t.noisy {
        simulate_measurement(&ideal, t.seed)?
    } else {
        ideal
    };
    // Warn on the occupied range, not the truncation length: levels holding
    // less than 1e-3 of the mass cannot distort the signal at the shot-noise
    // scale.
    let occupied = occupied_cut(&d0, 1e-3);
    if !lamb_dicke_valid(cfg.hardware.lamb_dicke_729, occupied) {
        eprintln!(
            "warning: Lamb-Dicke parameter {} is marginal for population up to n = {occupied}; \
             the linear sideband model degrades there",
            cfg.hardware.lamb_dicke_729,
        );
    }

    let path = dir.join("rabi_trace.csv");
    io::write_rabi_trace_csv(&path, &trace, Some(&prov))?;
    announce(&path);
    println!(
        "{} points over {:.1} us, {} shots each, {}",
        trace.len(),
        trace.span() * 1e6,
        t.shots,
        if t.noisy {
            "simulated projection noise"
        } else {
            "noiseless"
        }
    );
    Ok(())
}

/// `tomo fit`: reconstruct a distribution from a stored trace, with
/// Monte-Carlo uncertainties.
pub fn tomo_fit(cfg: &ExperimentConfig, input: &Path) -> Result<()> {
    let dir = out_dir(cfg)?;
    let prov = cfg.provenance("tomo fit")?;
    let trace = io::read_rabi_trace_csv(input)?;
    let t = &cfg.tomography;
    let fit = monte_carlo_uncertainty(&trace, &t.model, t.fit_n_max, t.resamples, t.seed)?;

    let path = dir.join("fit_result.json");
    io::write_fit_result_json(&path, &fit, Some(&prov))?;
    announce(&path);

    println!(
        "reconstruction from {} points ({} resamples), 3 sigma error bars:",
        trace.len(),
        t.resamples
    );
    for n in 0..=t.fit_n_max {
        println!(
            "  P({n}) = {:.6} +/- {:.6}",
            fit.distribution.p(n),
            3.0 * fit.per_bin_sigma[n]
        );
    }
    println!("  residual rms {:.3e}", fit.residual_rms);
    Ok(())
}

/// `metrics`: full witness report for a stored distribution.
pub fn metrics(cfg: &ExperimentConfig, input: &Path) -> Result<()> {
    let dir = out_dir(cfg)?;
    let prov = cfg.provenance("metrics")?;
    let d = io::read_distribution(input)?;
    let report = full_report(&d, &cfg.metrics.levels, &cfg.metrics.qng);

    let path = match cfg.outputs.format {
        OutputFormat::Csv => {
            let path = dir.join("witness.csv");
            io::write_witness_csv(&path, &report, Some(&prov))?;
            path
        }
        OutputFormat::Json => {
            let path = dir.join("witness.json");
            io::write_witness_json(&path, &report, Some(&prov))?;
            path
        }
    };
    announce(&path);

    match report.fano {
        Some(f) => println!("fano {f:.4}"),
        None => println!("fano undefined (zero mean)"),
    }
    println!("wigner origin {:.4}", report.wigner_origin);
    let violated: Vec<usize> = report
        .qng_levels
        .iter()
        .filter(|l| l.violated)
        .map(|l| l.level)
        .collect();
    if violated.is_empty() {
        println!("no witness level violated");
    } else {
        println!("witness violated at levels {violated:?}");
    }
    if let Some(ep) = report.entanglement_potential {
        println!("entanglement potential {ep:.4}");
    }
    for err in &report.metric_errors {
        eprintln!("metric skipped: {err}");
    }
    Ok(())
}

/// `reproduce fig2`: one ideal pi pulse on thermal states over a 30-point
/// logarithmic grid of mean occupation, with single-step metric columns.
pub fn reproduce_fig2(cfg: &ExperimentConfig) -> Result<()> {
    let dir = out_dir(cfg)?;
    const POINTS: usize = 30;
    const N_BAR_MIN: f64 = 0.05;
    const N_BAR_MAX: f64 = 5.0;
    const N_MAX: usize = 120;
    let levels = [0usize, 1, 2];
    let qng = &cfg.metrics.qng;

    let prov = json!({
        "command": "reproduce",
        "figure": "fig2",
        "pulse_area": PI,
        "grid": { "points": POINTS, "n_bar_min": N_BAR_MIN, "n_bar_max": N_BAR_MAX, "n_max": N_MAX },
        "metrics": { "levels": levels, "qng": qng },
        "outputs": { "dir": cfg.outputs.dir.display().to_string() },
    });

    let envelopes: Vec<QngEnvelope> = levels
        .iter()
        .map(|&level| QngEnvelope::build(level, qng))
        .collect::<Result<_>>()?;

    let mut out = format!("# {}\n", serde_json::to_string(&prov)?);
    out.push_str("n_bar,fano,k1,minus_k1,w00");
    for level in levels {
        out.push_str(&format!(",qng{level}_violated,qng{level}_unreliable"));
    }
    out.push('\n');

    let ratio = N_BAR_MAX / N_BAR_MIN;
    for i in 0..POINTS {
        let n_bar = N_BAR_MIN * ratio.powf(i as f64 / (POINTS - 1) as f64);
        let d0 = thermal_distribution(n_bar, N_MAX)?;
        let stepped = ideal_step(&d0, PI);
        let k1 = klyshko(&stepped, 1)?;
        out.push_str(&format!(
            "{},{},{},{},{}",
            io::fmt_f64(n_bar),
            fano_factor(&stepped).map(io::fmt_f64).unwrap_or_default(),
            io::fmt_f64(k1),
            io::fmt_f64(-k1),
            io::fmt_f64(wigner_origin(&stepped).0),
        ));
        for env in &envelopes {
            let verdict = env.assess(&stepped, qng.margin_tol);
            out.push_str(&format!(
                ",{},{}",
                verdict.violated as u8, verdict.unreliable as u8
            ));
        }
        out.push('\n');
    }

    let path = dir.join("fig2.csv");
    std::fs::write(&path, out)?;
    announce(&path);
    Ok(())
}

/// `reproduce fig3`: twenty lossy, heated steps on a near-ground thermal
/// state at three pulse areas, with per-step distributions and metrics.
pub fn reproduce_fig3(cfg: &ExperimentConfig) -> Result<()> {
    let dir = out_dir(cfg)?;
    const N_BAR: f64 = 1.19;
    const N_MAX: usize = 60;
    const CONTRAST: f64 = 0.97;
    const ETA_EFF: f64 = 0.17;
    const STEPS: usize = 20;
    let areas_pi = [0.9f64, 1.0, 1.1];
    let levels = [0usize, 1, 2, 3, 4];
    let qng = &cfg.metrics.qng;
    let policy = TruncationPolicy::default();

    let prov = json!({
        "command": "reproduce",
        "figure": "fig3",
        "initial": { "type": "thermal", "n_bar": N_BAR, "n_max": N_MAX },
        "step": { "contrast": CONTRAST, "eta_eff": ETA_EFF },
        "pulse_areas_pi": areas_pi,
        "repetitions": STEPS,
        "truncation": policy,
        "metrics": { "levels": levels, "qng": qng },
        "outputs": { "dir": cfg.outputs.dir.display().to_string() },
    });

    let d0 = thermal_distribution(N_BAR, N_MAX)?;
    let comment = format!("# {}\n", serde_json::to_string(&prov)?);
    let mut acc = comment.clone();
    acc.push_str("gt_per_pi,k,n,P\n");
    let mut sum = comment;
    sum.push_str("gt_per_pi,");
    sum.push_str(&summary_header(&levels));

    for &area_pi in &areas_pi {
        let label = format!("{area_pi:.1}");
        let params = StepParams::new(area_pi * PI, CONTRAST, ETA_EFF)?;
        let trace = iterate(&d0, &params, STEPS, &policy)?;
        for (k, state) in trace.states.iter().enumerate() {
            for (n, p) in state.probs().iter().enumerate() {
                acc.push_str(&format!("{label},{k},{n},{}\n", io::fmt_f64(*p)));
            }
        }
        let rows = summarize_states(&trace.states, &levels, qng)?;
        for row in &rows {
            sum.push_str(&format!(
                "{label},{},{},{},{},{}",
                row.k,
                io::fmt_f64(row.n_bar),
                row.fano.map(io::fmt_f64).unwrap_or_default(),
                io::fmt_f64(row.w00),
                row.ep.map(io::fmt_f64).unwrap_or_default(),
            ));
            for flag in &row.qng {
                sum.push_str(&format!(
                    ",{},{}",
                    flag.violated as u8, flag.unreliable as u8
                ));
            }
            sum.push('\n');
        }
    }

    let acc_path = dir.join("fig3_accumulation.csv");
    std::fs::write(&acc_path, acc)?;
    announce(&acc_path);
    let sum_path = dir.join("fig3_summary.csv");
    std::fs::write(&sum_path, sum)?;
    announce(&sum_path);
    Ok(())
}
