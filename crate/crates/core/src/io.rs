//! On-disk formats: distributions, Rabi traces, iteration traces, fit
//! results, asymptotic mixtures, and witness reports.
//!
//! Floats are written as decimal scientific text with 17 significant digits,
//! which reproduces the original `f64` exactly on read-back. CSV files may
//! carry a leading `# {...}` line holding the resolved run configuration as
//! one JSON object; readers skip `#` comment lines. JSON files carry the same
//! configuration under a `"config"` key.

use std::path::Path;

use serde_json::{json, Value};

use crate::asymptotics::{AsymptoticMixture, FixedPointSet};
use crate::dynamics::IterationTrace;
use crate::fock::PhononDistribution;
use crate::metrics::WitnessReport;
use crate::tomography::{FitResult, RabiTrace};
use crate::{Result, SimError};

/// Formats one float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn config_comment(config: Option<&Value>) -> Result<String> {
    match config {
        Some(v) => Ok(format!("# {}\n", serde_json::to_string(v)?)),
        None => Ok(String::new()),
    }
}

/// Inserts `config` into a JSON object produced by a serializer.
fn attach_config(mut value: Value, config: Option<&Value>) -> Value {
    if let (Value::Object(map), Some(cfg)) = (&mut value, config) {
        map.insert("config".to_string(), cfg.clone());
    }
    value
}

fn write_json(path: impl AsRef<Path>, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Renders a distribution as CSV with header `n,P`, one row per level.
pub fn distribution_to_csv(d: &PhononDistribution, config: Option<&Value>) -> Result<String> {
    let mut out = config_comment(config)?;
    out.push_str("n,P\n");
    for (n, p) in d.probs().iter().enumerate() {
        out.push_str(&format!("{n},{}\n", fmt_f64(*p)));
    }
    Ok(out)
}

pub fn write_distribution_csv(
    path: impl AsRef<Path>,
    d: &PhononDistribution,
    config: Option<&Value>,
) -> Result<()> {
    std::fs::write(path, distribution_to_csv(d, config)?)?;
    Ok(())
}

/// Writes a distribution as JSON: a bare array of probabilities, or, when a
/// configuration is given, the object `{"P": [...], "config": {...}}`.
pub fn write_distribution_json(
    path: impl AsRef<Path>,
    d: &PhononDistribution,
    config: Option<&Value>,
) -> Result<()> {
    let value = match config {
        None => serde_json::to_value(d)?,
        Some(cfg) => json!({ "P": d, "config": cfg }),
    };
    write_json(path, &value)
}

/// Reads a distribution from `.csv` or `.json`, dispatching on the extension.
pub fn read_distribution(path: impl AsRef<Path>) -> Result<PhononDistribution> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_distribution_csv(path),
        Some("json") => read_distribution_json(path),
        _ => Err(SimError::Domain(format!(
            "{}: expected a .csv or .json file",
            path.display()
        ))),
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| SimError::Domain(format!("{}: {e}", path.display())))
}

fn check_header(path: &Path, reader: &mut csv::Reader<std::fs::File>, want: &[&str]) -> Result<()> {
    let got: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if got != want {
        return Err(SimError::Domain(format!(
            "{}: expected header '{}', found '{}'",
            path.display(),
            want.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(path: &Path, row: usize, column: &str, tok: &str) -> Result<T> {
    tok.parse().map_err(|_| {
        SimError::Domain(format!(
            "{}: data row {row}: column '{column}': cannot parse '{tok}'",
            path.display()
        ))
    })
}

fn field<'a>(path: &Path, row: usize, rec: &'a csv::StringRecord, idx: usize, column: &str) -> Result<&'a str> {
    rec.get(idx).ok_or_else(|| {
        SimError::Domain(format!(
            "{}: data row {row}: missing column '{column}'",
            path.display()
        ))
    })
}

/// Reads a `n,P` CSV. Rows must enumerate levels 0,1,2,... in order.
pub fn read_distribution_csv(path: impl AsRef<Path>) -> Result<PhononDistribution> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    check_header(path, &mut reader, &["n", "P"])?;
    let mut probs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let n: usize = parse_field(path, row, "n", field(path, row, &record, 0, "n")?)?;
        let p: f64 = parse_field(path, row, "P", field(path, row, &record, 1, "P")?)?;
        if n != i {
            return Err(SimError::Domain(format!(
                "{}: data row {row}: expected n = {i}, found {n}",
                path.display()
            )));
        }
        probs.push(p);
    }
    PhononDistribution::from_probs(probs)
}

/// Reads distribution JSON: either a bare array or an object with a `P` key.
pub fn read_distribution_json(path: impl AsRef<Path>) -> Result<PhononDistribution> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| SimError::Domain(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| SimError::Domain(format!("{}: {e}", path.display())))?;
    let probs = match &value {
        Value::Array(_) => value,
        Value::Object(map) => map.get("P").cloned().ok_or_else(|| {
            SimError::Domain(format!("{}: object form requires a 'P' key", path.display()))
        })?,
        _ => {
            return Err(SimError::Domain(format!(
                "{}: expected an array or an object with a 'P' key",
                path.display()
            )))
        }
    };
    let probs: Vec<f64> = serde_json::from_value(probs)?;
    PhononDistribution::from_probs(probs)
}

/// Renders a Rabi trace as CSV with header `t_us,p,shots`. Times are stored
/// in microseconds on disk and seconds in memory.
pub fn rabi_trace_to_csv(trace: &RabiTrace, config: Option<&Value>) -> Result<String> {
    let mut out = config_comment(config)?;
    out.push_str("t_us,p,shots\n");
    for (t, p) in trace.times.iter().zip(&trace.p_excited) {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(t * 1e6),
            fmt_f64(*p),
            trace.shots
        ));
    }
    Ok(out)
}

pub fn write_rabi_trace_csv(
    path: impl AsRef<Path>,
    trace: &RabiTrace,
    config: Option<&Value>,
) -> Result<()> {
    std::fs::write(path, rabi_trace_to_csv(trace, config)?)?;
    Ok(())
}

/// Reads a `t_us,p,shots` CSV. The shot count must be the same on every row.
pub fn read_rabi_trace_csv(path: impl AsRef<Path>) -> Result<RabiTrace> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    check_header(path, &mut reader, &["t_us", "p", "shots"])?;
    let mut times = Vec::new();
    let mut p_excited = Vec::new();
    let mut shots: Option<u64> = None;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let t_us: f64 = parse_field(path, row, "t_us", field(path, row, &record, 0, "t_us")?)?;
        let p: f64 = parse_field(path, row, "p", field(path, row, &record, 1, "p")?)?;
        let s: u64 = parse_field(path, row, "shots", field(path, row, &record, 2, "shots")?)?;
        match shots {
            None => shots = Some(s),
            Some(prev) if prev != s => {
                return Err(SimError::Domain(format!(
                    "{}: data row {row}: shot count changed from {prev} to {s}",
                    path.display()
                )))
            }
            Some(_) => {}
        }
        times.push(t_us * 1e-6);
        p_excited.push(p);
    }
    let shots = shots.ok_or_else(|| {
        SimError::Domain(format!("{}: trace holds no data rows", path.display()))
    })?;
    RabiTrace::new(times, p_excited, shots)
}

/// Writes an iteration trace as JSON `{params, policy, states, tail_loss}`
/// plus the configuration when given.
pub fn write_iteration_trace_json(
    path: impl AsRef<Path>,
    trace: &IterationTrace,
    config: Option<&Value>,
) -> Result<()> {
    let value = attach_config(serde_json::to_value(trace)?, config);
    write_json(path, &value)
}

/// Renders an iteration trace as CSV with header `k,n,P`: one row per level
/// of every stored state, `k = 0` being the input.
pub fn iteration_trace_to_csv(trace: &IterationTrace, config: Option<&Value>) -> Result<String> {
    let mut out = config_comment(config)?;
    out.push_str("k,n,P\n");
    for (k, state) in trace.states.iter().enumerate() {
        for (n, p) in state.probs().iter().enumerate() {
            out.push_str(&format!("{k},{n},{}\n", fmt_f64(*p)));
        }
    }
    Ok(out)
}

pub fn write_iteration_trace_csv(
    path: impl AsRef<Path>,
    trace: &IterationTrace,
    config: Option<&Value>,
) -> Result<()> {
    std::fs::write(path, iteration_trace_to_csv(trace, config)?)?;
    Ok(())
}

/// Writes a fit result as JSON `{P, sigma, residual_rms, config}`.
pub fn write_fit_result_json(
    path: impl AsRef<Path>,
    fit: &FitResult,
    config: Option<&Value>,
) -> Result<()> {
    let value = json!({
        "P": fit.distribution,
        "sigma": fit.per_bin_sigma,
        "residual_rms": fit.residual_rms,
        "config": config.cloned().unwrap_or(Value::Null),
    });
    write_json(path, &value)
}

/// Writes a fixed-point analysis as JSON
/// `{pulse_area, fixed_points, P_infinity, unassigned_tail}`.
pub fn write_asymptote_json(
    path: impl AsRef<Path>,
    set: &FixedPointSet,
    mixture: &AsymptoticMixture,
    config: Option<&Value>,
) -> Result<()> {
    let value = attach_config(
        json!({
            "pulse_area": set.pulse_area,
            "fixed_points": set.points,
            "P_infinity": mixture.distribution,
            "unassigned_tail": mixture.unassigned_tail,
        }),
        config,
    );
    write_json(path, &value)
}

/// Writes a witness report as JSON, with the configuration attached.
pub fn write_witness_json(
    path: impl AsRef<Path>,
    report: &WitnessReport,
    config: Option<&Value>,
) -> Result<()> {
    let value = attach_config(serde_json::to_value(report)?, config);
    write_json(path, &value)
}

/// Renders a witness report as long-format CSV `metric,index,value,flag`,
/// one row per computed quantity. Klyshko rows appear under both sign
/// conventions (`klyshko` and `klyshko_neg`).
pub fn witness_report_to_csv(report: &WitnessReport, config: Option<&Value>) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["metric", "index", "value", "flag"])?;
    let mut push = |metric: &str, index: String, value: String, flag: &str| {
        writer.write_record([metric, &index, &value, flag])
    };
    push(
        "fano",
        String::new(),
        report.fano.map(fmt_f64).unwrap_or_default(),
        "",
    )?;
    for (n, k) in &report.klyshko {
        push("klyshko", n.to_string(), fmt_f64(*k), "")?;
        push("klyshko_neg", n.to_string(), fmt_f64(-k), "")?;
    }
    push(
        "wigner_origin",
        String::new(),
        fmt_f64(report.wigner_origin),
        if report.wigner_incomplete { "incomplete" } else { "" },
    )?;
    for level in &report.qng_levels {
        let flag = match (level.violated, level.unreliable) {
            (true, true) => "violated;unreliable",
            (true, false) => "violated",
            (false, true) => "unreliable",
            (false, false) => "",
        };
        push("qng_margin", level.level.to_string(), fmt_f64(level.margin), flag)?;
    }
    push(
        "entanglement_potential",
        String::new(),
        report.entanglement_potential.map(fmt_f64).unwrap_or_default(),
        "",
    )?;
    for err in &report.metric_errors {
        push("error", String::new(), String::new(), err)?;
    }
    let body = writer
        .into_inner()
        .map_err(|e| SimError::Domain(format!("csv buffer: {e}")))?;
    let body = String::from_utf8(body).expect("csv writer emits utf-8");
    Ok(format!("{}{body}", config_comment(config)?))
}

pub fn write_witness_csv(
    path: impl AsRef<Path>,
    report: &WitnessReport,
    config: Option<&Value>,
) -> Result<()> {
    std::fs::write(path, witness_report_to_csv(report, config)?)?;
    Ok(())
}
