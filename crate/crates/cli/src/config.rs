//! Experiment configuration: the TOML schema, its defaults, and the
//! resolution of command-line and environment overrides into one fully
//! explicit record that every output file embeds.
//!
//! Override precedence is flag > environment > file > built-in default. The
//! environment can override exactly two things: the output directory
//! (`PHONON_SIM_OUT`) and the seed (`PHONON_SIM_SEED`).

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use phonon_sim::dynamics::StepParams;
use phonon_sim::fock::{thermal_distribution, PhononDistribution, TruncationPolicy};
use phonon_sim::metrics::QngSearchConfig;
use phonon_sim::tomography::DecayModel;
use phonon_sim::{Result, SimError};

/// Hard ceiling on the number of accumulation steps per run.
pub const MAX_REPETITIONS: usize = 10_000;

/// Hard ceiling on witness levels; envelope cost grows with the level and
/// nothing physical lives that deep in this protocol.
pub const MAX_WITNESS_LEVEL: usize = 64;

const ENV_OUT: &str = "PHONON_SIM_OUT";
const ENV_SEED: &str = "PHONON_SIM_SEED";

/// Complete description of one run. Every field has a default, so an empty
/// file (or none at all) is a valid configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub initial: InitialState,
    pub step: StepConfig,
    /// Number of accumulation steps, at most [`MAX_REPETITIONS`].
    pub repetitions: Repetitions,
    pub truncation: TruncationPolicy,
    pub metrics: MetricsConfig,
    pub tomography: TomographyConfig,
    pub hardware: HardwareConfig,
    pub outputs: OutputsConfig,
}

/// Newtype so the top-level `repetitions` key can default to 20.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Repetitions(pub usize);

impl Default for Repetitions {
    fn default() -> Self {
        Repetitions(20)
    }
}

/// Initial motional state, selected by `type`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum InitialState {
    /// Thermal occupation `n_bar`, truncated at `n_max`.
    Thermal {
        n_bar: f64,
        #[serde(default = "default_thermal_cut")]
        n_max: usize,
    },
    /// Fock state |n>, optionally padded with zeros up to `n_max`.
    Fock {
        n: usize,
        #[serde(default)]
        n_max: Option<usize>,
    },
    /// Explicit probabilities for levels 0..probs.len().
    Explicit { probs: Vec<f64> },
}

fn default_thermal_cut() -> usize {
    60
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Thermal {
            n_bar: 1.19,
            n_max: default_thermal_cut(),
        }
    }
}

impl InitialState {
    pub fn build(&self) -> Result<PhononDistribution> {
        match self {
            InitialState::Thermal { n_bar, n_max } => thermal_distribution(*n_bar, *n_max),
            InitialState::Fock { n, n_max } => {
                let cut = n_max.unwrap_or(*n);
                if cut < *n {
                    return Err(SimError::Domain(format!(
                        "fock n_max = {cut} cannot sit below n = {n}"
                    )));
                }
                PhononDistribution::fock(*n, cut)
            }
            InitialState::Explicit { probs } => PhononDistribution::from_probs(probs.clone()),
        }
    }
}

/// One accumulation step. The pulse area can be given in radians, in units
/// of pi, or as a duration converted through `hardware.sideband_g`; the three
/// forms are mutually exclusive, and none of them means exactly pi.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepConfig {
    /// Pulse area gt in radians.
    pub pulse_area: Option<f64>,
    /// Pulse area in units of pi.
    pub pulse_area_pi: Option<f64>,
    /// Pulse duration in microseconds; the area is duration x sideband_g.
    pub pulse_duration_us: Option<f64>,
    /// Success probability of the pulse.
    pub contrast: f64,
    /// Reset-heating strength; eta_eff^2 is the mean phonon gain per reset.
    pub eta_eff: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            pulse_area: None,
            pulse_area_pi: None,
            pulse_duration_us: None,
            contrast: 0.97,
            eta_eff: 0.17,
        }
    }
}

impl StepConfig {
    pub fn resolve(&self, hardware: &HardwareConfig) -> Result<StepParams> {
        let mut set: Vec<(&str, f64)> = Vec::new();
        if let Some(a) = self.pulse_area {
            set.push(("pulse_area", a));
        }
        if let Some(a) = self.pulse_area_pi {
            set.push(("pulse_area_pi", a * PI));
        }
        if let Some(t) = self.pulse_duration_us {
            set.push(("pulse_duration_us", t * 1e-6 * hardware.sideband_g));
        }
        let area = match set.as_slice() {
            [] => PI,
            [(_, a)] => *a,
            many => {
                let names: Vec<&str> = many.iter().map(|(n, _)| *n).collect();
                return Err(SimError::Domain(format!(
                    "fields {} are mutually exclusive",
                    names.join(", ")
                )));
            }
        };
        StepParams::new(area, self.contrast, self.eta_eff)
    }
}

/// Metric evaluation: which Fock levels get Klyshko and witness verdicts,
/// and the witness search grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub levels: Vec<usize>,
    pub qng: QngSearchConfig,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            levels: vec![0, 1, 2, 3, 4],
            qng: QngSearchConfig::default(),
        }
    }
}

/// Sideband tomography: the response model plus synthesis and fit settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographyConfig {
    pub model: DecayModel,
    /// Number of probe times.
    pub points: usize,
    /// Probed span in ground-sideband flop periods.
    pub flops: f64,
    /// Shots per probe time.
    pub shots: u64,
    /// Whether synthesized traces carry simulated projection noise.
    pub noisy: bool,
    /// Monte-Carlo resamples behind reported fit uncertainties.
    pub resamples: usize,
    /// Highest Fock level a fit reconstructs.
    pub fit_n_max: usize,
    /// Seed for synthesis noise and resampling.
    pub seed: u64,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        TomographyConfig {
            model: DecayModel::default(),
            points: 300,
            flops: 6.0,
            shots: 100,
            noisy: true,
            resamples: 200,
            fit_n_max: 7,
            seed: 1,
        }
    }
}

impl TomographyConfig {
    fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| prefixed("tomography.model", e))?;
        if self.points < 2 {
            return Err(SimError::Domain(format!(
                "tomography.points: need at least 2 probe times, got {}",
                self.points
            )));
        }
        if !(self.flops > 0.0) {
            return Err(SimError::Domain(format!(
                "tomography.flops: probed span must be > 0 flop periods, got {}",
                self.flops
            )));
        }
        if self.shots < 1 {
            return Err(SimError::Domain(
                "tomography.shots: need at least 1 shot per point".into(),
            ));
        }
        if self.resamples < 2 {
            return Err(SimError::Domain(format!(
                "tomography.resamples: uncertainty estimation needs at least 2, got {}",
                self.resamples
            )));
        }
        if !(1..=32).contains(&self.fit_n_max) {
            return Err(SimError::Domain(format!(
                "tomography.fit_n_max: must lie in [1, 32], got {}",
                self.fit_n_max
            )));
        }
        Ok(())
    }
}

/// Trap and laser constants of the modeled setup. They ride along in every
/// output so stored tables are self-describing, and `sideband_g` converts
/// pulse durations into areas.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareConfig {
    /// Axial trap frequency in rad/s (2 pi x 1.2 MHz).
    pub omega_axial: f64,
    /// Lamb-Dicke parameter of the 729 nm drive along the axial mode.
    pub lamb_dicke_729: f64,
    /// Carrier Rabi frequency in rad/s (2 pi x 92 kHz).
    pub omega_carrier: f64,
    /// Sideband coupling g in rad/s (2 pi x 5.8 kHz, which is close to
    /// lamb_dicke_729 x omega_carrier); a 91 us pulse then has gt near 1.06 pi.
    pub sideband_g: f64,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        HardwareConfig {
            omega_axial: 2.0 * PI * 1.2e6,
            lamb_dicke_729: 0.063,
            omega_carrier: 2.0 * PI * 92e3,
            sideband_g: 2.0 * PI * 5.8e3,
        }
    }
}

impl HardwareConfig {
    fn validate(&self) -> Result<()> {
        if !(self.omega_axial > 0.0 && self.omega_carrier > 0.0 && self.sideband_g > 0.0) {
            return Err(SimError::Domain(
                "hardware: frequencies must be > 0 rad/s".into(),
            ));
        }
        if !(self.lamb_dicke_729 > 0.0 && self.lamb_dicke_729 < 1.0) {
            return Err(SimError::Domain(format!(
                "hardware.lamb_dicke_729: must lie in (0, 1), got {}",
                self.lamb_dicke_729
            )));
        }
        Ok(())
    }
}

/// Where and how tables are written.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsConfig {
    /// Directory receiving every output file; created if missing.
    pub dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig {
            dir: PathBuf::from("."),
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl ExperimentConfig {
    /// Reads a TOML file. Parse failures keep the parser's line and field
    /// diagnostics, prefixed with the file name.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            SimError::Domain(format!("{}: {e}", path.display()))
        })?;
        toml::from_str(&text).map_err(|e| SimError::Domain(format!("{}: {e}", path.display())))
    }

    /// Checks every section, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        self.initial.build().map(|_| ()).map_err(|e| prefixed("initial", e))?;
        self.step
            .resolve(&self.hardware)
            .map(|_| ())
            .map_err(|e| prefixed("step", e))?;
        if self.repetitions.0 > MAX_REPETITIONS {
            return Err(SimError::Domain(format!(
                "repetitions: at most {MAX_REPETITIONS}, got {}",
                self.repetitions.0
            )));
        }
        self.truncation.validate().map_err(|e| prefixed("truncation", e))?;
        for &level in &self.metrics.levels {
            if level > MAX_WITNESS_LEVEL {
                return Err(SimError::Domain(format!(
                    "metrics.levels: witness level {level} exceeds the supported maximum {MAX_WITNESS_LEVEL}"
                )));
            }
        }
        self.metrics.qng.validate().map_err(|e| prefixed("metrics.qng", e))?;
        self.tomography.validate()?;
        self.hardware.validate()?;
        Ok(())
    }

    /// The record embedded in every output: the full configuration plus the
    /// issuing command and the pulse area it resolves to.
    pub fn provenance(&self, command: &str) -> Result<Value> {
        let mut value = serde_json::to_value(self)?;
        let obj = value.as_object_mut().expect("config serializes to an object");
        obj.insert("command".into(), Value::String(command.into()));
        let params = self.step.resolve(&self.hardware)?;
        obj.insert("pulse_area".into(), serde_json::to_value(params.pulse_area)?);
        Ok(value)
    }
}

fn prefixed(section: &str, e: SimError) -> SimError {
    match e {
        SimError::Domain(msg) => SimError::Domain(format!("{section}: {msg}")),
        other => other,
    }
}

/// Command-line overrides, applied over the environment and the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
}

/// Loads, overrides, and validates the configuration for one invocation.
pub fn resolved_config(ov: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match &ov.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(dir) = env_out()? {
        cfg.outputs.dir = dir;
    }
    if let Some(seed) = env_seed()? {
        cfg.tomography.seed = seed;
    }
    if let Some(dir) = &ov.out {
        cfg.outputs.dir = dir.clone();
    }
    if let Some(seed) = ov.seed {
        cfg.tomography.seed = seed;
    }
    if let Some(format) = ov.format {
        cfg.outputs.format = format;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn env_out() -> Result<Option<PathBuf>> {
    match std::env::var(ENV_OUT) {
        Ok(s) => Ok(Some(PathBuf::from(s))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(SimError::Domain(format!("{ENV_OUT}: {e}"))),
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(ENV_SEED) {
        Ok(s) => s.trim().parse::<u64>().map(Some).map_err(|_| {
            SimError::Domain(format!(
                "{ENV_SEED}: cannot parse '{s}' as an unsigned integer"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(SimError::Domain(format!("{ENV_SEED}: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_partial_toml_resolve_to_defaults() {
        let cfg: ExperimentConfig = toml::from_str("").unwrap();
        assert_eq!(cfg.repetitions.0, 20);
        assert_eq!(cfg.tomography.points, 300);
        let params = cfg.step.resolve(&cfg.hardware).unwrap();
        assert_eq!(params.pulse_area, PI);
        assert_eq!(params.contrast, 0.97);

        let cfg: ExperimentConfig = toml::from_str(
            "[step]\npulse_area_pi = 1.1\n\n[truncation]\nn_cap = 96\n",
        )
        .unwrap();
        assert_eq!(cfg.truncation.n_cap, 96);
        let params = cfg.step.resolve(&cfg.hardware).unwrap();
        assert_eq!(params.pulse_area, 1.1 * PI);
        cfg.validate().unwrap();
    }

    #[test]
    fn initial_state_variants_build() {
        let th: InitialState =
            toml::from_str("type = \"thermal\"\nn_bar = 0.5\n").unwrap();
        assert_eq!(th.build().unwrap().len(), 61);

        let fock: InitialState = toml::from_str("type = \"fock\"\nn = 3\n").unwrap();
        let d = fock.build().unwrap();
        assert_eq!(d.p(3), 1.0);
        assert_eq!(d.len(), 4);

        let ex: InitialState =
            toml::from_str("type = \"explicit\"\nprobs = [0.25, 0.75]\n").unwrap();
        assert_eq!(ex.build().unwrap().probs(), &[0.25, 0.75]);

        let bad: InitialState = toml::from_str("type = \"fock\"\nn = 5\nn_max = 3\n").unwrap();
        assert!(bad.build().is_err());
    }

    #[test]
    fn pulse_area_forms_are_mutually_exclusive() {
        let cfg: ExperimentConfig =
            toml::from_str("[step]\npulse_area = 3.0\npulse_area_pi = 1.0\n").unwrap();
        let err = cfg.step.resolve(&cfg.hardware).unwrap_err();
        assert!(err.to_string().contains("mutually exclusive"), "{err}");

        let cfg: ExperimentConfig =
            toml::from_str("[step]\npulse_duration_us = 91.0\n").unwrap();
        let params = cfg.step.resolve(&cfg.hardware).unwrap();
        // 91 us at g = 2 pi x 5.8 kHz.
        assert!((params.pulse_area - 91e-6 * 2.0 * PI * 5.8e3).abs() < 1e-12);
    }

    #[test]
    fn unknown_and_invalid_fields_are_rejected() {
        let err = toml::from_str::<ExperimentConfig>("[step]\ncontrst = 0.9\n").unwrap_err();
        assert!(err.to_string().contains("contrst"), "{err}");

        let cfg: ExperimentConfig = toml::from_str("repetitions = 20000\n").unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("repetitions"), "{err}");

        let cfg: ExperimentConfig = toml::from_str("[step]\neta_eff = 0.9\n").unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("step:"), "{err}");
    }

    #[test]
    fn provenance_embeds_command_and_resolved_area() {
        let cfg = ExperimentConfig::default();
        let v = cfg.provenance("simulate").unwrap();
        assert_eq!(v["command"], "simulate");
        assert_eq!(v["pulse_area"], serde_json::json!(PI));
        assert_eq!(v["tomography"]["seed"], serde_json::json!(1));
    }
}
