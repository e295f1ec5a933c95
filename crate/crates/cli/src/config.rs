//! Run configuration: JSON file, `--set` overrides and per-verb defaults.

use std::path::{Path, PathBuf};

use anyhow::Context;
use nemsq_core::control::{GateTarget, ScheduleKind, DEFAULT_A0, DEFAULT_DT, DEFAULT_RAMP, DEFAULT_T1};
use nemsq_core::coupling::CouplingParams;
use nemsq_core::double_well::{ScanVariable, Side, DEFAULT_POINTS};
use nemsq_core::mechanics::{Boundary, MaterialRanges, ParamRange, PlateGeometry};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Invalid user input; mapped to exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("configuration error in `{field}`: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

pub fn config_error(field: impl Into<String>, reason: impl Into<String>) -> anyhow::Error {
    ConfigError { field: field.into(), reason: reason.into() }.into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Verb {
    Spectrum,
    Wavefunctions,
    GateSearch,
    GateRun,
    PhaseGate,
    GateTomography,
    TwoQubit,
    Mechanics,
    Feasibility,
    Sweep,
    Convergence,
}

impl Verb {
    pub fn name(self) -> &'static str {
        match self {
            Verb::Spectrum => "spectrum",
            Verb::Wavefunctions => "wavefunctions",
            Verb::GateSearch => "gate-search",
            Verb::GateRun => "gate-run",
            Verb::PhaseGate => "phase-gate",
            Verb::GateTomography => "gate-tomography",
            Verb::TwoQubit => "two-qubit",
            Verb::Mechanics => "mechanics",
            Verb::Feasibility => "feasibility",
            Verb::Sweep => "sweep",
            Verb::Convergence => "convergence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    pub t1: f64,
    pub t2: f64,
    pub ramp_t: f64,
    pub amplitude: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { kind: ScheduleKind::WellSeparation, t1: DEFAULT_T1, t2: 27.02, ramp_t: DEFAULT_RAMP, amplitude: DEFAULT_A0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    /// Well separation A.
    pub a: f64,
    /// Static bias in units of Eᵤ.
    pub f: f64,
    pub schedule: ScheduleConfig,
    pub coupling: CouplingParams,
    pub plate: PlateGeometry,
    pub materials: MaterialRanges,
}

impl Default for Physics {
    fn default() -> Self {
        Physics {
            a: 3.0,
            f: 0.0,
            schedule: ScheduleConfig::default(),
            coupling: CouplingParams { eps0s: 200.0, x_cap: 10.0, v1: 1.0, a: 2.0 },
            plate: PlateGeometry { l0: 1.0, y0: 0.9, kappa: 1.0, boundary: Boundary::Fixed },
            materials: MaterialRanges {
                mass: ParamRange { min: 1e-21, max: 1e-14, count: 8 },
                length: ParamRange { min: 1e-6, max: 1e-4, count: 5 },
                kappa: ParamRange { min: 1e-3, max: 1e3, count: 7 },
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub n_points: usize,
    pub dt: f64,
    /// Number of eigenpairs.
    pub k: usize,
    /// Terminal time of protocol runs; `t2 + 20` when absent.
    pub t3: Option<f64>,
    /// Trajectory sample spacing in units of 0.01 tᵤ.
    pub trajectory_every: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics { n_points: DEFAULT_POINTS, dt: DEFAULT_DT, k: 6, t3: None, trajectory_every: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub variable: ScanVariable,
    pub start: f64,
    pub end: f64,
    pub points: usize,
    /// Explicit values; overrides `start`, `end` and `points`.
    pub values: Option<Vec<f64>>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { variable: ScanVariable::WellSeparation, start: 0.0, end: 3.0, points: 61, values: None }
    }
}

impl ScanConfig {
    pub fn values(&self) -> anyhow::Result<Vec<f64>> {
        if let Some(v) = &self.values {
            if v.is_empty() {
                return Err(config_error("scan.values", "no values given"));
            }
            return Ok(v.clone());
        }
        if self.points == 0 {
            return Err(config_error("scan.points", "must be at least 1"));
        }
        if !(self.start.is_finite() && self.end.is_finite() && self.end >= self.start) {
            return Err(config_error("scan.end", "need finite start ≤ end"));
        }
        if self.points == 1 {
            return Ok(vec![self.start]);
        }
        Ok((0..self.points)
            .map(|i| self.start + (self.end - self.start) * i as f64 / (self.points - 1) as f64)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchTarget {
    SqrtNot,
    Not,
    /// Scan only.
    None,
}

impl SearchTarget {
    pub fn gate(self) -> Option<GateTarget> {
        match self {
            SearchTarget::SqrtNot => Some(GateTarget::SqrtNot),
            SearchTarget::Not => Some(GateTarget::Not),
            SearchTarget::None => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateConfig {
    pub target: SearchTarget,
    pub initial: Side,
    /// Explicit t2 scan; the calibration window around the reference time otherwise.
    pub t2_start: Option<f64>,
    pub t2_end: Option<f64>,
    pub t2_step: f64,
    pub half_window: f64,
    pub t2_tol: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            target: SearchTarget::SqrtNot,
            initial: Side::Plus,
            t2_start: None,
            t2_end: None,
            t2_step: 0.05,
            half_window: 1.0,
            t2_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseGateConfig {
    /// Field amplitude in units of Eᵤ.
    pub f0: f64,
    pub t1: f64,
    pub t2: f64,
    pub ramp_t: f64,
}

impl Default for PhaseGateConfig {
    fn default() -> Self {
        PhaseGateConfig { f0: 0.02, t1: 1.0, t2: 3.0, ramp_t: DEFAULT_RAMP }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoQubitConfig {
    pub landscape_points: usize,
    pub landscape_half_width: f64,
    pub verify_2d: bool,
    pub verify_t: f64,
    pub verify_points: usize,
    pub verify_dt: f64,
}

impl Default for TwoQubitConfig {
    fn default() -> Self {
        TwoQubitConfig {
            landscape_points: 201,
            landscape_half_width: 4.0,
            verify_2d: false,
            verify_t: 5.0,
            verify_points: 256,
            verify_dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MechanicsConfig {
    pub samples: usize,
    /// Table half-range in units of the fitted minimum.
    pub range: f64,
}

impl Default for MechanicsConfig {
    fn default() -> Self {
        MechanicsConfig { samples: 201, range: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub verb: Option<Verb>,
    pub axis: String,
    pub values: Vec<Value>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { verb: None, axis: String::new(), values: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub verb: Option<Verb>,
    pub physics: Physics,
    pub numerics: Numerics,
    pub scan: ScanConfig,
    pub gate: GateConfig,
    pub phase_gate: PhaseGateConfig,
    pub two_qubit: TwoQubitConfig,
    pub mechanics: MechanicsConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

/// Parses `value` as JSON, falling back to a plain string.
pub fn parse_value(value: &str) -> Value {
    serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()))
}

/// Sets the dotted `path` in a JSON object, creating intermediate objects.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> anyhow::Result<()> {
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(config_error(path, "malformed parameter path"));
    }
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| config_error(path, format!("`{}` is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

pub fn from_value(value: Value) -> anyhow::Result<RunConfig> {
    serde_json::from_value(value).map_err(|e| config_error("config", e.to_string()))
}

/// Reads the config file (if any) as a JSON value.
pub fn load_value(path: Option<&Path>) -> anyhow::Result<Value> {
    match path {
        None => Ok(Value::Object(Default::default())),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| config_error("--config", format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| config_error("--config", format!("{}: {e}", p.display())))
        }
    }
}

pub fn to_value(config: &RunConfig) -> anyhow::Result<Value> {
    serde_json::to_value(config).context("serializing configuration")
}
