//! Time-dependent gate protocols driven by tanh pulses of the well separation
//! or of a uniform electric field.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::double_well::{default_grid, field_unit, gaussian_state, DoubleWellParams, Side, DEFAULT_POINTS};
use crate::error::{Error, Result};
use crate::gates::{reconstruct_gate, QubitBasis, Reconstruction};
use crate::numerics::propagate::check_drift;
use crate::numerics::{wrap_phase, CrankNicolson, SpatialGrid, WavefunctionState};

/// Reference gate times for `a₀ = 3`, `t₁ = 20`, `𝒯 = 1/5`.
pub const SQRT_NOT_T2: f64 = 27.02;
pub const NOT_T2: f64 = 28.87;

pub const DEFAULT_A0: f64 = 3.0;
pub const DEFAULT_T1: f64 = 20.0;
pub const DEFAULT_RAMP: f64 = 0.2;
pub const DEFAULT_DT: f64 = 5e-4;
/// `t₃ − t₂` when no terminal time is given.
pub const DEFAULT_SETTLE: f64 = 20.0;
pub const MIN_SETTLE: f64 = 10.0;
pub const STATIONARITY_WINDOW: f64 = 5.0;
pub const STATIONARITY_TOL: f64 = 1e-3;
/// Spacing of magnitude samples used for stationarity and trajectories.
pub const SAMPLE_INTERVAL: f64 = 0.01;
pub const ADIABATICITY_LIMIT: f64 = 1e-2;

const DRIFT_CHECK_EVERY: usize = 4096;
/// Beyond this many ramp times a tanh is exactly ±1 in double precision.
const TANH_SATURATION: f64 = 22.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    WellSeparation,
    ElectricField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub kind: ScheduleKind,
    pub t1: f64,
    pub t2: f64,
    pub ramp_t: f64,
    /// `a₀` (in xᵤ) or `F₀` (in Eᵤ).
    pub amplitude: f64,
}

impl PulseSchedule {
    pub fn new(kind: ScheduleKind, t1: f64, t2: f64, ramp_t: f64, amplitude: f64) -> Result<Self> {
        let s = PulseSchedule { kind, t1, t2, ramp_t, amplitude };
        s.validate()?;
        Ok(s)
    }

    /// Well-separation pulse with `a₀ = 3`, `t₁ = 20`, `𝒯 = 1/5`.
    pub fn default_well_separation(t2: f64) -> Result<Self> {
        Self::new(ScheduleKind::WellSeparation, DEFAULT_T1, t2, DEFAULT_RAMP, DEFAULT_A0)
    }

    pub fn with_t2(&self, t2: f64) -> Result<Self> {
        Self::new(self.kind, self.t1, t2, self.ramp_t, self.amplitude)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.t1, self.t2, self.ramp_t, self.amplitude];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("schedule", "parameters must be finite"));
        }
        if self.t1 <= 0.0 {
            return Err(Error::config("schedule.t1", "must be positive"));
        }
        if self.t2 < self.t1 {
            return Err(Error::config("schedule.t2", format!("t2 = {} precedes t1 = {}", self.t2, self.t1)));
        }
        if self.ramp_t <= 0.0 {
            return Err(Error::config("schedule.ramp_t", "must be positive"));
        }
        match self.kind {
            ScheduleKind::WellSeparation if self.amplitude <= 0.0 => {
                Err(Error::config("schedule.amplitude", "well separation a0 must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let th = |t0: f64| ((t - t0) / self.ramp_t).tanh();
        match self.kind {
            ScheduleKind::WellSeparation => 0.5 * self.amplitude * (th(self.t2) - th(self.t1) + 2.0),
            ScheduleKind::ElectricField => 0.5 * self.amplitude * (th(self.t1) - th(self.t2)),
        }
    }

    /// Time before which the schedule no longer depends on `t2`.
    fn t2_independent_until(&self) -> f64 {
        self.t2 - TANH_SATURATION * self.ramp_t
    }
}

pub fn schedule_value(s: &PulseSchedule, t: f64) -> f64 {
    s.value(t)
}

/// Numerical settings shared by the protocol runners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n_points: usize,
    pub dt: f64,
    /// Terminal time; `t2 + 20` when absent.
    pub t3: Option<f64>,
    /// Record a trajectory sample every this many magnitude samples (0: none).
    pub trajectory_every: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig { n_points: DEFAULT_POINTS, dt: DEFAULT_DT, t3: None, trajectory_every: 0 }
    }
}

#[derive(Debug, Clone)]
pub enum InitialState {
    Side(Side),
    Custom(WavefunctionState),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    /// Schedule value at `t`.
    pub control: f64,
    pub mag_plus: f64,
    pub mag_minus: f64,
    pub phase_diff: f64,
}

#[derive(Debug, Clone)]
pub struct ProtocolResult {
    pub schedule: PulseSchedule,
    pub t3: f64,
    pub terminal_state: WavefunctionState,
    pub mag_plus: f64,
    pub mag_minus: f64,
    /// `arg ψ(a₀) − arg ψ(−a₀)` in `[0, 2π)`.
    pub phase_diff: f64,
    pub stationary: bool,
    /// Relative variation of `(mag_plus, mag_minus)` over the final window.
    pub variation: [f64; 2],
    pub norm_drift: f64,
    pub trajectory: Vec<TrajectorySample>,
}

impl ProtocolResult {
    pub fn mag(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.mag_plus,
            Side::Minus => self.mag_minus,
        }
    }
}

/// Wells at `±a₀` and the static bias of a protocol.
fn qubit_params(s: &PulseSchedule, base: &DoubleWellParams) -> Result<DoubleWellParams> {
    match s.kind {
        ScheduleKind::WellSeparation => DoubleWellParams::new(s.amplitude, base.f),
        ScheduleKind::ElectricField => Ok(*base),
    }
}

/// Grid used by every run of a protocol: the default domain for the wells at `±a₀`.
pub fn protocol_grid(s: &PulseSchedule, base: &DoubleWellParams, n_points: usize) -> Result<SpatialGrid> {
    default_grid(qubit_params(s, base)?.a, n_points)
}

/// Gaussian qubit basis matching [`protocol_grid`].
pub fn protocol_basis(s: &PulseSchedule, base: &DoubleWellParams, n_points: usize) -> Result<QubitBasis> {
    let p = qubit_params(s, base)?;
    QubitBasis::gaussian(&p, protocol_grid(s, base, n_points)?)
}

/// Propagation on the global time lattice `t_k = k·dt`, so that runs sharing
/// a schedule prefix can share the state reached at a lattice point.
struct Engine {
    schedule: PulseSchedule,
    base: DoubleWellParams,
    xs: Vec<f64>,
    dt: f64,
    probe: f64,
    sample_every: usize,
}

impl Engine {
    fn new(schedule: PulseSchedule, base: DoubleWellParams, grid: &SpatialGrid, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::config("numerics.dt", format!("time step must be positive, got {dt}")));
        }
        let probe = qubit_params(&schedule, &base)?.a;
        Ok(Engine {
            schedule,
            base,
            xs: grid.positions().collect(),
            dt,
            probe,
            sample_every: ((SAMPLE_INTERVAL / dt).round() as usize).max(1),
        })
    }

    fn fill_potential(&self, t: f64, v: &mut [f64]) {
        let c = self.schedule.value(t);
        match self.schedule.kind {
            ScheduleKind::WellSeparation => {
                let a2 = c * c;
                for (vi, &x) in v.iter_mut().zip(&self.xs) {
                    let w = x * x - a2;
                    *vi = w * w + self.base.f * x;
                }
            }
            ScheduleKind::ElectricField => {
                let a2 = self.base.a * self.base.a;
                let f = self.base.f + c * field_unit();
                for (vi, &x) in v.iter_mut().zip(&self.xs) {
                    let w = x * x - a2;
                    *vi = w * w + f * x;
                }
            }
        }
    }

    /// `(|ψ(a₀)|, |ψ(−a₀)|, arg ψ(a₀) − arg ψ(−a₀))`.
    fn probe(&self, psi: &WavefunctionState) -> Result<(f64, f64, f64)> {
        let zp = psi.amplitude_at(self.probe)?;
        let zm = psi.amplitude_at(-self.probe)?;
        Ok((zp.norm(), zm.norm(), wrap_phase(zp.arg() - zm.arg())))
    }

    fn sample(&self, psi: &WavefunctionState) -> Result<TrajectorySample> {
        let (mag_plus, mag_minus, phase_diff) = self.probe(psi)?;
        Ok(TrajectorySample { t: psi.time, control: self.schedule.value(psi.time), mag_plus, mag_minus, phase_diff })
    }

    /// Steps from lattice index `k0` (with `psi.time == k0·dt`) up to `t_end`,
    /// finishing with one shorter step when `t_end` is off the lattice.
    /// `observer` sees the state every `sample_every` lattice steps and at the end.
    fn advance(
        &self,
        psi: &mut WavefunctionState,
        k0: usize,
        t_end: f64,
        mut observer: impl FnMut(&WavefunctionState) -> Result<()>,
    ) -> Result<f64> {
        let grid = psi.grid;
        let h = grid.spacing();
        let norm0 = psi.norm_sqr();
        let k_end = ((t_end / self.dt) * (1.0 + 1e-12)).floor() as usize;
        let mut cn = CrankNicolson::new(&grid, self.dt)?;
        let mut v = vec![0.0; self.xs.len()];
        let mut drift = 0.0;
        for k in k0..k_end {
            self.fill_potential((k as f64 + 0.5) * self.dt, &mut v);
            cn.step(&mut psi.amplitudes, &v);
            psi.time = (k + 1) as f64 * self.dt;
            if (k + 1 - k0) % DRIFT_CHECK_EVERY == 0 {
                drift = check_drift(norm0, &psi.amplitudes, h, self.dt)?;
            }
            if (k + 1) % self.sample_every == 0 {
                observer(psi)?;
            }
        }
        let rest = t_end - psi.time;
        if rest > 1e-12 * t_end.max(1.0) {
            let mut last = CrankNicolson::new(&grid, rest)?;
            self.fill_potential(psi.time + 0.5 * rest, &mut v);
            last.step(&mut psi.amplitudes, &v);
            psi.time = t_end;
            observer(psi)?;
        }
        Ok(drift.max(check_drift(norm0, &psi.amplitudes, h, self.dt)?))
    }
}

fn initial_state(
    initial: &InitialState,
    s: &PulseSchedule,
    base: &DoubleWellParams,
    grid: SpatialGrid,
) -> Result<WavefunctionState> {
    let mut psi = match initial {
        InitialState::Side(side) => gaussian_state(&qubit_params(s, base)?, *side, grid)?,
        InitialState::Custom(state) => {
            if state.grid != grid {
                return Err(Error::Dimension("custom initial state is not on the protocol grid".into()));
            }
            state.clone()
        }
    };
    psi.time = 0.0;
    Ok(psi)
}

fn resolve_t3(s: &PulseSchedule, config: &ProtocolConfig) -> Result<f64> {
    let t3 = config.t3.unwrap_or(s.t2 + DEFAULT_SETTLE);
    if !(t3.is_finite() && t3 >= s.t2 + MIN_SETTLE) {
        return Err(Error::config(
            "protocol.t3",
            format!("t3 = {t3} must be at least t2 + {MIN_SETTLE} = {}", s.t2 + MIN_SETTLE),
        ));
    }
    Ok(t3)
}

fn relative_variation(values: &[f64], scale: f64) -> f64 {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if values.is_empty() || scale == 0.0 {
        0.0
    } else {
        (hi - lo) / scale
    }
}

/// Continues `psi` (at lattice index `k0`) to `t3` and extracts the terminal observables.
fn finish_run(engine: &Engine, mut psi: WavefunctionState, k0: usize, t3: f64, trajectory_every: usize) -> Result<ProtocolResult> {
    let window_start = t3 - STATIONARITY_WINDOW;
    let mut window: Vec<(f64, f64)> = Vec::new();
    let mut trajectory = Vec::new();
    let mut count = 0usize;
    if trajectory_every > 0 && k0 == 0 {
        trajectory.push(engine.sample(&psi)?);
    }
    let norm_drift = engine.advance(&mut psi, k0, t3, |state| {
        let in_window = state.time >= window_start - 1e-12;
        let record = trajectory_every > 0 && (count % trajectory_every == 0 || state.time == t3);
        count += 1;
        if in_window || record {
            let sample = engine.sample(state)?;
            if in_window {
                window.push((sample.mag_plus, sample.mag_minus));
            }
            if record {
                trajectory.push(sample);
            }
        }
        Ok(())
    })?;
    let (mag_plus, mag_minus, phase_diff) = engine.probe(&psi)?;
    // Relative to the larger terminal magnitude so a vanishing branch does not blow up the ratio.
    let scale = mag_plus.max(mag_minus);
    let plus: Vec<f64> = window.iter().map(|w| w.0).collect();
    let minus: Vec<f64> = window.iter().map(|w| w.1).collect();
    let variation = [relative_variation(&plus, scale), relative_variation(&minus, scale)];
    Ok(ProtocolResult {
        schedule: engine.schedule,
        t3,
        mag_plus,
        mag_minus,
        phase_diff,
        stationary: variation.iter().all(|v| *v < STATIONARITY_TOL),
        variation,
        norm_drift,
        trajectory,
        terminal_state: psi,
    })
}

/// Propagates `initial` through the pulse `s` up to `t3` and reads off `ψ(±a₀, t₃)`.
pub fn run_protocol(
    initial: &InitialState,
    s: &PulseSchedule,
    base: &DoubleWellParams,
    config: &ProtocolConfig,
) -> Result<ProtocolResult> {
    s.validate()?;
    base.validate()?;
    let t3 = resolve_t3(s, config)?;
    let grid = protocol_grid(s, base, config.n_points)?;
    let engine = Engine::new(*s, *base, &grid, config.dt)?;
    let psi = initial_state(initial, s, base, grid)?;
    let result = finish_run(&engine, psi, 0, t3, config.trajectory_every)?;
    if !result.stationary {
        log::warn!(
            "terminal window not stationary for t2 = {}: relative variation {:.2e}/{:.2e}",
            s.t2,
            result.variation[0],
            result.variation[1]
        );
    }
    Ok(result)
}

/// Runs the protocol from `ψ₊` and from `ψ₋`.
pub fn run_both(s: &PulseSchedule, base: &DoubleWellParams, config: &ProtocolConfig) -> Result<(ProtocolResult, ProtocolResult)> {
    let (p, m) = rayon::join(
        || run_protocol(&InitialState::Side(Side::Plus), s, base, config),
        || run_protocol(&InitialState::Side(Side::Minus), s, base, config),
    );
    Ok((p?, m?))
}

/// Gate matrix on the Gaussian basis from a pair of runs of the same protocol.
pub fn reconstruct(run_plus: &ProtocolResult, run_minus: &ProtocolResult, basis: &QubitBasis) -> Result<Reconstruction> {
    if run_plus.schedule != run_minus.schedule || run_plus.t3 != run_minus.t3 {
        return Err(Error::Dimension("runs use different schedules or terminal times".into()));
    }
    reconstruct_gate(&run_plus.terminal_state, &run_minus.terminal_state, basis)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub t2: f64,
    pub mag_plus: f64,
    pub mag_minus: f64,
    pub phase_diff: f64,
    pub stationary: bool,
    pub error: Option<String>,
}

impl ScanRow {
    fn failed(t2: f64, e: &Error) -> Self {
        ScanRow { t2, mag_plus: f64::NAN, mag_minus: f64::NAN, phase_diff: f64::NAN, stationary: false, error: Some(e.to_string()) }
    }

    pub fn mag(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.mag_plus,
            Side::Minus => self.mag_minus,
        }
    }
}

/// Scan window and step used when none is given.
pub const DEFAULT_SCAN: (f64, f64, f64) = (24.0, 32.0, 0.05);

/// Evenly spaced values from `start` to `end` inclusive with spacing close to `step`.
pub fn scan_points(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && end.is_finite() && step.is_finite() && step > 0.0 && end >= start) {
        return Err(Error::config("scan", format!("invalid range [{start}, {end}] step {step}")));
    }
    let n = ((end - start) / step - 1e-9).ceil().max(0.0) as usize;
    Ok((0..=n).map(|i| if n == 0 { start } else { start + (end - start) * i as f64 / n as f64 }).collect())
}

/// Runs the protocol for each `t2` in `t2_values`; runs share the propagation
/// up to the point where the schedules first differ.
pub fn scan_t2(
    t2_values: &[f64],
    initial: Side,
    template: &PulseSchedule,
    base: &DoubleWellParams,
    config: &ProtocolConfig,
) -> Result<Vec<ScanRow>> {
    template.validate()?;
    base.validate()?;
    if template.kind != ScheduleKind::WellSeparation {
        return Err(Error::config("schedule.kind", "t2 scans apply to well-separation pulses"));
    }
    let lo = template.t1 + 2.0 * template.ramp_t;
    let hi = template.t1 + 40.0;
    if let Some(bad) = t2_values.iter().find(|t| !(**t >= lo - 1e-12 && **t <= hi + 1e-12)) {
        return Err(Error::config("scan.range", format!("t2 = {bad} outside [{lo}, {hi}]")));
    }
    if t2_values.is_empty() {
        return Ok(Vec::new());
    }
    let grid = protocol_grid(template, base, config.n_points)?;
    let t2_min = t2_values.iter().copied().fold(f64::INFINITY, f64::min);
    let first = template.with_t2(t2_min)?;
    let shared_until = first.t2_independent_until();
    let mut psi = initial_state(&InitialState::Side(initial), &first, base, grid)?;
    let mut k_shared = 0usize;
    if shared_until > 0.0 {
        let engine = Engine::new(first, *base, &grid, config.dt)?;
        k_shared = (shared_until / config.dt).floor() as usize;
        if k_shared > 0 {
            engine.advance(&mut psi, 0, k_shared as f64 * config.dt, |_| Ok(()))?;
            // advance may end on a short step; keep the lattice exact.
            psi.time = k_shared as f64 * config.dt;
        }
    }
    let rows = t2_values
        .par_iter()
        .map(|&t2| {
            let run = || -> Result<ProtocolResult> {
                let s = template.with_t2(t2)?;
                let t3 = resolve_t3(&s, &ProtocolConfig { t3: None, ..*config })?;
                let engine = Engine::new(s, *base, &grid, config.dt)?;
                finish_run(&engine, psi.clone(), k_shared, t3, 0)
            };
            match run() {
                Ok(r) => ScanRow {
                    t2,
                    mag_plus: r.mag_plus,
                    mag_minus: r.mag_minus,
                    phase_diff: r.phase_diff,
                    stationary: r.stationary,
                    error: None,
                },
                Err(e) => ScanRow::failed(t2, &e),
            }
        })
        .collect();
    Ok(rows)
}

/// Wrapped phase increments larger than this count as jumps.
pub const PHASE_JUMP_THRESHOLD: f64 = 0.5 * PI;

/// Indices `i` such that `phase_diff` jumps between rows `i` and `i + 1`.
pub fn phase_jumps(rows: &[ScanRow]) -> Vec<usize> {
    rows.windows(2)
        .enumerate()
        .filter(|(_, w)| {
            let d = w[1].phase_diff - w[0].phase_diff;
            let d = d - (d / (2.0 * PI)).round() * 2.0 * PI;
            d.abs() > PHASE_JUMP_THRESHOLD
        })
        .map(|(i, _)| i)
        .collect()
}

/// Rows at which `mag_plus` or `mag_minus` has a local minimum.
pub fn magnitude_minima(rows: &[ScanRow]) -> Vec<usize> {
    (1..rows.len().saturating_sub(1))
        .filter(|&i| {
            [Side::Plus, Side::Minus]
                .iter()
                .any(|&s| rows[i].mag(s) < rows[i - 1].mag(s) && rows[i].mag(s) < rows[i + 1].mag(s))
        })
        .collect()
}

/// Jumps with no magnitude minimum within one scan step.
pub fn uncolocated_jumps(rows: &[ScanRow]) -> Vec<usize> {
    let minima = magnitude_minima(rows);
    phase_jumps(rows)
        .into_iter()
        .filter(|&i| !minima.iter().any(|&m| m + 1 >= i && m <= i + 2))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateTarget {
    SqrtNot,
    Not,
}

impl GateTarget {
    pub fn nominal_t2(self) -> f64 {
        match self {
            GateTarget::SqrtNot => SQRT_NOT_T2,
            GateTarget::Not => NOT_T2,
        }
    }

    /// Objective on a run started from `start`: the root of `stay − flip`, or
    /// the minimum of `stay`.
    fn objective(self, start: Side, mag: impl Fn(Side) -> f64) -> f64 {
        match self {
            GateTarget::SqrtNot => mag(start) - mag(start.opposite()),
            GateTarget::Not => mag(start),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    /// Scan window around the reference time.
    pub half_window: f64,
    pub scan_step: f64,
    /// Stop once the bracket is narrower than this.
    pub t2_tol: f64,
    pub initial: Side,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig { half_window: 1.0, scan_step: 0.05, t2_tol: 1e-6, initial: Side::Plus }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub target: GateTarget,
    pub t2_star: f64,
    /// `|mag_plus − mag_minus|` for √NOT, the remaining `mag_plus` for NOT
    /// (for runs started from ψ₋ the roles of the branches are exchanged).
    pub residual: f64,
    pub bracket: (f64, f64),
    pub evaluations: usize,
    pub scan: Vec<ScanRow>,
}

/// Searches `t2` for the √NOT (equal split) or NOT (vanishing initial branch) condition.
///
/// The bracket nearest the reference time is refined; every evaluation is a
/// full deterministic run, so repeated calls return identical results.
pub fn calibrate_gate(
    target: GateTarget,
    template: &PulseSchedule,
    base: &DoubleWellParams,
    protocol: &ProtocolConfig,
    cal: &CalibrationConfig,
    scan: Option<Vec<ScanRow>>,
) -> Result<Calibration> {
    let nominal = target.nominal_t2();
    let start = cal.initial;
    let scan = match scan {
        Some(rows) => rows,
        None => {
            let lo = (nominal - cal.half_window).max(template.t1 + 2.0 * template.ramp_t);
            let pts = scan_points(lo, nominal + cal.half_window, cal.scan_step)?;
            scan_t2(&pts, start, template, base, protocol)?
        }
    };
    let f = |r: &ScanRow| target.objective(start, |s| r.mag(s));
    let valid: Vec<&ScanRow> = scan.iter().filter(|r| r.error.is_none()).collect();
    let mut evaluations = 0usize;
    let mut eval = |t2: f64| -> Result<f64> {
        evaluations += 1;
        let s = template.with_t2(t2)?;
        let r = run_protocol(&InitialState::Side(start), &s, base, &ProtocolConfig { t3: None, trajectory_every: 0, ..*protocol })?;
        Ok(target.objective(start, |side| r.mag(side)))
    };
    let diagnostic = |what: &str| {
        let table: Vec<String> = scan.iter().map(|r| format!("{:.4} {:.5} {:.5}", r.t2, r.mag_plus, r.mag_minus)).collect();
        Error::Calibration(format!("{what}; scan (t2 mag_plus mag_minus):\n{}", table.join("\n")))
    };
    let dist = |a: f64, b: f64| (0.5 * (a + b) - nominal).abs();

    let (t2_star, residual, bracket) = match target {
        GateTarget::SqrtNot => {
            let bracket = valid
                .windows(2)
                .filter(|w| f(w[0]).signum() != f(w[1]).signum() || f(w[0]) == 0.0)
                .map(|w| (w[0].t2, w[1].t2, f(w[0])))
                .min_by(|a, b| dist(a.0, a.1).total_cmp(&dist(b.0, b.1)))
                .ok_or_else(|| diagnostic("no sign change of mag_plus − mag_minus in the scan"))?;
            let (mut a, mut b, mut fa) = bracket;
            while b - a > cal.t2_tol {
                let m = 0.5 * (a + b);
                let fm = eval(m)?;
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            let t = 0.5 * (a + b);
            (t, eval(t)?.abs(), (bracket.0, bracket.1))
        }
        GateTarget::Not => {
            let i = (1..valid.len().saturating_sub(1))
                .filter(|&i| f(valid[i]) <= f(valid[i - 1]) && f(valid[i]) <= f(valid[i + 1]))
                .min_by(|&i, &j| (valid[i].t2 - nominal).abs().total_cmp(&(valid[j].t2 - nominal).abs()))
                .ok_or_else(|| diagnostic("no interior minimum of the initial-branch magnitude in the scan"))?;
            let (mut a, mut b) = (valid[i - 1].t2, valid[i + 1].t2);
            let bracket = (a, b);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let mut fc = eval(c)?;
            let mut fd = eval(d)?;
            while b - a > cal.t2_tol {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = eval(c)?;
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = eval(d)?;
                }
            }
            let t = 0.5 * (a + b);
            (t, eval(t)?, bracket)
        }
    };
    Ok(Calibration { target, t2_star, residual, bracket, evaluations, scan })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGateResult {
    pub f0: f64,
    pub t1: f64,
    pub t2: f64,
    pub t_end: f64,
    /// `−2 arg⟨ψ_ref|ψ_F⟩` for the run started from ψ₊: the σ_z rotation angle.
    pub theta: f64,
    /// The same quantity for the run started from ψ₋.
    pub theta_minus: f64,
    /// Largest relative change of `|ψ(±a₀, t_end)|` against the field-free runs.
    pub magnitude_change: f64,
    pub warnings: Vec<String>,
}

/// Smallest well separation for which the Gaussian states serve as qubit states.
pub const PHASE_GATE_MIN_A: f64 = 2.5;

/// Drives a transient field `F₀` (in Eᵤ) between `t1` and `t2` and measures
/// the phase of each well state relative to a field-free run over the same window.
pub fn phase_gate_run(
    f0: f64,
    t1: f64,
    t2: f64,
    ramp_t: f64,
    base: &DoubleWellParams,
    config: &ProtocolConfig,
) -> Result<PhaseGateResult> {
    base.validate()?;
    if base.a < PHASE_GATE_MIN_A {
        return Err(Error::config("physics.a", format!("phase gates need A ≥ {PHASE_GATE_MIN_A}, got {}", base.a)));
    }
    let pulse = PulseSchedule::new(ScheduleKind::ElectricField, t1, t2, ramp_t, f0)?;
    let reference = PulseSchedule { amplitude: 0.0, ..pulse };
    let t_end = config.t3.unwrap_or((t2 + 10.0 * ramp_t).max(5.0));
    if t_end < t2 {
        return Err(Error::config("protocol.t3", "must not precede t2"));
    }
    let grid = protocol_grid(&pulse, base, config.n_points)?;
    let run = |s: PulseSchedule, side: Side| -> Result<(WavefunctionState, f64)> {
        let engine = Engine::new(s, *base, &grid, config.dt)?;
        let mut psi = gaussian_state(base, side, grid)?;
        engine.advance(&mut psi, 0, t_end, |_| Ok(()))?;
        let m = psi.amplitude_at(side.sign() * base.a)?.norm();
        Ok((psi, m))
    };
    let jobs = [(pulse, Side::Plus), (reference, Side::Plus), (pulse, Side::Minus), (reference, Side::Minus)];
    let out: Vec<Result<(WavefunctionState, f64)>> = jobs.par_iter().map(|&(s, side)| run(s, side)).collect();
    let out = out.into_iter().collect::<Result<Vec<_>>>()?;
    let angle = |driven: &(WavefunctionState, f64), free: &(WavefunctionState, f64)| -2.0 * free.0.inner(&driven.0).arg();
    let change = |driven: &(WavefunctionState, f64), free: &(WavefunctionState, f64)| (driven.1 - free.1).abs() / free.1;
    let magnitude_change = change(&out[0], &out[1]).max(change(&out[2], &out[3]));
    let mut warnings = Vec::new();
    if magnitude_change > ADIABATICITY_LIMIT {
        let w = format!("magnitude changed by {magnitude_change:.3e}; the field pulse is not adiabatic");
        log::warn!("{w}");
        warnings.push(w);
    }
    Ok(PhaseGateResult {
        f0,
        t1,
        t2,
        t_end,
        theta: angle(&out[0], &out[1]),
        theta_minus: angle(&out[2], &out[3]),
        magnitude_change,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{fidelity, identity};
    use proptest::prelude::*;

    fn quick() -> ProtocolConfig {
        ProtocolConfig { n_points: 513, dt: 2e-3, t3: None, trajectory_every: 0 }
    }

    #[test]
    fn schedule_limits() {
        let s = PulseSchedule::default_well_separation(30.0).unwrap();
        assert!((s.value(0.0) - 3.0).abs() < 1e-12);
        assert!(s.value(25.0).abs() < 1e-12);
        assert!((s.value(60.0) - 3.0).abs() < 1e-12);
        let f = PulseSchedule::new(ScheduleKind::ElectricField, 5.0, 15.0, 0.2, 0.1).unwrap();
        assert!(f.value(0.0).abs() < 1e-12);
        assert!((f.value(10.0) - 0.1).abs() < 1e-12);
        assert!(f.value(25.0).abs() < 1e-12);
    }

    #[test]
    fn schedule_validation() {
        assert!(PulseSchedule::new(ScheduleKind::WellSeparation, 0.0, 1.0, 0.2, 3.0).is_err());
        assert!(PulseSchedule::new(ScheduleKind::WellSeparation, 2.0, 1.0, 0.2, 3.0).is_err());
        assert!(PulseSchedule::new(ScheduleKind::WellSeparation, 1.0, 2.0, 0.0, 3.0).is_err());
        assert!(PulseSchedule::new(ScheduleKind::WellSeparation, 1.0, 2.0, 0.2, -3.0).is_err());
        let s = PulseSchedule::default_well_separation(30.0).unwrap();
        let cfg = ProtocolConfig { t3: Some(35.0), ..quick() };
        assert!(run_protocol(&InitialState::Side(Side::Plus), &s, &DoubleWellParams::symmetric(3.0).unwrap(), &cfg)
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn identity_schedule_keeps_eigenstate() {
        let base = DoubleWellParams::symmetric(3.0).unwrap();
        let s = PulseSchedule::default_well_separation(DEFAULT_T1).unwrap();
        let cfg = ProtocolConfig { n_points: DEFAULT_POINTS, ..quick() };
        let grid = protocol_grid(&s, &base, DEFAULT_POINTS).unwrap();
        let levels = crate::double_well::solve_on_grid(&base, grid, 2).unwrap();
        let ground = levels.state(0).unwrap();
        // The pulse with t2 = t1 cancels exactly; only the ground-state phase accrues.
        let r = run_protocol(&InitialState::Custom(ground.clone()), &s, &base, &cfg).unwrap();
        assert!(r.terminal_state.inner(&ground).norm() > 1.0 - 1e-6);
        let (g, m) = run_both(&s, &base, &cfg).unwrap();
        assert!(g.mag_minus < 1e-3, "{}", g.mag_minus);
        let basis = protocol_basis(&s, &base, DEFAULT_POINTS).unwrap();
        let rec = reconstruct(&g, &m, &basis).unwrap();
        assert!(fidelity(&rec.gate, &identity(2)).unwrap() > 0.999);
    }

    #[test]
    fn mirror_symmetry() {
        let base = DoubleWellParams::symmetric(3.0).unwrap();
        let s = PulseSchedule::default_well_separation(26.0).unwrap();
        let cfg = ProtocolConfig { t3: Some(36.5), ..quick() };
        let p = run_protocol(&InitialState::Side(Side::Plus), &s, &base, &cfg).unwrap();
        let m = run_protocol(&InitialState::Side(Side::Minus), &s, &base, &cfg).unwrap();
        let mirrored = m.terminal_state.mirrored();
        let diff = p
            .terminal_state
            .amplitudes
            .iter()
            .zip(&mirrored.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-6, "{diff}");
        assert!((p.mag_plus - m.mag_minus).abs() < 1e-9);
    }

    #[test]
    fn scan_shares_prefix_exactly() {
        let base = DoubleWellParams::symmetric(3.0).unwrap();
        let template = PulseSchedule::default_well_separation(27.0).unwrap();
        let cfg = ProtocolConfig { n_points: 257, dt: 4e-3, ..quick() };
        let rows = scan_t2(&[26.0, 27.0], Side::Plus, &template, &base, &cfg).unwrap();
        let direct = run_protocol(&InitialState::Side(Side::Plus), &template.with_t2(27.0).unwrap(), &base, &cfg).unwrap();
        assert_eq!(rows[1].mag_plus, direct.mag_plus);
        assert_eq!(rows[1].phase_diff, direct.phase_diff);
        assert!(scan_t2(&[19.0], Side::Plus, &template, &base, &cfg).unwrap_err().is_config());
    }

    #[test]
    fn phase_jump_helpers() {
        let row = |t2, p, m, ph| ScanRow { t2, mag_plus: p, mag_minus: m, phase_diff: ph, stationary: true, error: None };
        let rows = vec![row(0.0, 0.5, 0.5, 0.1), row(1.0, 0.1, 0.5, 0.2), row(2.0, 0.5, 0.5, 3.5), row(3.0, 0.5, 0.5, 3.6)];
        assert_eq!(phase_jumps(&rows), vec![1]);
        assert_eq!(magnitude_minima(&rows), vec![1]);
        assert!(uncolocated_jumps(&rows).is_empty());
        let wrap = vec![row(0.0, 0.5, 0.5, 6.2), row(1.0, 0.5, 0.5, 0.1)];
        assert!(phase_jumps(&wrap).is_empty());
    }

    #[test]
    fn scan_points_cover_range() {
        let p = scan_points(24.0, 32.0, 0.05).unwrap();
        assert_eq!(p.len(), 161);
        assert_eq!(*p.last().unwrap(), 32.0);
        assert!(scan_points(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn field_free_phase_gate_is_identity() {
        let base = DoubleWellParams::symmetric(3.0).unwrap();
        let r = phase_gate_run(0.0, 1.0, 2.0, 0.2, &base, &quick()).unwrap();
        assert_eq!(r.theta, 0.0);
        assert_eq!(r.magnitude_change, 0.0);
        assert!(phase_gate_run(0.1, 1.0, 2.0, 0.2, &DoubleWellParams::symmetric(2.0).unwrap(), &quick()).is_err());
    }

    #[test]
    fn phase_gate_follows_first_order_shift() {
        let base = DoubleWellParams::symmetric(3.0).unwrap();
        let f0 = 0.02;
        let mut last = 0.0;
        for width in [0.5, 1.0, 1.5] {
            let r = phase_gate_run(f0, 1.0, 1.0 + width, 0.2, &base, &quick()).unwrap();
            // First-order Stark shift a₀F of each localized level, doubled.
            let oracle = 2.0 * base.a * f0 * field_unit() * width;
            assert!((r.theta - oracle).abs() < 0.03 * oracle, "{} vs {oracle}", r.theta);
            // The second-order shift is common to both wells.
            assert!((r.theta + r.theta_minus).abs() < 1e-3 * oracle);
            assert!(r.theta > last);
            assert!(r.magnitude_change < ADIABATICITY_LIMIT);
            last = r.theta;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn schedule_stays_in_range(t1 in 0.1..30.0f64, gap in 0.0..20.0f64, ramp in 0.01..2.0f64, a in 0.1..5.0f64, t in 0.0..80.0f64) {
            for kind in [ScheduleKind::WellSeparation, ScheduleKind::ElectricField] {
                let s = PulseSchedule::new(kind, t1, t1 + gap, ramp, a).unwrap();
                let v = s.value(t);
                prop_assert!(v >= -1e-15 && v <= a * (1.0 + 1e-6));
            }
        }
    }
}
