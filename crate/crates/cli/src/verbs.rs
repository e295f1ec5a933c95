//! One function per verb; each fills an in-memory [`Artifacts`] bundle.

use serde_json::json;

use nemsq_core::control::{
    calibrate_gate, phase_gate_run, protocol_basis, reconstruct, run_both, run_protocol, scan_points, scan_t2,
    uncolocated_jumps, phase_jumps, CalibrationConfig, InitialState, ProtocolConfig, PulseSchedule, ScanRow,
    ScheduleKind,
};
use nemsq_core::coupling::{corner_energies, ising_gate_time, landscape_2d, verify_phase_model_2d};
use nemsq_core::double_well::{
    doublet_formation_center, field_unit, gaussian_state, parity, solve_levels, spectrum_scan, DoubleWellParams,
    ScanVariable, Side,
};
use nemsq_core::gates::{fidelity, identity, pauli_x, sqrt_not};
use nemsq_core::mechanics::{feasibility_report, potential_table, quartic_fit};
use nemsq_core::numerics::{discretize_hamiltonian, eigensolve, propagate, SpatialGrid, WavefunctionState};

use crate::config::{config_error, RunConfig, Verb};
use crate::output::{Artifacts, Cell, Table};

pub fn execute(verb: Verb, cfg: &RunConfig) -> anyhow::Result<Artifacts> {
    let mut art = Artifacts::default();
    match verb {
        Verb::Spectrum => spectrum(cfg, &mut art)?,
        Verb::Wavefunctions => wavefunctions(cfg, &mut art)?,
        Verb::GateSearch => gate_search(cfg, &mut art)?,
        Verb::GateRun => gate_run(cfg, &mut art)?,
        Verb::PhaseGate => phase_gate(cfg, &mut art)?,
        Verb::GateTomography => gate_tomography(cfg, &mut art)?,
        Verb::TwoQubit => two_qubit(cfg, &mut art)?,
        Verb::Mechanics => mechanics(cfg, &mut art)?,
        Verb::Feasibility => feasibility(cfg, &mut art)?,
        Verb::Convergence => convergence(cfg, &mut art)?,
        Verb::Sweep => return Err(config_error("verb", "sweeps cannot be nested")),
    }
    Ok(art)
}

fn base_params(cfg: &RunConfig) -> anyhow::Result<DoubleWellParams> {
    Ok(DoubleWellParams::new(cfg.physics.a, cfg.physics.f * field_unit())?)
}

fn schedule(cfg: &RunConfig) -> anyhow::Result<PulseSchedule> {
    let s = &cfg.physics.schedule;
    Ok(PulseSchedule::new(s.kind, s.t1, s.t2, s.ramp_t, s.amplitude)?)
}

fn protocol_config(cfg: &RunConfig) -> ProtocolConfig {
    ProtocolConfig {
        n_points: cfg.numerics.n_points,
        dt: cfg.numerics.dt,
        t3: cfg.numerics.t3,
        trajectory_every: cfg.numerics.trajectory_every,
    }
}

fn spectrum(cfg: &RunConfig, art: &mut Artifacts) -> anyhow::Result<()> {
    let values = cfg.scan.values()?;
    let k = cfg.numerics.k;
    let rows = spectrum_scan(cfg.scan.variable, &values, &base_params(cfg)?, k, cfg.numerics.n_points)?;
    let mut header = vec!["scan_value".to_string()];
    header.extend((0..k).map(|i| format!("E{i}")));
    header.push("flags".into());
    let mut t = Table::with_header("spectrum", header);
    for r in &rows {
        let mut row = vec![Cell::Num(r.value)];
        row.extend(r.energies.iter().map(|&e| Cell::Num(e)));
        row.push(Cell::Text(r.flags.join(";")));
        t.push(row);
    }
    art.table(&t, cfg.output.format)?;
    art.note("rows", rows.len());
    art.note("failed_rows", rows.iter().filter(|r| !r.ok()).count());
    if cfg.scan.variable == ScanVariable::WellSeparation && k >= 3 {
        art.note("doublet_formation_center", doublet_formation_center(&rows));
    }
    Ok(())
}

fn wavefunctions(cfg: &RunConfig, art: &mut Artifacts) -> anyhow::Result<()> {
    let params = base_params(cfg)?;
    let k = cfg.numerics.k;
    let levels = solve_levels(&params, cfg.numerics.n_points, k)?;
    let states = (0..k).map(|i| levels.state(i)).collect::<Result<Vec<_>, _>>()?;
    let gaussians = if params.a > 0.0 {
        Some((gaussian_state(&params, Side::Plus, levels.grid)?, gaussian_state(&params, Side::Minus, levels.grid)?))
    } else {
        None
    };
    let mut header = vec!["x".to_string(), "V".to_string()];
    header.extend((0..k).map(|i| format!("psi{i}")));
    if gaussians.is_some() {
        header.extend(["gauss_plus".to_string(), "gauss_minus".to_string()]);
    }
    let mut t = Table::with_header("wavefunctions", header);
    for (i, x) in levels.grid.positions().enumerate() {
        let mut row = vec![Cell::Num(x), Cell::Num(params.potential(x))];
        row.extend(states.iter().map(|s| Cell::Num(s.amplitudes[i].re)));
        if let Some((p, m)) = &gaussians {
            row.extend([Cell::Num(p.amplitudes[i].re), Cell::Num(m.amplitudes[i].re)]);
        }
        t.push(row);
    }
    let mut lv = Table::new("levels", &["index", "energy", "mean_x", "parity"]);
    for i in 0..k {
        lv.push(vec![
            i.into(),
            levels.result.eigenvalues[i].into(),
            levels.mean_position(i).into(),
            parity(&levels.result.eigenvectors[i]).into(),
        ]);
    }
    art.table(&t, cfg.output.format)?;
    art.table(&lv, cfg.output.format)?;
    art.note("energies", &levels.result.eigenvalues);
    Ok(())
}

fn scan_table(rows: &[ScanRow]) -> Table {
    let mut t = Table::new("scan", &["t2", "mag_plus", "mag_minus", "phase_diff", "stationary", "error"]);
    for r in rows {
        t.push(vec![
            r.t2.into(),
            r.mag_plus.into(),
            r.mag_minus.into(),
            r.phase_diff.into(),
            r.stationary.into(),
            r.error.clone().unwrap_or_default().into(),
        ]);
    }
    t
}

fn gate_search(cfg: &RunConfig, art: &mut Artifacts) -> anyhow::Result<()> {
    let template = schedule(cfg)?;
    if template.kind != ScheduleKind::WellSeparation {
        return Err(config_error("physics.schedule.kind", "gate-search needs a well_separation schedule"));
    }
    let base = base_params(cfg)?;
    let protocol = protocol_config(cfg);
    let g = &cfg.gate;
    let scan = match (g.t2_start, g.t2_end) {
        (Some(a), Some(b)) => Some(scan_t2(&scan_points(a, b, g.t2_step)?, g.initial, &template, &base, &protocol)?),
        (None, None) if g.target.gate().is_none() => {
            let (a, b, step) = nemsq_core::control::DEFAULT_SCAN;
            Some(scan_t2(&scan_points(a, b, step)?, g.initial, &template, &base, &protocol)?)
        }
        (None, None) => None,
        _ => return Err(config_error("gate.t2_end", "give both t2_start and t2_end, or neither")),
    };
    let rows = match g.target.gate() {
        Some(target) => {
            let cal = CalibrationConfig { half_window: g.half_window, scan_step: g.t2_step, t2_tol: g.t2_tol, initial: g.initial };
            let c = calibrate_gate(target, &template, &base, &protocol, &cal, scan)?;
            art.note("target", target);
            art.note("t2_star", c.t2_star);
            art.note("residual", c.residual);
            art.note("bracket", c.bracket);
            art.note("evaluations", c.evaluations);
            c.scan
        }
        None => scan.unwrap_or_default(),
    };
    art.note("phase_jumps", phase_jumps(&rows).len());
    art.note("uncolocated_phase_jumps", uncolocated_jumps(&rows).len());
    art.table(&scan_table(&rows), cfg.output.format)?;
    Ok(())
}

fn gate_run(cfg: &RunConfig, art: &mut Artifacts) -> anyhow::Result<()> {
    let s = schedule(cfg)?;
    let base = base_params(cfg)?;
    let protocol = protocol_config(cfg);
    let r = run_protocol(&InitialState::Side(cfg.gate.initial), &s, &base, &protocol)?;
    let mut traj = Table::new("trajectory", &["t", "schedule_value", "mag_plus", "mag_minus", "phase_diff"]);
    for p in &r.trajectory {
        traj.push(vec![p.t.into(), p.control.into(), p.mag_plus.into(), p.mag_minus.into(), p.phase_diff.into()]);
    }
    let mut term = Table::new("terminal_state", &["x", "re", "im"]);
    for (x, z) in r.terminal_state.grid.positions().zip(&r.terminal_state.amplitudes) {
        term.push(vec![x.into(), z.re.into(), z.im.into()]);
    }
    art.table(&traj, cfg.output.format)?;
    art.table(&term, cfg.output.format)?;
    art.note("t3", r.t3);
    art.note("mag_plus", r.mag_plus);
    art.note("mag_minus", r.mag_minus);
    art.note("phase_diff", r.phase_diff);
    art.note("stationary", r.stationary);
    art.note("variation", r.variation);
    art.note("norm_drift", r.norm_drift);
    Ok(())
}

fn phase_gate(cfg: &RunConfig, art: &mut Artifacts) -> anyhow::Result<()> {
    let p = &cfg.phase_gate;
    let r = phase_gate_run(p.f0, p.t1, p.t2, p.ramp_t, &base_params(cfg)?, &protocol_config(cfg))?;
    let mut t = Table::new("phase_gate", &["f0", "t1", "t2", "t_end", "theta", "theta_minus", "magnitude_change"]);
    t.push(vec![r.f0.into(), r.t1.into(), r.t2.into(), r.t_end.into(), r.theta.into(), r.theta_minus.into(), r.magnitude_change.into()]);
    art.table(&t, cfg.output.format)?;
    art.note("theta", r.theta);
    art.note("warnings", &r.warnings);
    Ok(())
}

fn gate_tomography(cfg: &RunConfig, art: &mut Artifacts) -> anyhow::Result<()> {
    let s = schedule(cfg)?;
    let base = base_params(cfg)?;
    let protocol = ProtocolConfig { trajectory_every: 0, ..protocol_config(cfg) };
    let (plus, minus) = run_both(&s, &base, &protocol)?;
    let basis = protocol_basis(&s, &base, protocol.n_points)?;
    let rec = reconstruct(&plus, &minus, &basis)?;
    let mut m = Table::new("gate", &["row", "col", "re", "im"]);
    for i in 0..2 {
        for j in 0..2 {
            let z = rec.gate.get(i, j);
            m.push(vec![i.into(), j.into(), z.re.into(), z.im.into()]);
        }
    }
    let mut f = Table::new("fidelity", &["gate", "fidelity"]);
    for (name, ideal) in [("i", identity(2)), ("x", pauli_x()), ("sqrt_not_plus", sqrt_not(1.0)), ("sqrt_not_minus", sqrt_not(-1.0))] {
        f.push(vec![name.into(), fidelity(&rec.gate, &ideal)?.into()]);
    }
    art.table(&m, cfg.output.format)?;
    art.table(&f, cfg.output.format)?;
    art.note("leakage", rec.leakage);
    art.note("reliable", rec.reliable);
    art.note("unitarity_error", rec.gate.unitarity_error());
    Ok(())
}

fn two_qubit(cfg: &RunConfig, art: &mut Artifacts) -> anyhow::Result<()> {
    let p = cfg.physics.coupling;
    let q = &cfg.two_qubit;
    let c = corner_energies(&p)?;
    let mut corners = Table::new("corners", &["quantity", "value"]);
    for (name, v) in [
        ("u0", c.u0),
        ("e_plus", c.e_plus),
        ("e_minus", c.e_minus),
        ("ex", c.ex),
        ("approx_error_plus", c.approx_error_plus),
        ("approx_error_minus", c.approx_error_minus),
    ] {
        corners.push(vec![name.into(), v.into()]);
    }
    if c.ex > 0.0 {
        corners.push(vec!["ising_time".into(), ising_gate_time(c.ex)?.into()]);
    }
    let dw = DoubleWellParams::symmetric(p.a)?;
    let grid = SpatialGrid::symmetric(q.landscape_half_width, q.landscape_points)?;
    let land = landscape_2d(&p, &[dw, dw], grid, grid)?;
    let mut lt = Table::new("landscape", &["x1", "x2", "V"]);
    let n2 = land.grid2.len();
    for (i, x1) in land.grid1.positions().enumerate() {
        for (j, x2) in land.grid2.positions().enumerate() {
            lt.push(vec![x1.into(), x2.into(), land.values[i * n2 + j].into()]);
        }
    }
    let mut mt = Table::new(
        "minima",
        &["x1", "x2", "energy", "grid_energy", "corner", "corner_energy", "predicted_shift", "sampling_bound"],
    );
    let sign = |s: Side| if s == Side::Plus { "+" } else { "-" };
    for m in &land.minima {
        mt.push(vec![
            m.x1.into(),
            m.x2.into(),
            m.energy.into(),
            m.grid_energy.into(),
            format!("{}{}", sign(m.corner.0), sign(m.corner.1)).into(),
            m.corner_energy.into(),
            m.predicted_shift.into(),
            m.sampling_bound.into(),
        ]);
    }
    art.table(&corners, cfg.output.format)?;
    art.table(&lt, cfg.output.format)?;
    art.table(&mt, cfg.output.format)?;
    art.note("minima", land.minima.len());
    if q.verify_2d {
        let report = verify_phase_model_2d(&p, q.verify_t, q.verify_points, q.verify_dt)?;
        art.note("phase_error", report.phase_error);
        art.note("magnitude_change", report.magnitude_change);
        art.json("phase_model", &report)?;
    }
    Ok(())
}

fn mechanics(cfg: &RunConfig, art: &mut Artifacts) -> anyhow::Result<()> {
    let geom = cfg.physics.plate;
    let fit = quartic_fit(&geom)?;
    let m = &cfg.mechanics;
    let x_max = (m.range * fit.a_fit).min(0.999 * geom.y0);
    let rows = potential_table(&geom, x_max, m.samples)?;
    let mut t = Table::new("potential", &["x0", "L", "V"]);
    for [x, l, v] in rows {
        t.push(vec![x.into(), l.into(), v.into()]);
    }
    art.table(&t, cfg.output.format)?;
    art.json("fit", &fit)?;
    art.note("residual", fit.residual);
    art.note("lambda_fit", fit.lambda_fit);
    art.note("a_fit", fit.a_fit);
    Ok(())
}

fn feasibility(cfg: &RunConfig, art: &mut Artifacts) -> anyhow::Result<()> {
    let rows = feasibility_report(&cfg.physics.materials)?;
    let mut t = Table::new(
        "feasibility",
        &[
            "mass", "length", "kappa", "lambda", "x_u", "t_u", "x_zpf", "frequency", "length_ok", "displacement_ok",
            "mass_ok", "frequency_ok", "candidate",
        ],
    );
    for r in &rows {
        t.push(vec![
            r.mass.into(),
            r.length.into(),
            r.kappa.into(),
            r.lambda.into(),
            r.x_u.into(),
            r.t_u.into(),
            r.x_zpf.into(),
            r.frequency.into(),
            r.length_ok.into(),
            r.displacement_ok.into(),
            r.mass_ok.into(),
            r.frequency_ok.into(),
            r.candidate.into(),
        ]);
    }
    art.table(&t, cfg.output.format)?;
    art.note("rows", rows.len());
    art.note("candidates", rows.iter().filter(|r| r.candidate).count());
    Ok(())
}

/// Ground energy under grid halving and a propagated state under step halving.
fn convergence(cfg: &RunConfig, art: &mut Artifacts) -> anyhow::Result<()> {
    let n = cfg.numerics.n_points;
    if n < 65 || (n - 1) % 4 != 0 {
        return Err(config_error("numerics.n_points", "convergence needs n_points = 4m + 1 ≥ 65"));
    }
    let params = base_params(cfg)?;
    let half_width = nemsq_core::double_well::default_half_width(params.a);
    let sizes = [(n - 1) / 4 + 1, (n - 1) / 2 + 1, n];
    let energies = sizes
        .iter()
        .map(|&m| {
            let g = SpatialGrid::symmetric(half_width, m)?;
            Ok(eigensolve(&discretize_hamiltonian(&g, |x| params.potential(x))?, 1)?.eigenvalues[0])
        })
        .collect::<anyhow::Result<Vec<f64>>>()?;
    let grid_ratio = (energies[0] - energies[1]) / (energies[1] - energies[2]);

    let coarse = SpatialGrid::symmetric(half_width, sizes[0])?;
    let psi0 = if params.a > 0.0 {
        gaussian_state(&params, Side::Plus, coarse)?
    } else {
        let g: Vec<f64> = coarse.positions().map(|x| (-x * x).exp()).collect();
        WavefunctionState::from_real(coarse, &g)?
    };
    let span = 1.0;
    let dts = [4.0 * cfg.numerics.dt, 2.0 * cfg.numerics.dt, cfg.numerics.dt];
    let states = dts
        .iter()
        .map(|&dt| Ok(propagate(&psi0, |x, _| params.potential(x), span, dt)?))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let dist = |a: usize, b: usize| {
        (states[a].amplitudes.iter().zip(&states[b].amplitudes).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>()
            * coarse.spacing())
        .sqrt()
    };
    let (d01, d12) = (dist(0, 1), dist(1, 2));
    let time_ratio = d01 / d12;

    let mut t = Table::new("convergence", &["study", "n_points", "dt", "value", "ratio"]);
    for (i, (&m, &e)) in sizes.iter().zip(&energies).enumerate() {
        let ratio = if i == 2 { grid_ratio } else { f64::NAN };
        t.push(vec!["grid_E0".into(), m.into(), 0.0.into(), e.into(), ratio.into()]);
    }
    t.push(vec!["time_step_diff".into(), sizes[0].into(), dts[0].into(), d01.into(), f64::NAN.into()]);
    t.push(vec!["time_step_diff".into(), sizes[0].into(), dts[1].into(), d12.into(), time_ratio.into()]);
    art.table(&t, cfg.output.format)?;
    art.note("grid_ratio", grid_ratio);
    art.note("time_ratio", time_ratio);
    art.note("second_order", json!((grid_ratio - 4.0).abs() <= 1.0 && (time_ratio - 4.0).abs() <= 1.0));
    Ok(())
}
