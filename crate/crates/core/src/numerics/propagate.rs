//! Crank–Nicolson propagation of the one-dimensional Schrödinger equation.

use num_complex::Complex64;

use super::grid::{SpatialGrid, WavefunctionState};
use crate::error::{Error, Result};

/// Largest tolerated departure of `‖ψ‖²` from its initial value.
pub const NORM_DRIFT_LIMIT: f64 = 1e-8;

const DRIFT_CHECK_EVERY: usize = 4096;

/// One implicit mid-point step `(1 + iHdt/2) ψ' = (1 − iHdt/2) ψ`.
///
/// Buffers are reused across steps; the potential is supplied per step as
/// node values so callers decide where in time it is evaluated.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    dt: f64,
    kinetic_diag: f64,
    kinetic_off: f64,
    rhs: Vec<Complex64>,
    c_prime: Vec<Complex64>,
}

impl CrankNicolson {
    pub fn new(grid: &SpatialGrid, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::config("numerics.dt", format!("time step must be positive, got {dt}")));
        }
        let h2 = grid.spacing() * grid.spacing();
        Ok(CrankNicolson {
            dt,
            kinetic_diag: 1.0 / h2,
            kinetic_off: -0.5 / h2,
            rhs: vec![Complex64::new(0.0, 0.0); grid.len()],
            c_prime: vec![Complex64::new(0.0, 0.0); grid.len()],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `psi` by one step with potential node values `v`.
    pub fn step(&mut self, psi: &mut [Complex64], v: &[f64]) {
        let n = psi.len();
        debug_assert_eq!(v.len(), n);
        let half = 0.5 * self.dt;
        let off = Complex64::new(0.0, half * self.kinetic_off);

        for i in 0..n {
            let hd = self.kinetic_diag + v[i];
            let mut neighbours = Complex64::new(0.0, 0.0);
            if i > 0 {
                neighbours += psi[i - 1];
            }
            if i + 1 < n {
                neighbours += psi[i + 1];
            }
            // (1 − iHdt/2)ψ
            self.rhs[i] = psi[i] - Complex64::new(0.0, half) * (psi[i] * hd + neighbours * self.kinetic_off);
        }

        // Thomas sweep; the off-diagonal is constant.
        let b0 = Complex64::new(1.0, half * (self.kinetic_diag + v[0]));
        self.c_prime[0] = off / b0;
        psi[0] = self.rhs[0] / b0;
        for i in 1..n {
            let b = Complex64::new(1.0, half * (self.kinetic_diag + v[i]));
            let m = b - off * self.c_prime[i - 1];
            self.c_prime[i] = off / m;
            psi[i] = (self.rhs[i] - off * psi[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            let next = psi[i + 1];
            psi[i] -= self.c_prime[i] * next;
        }
    }
}

/// Number of uniform steps covering `span` with steps no longer than `dt`.
pub fn step_count(span: f64, dt: f64) -> usize {
    let raw = span / dt;
    let rounded = raw.round();
    if (raw - rounded).abs() <= 1e-9 * raw.max(1.0) {
        rounded.max(1.0) as usize
    } else {
        raw.ceil() as usize
    }
}

pub(crate) fn check_drift(norm0: f64, psi: &[Complex64], h: f64, dt: f64) -> Result<f64> {
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * h;
    let drift = (norm - norm0).abs();
    if !drift.is_finite() || drift > NORM_DRIFT_LIMIT {
        return Err(Error::Instability { drift, dt });
    }
    Ok(drift)
}

/// Advances `state` to `t_end` under the time-dependent potential `V(x, t)`.
pub fn propagate(
    state: &WavefunctionState,
    potential_at_time: impl Fn(f64, f64) -> f64,
    t_end: f64,
    dt: f64,
) -> Result<WavefunctionState> {
    propagate_sampled(state, potential_at_time, t_end, dt, 0, |_| {})
}

/// As [`propagate`], additionally handing the state to `observer` at the start
/// and after every `stride` steps (`stride == 0` disables sampling).
pub fn propagate_sampled(
    state: &WavefunctionState,
    potential_at_time: impl Fn(f64, f64) -> f64,
    t_end: f64,
    dt: f64,
    stride: usize,
    mut observer: impl FnMut(&WavefunctionState),
) -> Result<WavefunctionState> {
    if !(t_end.is_finite() && t_end > state.time) {
        return Err(Error::config(
            "t_end",
            format!("must exceed the current time {} (got {t_end})", state.time),
        ));
    }
    let grid = state.grid;
    let mut cn = CrankNicolson::new(&grid, dt)?;
    let t0 = state.time;
    let steps = step_count(t_end - t0, dt);
    let dt_eff = (t_end - t0) / steps as f64;
    cn.dt = dt_eff;

    let xs: Vec<f64> = grid.positions().collect();
    let mut v = vec![0.0; xs.len()];
    let mut out = state.clone();
    let norm0 = out.norm_sqr();
    if stride > 0 {
        observer(&out);
    }
    for k in 0..steps {
        let t_mid = t0 + (k as f64 + 0.5) * dt_eff;
        for (vi, &x) in v.iter_mut().zip(&xs) {
            *vi = potential_at_time(x, t_mid);
        }
        cn.step(&mut out.amplitudes, &v);
        out.time = if k + 1 == steps { t_end } else { t0 + (k + 1) as f64 * dt_eff };
        if (k + 1) % DRIFT_CHECK_EVERY == 0 {
            check_drift(norm0, &out.amplitudes, grid.spacing(), dt_eff)?;
        }
        if stride > 0 && (k + 1) % stride == 0 {
            observer(&out);
        }
    }
    check_drift(norm0, &out.amplitudes, grid.spacing(), dt_eff)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::eigen::{discretize_hamiltonian, eigensolve};

    fn ground_state(grid: SpatialGrid, v: impl Fn(f64) -> f64) -> (f64, WavefunctionState) {
        let op = discretize_hamiltonian(&grid, v).unwrap();
        let res = eigensolve(&op, 1).unwrap();
        (
            res.eigenvalues[0],
            WavefunctionState::from_real(grid, &res.eigenvectors[0]).unwrap(),
        )
    }

    #[test]
    fn harmonic_ground_state_is_stationary() {
        let grid = SpatialGrid::symmetric(10.0, 1025).unwrap();
        let (_, psi) = ground_state(grid, |x| 0.5 * x * x);
        let period = std::f64::consts::TAU;
        let out = propagate(&psi, |x, _| 0.5 * x * x, period, 1e-3).unwrap();
        assert!((psi.inner(&out).norm() - 1.0).abs() < 1e-6);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
        assert_eq!(out.time, period);
    }

    #[test]
    fn eigenstate_phase_is_minus_energy_times_time() {
        let grid = SpatialGrid::symmetric(8.0, 1025).unwrap();
        let v = |x: f64| (x * x - 4.0).powi(2);
        let (e0, psi) = ground_state(grid, v);
        let t = 2.0;
        let out = propagate(&psi, |x, _| v(x), t, 5e-4).unwrap();
        let phase = psi.inner(&out).arg();
        let expected = (-e0 * t).rem_euclid(std::f64::consts::TAU);
        let mut diff = (phase.rem_euclid(std::f64::consts::TAU) - expected).abs();
        diff = diff.min(std::f64::consts::TAU - diff);
        assert!(diff < 1e-4, "phase error {diff}");
    }

    #[test]
    fn free_packet_moves_at_its_group_velocity() {
        let grid = SpatialGrid::symmetric(20.0, 2049).unwrap();
        let k0 = 2.0;
        let psi = WavefunctionState::from_fn(grid, |x| {
            Complex64::from_polar((-(x + 5.0).powi(2) / 2.0).exp(), k0 * x)
        })
        .unwrap();
        let out = propagate(&psi, |_, _| 0.0, 2.5, 1e-3).unwrap();
        assert!((out.expectation_x() - 0.0).abs() < 1e-2);
    }

    #[test]
    fn rejects_non_positive_interval_and_step() {
        let grid = SpatialGrid::symmetric(4.0, 64).unwrap();
        let psi = WavefunctionState::from_fn(grid, |x| Complex64::new((-x * x).exp(), 0.0)).unwrap();
        assert!(propagate(&psi, |_, _| 0.0, 0.0, 1e-3).is_err());
        assert!(propagate(&psi, |_, _| 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn non_finite_potential_is_reported_as_instability() {
        let grid = SpatialGrid::symmetric(4.0, 64).unwrap();
        let psi = WavefunctionState::from_fn(grid, |x| Complex64::new((-x * x).exp(), 0.0)).unwrap();
        let err = propagate(&psi, |_, _| f64::NAN, 0.1, 1e-3).unwrap_err();
        assert!(matches!(err, Error::Instability { .. }));
    }

    #[test]
    fn sampling_stride() {
        let grid = SpatialGrid::symmetric(4.0, 64).unwrap();
        let psi = WavefunctionState::from_fn(grid, |x| Complex64::new((-x * x).exp(), 0.0)).unwrap();
        let mut times = Vec::new();
        propagate_sampled(&psi, |x, _| x * x, 0.1, 1e-3, 25, |s| times.push(s.time)).unwrap();
        assert_eq!(times.len(), 5);
        assert_eq!(times[0], 0.0);
        assert_eq!(*times.last().unwrap(), 0.1);
    }

    #[test]
    fn step_count_rounding() {
        assert_eq!(step_count(1.0, 1e-3), 1000);
        assert_eq!(step_count(0.1, 0.03), 4);
        assert_eq!(step_count(47.02, 5e-4), 94040);
    }
}
