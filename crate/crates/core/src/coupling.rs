//! Capacitive coupling of two plates: pair potential, corner energies, the
//! two-dimensional landscape and a direct check of the diagonal phase model.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::double_well::{DoubleWellParams, HarmonicApprox, Side};
use crate::error::{Error, Result};
use crate::numerics::grid::cubic_stencil;
use crate::numerics::propagate::step_count;
use crate::numerics::{CrankNicolson, SpatialGrid, NORM_DRIFT_LIMIT};

/// Parallel-plate coupling; all quantities in the dimensionless units of the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    /// Permittivity times plate area.
    pub eps0s: f64,
    pub x_cap: f64,
    pub v1: f64,
    /// Well displacement.
    pub a: f64,
}

impl CouplingParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.eps0s, self.x_cap, self.v1, self.a].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("physics.coupling", "parameters must be finite"));
        }
        if self.eps0s <= 0.0 {
            return Err(Error::config("physics.coupling.eps0s", "must be positive"));
        }
        if self.v1 < 0.0 {
            return Err(Error::config("physics.coupling.v1", "must be non-negative"));
        }
        if self.a < 0.0 {
            return Err(Error::config("physics.coupling.a", "must be non-negative"));
        }
        if self.x_cap <= 2.0 * self.a {
            return Err(Error::config(
                "physics.coupling.x_cap",
                format!("plate separation {} must exceed 2a = {}", self.x_cap, 2.0 * self.a),
            ));
        }
        Ok(())
    }

    /// `ε₀S·V₁²/2`.
    pub fn charge_energy(&self) -> f64 {
        0.5 * self.eps0s * self.v1 * self.v1
    }
}

fn coupling_term(p: &CouplingParams, x1: f64, x2: f64) -> Result<f64> {
    let gap = p.x_cap + x1 - x2;
    if !(gap > 0.0) {
        return Err(Error::Domain(format!("plate gap X_cap + x1 − x2 = {gap} is not positive (singular capacitance)")));
    }
    Ok(p.charge_energy() / gap)
}

/// `V_DW(x1) + V_DW(x2) + ε₀S·V₁²/(2(X_cap + x1 − x2))`.
pub fn pair_potential(p: &CouplingParams, dw: &[DoubleWellParams; 2], x1: f64, x2: f64) -> Result<f64> {
    Ok(dw[0].potential(x1) + dw[1].potential(x2) + coupling_term(p, x1, x2)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerEnergies {
    /// At `(a, a)` and `(−a, −a)`.
    pub u0: f64,
    /// At `(a, −a)`.
    pub e_plus: f64,
    /// At `(−a, a)`.
    pub e_minus: f64,
    /// First-order splitting `a·ε₀S·V₁²/X_cap²`.
    pub ex: f64,
    /// `|(E₊ − U₀) + E_X| / |E₊ − U₀|`.
    pub approx_error_plus: f64,
    /// `|(E₋ − U₀) − E_X| / |E₋ − U₀|`.
    pub approx_error_minus: f64,
}

impl CornerEnergies {
    /// Energy of the branch `(σ₁a, σ₂a)`.
    pub fn branch(&self, s1: Side, s2: Side) -> f64 {
        match (s1, s2) {
            (Side::Plus, Side::Minus) => self.e_plus,
            (Side::Minus, Side::Plus) => self.e_minus,
            _ => self.u0,
        }
    }
}

pub fn corner_energies(p: &CouplingParams) -> Result<CornerEnergies> {
    p.validate()?;
    let c = p.charge_energy();
    let x = p.x_cap;
    let u0 = c / x;
    let e_plus = c / (x + 2.0 * p.a);
    let e_minus = c / (x - 2.0 * p.a);
    let ex = p.a * p.eps0s * p.v1 * p.v1 / (x * x);
    let rel = |diff: f64, approx: f64| if diff == 0.0 { 0.0 } else { (diff - approx).abs() / diff.abs() };
    Ok(CornerEnergies {
        u0,
        e_plus,
        e_minus,
        ex,
        approx_error_plus: rel(e_plus - u0, -ex),
        approx_error_minus: rel(e_minus - u0, ex),
    })
}

/// `t = π/E_X`, at which the two-qubit phase gate is the Ising gate.
pub fn ising_gate_time(ex: f64) -> Result<f64> {
    if !(ex.is_finite() && ex > 0.0) {
        return Err(Error::config("coupling.ex", format!("coupling energy must be positive, got {ex}")));
    }
    Ok(PI / ex)
}

/// Node budget for sampled landscapes.
pub const MAX_LANDSCAPE_NODES: usize = 512 * 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeMinimum {
    pub x1: f64,
    pub x2: f64,
    /// Energy after Newton refinement on the analytic potential.
    pub energy: f64,
    /// Lowest sampled value in the basin.
    pub grid_energy: f64,
    pub corner: (Side, Side),
    pub corner_energy: f64,
    /// `½ gᵀH⁻¹g` at the corner: second-order estimate of `corner_energy − energy`.
    pub predicted_shift: f64,
    /// `λ_max h²/4`: largest excess of a sampled node over the basin minimum.
    pub sampling_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub grid1: SpatialGrid,
    pub grid2: SpatialGrid,
    /// Row-major: `values[i·n2 + j] = V(x1_i, x2_j)`.
    pub values: Vec<f64>,
    pub minima: Vec<LandscapeMinimum>,
}

fn gradient_hessian(p: &CouplingParams, dw: &[DoubleWellParams; 2], x1: f64, x2: f64) -> ([f64; 2], [[f64; 3]; 1]) {
    let c = p.charge_energy();
    let gap = p.x_cap + x1 - x2;
    let d1 = |d: &DoubleWellParams, x: f64| 4.0 * x * (x * x - d.a * d.a) + d.f;
    let d2 = |d: &DoubleWellParams, x: f64| 12.0 * x * x - 4.0 * d.a * d.a;
    let g = [d1(&dw[0], x1) - c / (gap * gap), d1(&dw[1], x2) + c / (gap * gap)];
    let k = 2.0 * c / gap.powi(3);
    // (h11, h12, h22)
    ([g[0], g[1]], [[d2(&dw[0], x1) + k, -k, d2(&dw[1], x2) + k]])
}

fn newton_minimum(p: &CouplingParams, dw: &[DoubleWellParams; 2], mut x1: f64, mut x2: f64) -> (f64, f64) {
    for _ in 0..100 {
        let (g, [[h11, h12, h22]]) = gradient_hessian(p, dw, x1, x2);
        if g[0].hypot(g[1]) < 1e-13 {
            break;
        }
        let det = h11 * h22 - h12 * h12;
        let (dx1, dx2) = if h11 > 0.0 && det > 0.0 {
            (-(h22 * g[0] - h12 * g[1]) / det, -(h11 * g[1] - h12 * g[0]) / det)
        } else {
            (-1e-3 * g[0], -1e-3 * g[1])
        };
        x1 += dx1;
        x2 += dx2;
    }
    (x1, x2)
}

fn side_of(x: f64) -> Side {
    if x >= 0.0 {
        Side::Plus
    } else {
        Side::Minus
    }
}

/// Samples the pair potential on `grid1 × grid2` and locates its local minima.
pub fn landscape_2d(
    p: &CouplingParams,
    dw: &[DoubleWellParams; 2],
    grid1: SpatialGrid,
    grid2: SpatialGrid,
) -> Result<Landscape> {
    p.validate()?;
    let (n1, n2) = (grid1.len(), grid2.len());
    if n1 * n2 > MAX_LANDSCAPE_NODES {
        return Err(Error::ResourceBound(format!(
            "{n1}×{n2} landscape exceeds {MAX_LANDSCAPE_NODES} nodes; use at most 512 points per axis"
        )));
    }
    let mut values = Vec::with_capacity(n1 * n2);
    for x1 in grid1.positions() {
        for x2 in grid2.positions() {
            values.push(pair_potential(p, dw, x1, x2)?);
        }
    }
    let at = |i: usize, j: usize| values[i * n2 + j];
    let mut minima: Vec<LandscapeMinimum> = Vec::new();
    let h = grid1.spacing().max(grid2.spacing());
    for i in 1..n1 - 1 {
        for j in 1..n2 - 1 {
            let v = at(i, j);
            let is_min = (-1i32..=1).all(|di| {
                (-1i32..=1).all(|dj| {
                    (di == 0 && dj == 0) || v <= at((i as i32 + di) as usize, (j as i32 + dj) as usize)
                })
            });
            if !is_min {
                continue;
            }
            let (x1, x2) = newton_minimum(p, dw, grid1.x(i), grid2.x(j));
            if minima.iter().any(|m| (m.x1 - x1).abs() < 1e-6 && (m.x2 - x2).abs() < 1e-6) {
                continue;
            }
            let corner = (side_of(x1), side_of(x2));
            let (c1, c2) = (corner.0.sign() * dw[0].a, corner.1.sign() * dw[1].a);
            let corner_energy = pair_potential(p, dw, c1, c2)?;
            let (g, [[h11, h12, h22]]) = gradient_hessian(p, dw, c1, c2);
            let det = h11 * h22 - h12 * h12;
            let predicted_shift = 0.5 * (h22 * g[0] * g[0] - 2.0 * h12 * g[0] * g[1] + h11 * g[1] * g[1]) / det;
            let (_, [[m11, m12, m22]]) = gradient_hessian(p, dw, x1, x2);
            let lambda_max = 0.5 * (m11 + m22) + (0.25 * (m11 - m22).powi(2) + m12 * m12).sqrt();
            minima.push(LandscapeMinimum {
                x1,
                x2,
                energy: pair_potential(p, dw, x1, x2)?,
                grid_energy: v,
                corner,
                corner_energy,
                predicted_shift,
                sampling_bound: lambda_max * h * h / 4.0,
            });
        }
    }
    minima.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(Landscape { grid1, grid2, values, minima })
}

/// Limits for [`verify_phase_model_2d`].
pub const MAX_2D_POINTS: usize = 256;
pub const MAX_2D_TIME: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchTrace {
    pub sides: (Side, Side),
    pub model_energy: f64,
    pub initial_magnitude: f64,
    /// Largest `|ΔΨ(centre)| / |Ψ(centre, 0)|` over the run.
    pub magnitude_change: f64,
    /// Final unwrapped phase relative to the `++` branch.
    pub relative_phase: f64,
    pub model_relative_phase: f64,
    pub norm_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseModelReport {
    pub t: f64,
    pub dt: f64,
    pub n_points: usize,
    pub half_width: f64,
    pub corners: CornerEnergies,
    pub branches: Vec<BranchTrace>,
    /// `max |Δφ_meas − Δφ_model| / max |Δφ_model|` over branches and samples.
    pub phase_error: f64,
    pub magnitude_change: f64,
    /// `(t, Δφ_meas(+−), Δφ_meas(−+), Δφ_meas(−−))`.
    pub samples: Vec<[f64; 4]>,
    pub notes: Vec<String>,
}

struct Branch2d {
    psi: Vec<Complex64>,
    center: (f64, f64),
}

fn probe_2d(grid: &SpatialGrid, psi: &[Complex64], x1: f64, x2: f64) -> Complex64 {
    let n = grid.len();
    let (s1, w1) = cubic_stencil(grid, x1);
    let (s2, w2) = cubic_stencil(grid, x2);
    let mut z = Complex64::new(0.0, 0.0);
    for (a, wa) in w1.iter().enumerate() {
        for (b, wb) in w2.iter().enumerate() {
            z += psi[(s1 + a) * n + s2 + b] * (wa * wb);
        }
    }
    z
}

/// Propagates the four product Gaussians `ψ_{σ₁}(x₁)ψ_{σ₂}(x₂)` under the full
/// two-dimensional potential (Strang splitting with per-axis Crank–Nicolson
/// kinetic steps) and compares their relative phases with `−(E_branch − U₀)t`.
pub fn verify_phase_model_2d(
    p: &CouplingParams,
    t: f64,
    n_points: usize,
    dt: f64,
) -> Result<PhaseModelReport> {
    p.validate()?;
    if n_points > MAX_2D_POINTS || t > MAX_2D_TIME {
        return Err(Error::ResourceBound(format!(
            "2D verification limited to {MAX_2D_POINTS}² nodes and t ≤ {MAX_2D_TIME}; requested {n_points}² and t = {t}. \
             Try n_points = 256, t = 5"
        )));
    }
    if !(t > 0.0) {
        return Err(Error::config("coupling.t", "duration must be positive"));
    }
    if p.a <= 0.0 {
        return Err(Error::config("physics.coupling.a", "the phase model needs a > 0"));
    }
    let dw = DoubleWellParams::symmetric(p.a)?;
    let pair = [dw, dw];
    let harmonic = HarmonicApprox::new(p.a);
    let half_width = p.a + 6.0 * harmonic.width_sigma;
    if p.x_cap - 2.0 * half_width <= 0.0 {
        return Err(Error::config("physics.coupling.x_cap", "plates would touch inside the simulation box"));
    }
    let grid = SpatialGrid::symmetric(half_width, n_points)?;
    let n = n_points;
    let corners = corner_energies(p)?;

    let xs: Vec<f64> = grid.positions().collect();
    let steps = step_count(t, dt);
    let dt_eff = t / steps as f64;
    let mut half_kick = Vec::with_capacity(n * n);
    for &x1 in &xs {
        for &x2 in &xs {
            let v = pair_potential(p, &pair, x1, x2)?;
            half_kick.push(Complex64::from_polar(1.0, -0.5 * v * dt_eff));
        }
    }

    let omega = harmonic.omega;
    let peak = (omega / PI).powf(0.25);
    let gauss = |x: f64, c: f64| peak * (-0.5 * omega * (x - c).powi(2)).exp();
    let sides = [(Side::Plus, Side::Plus), (Side::Plus, Side::Minus), (Side::Minus, Side::Plus), (Side::Minus, Side::Minus)];
    let sample_every = (steps / 500).max(1);

    let runs: Vec<Result<(Vec<(f64, Complex64)>, f64)>> = sides
        .par_iter()
        .map(|&(s1, s2)| {
            let center = (s1.sign() * p.a, s2.sign() * p.a);
            let mut psi = Vec::with_capacity(n * n);
            for &x1 in &xs {
                for &x2 in &xs {
                    psi.push(Complex64::new(gauss(x1, center.0) * gauss(x2, center.1), 0.0));
                }
            }
            let h2 = grid.spacing() * grid.spacing();
            let norm = (psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * h2).sqrt();
            psi.iter_mut().for_each(|z| *z /= norm);
            let mut b = Branch2d { psi, center };
            let mut cn = CrankNicolson::new(&grid, dt_eff)?;
            let zeros = vec![0.0; n];
            let mut column = vec![Complex64::new(0.0, 0.0); n];
            let mut trace = vec![(0.0, probe_2d(&grid, &b.psi, b.center.0, b.center.1))];
            for k in 0..steps {
                b.psi.iter_mut().zip(&half_kick).for_each(|(z, w)| *z *= w);
                for row in b.psi.chunks_mut(n) {
                    cn.step(row, &zeros);
                }
                for j in 0..n {
                    for i in 0..n {
                        column[i] = b.psi[i * n + j];
                    }
                    cn.step(&mut column, &zeros);
                    for i in 0..n {
                        b.psi[i * n + j] = column[i];
                    }
                }
                b.psi.iter_mut().zip(&half_kick).for_each(|(z, w)| *z *= w);
                if (k + 1) % sample_every == 0 || k + 1 == steps {
                    trace.push(((k + 1) as f64 * dt_eff, probe_2d(&grid, &b.psi, b.center.0, b.center.1)));
                }
            }
            let drift = (b.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * h2 - 1.0).abs();
            if !(drift <= NORM_DRIFT_LIMIT) {
                return Err(Error::Instability { drift, dt: dt_eff });
            }
            Ok((trace, drift))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let reference = &runs[0].0;
    let mut branches = Vec::new();
    let mut samples: Vec<[f64; 4]> = reference.iter().map(|(t, _)| [*t, 0.0, 0.0, 0.0]).collect();
    let mut worst_err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (bi, ((s1, s2), (trace, drift))) in sides.iter().zip(&runs).enumerate() {
        let e = corners.branch(*s1, *s2);
        let m0 = trace[0].1.norm();
        let mut unwrapped = 0.0;
        let mut last = 0.0;
        let mut mag_change: f64 = 0.0;
        for (k, ((tk, z), (_, zr))) in trace.iter().zip(reference).enumerate() {
            let raw = (z * zr.conj()).arg();
            if k == 0 {
                unwrapped = raw;
            } else {
                let mut d = raw - last;
                d -= (d / (2.0 * PI)).round() * 2.0 * PI;
                unwrapped += d;
            }
            last = raw;
            let model = -(e - corners.u0) * tk;
            worst_err = worst_err.max((unwrapped - model).abs());
            scale = scale.max(model.abs());
            mag_change = mag_change.max((z.norm() - m0).abs() / m0);
            if bi > 0 {
                samples[k][bi] = unwrapped;
            }
        }
        branches.push(BranchTrace {
            sides: (*s1, *s2),
            model_energy: e,
            initial_magnitude: m0,
            magnitude_change: mag_change,
            relative_phase: unwrapped,
            model_relative_phase: -(e - corners.u0) * t,
            norm_drift: *drift,
        });
    }
    let magnitude_change = branches.iter().map(|b| b.magnitude_change).fold(0.0, f64::max);
    Ok(PhaseModelReport {
        t,
        dt: dt_eff,
        n_points,
        half_width,
        corners,
        phase_error: if scale > 0.0 { worst_err / scale } else { worst_err },
        magnitude_change,
        branches,
        samples,
        notes: vec!["coupling voltage treated as constant over the whole window".to_string()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig_params() -> CouplingParams {
        // ε₀S·V₁²/2 = 100 with X_cap = 10, a = 2.
        CouplingParams { eps0s: 200.0, x_cap: 10.0, v1: 1.0, a: 2.0 }
    }

    #[test]
    fn corner_arithmetic() {
        let c = corner_energies(&fig_params()).unwrap();
        assert_eq!(c.u0, 10.0);
        assert!((c.e_plus - 100.0 / 14.0).abs() < 1e-12);
        assert!((c.e_minus - 100.0 / 6.0).abs() < 1e-12);
        assert_eq!(c.ex, 4.0);
        assert!(c.e_plus < c.u0 && c.u0 < c.e_minus);
    }

    #[test]
    fn first_order_error_equals_two_a_over_x() {
        let c = corner_energies(&fig_params()).unwrap();
        assert!((c.approx_error_plus - 0.4).abs() < 1e-12);
        assert!((c.approx_error_minus - 0.4).abs() < 1e-12);
    }

    #[test]
    fn degenerate_limits() {
        let c = corner_energies(&CouplingParams { a: 0.0, ..fig_params() }).unwrap();
        assert_eq!(c.e_plus, c.u0);
        assert_eq!(c.e_minus, c.u0);
        assert_eq!(c.ex, 0.0);
        let base = corner_energies(&fig_params()).unwrap().ex;
        let doubled = corner_energies(&CouplingParams { v1: 2f64.sqrt(), ..fig_params() }).unwrap().ex;
        assert!((doubled - 2.0 * base).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(CouplingParams { x_cap: 4.0, ..fig_params() }.validate().is_err());
        assert!(CouplingParams { eps0s: 0.0, ..fig_params() }.validate().is_err());
        let dw = DoubleWellParams::symmetric(2.0).unwrap();
        assert!(matches!(pair_potential(&fig_params(), &[dw, dw], -6.0, 6.0), Err(Error::Domain(_))));
    }

    #[test]
    fn ising_time() {
        assert!((ising_gate_time(PI).unwrap() - 1.0).abs() < 1e-15);
        assert!((ising_gate_time(2.0).unwrap() - 0.5 * ising_gate_time(1.0).unwrap()).abs() < 1e-15);
        assert!(ising_gate_time(0.0).is_err());
        let ex = 0.7;
        let g = crate::gates::two_qubit_phase_gate(ex, ising_gate_time(ex).unwrap(), 2.0);
        assert!(g.distance_up_to_phase(&crate::gates::ising_zz()).unwrap() < 1e-12);
    }

    #[test]
    fn pair_potential_symmetries() {
        let dw = DoubleWellParams::symmetric(2.0).unwrap();
        let p = fig_params();
        let v = |x1, x2| pair_potential(&p, &[dw, dw], x1, x2).unwrap();
        assert_eq!(v(2.0, 2.0), v(-2.0, -2.0));
        let free = CouplingParams { v1: 0.0, ..p };
        let w = |x1, x2| pair_potential(&free, &[dw, dw], x1, x2).unwrap();
        for (a, b) in [(2.0, 2.0), (2.0, -2.0), (-2.0, 2.0), (-2.0, -2.0)] {
            assert_eq!(w(a, b), 0.0);
        }
        let far = CouplingParams { x_cap: 1e12, ..p };
        assert!(pair_potential(&far, &[dw, dw], 1.0, -1.0).unwrap() - 2.0 * dw.potential(1.0) < 1e-9);
    }

    #[test]
    fn landscape_without_voltage_has_four_equal_minima() {
        let dw = DoubleWellParams::symmetric(2.0).unwrap();
        let g = SpatialGrid::symmetric(4.0, 201).unwrap();
        let l = landscape_2d(&CouplingParams { v1: 0.0, ..fig_params() }, &[dw, dw], g, g).unwrap();
        assert_eq!(l.minima.len(), 4);
        let e0 = l.minima[0].energy;
        assert!(l.minima.iter().all(|m| (m.energy - e0).abs() < 1e-10));
    }

    #[test]
    fn landscape_minima_follow_corners() {
        let dw = DoubleWellParams::symmetric(2.0).unwrap();
        let g = SpatialGrid::symmetric(4.0, 401).unwrap();
        let l = landscape_2d(&fig_params(), &[dw, dw], g, g).unwrap();
        assert_eq!(l.minima.len(), 4);
        let by = |c: (Side, Side)| l.minima.iter().find(|m| m.corner == c).unwrap().energy;
        let (pp, pm, mp) = (by((Side::Plus, Side::Plus)), by((Side::Plus, Side::Minus)), by((Side::Minus, Side::Plus)));
        assert!(pm < pp && pp < mp);
        for m in &l.minima {
            let shift = m.corner_energy - m.energy;
            assert!(shift > 0.0);
            // Second-order estimate from the corner gradient and Hessian.
            assert!((shift - m.predicted_shift).abs() < 0.25 * m.predicted_shift, "{m:?}");
            assert!(m.grid_energy - m.energy <= m.sampling_bound);
        }
    }

    #[test]
    fn landscape_budget() {
        let dw = DoubleWellParams::symmetric(2.0).unwrap();
        let g = SpatialGrid::symmetric(4.0, 513).unwrap();
        assert!(matches!(landscape_2d(&fig_params(), &[dw, dw], g, g), Err(Error::ResourceBound(_))));
    }

    #[test]
    fn phase_model_limits() {
        let p = CouplingParams { eps0s: 200.0, x_cap: 40.0, v1: 1.0, a: 5.0 };
        assert!(matches!(verify_phase_model_2d(&p, 6.0, 128, 1e-3), Err(Error::ResourceBound(_))));
        assert!(matches!(verify_phase_model_2d(&p, 1.0, 512, 1e-3), Err(Error::ResourceBound(_))));
    }

    #[test]
    fn phase_model_without_voltage_is_flat() {
        let p = CouplingParams { eps0s: 200.0, x_cap: 40.0, v1: 0.0, a: 5.0 };
        let r = verify_phase_model_2d(&p, 0.2, 64, 2e-3).unwrap();
        for b in &r.branches {
            assert!(b.relative_phase.abs() < 1e-9, "{b:?}");
        }
    }

    proptest! {
        #[test]
        fn exact_corner_ordering(a in 0.01..3.0f64, x in 7.0..50.0f64, v in 0.1..5.0f64) {
            let c = corner_energies(&CouplingParams { eps0s: 1.0, x_cap: x, v1: v, a }).unwrap();
            prop_assert!(c.e_plus < c.u0 && c.u0 < c.e_minus);
        }

        #[test]
        fn first_order_error_bounded(ratio in 0.001..0.3f64) {
            let x = 10.0;
            let c = corner_energies(&CouplingParams { eps0s: 3.0, x_cap: x, v1: 1.0, a: ratio * x }).unwrap();
            let r = 2.0 * ratio;
            prop_assert!(c.approx_error_plus <= r * (1.0 + 1e-9));
            prop_assert!(c.approx_error_minus <= r * (1.0 + 1e-9));
        }

        #[test]
        fn pair_potential_exchange_mirror(x1 in -3.0..3.0f64, x2 in -3.0..3.0f64) {
            let dw = DoubleWellParams::symmetric(2.0).unwrap();
            let p = CouplingParams { eps0s: 7.0, x_cap: 10.0, v1: 1.3, a: 2.0 };
            let a = pair_potential(&p, &[dw, dw], x1, x2).unwrap();
            let b = pair_potential(&p, &[dw, dw], -x2, -x1).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
