//! Stationary analysis of the quartic double well `(X² − A²)² + F·X`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{discretize_hamiltonian, eigensolve, EigenResult, SpatialGrid, WavefunctionState};

/// Default number of grid nodes for stationary and dynamical runs.
pub const DEFAULT_POINTS: usize = 2049;

/// Splittings below this fraction of `|E₀|` are unresolvable in double precision.
pub const SPLITTING_FLOOR: f64 = 1e-9;

/// Well separation `A` and linear bias `F` (coefficient of `X`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleWellParams {
    pub a: f64,
    #[serde(default)]
    pub f: f64,
}

impl DoubleWellParams {
    pub fn new(a: f64, f: f64) -> Result<Self> {
        let p = DoubleWellParams { a, f };
        p.validate()?;
        Ok(p)
    }

    pub fn symmetric(a: f64) -> Result<Self> {
        Self::new(a, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a >= 0.0) {
            return Err(Error::config("physics.a", format!("well separation must be finite and ≥ 0, got {}", self.a)));
        }
        if !self.f.is_finite() {
            return Err(Error::config("physics.f", "field bias must be finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn potential(&self, x: f64) -> f64 {
        potential_value(self.a, self.f, x)
    }

    pub fn harmonic(&self) -> HarmonicApprox {
        HarmonicApprox::new(self.a)
    }
}

#[inline]
pub fn potential_value(a: f64, f: f64, x: f64) -> f64 {
    let d = x * x - a * a;
    d * d + f * x
}

/// Harmonic expansion about the minima `±A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicApprox {
    pub omega: f64,
    pub ground_energy: f64,
    pub width_sigma: f64,
    pub centers: [f64; 2],
}

impl HarmonicApprox {
    pub fn new(a: f64) -> Self {
        let omega = 2.0 * a * std::f64::consts::SQRT_2;
        HarmonicApprox {
            omega,
            ground_energy: 0.5 * omega,
            width_sigma: omega.powf(-0.5),
            centers: [a, -a],
        }
    }
}

/// `Eᵤ = ω/A`; a field `F` in these units contributes `F·Eᵤ·X`.
pub fn field_unit() -> f64 {
    2.0 * std::f64::consts::SQRT_2
}

/// Half-width `max(8, A + 6σ)`, with σ capped at 1 where the harmonic width
/// stops describing the ground state.
pub fn default_half_width(a: f64) -> f64 {
    let sigma = if a > 0.0 { HarmonicApprox::new(a).width_sigma.min(1.0) } else { 1.0 };
    (a + 6.0 * sigma).max(8.0)
}

pub fn default_grid(a: f64, n_points: usize) -> Result<SpatialGrid> {
    SpatialGrid::symmetric(default_half_width(a), n_points)
}

/// Which well a localized state sits in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }
}

/// Separations below which the Gaussian is outside its regime of validity.
pub const GAUSSIAN_MIN_A: f64 = 2.0;

pub fn gaussian_regime_warning(a: f64) -> Option<String> {
    (a < GAUSSIAN_MIN_A).then(|| {
        format!("Gaussian well state requested at A = {a} < {GAUSSIAN_MIN_A}; harmonic approximation is poor")
    })
}

/// Harmonic ground state centred on `±A`, renormalized on `grid`.
pub fn gaussian_state(params: &DoubleWellParams, side: Side, grid: SpatialGrid) -> Result<WavefunctionState> {
    params.validate()?;
    if params.a <= 0.0 {
        return Err(Error::Domain("Gaussian well state needs A > 0".into()));
    }
    if let Some(w) = gaussian_regime_warning(params.a) {
        log::warn!("{w}");
    }
    let omega = params.harmonic().omega;
    let center = side.sign() * params.a;
    let peak = (omega / std::f64::consts::PI).powf(0.25);
    WavefunctionState::from_fn(grid, |x| {
        Complex64::new(peak * (-0.5 * omega * (x - center).powi(2)).exp(), 0.0)
    })
}

/// Eigenpairs of one configuration together with the grid they live on.
#[derive(Debug, Clone)]
pub struct Levels {
    pub grid: SpatialGrid,
    pub result: EigenResult,
}

impl Levels {
    /// Eigenvector `i` as a grid-normalized state.
    pub fn state(&self, i: usize) -> Result<WavefunctionState> {
        WavefunctionState::from_real(self.grid, &self.result.eigenvectors[i])
    }

    pub fn mean_position(&self, i: usize) -> f64 {
        mean_position(&self.grid, &self.result.eigenvectors[i])
    }
}

fn mean_position(grid: &SpatialGrid, v: &[f64]) -> f64 {
    let norm: f64 = v.iter().map(|c| c * c).sum();
    grid.positions().zip(v).map(|(x, c)| x * c * c).sum::<f64>() / norm
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mirror overlap `Σ ψ(xᵢ)ψ(−xᵢ) / Σ ψ²`: +1 for even, −1 for odd states.
pub fn parity(v: &[f64]) -> f64 {
    let n: f64 = v.iter().map(|c| c * c).sum();
    v.iter().zip(v.iter().rev()).map(|(a, b)| a * b).sum::<f64>() / n
}

fn is_floor_degenerate(e0: f64, e1: f64) -> bool {
    (e1 - e0).abs() < SPLITTING_FLOOR * e0.abs().max(1.0)
}

/// Rotates a degenerate pair `(u, v)` by angle `θ`: `(cu + sv, −su + cv)`.
fn rotate_pair(u: &mut [f64], v: &mut [f64], theta: f64) {
    let (s, c) = theta.sin_cos();
    for (a, b) in u.iter_mut().zip(v.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x + s * y;
        *b = -s * x + c * y;
    }
}

/// Angle diagonalizing the symmetric 2×2 form `[[p, q], [q, r]]`, leading vector
/// belonging to the larger eigenvalue.
fn diagonalizing_angle(p: f64, q: f64, r: f64) -> f64 {
    0.5 * (2.0 * q).atan2(p - r)
}

/// Replaces unresolved doublets by their even/odd combinations (even first).
fn symmetrize_doublets(result: &mut EigenResult) {
    let k = result.len();
    let mut i = 0;
    while i + 1 < k {
        let (e0, e1) = (result.eigenvalues[i], result.eigenvalues[i + 1]);
        if is_floor_degenerate(e0, e1) {
            let (head, tail) = result.eigenvectors.split_at_mut(i + 1);
            let (u, v) = (&mut head[i], &mut tail[0]);
            let mirror = |w: &[f64]| -> Vec<f64> { w.iter().rev().copied().collect() };
            let p = dot(u, &mirror(u));
            let q = dot(u, &mirror(v));
            let r = dot(v, &mirror(v));
            rotate_pair(u, v, diagonalizing_angle(p, q, r));
            fix_sign(u);
            fix_sign(v);
            i += 2;
        } else {
            i += 1;
        }
    }
}

/// Replaces unresolved doublets by their well-localized combinations (right well first).
fn localize_doublets(grid: &SpatialGrid, result: &mut EigenResult) {
    let k = result.len();
    let xs: Vec<f64> = grid.positions().collect();
    let mut i = 0;
    while i + 1 < k {
        let (e0, e1) = (result.eigenvalues[i], result.eigenvalues[i + 1]);
        if is_floor_degenerate(e0, e1) {
            let (head, tail) = result.eigenvectors.split_at_mut(i + 1);
            let (u, v) = (&mut head[i], &mut tail[0]);
            let xw = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(&xs).map(|((p, q), x)| p * q * x).sum() };
            let p = xw(u, u);
            let q = xw(u, v);
            let r = xw(v, v);
            rotate_pair(u, v, diagonalizing_angle(p, q, r));
            fix_sign(u);
            fix_sign(v);
            i += 2;
        } else {
            i += 1;
        }
    }
}

fn fix_sign(v: &mut [f64]) {
    let imax = v
        .iter()
        .enumerate()
        .fold((0, 0.0_f64), |(bi, bv), (i, c)| if c.abs() > bv { (i, c.abs()) } else { (bi, bv) })
        .0;
    if v[imax] < 0.0 {
        v.iter_mut().for_each(|c| *c = -*c);
    }
}

/// Lowest `k` levels on `grid`. For symmetric problems unresolved doublets are
/// returned as parity eigenstates.
pub fn solve_on_grid(params: &DoubleWellParams, grid: SpatialGrid, k: usize) -> Result<Levels> {
    params.validate()?;
    let op = discretize_hamiltonian(&grid, |x| params.potential(x))?;
    let mut result = eigensolve(&op, k)?;
    if params.f == 0.0 && grid.is_symmetric() {
        symmetrize_doublets(&mut result);
    }
    Ok(Levels { grid, result })
}

/// Lowest `k` levels on the default domain for `params.a`.
pub fn solve_levels(params: &DoubleWellParams, n_points: usize, k: usize) -> Result<Levels> {
    solve_on_grid(params, default_grid(params.a, n_points)?, k)
}

/// Scan axis for [`spectrum_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanVariable {
    WellSeparation,
    /// Values are multiples of [`field_unit`].
    Field,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub value: f64,
    /// NaN-filled when the solve failed.
    pub energies: Vec<f64>,
    pub flags: Vec<String>,
}

impl SpectrumRow {
    pub fn ok(&self) -> bool {
        !self.flags.iter().any(|f| f.starts_with("error"))
    }
}

/// One eigensolve per scan value; rows come back in input order.
pub fn spectrum_scan(
    variable: ScanVariable,
    values: &[f64],
    fixed: &DoubleWellParams,
    k: usize,
    n_points: usize,
) -> Result<Vec<SpectrumRow>> {
    fixed.validate()?;
    if values.is_empty() {
        return Err(Error::config("scan.values", "no scan values"));
    }
    if values.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::config("scan.values", "scan values must be sorted ascending"));
    }
    if variable == ScanVariable::WellSeparation && values[0] < 0.0 {
        return Err(Error::config("scan.values", "well separation must be ≥ 0"));
    }
    // Field scans share one grid so levels can be tracked by overlap.
    let field_grid = match variable {
        ScanVariable::Field => Some(default_grid(fixed.a, n_points)?),
        ScanVariable::WellSeparation => None,
    };
    let solved: Vec<(f64, Result<Levels>)> = values
        .par_iter()
        .map(|&value| {
            let params = match variable {
                ScanVariable::WellSeparation => DoubleWellParams { a: value, f: fixed.f },
                ScanVariable::Field => DoubleWellParams { a: fixed.a, f: value * field_unit() },
            };
            let levels = match field_grid {
                Some(g) => solve_on_grid(&params, g, k),
                None => solve_levels(&params, n_points, k),
            };
            (value, levels)
        })
        .collect();

    let mut rows = Vec::with_capacity(solved.len());
    let mut previous: Option<Vec<Vec<f64>>> = None;
    for (value, levels) in solved {
        match levels {
            Ok(levels) => {
                let mut order: Vec<usize> = (0..k).collect();
                let mut flags = Vec::new();
                if let (Some(prev), ScanVariable::Field) = (&previous, variable) {
                    order = track_by_overlap(prev, &levels.result.eigenvectors);
                    if order.iter().enumerate().any(|(i, &j)| i != j) {
                        flags.push("reordered".to_string());
                    }
                }
                let r = &levels.result;
                if k >= 2 && is_floor_degenerate(r.eigenvalues[0], r.eigenvalues[1]) {
                    flags.push("floor-limited".to_string());
                }
                let energies = order.iter().map(|&j| r.eigenvalues[j]).collect();
                previous = Some(order.iter().map(|&j| r.eigenvectors[j].clone()).collect());
                rows.push(SpectrumRow { value, energies, flags });
            }
            Err(e) => {
                rows.push(SpectrumRow {
                    value,
                    energies: vec![f64::NAN; k],
                    flags: vec![format!("error: {e}")],
                });
            }
        }
    }
    Ok(rows)
}

/// Assignment of current eigenvectors to previous levels by maximal overlap,
/// greedy from the largest overlaps; entry `i` is the current index for level `i`.
pub fn track_by_overlap(previous: &[Vec<f64>], current: &[Vec<f64>]) -> Vec<usize> {
    let k = previous.len().min(current.len());
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(k * k);
    for (i, p) in previous.iter().enumerate().take(k) {
        for (j, c) in current.iter().enumerate().take(k) {
            pairs.push((dot(p, c).abs(), i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut order = vec![usize::MAX; k];
    let mut used = vec![false; k];
    for (_, i, j) in pairs {
        if order[i] == usize::MAX && !used[j] {
            order[i] = j;
            used[j] = true;
        }
    }
    order
}

/// `(E₁−E₀)/(E₂−E₁)` style ratio for the doublet starting at level `2j`.
/// The last doublet uses the gap below it when no level above is available.
pub fn doublet_ratios(energies: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut j = 0;
    while 2 * j + 1 < energies.len() {
        let inner = energies[2 * j + 1] - energies[2 * j];
        let outer = if 2 * j + 2 < energies.len() {
            energies[2 * j + 2] - energies[2 * j + 1]
        } else if j > 0 {
            energies[2 * j] - energies[2 * j - 1]
        } else {
            break;
        };
        out.push(inner / outer);
        j += 1;
    }
    out
}

/// Separation at which the lowest doublet forms: midpoint between the points
/// where `(E₁−E₀)/(E₂−E₁)` falls through 10⁻¹ and through 10⁻³, each located by
/// linear interpolation of its logarithm.
pub fn doublet_formation_center(rows: &[SpectrumRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.ok() && r.energies.len() >= 3)
        .map(|r| {
            let ratio = (r.energies[1] - r.energies[0]) / (r.energies[2] - r.energies[1]);
            (r.value, ratio.max(f64::MIN_POSITIVE).log10())
        })
        .collect();
    let crossing = |level: f64| -> Option<f64> {
        pts.windows(2).find_map(|w| {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            (y0 >= level && y1 < level).then(|| x0 + (level - y0) * (x1 - x0) / (y1 - y0))
        })
    };
    Some(0.5 * (crossing(-1.0)? + crossing(-3.0)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Splitting {
    pub a: f64,
    pub e0: f64,
    pub delta: f64,
    /// `−∞` when the two levels coincide in floating point.
    pub log10_delta: f64,
    pub floor_limited: bool,
}

pub fn splitting(a: f64, n_points: usize) -> Result<Splitting> {
    let levels = solve_levels(&DoubleWellParams::symmetric(a)?, n_points, 2)?;
    let e = &levels.result.eigenvalues;
    let delta = e[1] - e[0];
    Ok(Splitting {
        a,
        e0: e[0],
        delta,
        log10_delta: if delta > 0.0 { delta.log10() } else { f64::NEG_INFINITY },
        floor_limited: is_floor_degenerate(e[0], e[1]),
    })
}

/// Energies of the lowest right-well and left-well states at fixed bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizedLevels {
    pub f: f64,
    pub e_plus: f64,
    pub e_minus: f64,
    pub x_plus: f64,
    pub x_minus: f64,
}

/// Identifies the lowest level localized in each well among the lowest `k`
/// eigenpairs, using the sign of `⟨x⟩`.
pub fn localized_levels(params: &DoubleWellParams, grid: SpatialGrid, k: usize) -> Result<LocalizedLevels> {
    params.validate()?;
    let op = discretize_hamiltonian(&grid, |x| params.potential(x))?;
    let mut result = eigensolve(&op, k)?;
    localize_doublets(&grid, &mut result);
    let mut plus = None;
    let mut minus = None;
    for (e, v) in result.eigenvalues.iter().zip(&result.eigenvectors) {
        let xm = mean_position(&grid, v);
        if xm > 0.0 && plus.is_none() {
            plus = Some((*e, xm));
        } else if xm < 0.0 && minus.is_none() {
            minus = Some((*e, xm));
        }
    }
    match (plus, minus) {
        (Some((e_plus, x_plus)), Some((e_minus, x_minus))) => Ok(LocalizedLevels {
            f: params.f,
            e_plus,
            e_minus,
            x_plus,
            x_minus,
        }),
        _ => Err(Error::Convergence(format!(
            "no localized level in one of the wells among the lowest {k} at F = {}",
            params.f
        ))),
    }
}

/// Least-squares line; returns `(slope, intercept)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarkFit {
    pub a: f64,
    /// `dE/dF` of the right-well level (expected `+A`).
    pub slope_plus: f64,
    /// `dE/dF` of the left-well level (expected `−A`).
    pub slope_minus: f64,
    pub rel_error_plus: f64,
    pub rel_error_minus: f64,
    pub samples: Vec<LocalizedLevels>,
}

/// Fits the two localized levels against the bias over `|F| ≤ f_max_eu·Eᵤ`.
pub fn stark_fit(a: f64, f_max_eu: f64, n_samples: usize, n_points: usize) -> Result<StarkFit> {
    if n_samples < 2 {
        return Err(Error::config("stark.samples", "need at least two field samples"));
    }
    if !(f_max_eu > 0.0) {
        return Err(Error::config("stark.f_max", "field range must be positive"));
    }
    let grid = default_grid(a, n_points)?;
    let fields: Vec<f64> = (0..n_samples)
        .map(|i| (-1.0 + 2.0 * i as f64 / (n_samples - 1) as f64) * f_max_eu * field_unit())
        .collect();
    let samples = fields
        .par_iter()
        .map(|&f| localized_levels(&DoubleWellParams::new(a, f)?, grid, 4))
        .collect::<Result<Vec<_>>>()?;
    let ep: Vec<f64> = samples.iter().map(|s| s.e_plus).collect();
    let em: Vec<f64> = samples.iter().map(|s| s.e_minus).collect();
    let (slope_plus, _) = linear_fit(&fields, &ep);
    let (slope_minus, _) = linear_fit(&fields, &em);
    Ok(StarkFit {
        a,
        slope_plus,
        slope_minus,
        rel_error_plus: (slope_plus - a).abs() / a,
        rel_error_minus: (slope_minus + a).abs() / a,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn potential_examples() {
        let p = DoubleWellParams::symmetric(3.0).unwrap();
        assert_eq!(p.potential(3.0), 0.0);
        assert_eq!(p.potential(-3.0), 0.0);
        assert_eq!(p.potential(0.0), 81.0);
        let f = 0.5 * field_unit();
        let q = DoubleWellParams::new(2.0, f).unwrap();
        assert!((q.potential(2.0) - q.potential(-2.0) - 4.0 * f).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(DoubleWellParams::new(-1.0, 0.0).unwrap_err().is_config());
        assert!(DoubleWellParams::new(f64::NAN, 0.0).is_err());
        assert!(DoubleWellParams::new(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn field_unit_is_omega_over_a() {
        for a in [0.5, 2.0, 3.0, 7.0] {
            assert!((HarmonicApprox::new(a).omega / a - field_unit()).abs() < 1e-14);
        }
    }

    #[test]
    fn gaussian_peak_and_tail() {
        let p = DoubleWellParams::symmetric(3.0).unwrap();
        let g = default_grid(3.0, 2049).unwrap();
        let plus = gaussian_state(&p, Side::Plus, g).unwrap();
        let (m, _) = plus.observe(3.0).unwrap();
        let expected = (6.0 * 2f64.sqrt() / std::f64::consts::PI).powf(0.25);
        assert!((m - expected).abs() < 1e-6, "{m} vs {expected}");
        assert!(plus.observe(-3.0).unwrap().0 < 1e-6);
        let minus = gaussian_state(&p, Side::Minus, g).unwrap();
        for (a, b) in plus.mirrored().amplitudes.iter().zip(&minus.amplitudes) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!(plus.boundary_magnitude() < 1e-6);
    }

    fn gaussian_overlap(a: f64) -> f64 {
        let p = DoubleWellParams::symmetric(a).unwrap();
        let grid = default_grid(a, 2049).unwrap();
        let mut levels = solve_on_grid(&p, grid, 2).unwrap();
        localize_doublets(&grid, &mut levels.result);
        let right = levels.state(0).unwrap();
        assert!(right.expectation_x() > 0.0);
        gaussian_state(&p, Side::Plus, grid).unwrap().inner(&right).norm()
    }

    #[test]
    fn gaussian_overlaps_localized_ground_state() {
        // Reference overlaps from an independent dense solve (scipy eigh_tridiagonal).
        assert!((gaussian_overlap(3.0) - 0.997_952_459).abs() < 1e-6);
        assert!((gaussian_overlap(4.0) - 0.999_153_617).abs() < 1e-6);
        assert!(gaussian_overlap(5.0) > 0.999);
    }

    #[test]
    fn regime_warning() {
        assert!(gaussian_regime_warning(1.5).is_some());
        assert!(gaussian_regime_warning(2.0).is_none());
    }

    #[test]
    fn parity_alternates() {
        for a in [0.0, 1.0, 2.0, 3.0] {
            let levels = solve_levels(&DoubleWellParams::symmetric(a).unwrap(), 1025, 6).unwrap();
            for (n, v) in levels.result.eigenvectors.iter().enumerate() {
                let expected = if n % 2 == 0 { 1.0 } else { -1.0 };
                assert!((parity(v) - expected).abs() < 1e-8, "A = {a}, n = {n}: {}", parity(v));
            }
        }
    }

    #[test]
    fn harmonic_consistency_improves_with_separation() {
        let mut last = f64::INFINITY;
        for a in [2.5, 3.0, 4.0] {
            let levels = solve_levels(&DoubleWellParams::symmetric(a).unwrap(), 2049, 3).unwrap();
            let e = &levels.result.eigenvalues;
            let err = ((e[2] - e[0]) / HarmonicApprox::new(a).omega - 1.0).abs();
            assert!(err < 0.05 && err < last, "A = {a}: {err}");
            last = err;
        }
    }

    #[test]
    fn splitting_floor() {
        let s0 = splitting(0.0, 2049).unwrap();
        assert!(s0.delta > 1.0 && !s0.floor_limited);
        let s = splitting(2.5, 2049).unwrap();
        assert!(s.floor_limited);
        assert!(s.log10_delta < -8.0);
    }

    #[test]
    fn field_scan_gap_grows_at_small_separation() {
        let values: Vec<f64> = (0..6).map(|i| i as f64 * 0.1).collect();
        let rows = spectrum_scan(ScanVariable::Field, &values, &DoubleWellParams::symmetric(1.0).unwrap(), 2, 1025).unwrap();
        let gaps: Vec<f64> = rows.iter().map(|r| r.energies[1] - r.energies[0]).collect();
        assert!(gaps.windows(2).all(|w| w[1] > w[0]), "{gaps:?}");
    }

    #[test]
    fn scan_rejects_unsorted_and_empty() {
        let p = DoubleWellParams::symmetric(1.0).unwrap();
        assert!(spectrum_scan(ScanVariable::WellSeparation, &[], &p, 2, 257).is_err());
        assert!(spectrum_scan(ScanVariable::WellSeparation, &[1.0, 0.5], &p, 2, 257).is_err());
    }

    #[test]
    fn stark_slope_equals_mean_position() {
        // Hellmann–Feynman: dE/dF = ⟨x⟩ of the localized state.
        let fit = stark_fit(3.0, 0.05, 5, 2049).unwrap();
        let grid = default_grid(3.0, 2049).unwrap();
        let l = localized_levels(&DoubleWellParams::new(3.0, 1e-9).unwrap(), grid, 4).unwrap();
        assert!((fit.slope_plus - l.x_plus).abs() < 1e-4, "{} vs {}", fit.slope_plus, l.x_plus);
        assert!((fit.slope_minus - l.x_minus).abs() < 1e-4);
        assert!((fit.slope_plus + fit.slope_minus).abs() < 1e-8);
    }

    #[test]
    fn overlap_tracking_follows_swaps() {
        let a = vec![1.0, 0.0, 0.0];
        let b = vec![0.0, 1.0, 0.0];
        let c = vec![0.0, 0.0, 1.0];
        let prev = vec![a.clone(), b.clone(), c.clone()];
        assert_eq!(track_by_overlap(&prev, &[b, c, a]), vec![2, 0, 1]);
    }

    #[test]
    fn center_of_synthetic_transition() {
        let rows: Vec<SpectrumRow> = (0..31)
            .map(|i| {
                let a = i as f64 * 0.1;
                let r = 10f64.powf(-(a - 0.5).max(0.0) * 2.0);
                SpectrumRow { value: a, energies: vec![0.0, r, 1.0 + r], flags: vec![] }
            })
            .collect();
        // log10 r = −2(a − 0.5): −1 at 1.0, −3 at 2.0.
        assert!((doublet_formation_center(&rows).unwrap() - 1.5).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn potential_mirror_symmetry(a in 0.0..5.0f64, x in -10.0..10.0f64) {
            let p = DoubleWellParams::symmetric(a).unwrap();
            prop_assert_eq!(p.potential(x), p.potential(-x));
        }

        #[test]
        fn bias_asymmetry(a in 0.0..5.0f64, f in -3.0..3.0f64, x in -10.0..10.0f64) {
            let p = DoubleWellParams::new(a, f).unwrap();
            let d = p.potential(x) - p.potential(-x);
            prop_assert!((d - 2.0 * f * x).abs() <= 1e-9 * (1.0 + p.potential(x).abs()));
        }

        #[test]
        fn width_shrinks_with_separation(a in 0.1..10.0f64, da in 0.01..1.0f64) {
            prop_assert!(HarmonicApprox::new(a + da).width_sigma < HarmonicApprox::new(a).width_sigma);
        }
    }
}
