use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest grid the solvers accept.
pub const MIN_POINTS: usize = 16;

/// Uniform one-dimensional grid in units of the natural length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    spacing: f64,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::config("grid.bounds", "bounds must be finite"));
        }
        if x_max <= x_min {
            return Err(Error::config("grid.bounds", "x_max must exceed x_min"));
        }
        if n_points < MIN_POINTS {
            return Err(Error::config(
                "grid.n_points",
                format!("need at least {MIN_POINTS} points, got {n_points}"),
            ));
        }
        Ok(SpatialGrid {
            x_min,
            x_max,
            n_points,
            spacing: (x_max - x_min) / (n_points - 1) as f64,
        })
    }

    /// Symmetric grid `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n_points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n_points)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Whether the domain is mirror-symmetric about the origin.
    pub fn is_symmetric(&self) -> bool {
        self.x_min == -self.x_max
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.spacing
    }

    pub fn positions(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Index of the node nearest to `x` (clamped to the grid).
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.spacing).round();
        i.clamp(0.0, (self.n_points - 1) as f64) as usize
    }
}

/// Wavefunction sampled on a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavefunctionState {
    pub grid: SpatialGrid,
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl WavefunctionState {
    pub fn new(grid: SpatialGrid, amplitudes: Vec<Complex64>, time: f64) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} amplitudes for a {}-point grid",
                amplitudes.len(),
                grid.len()
            )));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("non-finite amplitude".into()));
        }
        Ok(WavefunctionState {
            grid,
            amplitudes,
            time,
        })
    }

    /// Samples `f` on the grid and normalizes the result.
    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let amplitudes = grid.positions().map(f).collect();
        let mut state = Self::new(grid, amplitudes, 0.0)?;
        state.normalize()?;
        Ok(state)
    }

    /// Builds a state from a real grid function (for example an eigenvector).
    pub fn from_real(grid: SpatialGrid, values: &[f64]) -> Result<Self> {
        let amplitudes = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut state = Self::new(grid, amplitudes, 0.0)?;
        state.normalize()?;
        Ok(state)
    }

    /// Discrete L² norm squared, `Σ|ψᵢ|² h`.
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.spacing()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Domain("cannot normalize a zero state".into()));
        }
        let inv = 1.0 / n;
        self.amplitudes.iter_mut().for_each(|z| *z *= inv);
        Ok(())
    }

    /// `⟨self|other⟩` with the grid measure.
    pub fn inner(&self, other: &WavefunctionState) -> Complex64 {
        debug_assert_eq!(self.grid, other.grid);
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.grid.spacing()
    }

    /// Largest modulus at the two end nodes.
    pub fn boundary_magnitude(&self) -> f64 {
        let first = self.amplitudes.first().map_or(0.0, |z| z.norm());
        let last = self.amplitudes.last().map_or(0.0, |z| z.norm());
        first.max(last)
    }

    /// Image under `x → −x`; only meaningful on symmetric grids.
    pub fn mirrored(&self) -> WavefunctionState {
        let mut out = self.clone();
        out.amplitudes.reverse();
        out
    }

    pub fn expectation_x(&self) -> f64 {
        self.grid
            .positions()
            .zip(&self.amplitudes)
            .map(|(x, z)| x * z.norm_sqr())
            .sum::<f64>()
            * self.grid.spacing()
    }

    /// Complex amplitude at `x` from cubic interpolation on the four nearest nodes.
    pub fn amplitude_at(&self, x: f64) -> Result<Complex64> {
        if !self.grid.contains(x) {
            return Err(Error::Domain(format!(
                "probe {x} outside [{}, {}]",
                self.grid.x_min(),
                self.grid.x_max()
            )));
        }
        Ok(cubic_interpolate(&self.grid, &self.amplitudes, x))
    }

    /// Modulus and phase in `[0, 2π)` at `x`.
    pub fn observe(&self, x: f64) -> Result<(f64, f64)> {
        let z = self.amplitude_at(x)?;
        Ok((z.norm(), wrap_phase(z.arg())))
    }
}

/// Maps an angle into `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let r = phi.rem_euclid(two_pi);
    if r >= two_pi {
        0.0
    } else {
        r
    }
}

/// First node and weights of the four-point Lagrange stencil around `x`; the
/// stencil is shifted inward at the edges.
pub(crate) fn cubic_stencil(grid: &SpatialGrid, x: f64) -> (usize, [f64; 4]) {
    let n = grid.len();
    let s = (x - grid.x_min()) / grid.spacing();
    let j = (s.floor() as isize).clamp(1, n as isize - 3) as usize;
    let start = j - 1;
    let u = s - start as f64;
    // Nodes at u = 0, 1, 2, 3.
    (
        start,
        [
            -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0,
            u * (u - 2.0) * (u - 3.0) / 2.0,
            -u * (u - 1.0) * (u - 3.0) / 2.0,
            u * (u - 1.0) * (u - 2.0) / 6.0,
        ],
    )
}

/// Four-point Lagrange interpolation of grid values at `x`.
pub(crate) fn cubic_interpolate<T>(grid: &SpatialGrid, values: &[T], x: f64) -> T
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let (start, w) = cubic_stencil(grid, x);
    values[start] * w[0] + values[start + 1] * w[1] + values[start + 2] * w[2] + values[start + 3] * w[3]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_arithmetic() {
        let g = SpatialGrid::new(-8.0, 8.0, 1025).unwrap();
        assert_eq!(g.spacing(), 0.015625);
        assert!(g.is_symmetric());
        let g = SpatialGrid::new(-12.0, 12.0, 2049).unwrap();
        assert_eq!(g.spacing(), 0.01171875);
        assert_eq!(g.x(2048), 12.0);
    }

    #[test]
    fn degenerate_grids_rejected() {
        assert!(matches!(
            SpatialGrid::new(-8.0, 8.0, 2),
            Err(Error::Config { .. })
        ));
        assert!(SpatialGrid::new(1.0, -1.0, 100).is_err());
        assert!(SpatialGrid::new(f64::NAN, 1.0, 100).is_err());
        assert!(SpatialGrid::new(0.0, f64::INFINITY, 100).is_err());
    }

    #[test]
    fn cubic_interpolation_exact_for_cubics() {
        let g = SpatialGrid::new(-2.0, 3.0, 41).unwrap();
        let f = |x: f64| 0.5 * x * x * x - x * x + 2.0 * x - 1.0;
        let vals: Vec<f64> = g.positions().map(f).collect();
        for &x in &[-2.0, -1.93, 0.0, 0.0371, 1.5, 2.99, 3.0] {
            let y = cubic_interpolate(&g, &vals, x);
            assert!((y - f(x)).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn probe_outside_domain_is_an_error() {
        let g = SpatialGrid::symmetric(4.0, 64).unwrap();
        let s = WavefunctionState::from_fn(g, |x| Complex64::new((-x * x).exp(), 0.0)).unwrap();
        assert!(matches!(s.observe(4.5), Err(Error::Domain(_))));
        assert!(s.observe(4.0).is_ok());
    }

    #[test]
    fn wrap_phase_range() {
        for phi in [-7.0, -std::f64::consts::PI, 0.0, 1.0, 6.3, 100.0] {
            let w = wrap_phase(phi);
            assert!((0.0..std::f64::consts::TAU).contains(&w));
        }
    }
}
