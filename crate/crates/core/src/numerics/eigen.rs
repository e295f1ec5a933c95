//! Symmetric tridiagonal Hamiltonians and their low-lying spectrum.
//!
//! Eigenvalues come from bisection on Sturm-sequence counts; eigenvectors from
//! inverse iteration with a pivoted tridiagonal LU, orthogonalized within
//! clusters of close eigenvalues.

use serde::{Deserialize, Serialize};

use super::grid::SpatialGrid;
use crate::error::{Error, Result};

/// `H = −½ d²/dx² + V(x)` by central differences with Dirichlet ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalOperator {
    pub diagonal: Vec<f64>,
    pub off_diagonal: Vec<f64>,
}

impl TridiagonalOperator {
    pub fn new(diagonal: Vec<f64>, off_diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.is_empty() || off_diagonal.len() + 1 != diagonal.len() {
            return Err(Error::Dimension(format!(
                "diagonal {} / off-diagonal {}",
                diagonal.len(),
                off_diagonal.len()
            )));
        }
        Ok(TridiagonalOperator {
            diagonal,
            off_diagonal,
        })
    }

    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let d = &self.diagonal;
        let e = &self.off_diagonal;
        (0..n)
            .map(|i| {
                let mut y = d[i] * x[i];
                if i > 0 {
                    y += e[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += e[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off_diagonal[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off_diagonal[i].abs();
            }
            lo = lo.min(self.diagonal[i] - r);
            hi = hi.max(self.diagonal[i] + r);
        }
        (lo, hi)
    }

    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    /// Number of eigenvalues strictly below `sigma`.
    pub fn sturm_count(&self, sigma: f64) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0;
        let mut q = self.diagonal[0] - sigma;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            let e = self.off_diagonal[i - 1];
            q = (self.diagonal[i] - sigma) - e * e / q;
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn pivmin(&self) -> f64 {
        let emax = self
            .off_diagonal
            .iter()
            .fold(1.0_f64, |m, e| m.max(e * e));
        f64::MIN_POSITIVE * emax
    }

    /// `‖H v − E v‖₂ / ‖v‖₂`.
    pub fn residual(&self, value: f64, vector: &[f64]) -> f64 {
        let hv = self.apply(vector);
        let num: f64 = hv
            .iter()
            .zip(vector)
            .map(|(h, v)| (h - value * v).powi(2))
            .sum();
        let den: f64 = vector.iter().map(|v| v * v).sum();
        (num / den).sqrt()
    }
}

/// Discretizes `−½ d²/dx² + V(x)` on `grid`.
pub fn discretize_hamiltonian(
    grid: &SpatialGrid,
    potential: impl Fn(f64) -> f64,
) -> Result<TridiagonalOperator> {
    let h2 = grid.spacing() * grid.spacing();
    let kinetic_diag = 1.0 / h2;
    let mut diagonal = Vec::with_capacity(grid.len());
    for (i, x) in grid.positions().enumerate() {
        let v = potential(x);
        if !v.is_finite() {
            return Err(Error::Domain(format!(
                "potential is not finite at node {i} (x = {x})"
            )));
        }
        diagonal.push(kinetic_diag + v);
    }
    let off_diagonal = vec![-0.5 / h2; grid.len() - 1];
    TridiagonalOperator::new(diagonal, off_diagonal)
}

/// Lowest eigenpairs of a [`TridiagonalOperator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Euclidean unit vectors, largest-magnitude entry positive.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl EigenResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

const MAX_INVERSE_ITERATIONS: usize = 8;
const MAX_SHIFT_RETRIES: usize = 3;

/// The `k` lowest eigenpairs; requires `1 ≤ k ≤ n/4`.
pub fn eigensolve(op: &TridiagonalOperator, k: usize) -> Result<EigenResult> {
    let n = op.len();
    if k == 0 || k > n / 4 {
        return Err(Error::config(
            "k",
            format!("requested {k} eigenpairs from a {n}-point operator (allowed 1..={})", n / 4),
        ));
    }
    let mut eigenvalues = Vec::with_capacity(k);
    let (lo, hi) = op.gershgorin();
    for j in 0..k {
        let mut value = bisect_eigenvalue(op, j, lo, hi);
        if let Some(&prev) = eigenvalues.last() {
            value = value.max(prev);
        }
        eigenvalues.push(value);
    }

    let norm = op.norm_bound().max(1.0);
    let cluster_gap = 1e-3 * norm;
    let tol = (1e3 * f64::EPSILON * norm).max(1e-9);
    let mut eigenvectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (j, &value) in eigenvalues.iter().enumerate() {
        let cluster: Vec<usize> = (0..j)
            .filter(|&i| (eigenvalues[i] - value).abs() < cluster_gap)
            .collect();
        let v = inverse_iteration(op, value, j, &cluster, &eigenvectors, norm, tol)?;
        eigenvectors.push(v);
    }
    Ok(EigenResult {
        eigenvalues,
        eigenvectors,
    })
}

/// Bisection for the `j`-th (zero-based) eigenvalue inside `[lo, hi]`.
fn bisect_eigenvalue(op: &TridiagonalOperator, j: usize, lo: f64, hi: f64) -> f64 {
    let widen = f64::EPSILON * lo.abs().max(hi.abs()) + op.pivmin();
    let mut lo = lo - 2.0 * widen;
    let mut hi = hi + 2.0 * widen;
    for _ in 0..256 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if op.sturm_count(mid) > j {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn start_vector(n: usize, j: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.754_877_666 + j as f64 * 1.324_717_957).sin())
        .collect()
}

fn inverse_iteration(
    op: &TridiagonalOperator,
    value: f64,
    j: usize,
    cluster: &[usize],
    found: &[Vec<f64>],
    norm: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    let n = op.len();
    let mut best_residual = f64::INFINITY;
    for attempt in 0..=MAX_SHIFT_RETRIES {
        let shift = value + attempt as f64 * 16.0 * f64::EPSILON * norm;
        let lu = ShiftedLu::factor(op, shift, norm);
        let mut x = start_vector(n, j + attempt);
        normalize(&mut x);
        for _ in 0..MAX_INVERSE_ITERATIONS {
            lu.solve(&mut x);
            for &i in cluster {
                let c = dot(&x, &found[i]);
                x.iter_mut().zip(&found[i]).for_each(|(a, b)| *a -= c * b);
            }
            if !normalize(&mut x) {
                break;
            }
            let r = op.residual(value, &x);
            best_residual = best_residual.min(r);
            if r < tol {
                fix_sign(&mut x);
                return Ok(x);
            }
        }
    }
    Err(Error::Convergence(format!(
        "inverse iteration for eigenvalue {j} ({value}) stalled at residual {best_residual:.3e}"
    )))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) -> bool {
    let n = dot(x, x).sqrt();
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= n);
    true
}

fn fix_sign(x: &mut [f64]) {
    let imax = x
        .iter()
        .enumerate()
        .fold((0, 0.0_f64), |(bi, bv), (i, v)| {
            if v.abs() > bv {
                (i, v.abs())
            } else {
                (bi, bv)
            }
        })
        .0;
    if x[imax] < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
}

/// LU factorization with partial pivoting of `T − σI`.
struct ShiftedLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(op: &TridiagonalOperator, shift: f64, norm: f64) -> Self {
        let n = op.len();
        let tiny = f64::EPSILON * norm;
        let mut dl = op.off_diagonal.clone();
        let mut du = op.off_diagonal.clone();
        let mut d: Vec<f64> = op.diagonal.iter().map(|v| v - shift).collect();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i].abs() < tiny {
                    d[i] = tiny.copysign(d[i]);
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if d[n - 1].abs() < tiny {
            d[n - 1] = tiny.copysign(d[n - 1]);
        }
        ShiftedLu {
            dl,
            d,
            du,
            du2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dense(op: &TridiagonalOperator) -> DMatrix<f64> {
        let n = op.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = op.diagonal[i];
            if i + 1 < n {
                m[(i, i + 1)] = op.off_diagonal[i];
                m[(i + 1, i)] = op.off_diagonal[i];
            }
        }
        m
    }

    #[test]
    fn free_particle_structure() {
        let g = SpatialGrid::symmetric(5.0, 101).unwrap();
        let h = g.spacing();
        let op = discretize_hamiltonian(&g, |_| 0.0).unwrap();
        assert!(op.diagonal.iter().all(|&d| d == 1.0 / (h * h)));
        assert!(op.off_diagonal.iter().all(|&e| e == -0.5 / (h * h)));
    }

    #[test]
    fn potential_minimum_leaves_kinetic_diagonal() {
        let g = SpatialGrid::symmetric(6.0, 121).unwrap();
        let h = g.spacing();
        let op = discretize_hamiltonian(&g, |x| (x * x - 9.0).powi(2)).unwrap();
        let i = g.nearest(3.0);
        assert_eq!(g.x(i), 3.0);
        assert_eq!(op.diagonal[i], 1.0 / (h * h));
    }

    #[test]
    fn non_finite_potential_reports_node() {
        let g = SpatialGrid::symmetric(1.0, 17).unwrap();
        let err = discretize_hamiltonian(&g, |x| if x == 0.0 { f64::NAN } else { x }).unwrap_err();
        assert!(err.to_string().contains("node 8"), "{err}");
    }

    #[test]
    fn k_out_of_range() {
        let g = SpatialGrid::symmetric(1.0, 64).unwrap();
        let op = discretize_hamiltonian(&g, |x| x * x).unwrap();
        assert!(eigensolve(&op, 0).is_err());
        assert!(eigensolve(&op, 17).is_err());
        assert!(eigensolve(&op, 16).is_ok());
    }

    #[test]
    fn sturm_count_matches_dense_spectrum() {
        let g = SpatialGrid::symmetric(4.0, 64).unwrap();
        let op = discretize_hamiltonian(&g, |x| (x * x - 4.0).powi(2) + 0.3 * x).unwrap();
        let mut ev: Vec<f64> = dense(&op).symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in ev.windows(2).take(20) {
            let mid = 0.5 * (w[0] + w[1]);
            let below = ev.iter().filter(|&&v| v < mid).count();
            assert_eq!(op.sturm_count(mid), below);
        }
    }

    #[test]
    fn harmonic_levels() {
        let g = SpatialGrid::symmetric(10.0, 1025).unwrap();
        let op = discretize_hamiltonian(&g, |x| 0.5 * x * x).unwrap();
        let res = eigensolve(&op, 3).unwrap();
        let h2 = g.spacing().powi(2);
        for (n, e) in res.eigenvalues.iter().enumerate() {
            let n = n as f64;
            if n < 2.0 {
                assert!((e - (n + 0.5)).abs() < 1e-4, "E{n} = {e}");
            }
            // Leading truncation error of the three-point Laplacian.
            let corrected = n + 0.5 - h2 * (2.0 * n * n + 2.0 * n + 1.0) / 32.0;
            assert!((e - corrected).abs() < 1e-6, "E{n} = {e}");
        }
    }

    #[test]
    fn residual_and_orthogonality_in_degenerate_double_well() {
        // Splitting far below the bisection floor: vectors must still come out orthogonal.
        let g = SpatialGrid::symmetric(8.0, 2049).unwrap();
        let op = discretize_hamiltonian(&g, |x| (x * x - 9.0).powi(2)).unwrap();
        let res = eigensolve(&op, 4).unwrap();
        for (e, v) in res.eigenvalues.iter().zip(&res.eigenvectors) {
            assert!(op.residual(*e, v) < 1e-8);
        }
        for i in 0..4 {
            for j in 0..i {
                assert!(dot(&res.eigenvectors[i], &res.eigenvectors[j]).abs() < 1e-8);
            }
        }
        assert!(res.eigenvalues[1] - res.eigenvalues[0] < 1e-8);
        let w = 6.0 * 2f64.sqrt();
        assert!(((res.eigenvalues[2] - res.eigenvalues[0]) / w - 1.0).abs() < 0.05);
    }
}
