//! Ideal gate library, composition, fidelity and reconstruction of gates from
//! propagated states.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::double_well::{gaussian_state, DoubleWellParams, Side};
use crate::error::{Error, Result};
use crate::numerics::{SpatialGrid, WavefunctionState};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cis(phi: f64) -> Complex64 {
    Complex64::from_polar(1.0, phi)
}

/// A 2×2 or 4×4 complex matrix. Qubit order is most-significant first, so
/// basis index `2·q₁ + q₂` with `|0⟩ = ψ₊`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "GateRepr", try_from = "GateRepr")]
pub struct GateMatrix {
    entries: DMatrix<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct GateRepr {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl From<GateMatrix> for GateRepr {
    fn from(g: GateMatrix) -> Self {
        let d = g.dim();
        GateRepr {
            dim: d,
            re: (0..d).map(|i| (0..d).map(|j| g.entries[(i, j)].re).collect()).collect(),
            im: (0..d).map(|i| (0..d).map(|j| g.entries[(i, j)].im).collect()).collect(),
        }
    }
}

impl TryFrom<GateRepr> for GateMatrix {
    type Error = Error;
    fn try_from(r: GateRepr) -> Result<Self> {
        if r.re.len() != r.dim || r.im.len() != r.dim || r.re.iter().chain(&r.im).any(|row| row.len() != r.dim) {
            return Err(Error::Dimension(format!("gate rows do not match dim {}", r.dim)));
        }
        GateMatrix::new(DMatrix::from_fn(r.dim, r.dim, |i, j| c(r.re[i][j], r.im[i][j])))
    }
}

impl GateMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        let (r, cdim) = entries.shape();
        if r != cdim || !(r == 2 || r == 4) {
            return Err(Error::Dimension(format!("gates are 2×2 or 4×4, got {r}×{cdim}")));
        }
        Ok(GateMatrix { entries })
    }

    pub fn from_diagonal(d: &[Complex64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)))
    }

    pub fn from_rows(rows: &[&[Complex64]]) -> Result<Self> {
        let n = rows.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[(i, j)]
    }

    pub fn adjoint(&self) -> GateMatrix {
        GateMatrix { entries: self.entries.adjoint() }
    }

    pub fn scale(&self, z: Complex64) -> GateMatrix {
        GateMatrix { entries: self.entries.map(|e| e * z) }
    }

    /// `self · other`.
    pub fn mul(&self, other: &GateMatrix) -> Result<GateMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!("{}×{} times {}×{}", self.dim(), self.dim(), other.dim(), other.dim())));
        }
        Ok(GateMatrix { entries: &self.entries * &other.entries })
    }

    /// `self ⊗ other` for two single-qubit gates.
    pub fn kron(&self, other: &GateMatrix) -> Result<GateMatrix> {
        if self.dim() != 2 || other.dim() != 2 {
            return Err(Error::Dimension("tensor products are only formed from single-qubit gates".into()));
        }
        GateMatrix::new(self.entries.kronecker(&other.entries))
    }

    /// `max |U†U − I|`.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.entries.adjoint() * &self.entries;
        let n = self.dim();
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                m = m.max((p[(i, j)] - c(target, 0.0)).norm());
            }
        }
        m
    }

    /// Largest entrywise difference after removing the best single global phase.
    pub fn distance_up_to_phase(&self, other: &GateMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension("distance between gates of different size".into()));
        }
        let overlap = (self.entries.adjoint() * &other.entries).trace();
        let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { c(1.0, 0.0) };
        let aligned = self.entries.map(|e| e * phase);
        Ok(aligned
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

/// `|tr(U†V)| / dim`.
pub fn fidelity(u: &GateMatrix, v: &GateMatrix) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::Dimension(format!("fidelity between {}- and {}-dimensional gates", u.dim(), v.dim())));
    }
    Ok((u.entries.adjoint() * &v.entries).trace().norm() / u.dim() as f64)
}

pub fn identity(dim: usize) -> GateMatrix {
    GateMatrix { entries: DMatrix::identity(dim, dim) }
}

pub fn pauli_x() -> GateMatrix {
    GateMatrix::from_rows(&[&[c(0.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0), c(0.0, 0.0)]]).unwrap()
}

pub fn pauli_z() -> GateMatrix {
    GateMatrix::from_diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]).unwrap()
}

/// `(e^{iπ/4} I ± e^{−iπ/4} σx)/√2`, squaring to `±σx`.
pub fn sqrt_not(sign: f64) -> GateMatrix {
    let d = cis(FRAC_PI_4) * FRAC_1_SQRT_2;
    let o = cis(-FRAC_PI_4) * FRAC_1_SQRT_2 * sign;
    GateMatrix::from_rows(&[&[d, o], &[o, d]]).unwrap()
}

/// `diag(e^{−iθ/2}, e^{iθ/2})`.
pub fn z_rotation(theta: f64) -> GateMatrix {
    GateMatrix::from_diagonal(&[cis(-0.5 * theta), cis(0.5 * theta)]).unwrap()
}

pub fn t_gate() -> GateMatrix {
    GateMatrix::from_diagonal(&[c(1.0, 0.0), cis(FRAC_PI_4)]).unwrap()
}

pub fn hadamard() -> GateMatrix {
    let h = c(FRAC_1_SQRT_2, 0.0);
    GateMatrix::from_rows(&[&[h, h], &[h, -h]]).unwrap()
}

pub fn ising_zz() -> GateMatrix {
    GateMatrix::from_diagonal(&[c(1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)]).unwrap()
}

/// `exp(iφ Z⊗Z)`.
pub fn zz_rotation(phi: f64) -> GateMatrix {
    GateMatrix::from_diagonal(&[cis(phi), cis(-phi), cis(-phi), cis(phi)]).unwrap()
}

pub fn cz() -> GateMatrix {
    GateMatrix::from_diagonal(&[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)]).unwrap()
}

/// Control on the first qubit, target on the second.
pub fn cnot() -> GateMatrix {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    GateMatrix::from_rows(&[&[l, o, o, o], &[o, l, o, o], &[o, o, o, l], &[o, o, l, o]]).unwrap()
}

/// `e^{−iU₀t}·diag(1, e^{iE_X t}, e^{−iE_X t}, 1)`: `|+−⟩` sits at the lower
/// corner `E₊ ≈ U₀ − E_X`, `|−+⟩` at `E₋ ≈ U₀ + E_X`.
pub fn two_qubit_phase_gate(ex: f64, t: f64, u0: f64) -> GateMatrix {
    let g = cis(-u0 * t);
    GateMatrix::from_diagonal(&[g, g * cis(ex * t), g * cis(-ex * t), g]).unwrap()
}

/// Looks up a gate by name. `u_z` and `phase2` need an angle (for `phase2`
/// the angle is `E_X·t`).
pub fn ideal_gate(name: &str, angle: Option<f64>) -> Result<GateMatrix> {
    let need_angle = || {
        angle.ok_or_else(|| Error::config("gate.angle", format!("gate `{name}` needs an angle")))
    };
    Ok(match name {
        "i" | "id" | "identity" => identity(2),
        "x" | "not" => pauli_x(),
        "z" | "pauli_z" => pauli_z(),
        "sqrt_not_plus" | "sqrt_not" => sqrt_not(1.0),
        "sqrt_not_minus" => sqrt_not(-1.0),
        "u_z" | "rz" => z_rotation(need_angle()?),
        "t" => t_gate(),
        "h" | "hadamard" => hadamard(),
        "zz" | "ising" => ising_zz(),
        "cz" => cz(),
        "cnot" => cnot(),
        "phase2" => two_qubit_phase_gate(1.0, need_angle()?, 0.0),
        other => return Err(Error::UnknownGate(other.to_string())),
    })
}

/// Where a gate acts inside a composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// The gate already spans the whole register.
    Whole,
    /// Single-qubit gate on qubit 0 (first, most significant) or 1.
    Qubit(usize),
}

/// Product of `steps` in application order (the first step acts first).
pub fn compose(steps: &[(GateMatrix, Placement)]) -> Result<GateMatrix> {
    if steps.is_empty() {
        return Err(Error::config("compose.gates", "nothing to compose"));
    }
    let register = steps
        .iter()
        .map(|(g, p)| match p {
            Placement::Whole => g.dim(),
            Placement::Qubit(_) => 4,
        })
        .max()
        .unwrap();
    let mut acc = identity(register);
    for (k, (g, p)) in steps.iter().enumerate() {
        let lifted = match *p {
            Placement::Whole if g.dim() == register => g.clone(),
            Placement::Qubit(q) if g.dim() == 2 && q < 2 => {
                if q == 0 {
                    g.kron(&identity(2))?
                } else {
                    identity(2).kron(g)?
                }
            }
            _ => {
                return Err(Error::Dimension(format!(
                    "step {k}: {}×{} gate cannot be placed as {p:?} in a {register}-dimensional register",
                    g.dim(),
                    g.dim()
                )))
            }
        };
        acc = lifted.mul(&acc)?;
    }
    Ok(acc)
}

/// Hadamard as `U_Z(π/2)·U_√NOT⁺·U_Z(π/2)` up to a global phase.
pub fn zxz_hadamard() -> GateMatrix {
    compose(&[
        (z_rotation(FRAC_PI_2), Placement::Whole),
        (sqrt_not(1.0), Placement::Whole),
        (z_rotation(FRAC_PI_2), Placement::Whole),
    ])
    .unwrap()
}

/// `−i·σz·σx·σz` read with Pauli matrices, which equals `i·σx`.
pub fn literal_zxz() -> GateMatrix {
    pauli_z()
        .mul(&pauli_x())
        .and_then(|m| m.mul(&pauli_z()))
        .unwrap()
        .scale(c(0.0, -1.0))
}

/// Angles `(θ₁, θ₂, φ)` of `e^{iπ/4}(U_Z(θ₁)⊗U_Z(θ₂))·exp(iφ Z⊗Z)` reproducing CZ.
pub const CZ_ANGLES: (f64, f64, f64) = (FRAC_PI_2, FRAC_PI_2, FRAC_PI_4);

pub fn cz_from_rotations(theta1: f64, theta2: f64, phi: f64) -> GateMatrix {
    compose(&[
        (zz_rotation(phi), Placement::Whole),
        (z_rotation(theta1), Placement::Qubit(0)),
        (z_rotation(theta2), Placement::Qubit(1)),
    ])
    .unwrap()
    .scale(cis(FRAC_PI_4))
}

/// Every `(θ₁, θ₂, φ) ∈ {±π/2, ±π/4}³` whose rotation product equals CZ up to phase.
pub fn cz_angle_search() -> Vec<(f64, f64, f64)> {
    let choices = [FRAC_PI_2, -FRAC_PI_2, FRAC_PI_4, -FRAC_PI_4];
    let target = cz();
    let mut hits = Vec::new();
    for &t1 in &choices {
        for &t2 in &choices {
            for &phi in &choices {
                let g = cz_from_rotations(t1, t2, phi);
                if (fidelity(&g, &target).unwrap() - 1.0).abs() < 1e-12 {
                    hits.push((t1, t2, phi));
                }
            }
        }
    }
    hits
}

/// CNOT as `H⁽²⁾·CZ·H⁽²⁾`.
pub fn composed_cnot() -> GateMatrix {
    compose(&[
        (hadamard(), Placement::Qubit(1)),
        (cz(), Placement::Whole),
        (hadamard(), Placement::Qubit(1)),
    ])
    .unwrap()
}

/// The two Gaussian well states serving as `|0⟩ = ψ₊` and `|1⟩ = ψ₋`.
#[derive(Debug, Clone)]
pub struct QubitBasis {
    pub psi_plus: WavefunctionState,
    pub psi_minus: WavefunctionState,
}

impl QubitBasis {
    pub fn gaussian(params: &DoubleWellParams, grid: SpatialGrid) -> Result<Self> {
        Ok(QubitBasis {
            psi_plus: gaussian_state(params, Side::Plus, grid)?,
            psi_minus: gaussian_state(params, Side::Minus, grid)?,
        })
    }

    /// Basis with the roles of `|0⟩` and `|1⟩` exchanged.
    pub fn swapped(&self) -> QubitBasis {
        QubitBasis {
            psi_plus: self.psi_minus.clone(),
            psi_minus: self.psi_plus.clone(),
        }
    }

    pub fn overlap(&self) -> f64 {
        self.psi_plus.inner(&self.psi_minus).norm()
    }

    pub fn state(&self, side: Side) -> &WavefunctionState {
        match side {
            Side::Plus => &self.psi_plus,
            Side::Minus => &self.psi_minus,
        }
    }
}

/// Leakage above which a reconstructed column is not trusted.
pub const LEAKAGE_LIMIT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub gate: GateMatrix,
    /// `1 − ‖column‖²` for the ψ₊ and ψ₋ inputs.
    pub leakage: [f64; 2],
    pub reliable: bool,
}

/// Column `j` holds the projections of the output for input `j` on `(ψ₊, ψ₋)`.
pub fn reconstruct_gate(
    out_plus: &WavefunctionState,
    out_minus: &WavefunctionState,
    basis: &QubitBasis,
) -> Result<Reconstruction> {
    for s in [out_plus, out_minus] {
        if s.grid != basis.psi_plus.grid {
            return Err(Error::Dimension("run and basis grids differ".into()));
        }
    }
    let col = |s: &WavefunctionState| [basis.psi_plus.inner(s), basis.psi_minus.inner(s)];
    let c0 = col(out_plus);
    let c1 = col(out_minus);
    let gate = GateMatrix::from_rows(&[&[c0[0], c1[0]], &[c0[1], c1[1]]])?;
    let leak = |c: [Complex64; 2]| 1.0 - c[0].norm_sqr() - c[1].norm_sqr();
    let leakage = [leak(c0), leak(c1)];
    Ok(Reconstruction {
        reliable: leakage.iter().all(|l| *l <= LEAKAGE_LIMIT),
        gate,
        leakage,
    })
}
