//! Buckled-plate mechanics: mode shapes, arc length, the Hooke double well,
//! its quartic fit, natural units and feasibility bands.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// `w = w′ = 0` at the supports.
    Fixed,
    /// `w = w″ = 0` at the supports.
    Free,
}

/// Plate of natural length `2·l0` held between supports at `±y0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateGeometry {
    pub l0: f64,
    pub y0: f64,
    pub kappa: f64,
    pub boundary: Boundary,
}

impl PlateGeometry {
    pub fn new(l0: f64, y0: f64, kappa: f64, boundary: Boundary) -> Result<Self> {
        let g = PlateGeometry { l0, y0, kappa, boundary };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l0.is_finite() && self.y0.is_finite() && self.kappa.is_finite()) {
            return Err(Error::config("physics.plate", "geometry must be finite"));
        }
        if !(self.y0 > 0.0 && self.y0 < self.l0) {
            return Err(Error::config(
                "physics.plate.y0",
                format!("need 0 < y0 < l0, got y0 = {}, l0 = {}", self.y0, self.l0),
            ));
        }
        if self.kappa <= 0.0 {
            return Err(Error::config("physics.plate.kappa", "spring constant must be positive"));
        }
        Ok(())
    }

    fn check_amplitude(&self, x0: f64) -> Result<()> {
        if !(x0.abs() < self.y0) {
            return Err(Error::Domain(format!("amplitude |x0| = {} must stay below y0 = {}", x0.abs(), self.y0)));
        }
        Ok(())
    }
}

/// Lowest buckling mode with centre deflection `x0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuckledProfile {
    pub boundary: Boundary,
    pub x0: f64,
    pub y0: f64,
}

impl BuckledProfile {
    pub fn deflection(&self, y: f64) -> f64 {
        let (x0, y0) = (self.x0, self.y0);
        match self.boundary {
            Boundary::Fixed => 0.5 * x0 * (1.0 + (std::f64::consts::PI * y / y0).cos()),
            Boundary::Free => x0 * (std::f64::consts::PI * y / (2.0 * y0)).cos(),
        }
    }

    pub fn slope(&self, y: f64) -> f64 {
        let (x0, y0) = (self.x0, self.y0);
        let pi = std::f64::consts::PI;
        match self.boundary {
            Boundary::Fixed => -0.5 * x0 * (pi / y0) * (pi * y / y0).sin(),
            Boundary::Free => -x0 * (pi / (2.0 * y0)) * (pi * y / (2.0 * y0)).sin(),
        }
    }

    pub fn curvature(&self, y: f64) -> f64 {
        let (x0, y0) = (self.x0, self.y0);
        let pi = std::f64::consts::PI;
        match self.boundary {
            Boundary::Fixed => -0.5 * x0 * (pi / y0).powi(2) * (pi * y / y0).cos(),
            Boundary::Free => -x0 * (pi / (2.0 * y0)).powi(2) * (pi * y / (2.0 * y0)).cos(),
        }
    }
}

pub fn buckled_profile(geom: &PlateGeometry, x0: f64) -> Result<BuckledProfile> {
    geom.check_amplitude(x0)?;
    Ok(BuckledProfile {
        boundary: geom.boundary,
        x0,
        y0: geom.y0,
    })
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod estimate and |Kronrod − Gauss| on `[a, b]`.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature to relative tolerance `rel_tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    let (whole, _) = gk15(&f, a, b);
    let tol = rel_tol * whole.abs().max(f64::MIN_POSITIVE);
    let mut stack = vec![(a, b, 0u32)];
    let mut total = 0.0;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (value, err) = gk15(&f, lo, hi);
        if err <= tol * (hi - lo) / (b - a) || err <= 64.0 * f64::EPSILON * value.abs() {
            total += value;
        } else if depth >= 48 {
            return Err(Error::Convergence(format!("quadrature did not converge on [{lo}, {hi}]")));
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    Ok(total)
}

/// Full length of the buckled plate,
/// `L = (4y0/π) ∫₀^{π/2} √(1 + c² sin²θ) dθ` with `c = πx0/(2y0)`.
pub fn arc_length(geom: &PlateGeometry, x0: f64) -> Result<f64> {
    geom.check_amplitude(x0)?;
    arc_length_unchecked(geom.y0, x0)
}

fn arc_length_unchecked(y0: f64, x0: f64) -> Result<f64> {
    let pi = std::f64::consts::PI;
    if x0 == 0.0 {
        return Ok(2.0 * y0);
    }
    let c2 = (pi * x0 / (2.0 * y0)).powi(2);
    let e = integrate(|t: f64| (1.0 + c2 * t.sin().powi(2)).sqrt(), 0.0, 0.5 * pi, 1e-13)?;
    Ok(4.0 * y0 / pi * e)
}

/// `(κ/2)(L(x0) − 2L₀)²`: zero where the buckled length equals the natural length.
pub fn hooke_potential(geom: &PlateGeometry, x0: f64) -> Result<f64> {
    let l = arc_length(geom, x0)?;
    Ok(0.5 * geom.kappa * (l - 2.0 * geom.l0).powi(2))
}

/// Closed-form quartic coefficient and minimum as printed with the model.
pub fn printed_lambda(geom: &PlateGeometry) -> f64 {
    let pi4 = std::f64::consts::PI.powi(4);
    (geom.l0 - 3.0 * geom.y0) * geom.kappa * pi4 / (256.0 * geom.y0.powi(3))
}

pub fn printed_a(geom: &PlateGeometry) -> f64 {
    let (l0, y0) = (geom.l0, geom.y0);
    y0 * 4.0 * std::f64::consts::SQRT_2 / std::f64::consts::PI * ((l0 - y0) / (3.0 * l0 - y0)).sqrt()
}

/// Quartic coefficient of the small-`x0` expansion of [`hooke_potential`].
pub fn series_lambda(geom: &PlateGeometry) -> f64 {
    let pi4 = std::f64::consts::PI.powi(4);
    (3.0 * geom.l0 - geom.y0) * geom.kappa * pi4 / (256.0 * geom.y0.powi(3))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarticFit {
    pub lambda_fit: f64,
    pub a_fit: f64,
    #[serde(rename = "V0")]
    pub v0: f64,
    pub barrier: f64,
    /// Largest fit error over the window, relative to the barrier.
    pub residual: f64,
    pub printed_lambda: f64,
    pub printed_a: f64,
    pub series_lambda: f64,
    pub discrepancy: Discrepancy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub lambda_rel: f64,
    pub a_rel: f64,
    pub series_lambda_rel: f64,
    pub lambda_sign_mismatch: bool,
}

/// Samples in the least-squares window `|x0| ≤ 1.2·a_fit`.
pub const FIT_SAMPLES: usize = 201;

/// Minimum by bisection on `L(a) = 2L₀`, then a least-squares fit of
/// `λ(x0² − a²)² + V₀` to the Hooke potential.
pub fn quartic_fit(geom: &PlateGeometry) -> Result<QuarticFit> {
    geom.validate()?;
    let target = 2.0 * geom.l0;
    let mut lo = 0.0;
    let mut hi = 0.99 * geom.y0;
    if arc_length(geom, hi)? <= target {
        return Err(Error::Geometry(format!(
            "plate not compressed enough: no buckled minimum for |x0| < 0.99·y0 (l0/y0 = {})",
            geom.l0 / geom.y0
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if arc_length(geom, mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);

    let xs: Vec<f64> = (0..FIT_SAMPLES)
        .map(|i| -1.2 * a + 2.4 * a * i as f64 / (FIT_SAMPLES - 1) as f64)
        .collect();
    let vs = xs.iter().map(|&x| hooke_potential(geom, x)).collect::<Result<Vec<f64>>>()?;
    let basis: Vec<f64> = xs.iter().map(|x| (x * x - a * a).powi(2)).collect();
    // Normal equations for [basis, 1].
    let n = xs.len() as f64;
    let sb: f64 = basis.iter().sum();
    let sbb: f64 = basis.iter().map(|b| b * b).sum();
    let sv: f64 = vs.iter().sum();
    let sbv: f64 = basis.iter().zip(&vs).map(|(b, v)| b * v).sum();
    let det = n * sbb - sb * sb;
    let lambda = (n * sbv - sb * sv) / det;
    let v0 = (sbb * sv - sb * sbv) / det;

    let barrier = hooke_potential(geom, 0.0)? - hooke_potential(geom, a)?;
    let residual = basis
        .iter()
        .zip(&vs)
        .map(|(b, v)| (lambda * b + v0 - v).abs())
        .fold(0.0, f64::max)
        / barrier;

    let pl = printed_lambda(geom);
    let pa = printed_a(geom);
    let sl = series_lambda(geom);
    Ok(QuarticFit {
        lambda_fit: lambda,
        a_fit: a,
        v0,
        barrier,
        residual,
        printed_lambda: pl,
        printed_a: pa,
        series_lambda: sl,
        discrepancy: Discrepancy {
            lambda_rel: (pl - lambda) / lambda,
            a_rel: (pa - a) / a,
            series_lambda_rel: (sl - lambda) / lambda,
            lambda_sign_mismatch: pl.signum() != lambda.signum(),
        },
    })
}

/// `(x0, L, V)` on `n` evenly spaced amplitudes in `[−x_max, x_max]`.
pub fn potential_table(geom: &PlateGeometry, x_max: f64, n: usize) -> Result<Vec<[f64; 3]>> {
    if n < 2 {
        return Err(Error::config("mechanics.samples", "need at least two samples"));
    }
    (0..n)
        .map(|i| {
            let x = -x_max + 2.0 * x_max * i as f64 / (n - 1) as f64;
            let l = arc_length(geom, x)?;
            Ok([x, l, 0.5 * geom.kappa * (l - 2.0 * geom.l0).powi(2)])
        })
        .collect()
}

/// Displacement band in which the quantum description is taken to apply.
pub const QUANTUM_XU_BAND: (f64, f64) = (10e-15, 10e-12);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaturalUnits {
    pub t_u: f64,
    pub x_u: f64,
    pub mass: f64,
    pub lambda: f64,
    pub omega_si: Option<f64>,
    pub quantum_regime: bool,
}

impl NaturalUnits {
    /// Recovers `(m, λ)` from `(tᵤ, xᵤ)`.
    pub fn mass_lambda(t_u: f64, x_u: f64) -> (f64, f64) {
        let m = HBAR * t_u / (x_u * x_u);
        (m, m * m / (HBAR * t_u.powi(3)))
    }
}

/// `tᵤ = (m²/ħλ)^{1/3}`, `xᵤ = ħ^{1/3}/(mλ)^{1/6}`; `ω = 2a√(2λ/m)` when `a` (m) is given.
pub fn natural_units(mass: f64, lambda_si: f64, a_si: Option<f64>) -> Result<NaturalUnits> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::config("physics.mass", "mass must be positive"));
    }
    if !(lambda_si.is_finite() && lambda_si > 0.0) {
        return Err(Error::config("physics.lambda", "quartic coefficient must be positive"));
    }
    let t_u = (mass * mass / (HBAR * lambda_si)).cbrt();
    let x_u = HBAR.cbrt() / (mass * lambda_si).powf(1.0 / 6.0);
    Ok(NaturalUnits {
        t_u,
        x_u,
        mass,
        lambda: lambda_si,
        omega_si: a_si.map(|a| 2.0 * a * (2.0 * lambda_si / mass).sqrt()),
        quantum_regime: x_u >= QUANTUM_XU_BAND.0 && x_u <= QUANTUM_XU_BAND.1,
    })
}

/// Bands quoted for realistic devices.
pub const LENGTH_BAND: (f64, f64) = (1e-6, 100e-6);
pub const DISPLACEMENT_BAND: (f64, f64) = (10e-15, 0.1e-12);
pub const MASS_BAND: (f64, f64) = (1e-21, 1e-14);
pub const FREQUENCY_BAND: (f64, f64) = (1e6, 1e9);

/// Inclusive log-spaced sampling range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl ParamRange {
    pub fn single(v: f64) -> Self {
        ParamRange { min: v, max: v, count: 1 }
    }

    fn samples(&self, field: &str) -> Result<Vec<f64>> {
        if self.count == 0 {
            return Err(Error::config(field, "range is empty"));
        }
        if !(self.min > 0.0 && self.max >= self.min && self.max.is_finite()) {
            return Err(Error::config(field, format!("need 0 < min ≤ max, got [{}, {}]", self.min, self.max)));
        }
        if self.count == 1 {
            return Ok(vec![self.min]);
        }
        let (l0, l1) = (self.min.ln(), self.max.ln());
        Ok((0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.max
                } else {
                    (l0 + (l1 - l0) * i as f64 / (self.count - 1) as f64).exp()
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialRanges {
    pub mass: ParamRange,
    pub length: ParamRange,
    pub kappa: ParamRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityRow {
    pub mass: f64,
    pub length: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub x_u: f64,
    pub t_u: f64,
    /// Zero-point amplitude `√(ħ/mω)` with `ω = √(κ/m)`; the displacement band applies to it.
    pub x_zpf: f64,
    pub frequency: f64,
    pub length_ok: bool,
    pub displacement_ok: bool,
    pub mass_ok: bool,
    pub frequency_ok: bool,
    pub candidate: bool,
}

fn within(v: f64, band: (f64, f64)) -> bool {
    v >= band.0 && v <= band.1
}

/// Quartic coefficient of a barely buckled plate of total length `length`,
/// `κπ⁴/(32·length²)`.
pub fn lambda_from_plate(kappa: f64, length: f64) -> f64 {
    kappa * std::f64::consts::PI.powi(4) / (32.0 * length * length)
}

/// Evaluates the device bands on every combination of the sampled ranges.
pub fn feasibility_report(ranges: &MaterialRanges) -> Result<Vec<FeasibilityRow>> {
    let masses = ranges.mass.samples("material.mass")?;
    let lengths = ranges.length.samples("material.length")?;
    let kappas = ranges.kappa.samples("material.kappa")?;
    let mut rows = Vec::with_capacity(masses.len() * lengths.len() * kappas.len());
    for &mass in &masses {
        for &length in &lengths {
            for &kappa in &kappas {
                let lambda = lambda_from_plate(kappa, length);
                let nu = natural_units(mass, lambda, None)?;
                let omega = (kappa / mass).sqrt();
                let frequency = omega / std::f64::consts::TAU;
                let x_zpf = (HBAR / (mass * omega)).sqrt();
                let length_ok = within(length, LENGTH_BAND);
                let displacement_ok = within(x_zpf, DISPLACEMENT_BAND);
                let mass_ok = within(mass, MASS_BAND);
                let frequency_ok = within(frequency, FREQUENCY_BAND);
                rows.push(FeasibilityRow {
                    mass,
                    length,
                    kappa,
                    lambda,
                    x_u: nu.x_u,
                    t_u: nu.t_u,
                    x_zpf,
                    frequency,
                    length_ok,
                    displacement_ok,
                    mass_ok,
                    frequency_ok,
                    candidate: length_ok && displacement_ok && mass_ok && frequency_ok,
                });
            }
        }
    }
    Ok(rows)
}
