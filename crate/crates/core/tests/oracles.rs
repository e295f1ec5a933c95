//! Checks against closed forms and independent reference values.

use nemsq_core::control::{calibrate_gate, CalibrationConfig, GateTarget, ProtocolConfig, PulseSchedule};
use nemsq_core::coupling::{corner_energies, pair_potential, CouplingParams};
use nemsq_core::double_well::{solve_levels, DoubleWellParams, Side};
use nemsq_core::numerics::{discretize_hamiltonian, eigensolve, propagate, SpatialGrid, WavefunctionState};
use proptest::prelude::*;

/// Ground energy of `−½∂² + x⁴`.
const QUARTIC_E0: f64 = 0.667_986_259_155_777;

#[test]
fn harmonic_ladder() {
    let omega = 2.0;
    let grid = SpatialGrid::symmetric(8.0, 2049).unwrap();
    let op = discretize_hamiltonian(&grid, |x| 0.5 * omega * omega * x * x).unwrap();
    let r = eigensolve(&op, 6).unwrap();
    for (n, e) in r.eigenvalues.iter().enumerate() {
        let exact = (n as f64 + 0.5) * omega;
        assert!((e - exact).abs() < 1e-4 * exact, "level {n}: {e} vs {exact}");
    }
}

#[test]
fn pure_quartic_ground_state_richardson() {
    let p = DoubleWellParams::symmetric(0.0).unwrap();
    let e = |n| solve_levels(&p, n, 1).unwrap().result.eigenvalues[0];
    let (coarse, fine) = (e(1025), e(2049));
    let extrapolated = (4.0 * fine - coarse) / 3.0;
    assert!((fine - QUARTIC_E0).abs() < 1e-5, "{fine}");
    assert!((extrapolated - QUARTIC_E0).abs() < 1e-8, "{extrapolated}");
}

#[test]
fn coherent_state_follows_classical_orbit() {
    let (omega, x0) = (3.0, 1.5);
    let grid = SpatialGrid::symmetric(10.0, 2049).unwrap();
    let values: Vec<f64> = grid.positions().map(|x| (-0.5 * omega * (x - x0).powi(2)).exp()).collect();
    let psi = WavefunctionState::from_real(grid, &values).unwrap();
    let t = 1.0;
    let out = propagate(&psi, |x, _| 0.5 * omega * omega * x * x, t, 1e-3).unwrap();
    let expected = x0 * (omega * t).cos();
    assert!((out.expectation_x() - expected).abs() < 1e-3, "{} vs {expected}", out.expectation_x());
    assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
}

#[test]
fn calibration_is_mirror_symmetric() {
    let template = PulseSchedule::default_well_separation(27.02).unwrap();
    let base = DoubleWellParams::symmetric(3.0).unwrap();
    let protocol = ProtocolConfig { n_points: 257, dt: 2e-3, ..ProtocolConfig::default() };
    let cal = |initial| {
        let c = CalibrationConfig { half_window: 1.0, scan_step: 0.1, t2_tol: 1e-4, initial };
        calibrate_gate(GateTarget::SqrtNot, &template, &base, &protocol, &c, None).unwrap()
    };
    let (plus, minus) = (cal(Side::Plus), cal(Side::Minus));
    assert!((plus.t2_star - minus.t2_star).abs() < 1e-9, "{} vs {}", plus.t2_star, minus.t2_star);
    assert!(plus.residual < 1e-2);
    for (a, b) in plus.scan.iter().zip(&minus.scan) {
        assert!((a.mag_plus - b.mag_minus).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corners_match_pair_potential(
        eps0s in 1.0f64..500.0,
        x_cap in 5.0f64..20.0,
        v1 in 0.1f64..3.0,
        a in 0.5f64..2.0,
    ) {
        let p = CouplingParams { eps0s, x_cap, v1, a };
        let c = corner_energies(&p).unwrap();
        let dw = DoubleWellParams::symmetric(a).unwrap();
        for (s1, s2) in [(Side::Plus, Side::Plus), (Side::Plus, Side::Minus), (Side::Minus, Side::Plus), (Side::Minus, Side::Minus)] {
            let v = pair_potential(&p, &[dw, dw], s1.sign() * a, s2.sign() * a).unwrap();
            prop_assert!((v - c.branch(s1, s2)).abs() <= 1e-12 * v.abs());
        }
    }
}
