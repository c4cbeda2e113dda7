use std::f64::consts::PI;

use nslab_core::malliavin::{
    bracket_decomposition, malliavin_backward_form, malliavin_forward, malliavin_forward_form, min_eigenvalue_tail,
    ForwardRoute,
};
use nslab_core::rng::coarsen_increments;
use nslab_core::sde::{replay, wiener_increments};
use nslab_core::{simulate, ForcingGeometry, ModeIndex, SimConfig, SpectralField};

fn first_unforced_shell() -> Vec<ModeIndex> {
    [(0, 1), (0, -1), (2, 1), (-2, -1)].iter().map(|&(a, b)| ModeIndex::of(a, b)).collect()
}

#[test]
fn short_time_form_is_two_pi_squared_t() {
    let t = 1e-3;
    let c = SimConfig { t_final: t, dt: 1e-5, ..SimConfig::default() };
    let traj = simulate(&c).unwrap();
    for &k in c.forcing.z_star() {
        let e = SpectralField::unit_vector(traj.basis(), k).unwrap();
        let v = malliavin_forward_form(&traj, t, &e).unwrap();
        let err = v / (2.0 * PI * PI * t) - 1.0;
        assert!(err.abs() < 1e-3, "{k}: {err}");
    }
}

#[test]
fn forward_and_backward_forms_converge_together() {
    let base = SimConfig { radius: 4.0, t_final: 0.25, seed: 3, ..SimConfig::default() };
    let fine = base.with_dt(2.5e-4);
    let inc = wiener_increments(&fine, 0, fine.dt);
    let phi_c: Vec<f64> = (0..48).map(|i| ((i * 7 % 13) as f64 - 6.0) / 6.0).collect();
    let mut gaps = Vec::new();
    for (dt, f) in [(1e-3, 4), (5e-4, 2), (2.5e-4, 1)] {
        let traj = replay(&base.with_dt(dt), coarsen_increments(&inc, f)).unwrap();
        let phi = SpectralField::from_coeffs(traj.basis(), phi_c.clone()).unwrap();
        let a = malliavin_forward_form(&traj, 0.25, &phi).unwrap();
        let b = malliavin_backward_form(&traj, 0.25, &phi).unwrap();
        gaps.push((a - b).abs() / a);
    }
    assert!(gaps[0] < 1e-3, "{gaps:?}");
    for w in gaps.windows(2) {
        assert!((0.4..0.6).contains(&(w[1] / w[0])), "{gaps:?}");
    }
}

#[test]
fn projected_matrix_is_positive_with_generating_forcing() {
    let c = SimConfig { radius: 4.0, t_final: 0.5, seed: 21, ..SimConfig::default() };
    let report = min_eigenvalue_tail(&c, 0.5, &first_unforced_shell(), 20, &[1e-10]).unwrap();
    assert!(report.warnings.is_empty());
    assert!(report.paths.iter().all(|p| p.lambda_min > 0.0 && p.lambda_min > 1e-10 * p.lambda_max));
    assert_eq!(report.tail[0].frequency, 0.0);
}

#[test]
fn projected_matrix_vanishes_off_invariant_line() {
    let c = SimConfig {
        radius: 4.0,
        t_final: 0.5,
        forcing: ForcingGeometry::from_pairs(&[[1, 0], [-1, 0]]).unwrap(),
        ..SimConfig::default()
    };
    let report = min_eigenvalue_tail(&c, 0.5, &first_unforced_shell(), 10, &[1e-10]).unwrap();
    assert_eq!(report.warnings.len(), 4);
    assert!(report.paths.iter().all(|p| p.lambda_max.abs() <= 1e-10));
    assert_eq!(report.tail[0].frequency, 1.0);
}

#[test]
fn gram_and_lyapunov_routes_agree() {
    let c = SimConfig { radius: 3.0, t_final: 0.2, seed: 8, ..SimConfig::default() };
    let traj = simulate(&c).unwrap();
    let modes = traj.basis().modes().to_vec();
    let g = malliavin_forward(&traj, 0.2, &modes, ForwardRoute::Gram).unwrap();
    let l = malliavin_forward(&traj, 0.2, &modes, ForwardRoute::Lyapunov).unwrap();
    assert!((&g.matrix - &l.matrix).amax() <= 1e-12 * g.matrix.amax());
}

#[test]
fn bracket_pairings_share_one_constant() {
    let c = SimConfig { radius: 4.0, t_final: 0.05, seed: 12, ..SimConfig::default() };
    let traj = simulate(&c).unwrap();
    let phi = SpectralField::from_coeffs(traj.basis(), (0..48).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
    let d = bracket_decomposition(&traj, 0.0, 0.05, &phi).unwrap();
    let rep = d.pairing_check(&traj);
    assert!(rep.structure_holds, "{rep:?}");
    assert!((rep.constant_over_pi_sq - 2.0).abs() < 1e-10);
    assert!(!rep.constant_is_pi_sq);
}

#[test]
fn bracket_reconstructs_adjoint_derivative() {
    let base = SimConfig { radius: 4.0, t_final: 0.2, seed: 12, ..SimConfig::default() };
    let fine = base.with_dt(2.5e-4);
    let inc = wiener_increments(&fine, 0, fine.dt);
    let phi_c: Vec<f64> = (0..48).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut errs = Vec::new();
    for (dt, f) in [(1e-3, 4), (5e-4, 2), (2.5e-4, 1)] {
        let traj = replay(&base.with_dt(dt), coarsen_increments(&inc, f)).unwrap();
        let phi = SpectralField::from_coeffs(traj.basis(), phi_c.clone()).unwrap();
        let d = bracket_decomposition(&traj, 0.0, 0.2, &phi).unwrap();
        errs.push(d.reconstruction());
    }
    // R carries the Brownian part of Π₀w only up to the step error, so the
    // residual decays like dt^{1/2}.
    assert!(errs[0].mean_relative_error < 0.02, "{errs:?}");
    for w in errs.windows(2) {
        assert!(w[1].mean_relative_error < 0.8 * w[0].mean_relative_error, "{errs:?}");
    }
}
