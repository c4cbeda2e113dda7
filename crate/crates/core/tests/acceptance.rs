//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are implemented as stated and are
//! expected to fail; the process exits nonzero only on any other failure.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use nslab_core::flows::{
    adjoint_path, control_search, duality_series, second_variation, tangent_path, AdjointScheme, ControlOptions,
    ControlProblem,
};
use nslab_core::lattice::{ball, is_generating, reachable_modes, DEFAULT_MAX_SHELLS};
use nslab_core::malliavin::{
    bracket_decomposition, malliavin_backward_form, malliavin_forward_form, min_eigenvalue_tail,
};
use nslab_core::quadvar::{
    chi_square_cdf, chi_square_small_ball_bound, event_frequencies, partition_scheme, qv_estimate, uniform_grid,
    SampledProcess, WienerEnsemble,
};
use nslab_core::rng::{coarsen_increments, NoiseStream};
use nslab_core::sde::{replay_with, simulate_ensemble, simulate_with, wiener_increments, GalerkinModel};
use nslab_core::spectral::{nonlinearity_b, InteractionTable, BASIS_NORM_SQ};
use nslab_core::{par, Basis, ForcingGeometry, ModeIndex, SimConfig, SpectralField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that cannot pass as written; see the decisions notes.
const KNOWN_FAILURES: &[u32] = &[8, 10];

struct Outcome {
    pass: bool,
    detail: String,
}

fn random_field(basis: &std::sync::Arc<Basis>, rng: &mut ChaCha8Rng) -> SpectralField {
    SpectralField::from_coeffs(basis, (0..basis.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn reference_config() -> SimConfig {
    SimConfig { t_final: 0.5, seed: 20_240_601, ..SimConfig::default() }
}

/// Trajectories at dt and dt/2 driven by the same Brownian path.
fn coupled_pair(config: &SimConfig, path: u64) -> [nslab_core::Trajectory; 2] {
    let fine = config.with_dt(config.dt / 2.0);
    let inc = wiener_increments(&fine, path, fine.dt);
    let mc = GalerkinModel::new(config).unwrap();
    let mf = GalerkinModel::new(&fine).unwrap();
    [
        replay_with(&mc, config, path, coarsen_increments(&inc, 2)).unwrap(),
        replay_with(&mf, &fine, path, inc).unwrap(),
    ]
}

fn c1_representation() -> Outcome {
    let config = reference_config();
    let rows = par::map_indexed(10, |p| {
        let pair = coupled_pair(&config, p as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + p as u64);
        let n = pair[0].basis().len();
        (0..50)
            .map(|_| {
                let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let gap = |t: &nslab_core::Trajectory| {
                    let phi = SpectralField::from_coeffs(t.basis(), c.clone()).unwrap();
                    let f = malliavin_forward_form(t, 0.5, &phi).unwrap();
                    let b = malliavin_backward_form(t, 0.5, &phi).unwrap();
                    (f - b).abs() / f
                };
                (gap(&pair[0]), gap(&pair[1]))
            })
            .collect::<Vec<_>>()
    });
    let all: Vec<(f64, f64)> = rows.into_iter().flatten().collect();
    let worst = all.iter().map(|r| r.0).fold(0.0, f64::max);
    let ratio = all.iter().map(|r| r.1).sum::<f64>() / all.iter().map(|r| r.0).sum::<f64>();
    Outcome {
        pass: worst <= 1e-3 && (0.4..=0.6).contains(&ratio),
        detail: format!("max rel gap {worst:.3e} (tol 1e-3) over {} cases; dt/2 aggregate ratio {ratio:.3}", all.len()),
    }
}

fn c2_duality() -> Outcome {
    let config = reference_config();
    let rows = par::map_indexed(10, |p| {
        let pair = coupled_pair(&config, p as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(200 + p as u64);
        let phi_c = random_field(pair[0].basis(), &mut rng).into_coeffs();
        let k = *config.forcing.z_star().iter().nth(p % 4).unwrap();
        // Relative to the Cauchy–Schwarz scale max_r ‖V(r)‖‖U(r)‖, as for the
        // conservation identities; the mean pairing can sit near zero.
        let drift = |t: &nslab_core::Trajectory| {
            let phi = SpectralField::from_coeffs(t.basis(), phi_c.clone()).unwrap();
            let s = duality_series(t, k, 0.0, 0.5, &phi).unwrap();
            let mean = s.iter().sum::<f64>() / s.len() as f64;
            let d = s.iter().fold(0.0f64, |m, x| m.max((x - mean).abs()));
            let end = t.node_index(0.5).unwrap();
            let ek = SpectralField::basis_vector(t.basis(), k).unwrap();
            let v = tangent_path(t, 0, ek.coeffs(), end);
            let u = adjoint_path(t, end, phi.coeffs(), 0, AdjointScheme::Continuous);
            let scale = v
                .iter()
                .zip(&u)
                .map(|(a, b)| BASIS_NORM_SQ * norm(a) * norm(b))
                .fold(0.0, f64::max);
            (d / scale, d / mean.abs())
        };
        let (a, b) = (drift(&pair[0]), drift(&pair[1]));
        (a.0, b.0, a.1)
    });
    let worst = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst_mean = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let ratio = rows.iter().map(|r| r.1).sum::<f64>() / rows.iter().map(|r| r.0).sum::<f64>();
    Outcome {
        pass: worst <= 1e-3 && (0.4..=0.6).contains(&ratio),
        detail: format!(
            "max relative drift {worst:.3e} (tol 1e-3; {worst_mean:.2e} against |mean pairing|); \
             dt/2 aggregate ratio {ratio:.3}"
        ),
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn c3_conservation() -> Outcome {
    let basis = Basis::new(6.0).unwrap();
    let table = InteractionTable::build(&basis);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let (w, v) = (random_field(&basis, &mut rng), random_field(&basis, &mut rng));
        let bwv = nonlinearity_b(&table, &w, &v).unwrap();
        e1 = e1.max(bwv.inner(&v).unwrap().abs() / (bwv.norm() * v.norm()));
        let bww = nonlinearity_b(&table, &w, &w).unwrap();
        let psi = w.inverse_laplacian();
        e2 = e2.max(bww.inner(&psi).unwrap().abs() / (bww.norm() * psi.norm()));
    }
    Outcome {
        pass: e1 <= 1e-12 && e2 <= 1e-12,
        detail: format!("max rel <B(w,v),v> {e1:.2e}, <B(w,w),Λ^-2 w> {e2:.2e} over 1000 pairs (tol 1e-12)"),
    }
}

fn c4_triads() -> Outcome {
    let r = common::compare_with_quadrature();
    Outcome {
        pass: r.support_mismatches == 0 && r.max_abs_error <= 1e-12,
        detail: format!(
            "{} mode pairs, {} support mismatches, max coefficient error {:.2e} (tol 1e-12)",
            r.pairs, r.support_mismatches, r.max_abs_error
        ),
    }
}

fn c5_lattice() -> Outcome {
    let four = reachable_modes(&ForcingGeometry::four_mode(), 10.0, DEFAULT_MAX_SHELLS).unwrap();
    let axes = ForcingGeometry::from_pairs(&[[1, 0], [-1, 0], [0, 1], [0, -1]]).unwrap();
    let axes_z1 = reachable_modes(&axes, 10.0, DEFAULT_MAX_SHELLS).unwrap().shells[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut agree, mut literal, mut generating) = (0, 0, 0);
    for _ in 0..200 {
        let n_pairs = rng.random_range(1..=4);
        let mut pairs: Vec<[i32; 2]> = Vec::new();
        while pairs.len() < 2 * n_pairs {
            let k = [rng.random_range(-8..=8), rng.random_range(-8..=8)];
            if k == [0, 0] || k[0] * k[0] + k[1] * k[1] > 64 || pairs.contains(&k) {
                continue;
            }
            pairs.push(k);
            pairs.push([-k[0], -k[1]]);
        }
        let g = ForcingGeometry::from_pairs(&pairs).unwrap();
        let v = is_generating(&g).generating;
        // Brackets leaving the window are discarded, so the boundary of a
        // radius-8 window can be unreachable from inside it; search in a
        // wider window and ask whether it covers the radius-8 ball.
        let r = reachable_modes(&g, 24.0, DEFAULT_MAX_SHELLS).unwrap().covers_ball(8.0);
        let r8 = reachable_modes(&g, 8.0, DEFAULT_MAX_SHELLS).unwrap().covers_ball(8.0);
        generating += v as usize;
        agree += (v == r) as usize;
        literal += (v == r8) as usize;
    }
    let covers = four.covers_ball(10.0);
    Outcome {
        pass: covers && axes_z1 == 0 && agree == 200,
        detail: format!(
            "four-mode reaches all {} modes |k|<=10: {covers}; axis forcing |Z1| = {axes_z1}; \
             criterion vs reachability agree {agree}/200 ({generating} generating; \
             {literal}/200 with the search confined to |k|<=8)",
            ball(10.0).len()
        ),
    }
}

fn first_unforced_shell() -> Vec<ModeIndex> {
    [(0, 1), (0, -1), (2, 1), (-2, -1)].iter().map(|&(a, b)| ModeIndex::of(a, b)).collect()
}

fn c6_hypoellipticity() -> Outcome {
    let good = SimConfig { seed: 6, ..SimConfig::default() };
    let r = min_eigenvalue_tail(&good, 1.0, &first_unforced_shell(), 200, &[]).unwrap();
    let positive = r.paths.iter().filter(|p| p.lambda_min > 0.0).count();
    let smallest = r.paths.iter().map(|p| p.lambda_min).fold(f64::INFINITY, f64::min);
    let degenerate = SimConfig { forcing: ForcingGeometry::from_pairs(&[[1, 0], [-1, 0]]).unwrap(), ..good };
    let d = min_eigenvalue_tail(&degenerate, 1.0, &first_unforced_shell(), 200, &[]).unwrap();
    let zero = d.paths.iter().filter(|p| p.lambda_min <= 1e-10).count();
    let largest = d.paths.iter().map(|p| p.lambda_max).fold(0.0, f64::max);
    Outcome {
        pass: positive == 200 && zero == 200,
        detail: format!(
            "generating: λ_min > 0 on {positive}/200 (smallest {smallest:.3e}); \
             degenerate: λ_min <= 1e-10 on {zero}/200 (largest λ_max {largest:.1e})"
        ),
    }
}

fn c7_short_time() -> Outcome {
    let t = 1e-3;
    let c = SimConfig { t_final: t, dt: 1e-5, ..SimConfig::default() };
    let model = GalerkinModel::new(&c).unwrap();
    let traj = simulate_with(&model, &c, 0).unwrap();
    let mut worst = 0.0f64;
    for &k in c.forcing.z_star() {
        let e = SpectralField::unit_vector(traj.basis(), k).unwrap();
        let v = malliavin_forward_form(&traj, t, &e).unwrap();
        worst = worst.max((v / (2.0 * PI * PI * t) - 1.0).abs());
    }
    Outcome {
        pass: worst <= 0.05,
        detail: format!(
            "max |e(t)| = {worst:.2e} at t = 1e-3 (dt 1e-5) against 2π²·t under the unnormalized basis \
             (tol 0.05); against bare t, e = 2π² − 1 = {:.2}",
            2.0 * PI * PI - 1.0
        ),
    }
}

fn c8_brackets() -> Outcome {
    let c = SimConfig { radius: 4.0, t_final: 0.1, seed: 8, ..SimConfig::default() };
    let model = GalerkinModel::new(&c).unwrap();
    let traj = simulate_with(&model, &c, 0).unwrap();
    let phi = random_field(traj.basis(), &mut ChaCha8Rng::seed_from_u64(8));
    let d = bracket_decomposition(&traj, 0.0, 0.1, &phi).unwrap();
    let r = d.pairing_check(&traj);
    let worst = r.identities.iter().map(|i| i.residual_at_fit).fold(0.0, f64::max);
    let cases: usize = r.identities.iter().map(|i| i.cases).sum();
    Outcome {
        pass: r.structure_holds && r.constant_is_pi_sq,
        detail: format!(
            "4 identities, {cases} checks: shared-constant residual {worst:.1e} (tol 1e-10); \
             constant = {:.12}·π², required π²",
            r.constant_over_pi_sq
        ),
    }
}

fn c9_quadratic_variation() -> Outcome {
    let levels = 12u32;
    let n = 1usize << levels;
    let h = 1.0 / n as f64;
    let times = uniform_grid(1.0, n);
    let n_paths = 100;
    let per_path = par::map_indexed(n_paths, |p| {
        let noise = NoiseStream::new(9, p as u64, 2);
        let mut w = [0.0; 2];
        let mut z = Vec::with_capacity(n + 1);
        for (i, &t) in times.iter().enumerate() {
            if i > 0 {
                for (c, wc) in w.iter_mut().enumerate() {
                    *wc += h.sqrt() * noise.normal(i as u64 - 1, c);
                }
            }
            z.push(t.cos() + t * w[0] + t * w[1]);
        }
        let z = SampledProcess::new(times.clone(), z).unwrap();
        (4..=levels).map(|l| (qv_estimate(&z, &uniform_grid(1.0, 1 << l)).unwrap() - 2.0 / 3.0).abs()).collect::<Vec<_>>()
    });
    let err: Vec<f64> = (0..per_path[0].len())
        .map(|i| per_path.iter().map(|e| e[i]).sum::<f64>() / n_paths as f64)
        .collect();
    let ratios: Vec<f64> = err.windows(2).map(|w| w[1] / w[0]).collect();
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    Outcome {
        pass: worst <= 0.8,
        detail: format!(
            "mean |QV - 2/3| over 100 paths, 2^4..2^12 steps: ratios [{}] (max {worst:.3}, tol 0.8)",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn c10_gaussian_bounds() -> Outcome {
    let mut violations = Vec::new();
    let mut stirling_ok = true;
    for c in [0.3, 0.5, 0.7] {
        for m in [50, 100, 200] {
            let p = chi_square_cdf(m, c * m as f64);
            let b = chi_square_small_ball_bound(c, m).unwrap();
            if p > b.chi_square {
                violations.push(format!("({c},{m}) x{:.2}", p / b.chi_square));
            }
            stirling_ok &= p <= b.chi_square_stirling;
        }
    }
    let scheme = partition_scheme(0.04, 1.0).unwrap();
    let ens = WienerEnsemble::sample(WienerEnsemble::grid_for(&[&scheme]), 2, 10_000, 10).unwrap();
    let r = event_frequencies(&ens, &scheme).unwrap();
    let a = &r.omega_a;
    let omega_ok = a.within_bound();
    Outcome {
        pass: violations.is_empty() && omega_ok,
        detail: format!(
            "exact CDF exceeds (πM)^-1/2 e^-γM/2 at {}/9 grid points [{}]; corrected √(M/4π) prefactor holds: \
             {stirling_ok}; Ω_a freq {:.4} CI [{:.4}, {:.4}] vs bound {:.3}: {omega_ok}",
            violations.len(),
            violations.join(" "),
            a.frequency,
            a.ci_low,
            a.ci_high,
            a.bound.unwrap()
        ),
    }
}

fn c11_enstrophy() -> Outcome {
    let c = SimConfig { seed: 11, ..SimConfig::default() };
    let paths = simulate_ensemble(&c, 500).unwrap();
    let r: Vec<f64> = paths.iter().map(|t| *t.enstrophy_residual().last().unwrap()).collect();
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let se = (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();
    let e0 = paths[0].forcing_energy();
    let e0_ok = e0 == c.forcing.len() as f64 * 2.0 * PI * PI;
    Outcome {
        pass: mean.abs() <= 3.0 * se && e0_ok,
        detail: format!("mean r(1) = {mean:.4} (SE {se:.4}, |mean|/SE {:.2}, tol 3); E₀ = {e0:.6} = |Z*|·2π²: {e0_ok}", mean.abs() / se),
    }
}

fn c12_second_variation() -> Outcome {
    let c = SimConfig { t_final: 0.5, seed: 12, ..SimConfig::default() };
    let model = GalerkinModel::new(&c).unwrap();
    let traj = simulate_with(&model, &c, 0).unwrap();
    let h = 1e-4;
    let cases = [((50, 0), (300, 1)), ((120, 2), (120, 3)), ((10, 3), (400, 0)), ((200, 1), (220, 2))];
    let mut worst = 0.0f64;
    for (a, b) in cases {
        let eval = |sa: f64, sb: f64| {
            let mut x = traj.increments().to_vec();
            x[a.0][a.1] += sa * h;
            x[b.0][b.1] += sb * h;
            replay_with(&model, &c, 0, x).unwrap().final_state().into_coeffs()
        };
        let (pp, pm, mp, mm) = (eval(1.0, 1.0), eval(1.0, -1.0), eval(-1.0, 1.0), eval(-1.0, -1.0));
        let fd: Vec<f64> = (0..pp.len()).map(|i| (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * h * h)).collect();
        let inj = |(n, ch): (usize, usize)| {
            let f = SpectralField::basis_vector(traj.basis(), model.forced_modes()[ch]).unwrap().scaled(model.gain()[ch]);
            ((n + 1) as f64 * c.dt, f)
        };
        let ((s1, p1), (s2, p2)) = (inj(a), inj(b));
        let d2 = second_variation(&traj, s1, &p1, s2, &p2, c.t_final).unwrap();
        let diff = d2.coeffs().iter().zip(&fd).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let norm = d2.coeffs().iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max(diff / norm);
    }
    Outcome {
        pass: worst <= 1e-2,
        detail: format!("max relative error vs mixed central difference (h = 1e-4) {worst:.2e} over 4 pairs (tol 1e-2)"),
    }
}

fn c13_control() -> Outcome {
    let c = SimConfig { t_final: 0.5, seed: 13, ..SimConfig::default() };
    let proj = [ModeIndex::of(1, 0), ModeIndex::of(0, 1), ModeIndex::of(2, 1)];
    let problem = ControlProblem::new(&c, &proj, &[0.2, -0.1, 0.05], 0.25, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let hctl: Vec<Vec<f64>> = (0..problem.n_steps())
        .map(|_| (0..problem.n_channels()).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let (_, grad) = problem.gradient(&hctl);
    let eps = 1e-2;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (n, ch) = (rng.random_range(0..problem.n_steps()), rng.random_range(0..problem.n_channels()));
        let (mut hp, mut hm) = (hctl.clone(), hctl.clone());
        hp[n][ch] += eps;
        hm[n][ch] -= eps;
        let fd = (problem.objective(&hp) - problem.objective(&hm)) / (2.0 * eps);
        worst = worst.max((fd - grad[n][ch]).abs() / grad[n][ch].abs());
    }
    let zero = problem.states(&problem.zero_control()).pop().unwrap();
    let target = problem.project(&zero);
    let r = control_search(&c, &proj, &target, 0.25, 0.5, &ControlOptions::default()).unwrap();
    let trivial = r.converged && r.residual == 0.0 && r.controls.iter().flatten().all(|x| *x == 0.0);
    Outcome {
        pass: worst <= 1e-4 && trivial,
        detail: format!(
            "max relative gradient error {worst:.2e} on 20 coordinates (tol 1e-4, FD step 1e-2 on h); \
             trivial target residual {} with zero control: {trivial}",
            r.residual
        ),
    }
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 13] = [
        (1, "representation identity", c1_representation),
        (2, "duality invariant", c2_duality),
        (3, "conservation identities", c3_conservation),
        (4, "triadic oracle", c4_triads),
        (5, "lattice reachability", c5_lattice),
        (6, "hypoellipticity signature", c6_hypoellipticity),
        (7, "short-time asymptotic", c7_short_time),
        (8, "bracket pairings", c8_brackets),
        (9, "quadratic variation", c9_quadratic_variation),
        (10, "gaussian bounds", c10_gaussian_bounds),
        (11, "enstrophy balance", c11_enstrophy),
        (12, "second variation", c12_second_variation),
        (13, "control probe", c13_control),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let start = Instant::now();
        let o = run();
        let known = KNOWN_FAILURES.contains(&id);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("{tag} {id:>2} {name}: {} [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
        if !o.pass && !known {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
