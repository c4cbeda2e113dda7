//! Oracles shared by the integration and acceptance tests.

use std::f64::consts::PI;

use nslab_core::spectral::{nonlinearity_b, InteractionTable};
use nslab_core::{Basis, ModeIndex, SpectralField};

const N_GRID: usize = 32;

/// `e_k` at a point, straight from the sine/cosine definition.
fn eval(k: ModeIndex, x: (f64, f64)) -> f64 {
    let p = k.k1() as f64 * x.0 + k.k2() as f64 * x.1;
    if k.is_plus() { p.sin() } else { p.cos() }
}

fn grad(k: ModeIndex, x: (f64, f64)) -> (f64, f64) {
    let p = k.k1() as f64 * x.0 + k.k2() as f64 * x.1;
    let d = if k.is_plus() { p.cos() } else { -p.sin() };
    (k.k1() as f64 * d, k.k2() as f64 * d)
}

fn grid() -> Vec<(f64, f64)> {
    let h = 2.0 * PI / N_GRID as f64;
    (0..N_GRID * N_GRID).map(|i| ((i / N_GRID) as f64 * h, (i % N_GRID) as f64 * h)).collect()
}

/// `(K e_j · ∇) e_k` pointwise, with the velocity taken from the stream
/// function `ψ = e_j/|j|²` as `u = ∇^⊥ψ`, `∇^⊥ = (−∂₂, ∂₁)`.
fn advection_pointwise(j: ModeIndex, k: ModeIndex, x: (f64, f64)) -> f64 {
    let (gj1, gj2) = grad(j, x);
    let n = j.norm_sq() as f64;
    let (u1, u2) = (-gj2 / n, gj1 / n);
    let (gk1, gk2) = grad(k, x);
    u1 * gk1 + u2 * gk2
}

#[derive(Debug, Default)]
pub struct OracleComparison {
    pub pairs: usize,
    pub support_mismatches: usize,
    pub max_abs_error: f64,
}

/// Compares `B(e_j, e_k)` for all `|j|, |k| ≤ 4` against grid quadrature
/// of the pointwise product. The radius-8 target basis holds every output,
/// and the 32-point grid integrates the degree ≤ 16 products exactly.
pub fn compare_with_quadrature() -> OracleComparison {
    let small = Basis::new(4.0).unwrap();
    let big = Basis::new(8.0).unwrap();
    let table = InteractionTable::build(&big);
    let pts = grid();
    let values: Vec<Vec<f64>> = big.modes().iter().map(|&m| pts.iter().map(|&x| eval(m, x)).collect()).collect();
    let w = 2.0 / (N_GRID * N_GRID) as f64;
    let mut out = OracleComparison::default();
    for &j in small.modes() {
        for &k in small.modes() {
            let b: Vec<f64> = pts.iter().map(|&x| advection_pointwise(j, k, x)).collect();
            let got = nonlinearity_b(
                &table,
                &SpectralField::basis_vector(&big, j).unwrap(),
                &SpectralField::basis_vector(&big, k).unwrap(),
            )
            .unwrap();
            for (em, &g) in values.iter().zip(got.coeffs()) {
                let o = w * em.iter().zip(&b).map(|(e, v)| e * v).sum::<f64>();
                if (o.abs() > 1e-12) != (g != 0.0) {
                    out.support_mismatches += 1;
                }
                out.max_abs_error = out.max_abs_error.max((o - g).abs());
            }
            out.pairs += 1;
        }
    }
    out
}
