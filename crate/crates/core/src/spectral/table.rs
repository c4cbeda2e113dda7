use std::io::Write;
use std::sync::Arc;

use super::basis::Basis;
use super::field::{same_basis, SpectralField};
use crate::error::Result;
use crate::lattice::ModeIndex;

/// A real trigonometric monomial `sin(v·x)` or `cos(v·x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Trig {
    Sin(i32, i32),
    Cos(i32, i32),
}

/// `e_{−m}` written as a plain sine or cosine.
fn conjugate_monomial(m: ModeIndex) -> Trig {
    if m.is_plus() {
        Trig::Cos(m.k1(), m.k2())
    } else {
        Trig::Sin(-m.k1(), -m.k2())
    }
}

/// Product-to-sum expansion of two monomials: up to two `(monomial, weight)`.
fn product(a: Trig, b: Trig) -> [(Trig, f64); 2] {
    use Trig::*;
    match (a, b) {
        (Sin(a1, a2), Sin(b1, b2)) => [(Cos(a1 - b1, a2 - b2), 0.5), (Cos(a1 + b1, a2 + b2), -0.5)],
        (Cos(a1, a2), Cos(b1, b2)) => [(Cos(a1 - b1, a2 - b2), 0.5), (Cos(a1 + b1, a2 + b2), 0.5)],
        (Sin(a1, a2), Cos(b1, b2)) | (Cos(b1, b2), Sin(a1, a2)) => {
            [(Sin(a1 + b1, a2 + b2), 0.5), (Sin(a1 - b1, a2 - b2), 0.5)]
        }
    }
}

/// Rewrites a monomial as `sign · e_k`; `None` for the constant or zero.
fn to_basis(t: Trig) -> Option<(ModeIndex, f64)> {
    match t {
        Trig::Cos(v1, v2) => {
            let v = ModeIndex::new(v1, v2).ok()?;
            Some((if v.is_plus() { -v } else { v }, 1.0))
        }
        Trig::Sin(v1, v2) => {
            let v = ModeIndex::new(v1, v2).ok()?;
            Some(if v.is_plus() { (v, 1.0) } else { (-v, -1.0) })
        }
    }
}

/// `B(e_j, e_k) = (j^⊥·k)/|j|² · e_{−j} e_{−k}` expanded in the basis,
/// without truncation. Terms are merged and zeros dropped.
pub fn advect_modes(j: ModeIndex, k: ModeIndex) -> Vec<(ModeIndex, f64)> {
    let pd = j.perp_dot(k);
    if pd == 0 {
        return Vec::new();
    }
    let a = pd as f64 / j.norm_sq() as f64;
    let mut out: Vec<(ModeIndex, f64)> = Vec::with_capacity(2);
    for (t, w) in product(conjugate_monomial(j), conjugate_monomial(k)) {
        if let Some((m, s)) = to_basis(t) {
            match out.iter_mut().find(|(o, _)| *o == m) {
                Some(e) => e.1 += a * w * s,
                None => out.push((m, a * w * s)),
            }
        }
    }
    out.retain(|(_, c)| *c != 0.0);
    out.sort_by_key(|(m, _)| *m);
    out
}

/// `c(j, k) = ½ (j^⊥·k)(|j|^{−2} − |k|^{−2})`.
pub fn interaction_coeff(j: ModeIndex, k: ModeIndex) -> f64 {
    0.5 * j.perp_dot(k) as f64 * (1.0 / j.norm_sq() as f64 - 1.0 / k.norm_sq() as f64)
}

/// One nonzero entry `B(e_j, e_k) ∋ coeff · e_out`, as basis positions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triad {
    pub j: u32,
    pub k: u32,
    pub out: u32,
    pub coeff: f64,
}

/// Every nonzero coupling of the bilinear advection term on a truncation.
///
/// Entries are stored in order of `(j, k, out)` positions. Couplings whose
/// output lands outside the basis are projected away.
#[derive(Clone, Debug)]
pub struct InteractionTable {
    basis: Arc<Basis>,
    triads: Vec<Triad>,
}

impl InteractionTable {
    pub fn build(basis: &Arc<Basis>) -> Self {
        let mut triads = Vec::new();
        for (ji, &j) in basis.modes().iter().enumerate() {
            for (ki, &k) in basis.modes().iter().enumerate() {
                for (m, c) in advect_modes(j, k) {
                    if let Some(out) = basis.index_of(m) {
                        triads.push(Triad {
                            j: ji as u32,
                            k: ki as u32,
                            out: out as u32,
                            coeff: c,
                        });
                    }
                }
            }
        }
        Self {
            basis: basis.clone(),
            triads,
        }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn triads(&self) -> &[Triad] {
        &self.triads
    }

    pub fn len(&self) -> usize {
        self.triads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triads.is_empty()
    }

    /// Couplings of the quadratic form `B(w, w)`: for each unordered pair
    /// `j ≤ k`, the summed coefficient of `α_j α_k` on `e_out`. Pairs whose
    /// contributions cancel (equal norms) are omitted. Magnitudes equal
    /// `|c(j, k)|`.
    pub fn quadratic_triads(&self) -> Vec<Triad> {
        let mut acc: std::collections::BTreeMap<(u32, u32, u32), f64> = Default::default();
        for t in &self.triads {
            let key = if t.j <= t.k { (t.j, t.k, t.out) } else { (t.k, t.j, t.out) };
            *acc.entry(key).or_insert(0.0) += t.coeff;
        }
        acc.into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|((j, k, out), coeff)| Triad { j, k, out, coeff })
            .collect()
    }

    /// `out += Σ coeff · w[j] · v[k] · e_out`.
    pub fn apply_into(&self, w: &[f64], v: &[f64], out: &mut [f64]) {
        for t in &self.triads {
            out[t.out as usize] += t.coeff * w[t.j as usize] * v[t.k as usize];
        }
    }

    /// `out[j] += Σ coeff · v[out] · w[k]`, the direct triadic adjoint.
    pub fn adjoint_into(&self, v: &[f64], w: &[f64], out: &mut [f64]) {
        for t in &self.triads {
            out[t.j as usize] += t.coeff * v[t.out as usize] * w[t.k as usize];
        }
    }

    /// Dense `n × n` row-major matrix of `u ↦ B(u, w)`.
    pub fn left_matrix(&self, w: &[f64]) -> Vec<f64> {
        let n = self.basis.len();
        let mut m = vec![0.0; n * n];
        for t in &self.triads {
            m[t.out as usize * n + t.j as usize] += t.coeff * w[t.k as usize];
        }
        m
    }

    /// Dense `n × n` row-major matrix of `u ↦ B(w, u)`.
    pub fn right_matrix(&self, w: &[f64]) -> Vec<f64> {
        let n = self.basis.len();
        let mut m = vec![0.0; n * n];
        for t in &self.triads {
            m[t.out as usize * n + t.k as usize] += t.coeff * w[t.j as usize];
        }
        m
    }

    /// CSV with columns `j1,j2,k1,k2,out1,out2,coeff`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["j1", "j2", "k1", "k2", "out1", "out2", "coeff"])
            .map_err(csv_err)?;
        for t in &self.triads {
            let (j, k, o) = (
                self.basis.mode(t.j as usize),
                self.basis.mode(t.k as usize),
                self.basis.mode(t.out as usize),
            );
            wtr.write_record(&[
                j.k1().to_string(),
                j.k2().to_string(),
                k.k1().to_string(),
                k.k2().to_string(),
                o.k1().to_string(),
                o.k2().to_string(),
                t.coeff.to_string(),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> crate::error::LabError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => crate::error::LabError::InvalidParameter(format!("csv: {other:?}")),
    }
}

fn check(table: &InteractionTable, a: &SpectralField, b: &SpectralField) -> Result<()> {
    same_basis(table.basis(), a.basis())?;
    same_basis(table.basis(), b.basis())
}

/// `B(w, v) = (K(w)·∇) v`, projected onto the truncation.
pub fn nonlinearity_b(table: &InteractionTable, w: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    check(table, w, v)?;
    let mut out = vec![0.0; table.basis.len()];
    table.apply_into(w.coeffs(), v.coeffs(), &mut out);
    Ok(SpectralField::from_raw(table.basis(), out))
}

/// `C(v, w)`, the L²-adjoint of `u ↦ B(u, w)`, as the transpose of the
/// assembled matrix of that map.
pub fn adjoint_c(table: &InteractionTable, v: &SpectralField, w: &SpectralField) -> Result<SpectralField> {
    check(table, v, w)?;
    let n = table.basis.len();
    let m = table.left_matrix(w.coeffs());
    let vc = v.coeffs();
    let mut out = vec![0.0; n];
    for (row, vr) in m.chunks_exact(n).zip(vc) {
        if *vr == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * vr;
        }
    }
    Ok(SpectralField::from_raw(table.basis(), out))
}

/// `C(v, w)` evaluated directly from the triad list.
pub fn adjoint_c_direct(table: &InteractionTable, v: &SpectralField, w: &SpectralField) -> Result<SpectralField> {
    check(table, v, w)?;
    let mut out = vec![0.0; table.basis.len()];
    table.adjoint_into(v.coeffs(), w.coeffs(), &mut out);
    Ok(SpectralField::from_raw(table.basis(), out))
}
