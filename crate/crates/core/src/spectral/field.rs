use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::basis::Basis;
use crate::error::{invalid, LabError, Result};
use crate::lattice::ModeIndex;

/// `‖e_k‖² = ∫ sin²(k·x) dx` over the torus.
pub const BASIS_NORM_SQ: f64 = 2.0 * PI * PI;

/// One `{mode, coeff}` entry of a field's JSON form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeCoeff {
    pub mode: ModeIndex,
    pub coeff: f64,
}

pub(crate) fn same_basis(a: &Arc<Basis>, b: &Arc<Basis>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(LabError::BasisMismatch)
    }
}

/// `w = Σ α_k e_k` over a truncation basis.
#[derive(Clone, Debug)]
pub struct SpectralField {
    basis: Arc<Basis>,
    coeffs: Vec<f64>,
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        self.basis == other.basis && self.coeffs == other.coeffs
    }
}

impl SpectralField {
    pub fn zeros(basis: &Arc<Basis>) -> Self {
        Self {
            basis: basis.clone(),
            coeffs: vec![0.0; basis.len()],
        }
    }

    pub fn from_coeffs(basis: &Arc<Basis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(LabError::LengthMismatch {
                expected: basis.len(),
                actual: coeffs.len(),
            });
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(invalid(format!("coefficient of mode {} is not finite", basis.mode(i))));
        }
        Ok(Self {
            basis: basis.clone(),
            coeffs,
        })
    }

    /// Skips the finiteness scan; for values produced by trusted arithmetic.
    pub(crate) fn from_raw(basis: &Arc<Basis>, coeffs: Vec<f64>) -> Self {
        debug_assert_eq!(coeffs.len(), basis.len());
        Self {
            basis: basis.clone(),
            coeffs,
        }
    }

    /// The basis function `e_k` itself.
    pub fn basis_vector(basis: &Arc<Basis>, k: ModeIndex) -> Result<Self> {
        let mut f = Self::zeros(basis);
        f.coeffs[basis.index(k)?] = 1.0;
        Ok(f)
    }

    /// `e_k / ‖e_k‖`.
    pub fn unit_vector(basis: &Arc<Basis>, k: ModeIndex) -> Result<Self> {
        let mut f = Self::basis_vector(basis, k)?;
        f.coeffs[basis.index(k)?] = BASIS_NORM_SQ.sqrt().recip();
        Ok(f)
    }

    /// Builds a field from sparse entries; repeated modes accumulate.
    pub fn from_mode_coeffs(basis: &Arc<Basis>, entries: &[ModeCoeff]) -> Result<Self> {
        let mut coeffs = vec![0.0; basis.len()];
        for e in entries {
            coeffs[basis.index(e.mode)?] += e.coeff;
        }
        Self::from_coeffs(basis, coeffs)
    }

    /// Nonzero entries in basis order.
    pub fn to_mode_coeffs(&self) -> Vec<ModeCoeff> {
        self.basis
            .modes()
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| **c != 0.0)
            .map(|(&mode, &coeff)| ModeCoeff { mode, coeff })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_mode_coeffs()).expect("plain data serializes")
    }

    pub fn from_json(basis: &Arc<Basis>, json: &str) -> Result<Self> {
        let entries: Vec<ModeCoeff> = serde_json::from_str(json)?;
        Self::from_mode_coeffs(basis, &entries)
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn coeff(&self, k: ModeIndex) -> Result<f64> {
        Ok(self.coeffs[self.basis.index(k)?])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    /// `⟨f, g⟩ = 2π² Σ f_k g_k`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        same_basis(&self.basis, &other.basis)?;
        Ok(BASIS_NORM_SQ * dot(&self.coeffs, &other.coeffs))
    }

    pub fn norm(&self) -> f64 {
        (BASIS_NORM_SQ * dot(&self.coeffs, &self.coeffs)).sqrt()
    }

    /// `‖Λ^s w‖` with `Λ² = −Δ`, for `s ≥ −1`.
    pub fn sobolev_norm(&self, s: f64) -> Result<f64> {
        if !(s >= -1.0) {
            return Err(invalid(format!("sobolev index must be at least -1, got {s}")));
        }
        let sum: f64 = self
            .coeffs
            .iter()
            .zip(self.basis.norms_sq())
            .map(|(c, n2)| n2.powf(s) * c * c)
            .sum();
        Ok((BASIS_NORM_SQ * sum).sqrt())
    }

    /// `‖w‖₁²`, the enstrophy-dissipation density.
    pub fn h1_norm_sq(&self) -> f64 {
        BASIS_NORM_SQ
            * self
                .coeffs
                .iter()
                .zip(self.basis.norms_sq())
                .map(|(c, n2)| n2 * c * c)
                .sum::<f64>()
    }

    /// `Λ^{−2} w`, i.e. the stream function up to sign.
    pub fn inverse_laplacian(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .zip(self.basis.norms_sq())
            .map(|(c, n2)| c / n2)
            .collect();
        Self::from_raw(&self.basis, coeffs)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::from_raw(&self.basis, self.coeffs.iter().map(|c| a * c).collect())
    }

    /// `self += a·x`.
    pub fn axpy(&mut self, a: f64, x: &Self) -> Result<()> {
        same_basis(&self.basis, &x.basis)?;
        for (s, v) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *s += a * v;
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Velocity `u = (u1, u2)`, each component expanded in the same real basis.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    pub u1: SpectralField,
    pub u2: SpectralField,
}

impl VelocityField {
    /// `∂1 u1 + ∂2 u2`, using `∇e_k = k·e_{−k}`.
    pub fn divergence(&self) -> SpectralField {
        let basis = self.u1.basis();
        let mut out = vec![0.0; basis.len()];
        for (i, m) in basis.modes().iter().enumerate() {
            let v = m.k1() as f64 * self.u1.coeffs[i] + m.k2() as f64 * self.u2.coeffs[i];
            out[basis.neg_index(i)] += v;
        }
        SpectralField::from_raw(basis, out)
    }
}

/// `K(w) = Σ k^⊥/|k|² α_k e_{−k}` with `k^⊥ = (−k2, k1)`.
pub fn biot_savart(w: &SpectralField) -> VelocityField {
    let basis = w.basis();
    let mut u1 = vec![0.0; basis.len()];
    let mut u2 = vec![0.0; basis.len()];
    for (i, m) in basis.modes().iter().enumerate() {
        let a = w.coeffs[i] / basis.norm_sq(i);
        let target = basis.neg_index(i);
        u1[target] += -(m.k2() as f64) * a;
        u2[target] += m.k1() as f64 * a;
    }
    VelocityField {
        u1: SpectralField::from_raw(basis, u1),
        u2: SpectralField::from_raw(basis, u2),
    }
}
