//! The Malliavin covariance matrix of the truncated solution,
//!
//! ```text
//! M(t) = Σ_{k∈Z*} ∫₀ᵗ V_{k,s}(t) ⊗ V_{k,s}(t) ds,
//! ```
//!
//! assembled from tangent columns, from the matrix Lyapunov recursion, or
//! from backward adjoint solves, together with spectral summaries and the
//! drift/noise splitting of the adjoint derivative.
//!
//! Matrices are expressed in the orthonormal coordinates `ê_a = e_a/‖e_a‖`
//! of the chosen subspace, so `G_ab = ⟨M ê_a, ê_b⟩`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::flows::{adjoint_path, AdjointScheme};
use crate::lattice::{reachable_modes, ModeIndex, DEFAULT_MAX_SHELLS};
use crate::linalg::symmetric_eigenvalues;
use crate::par;
use crate::sde::{simulate_with, GalerkinModel, SimConfig, Trajectory};
use crate::spectral::{csv_err, dot, interaction_coeff, same_basis, SpectralField, BASIS_NORM_SQ};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ForwardGram,
    BackwardForm,
    Lyapunov,
}

/// Which forward realization to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardRoute {
    /// Trapezoid quadrature over tangent columns `V_{k,s_i}(t)`.
    Gram,
    /// `M_{n+1} = J_n M_n J_nᵀ + (dt/2)(J_n Q J_nᵀ + Q)` with dense
    /// one-step maps `J_n`.
    Lyapunov,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MalliavinForm {
    pub modes: Vec<ModeIndex>,
    #[serde(with = "matrix_rows")]
    pub matrix: DMatrix<f64>,
    pub provenance: Provenance,
    pub time: f64,
    pub path_index: u64,
}

mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("matrix must be square"));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

impl MalliavinForm {
    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// Ascending, by Jacobi rotations.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        symmetric_eigenvalues(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    /// `D G D` with `D = diag(1/|k|)`: the form restricted to the unit
    /// ball of `H¹` instead of `L²`.
    pub fn h1_weighted(&self) -> DMatrix<f64> {
        let d: Vec<f64> = self.modes.iter().map(|k| 1.0 / k.norm()).collect();
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| d[i] * self.matrix[(i, j)] * d[j])
    }

    pub fn h1_min_eigenvalue(&self) -> Result<f64> {
        Ok(symmetric_eigenvalues(&self.h1_weighted())?.first().copied().unwrap_or(0.0))
    }

    /// `⟨M φ, φ⟩` for `φ = Σ c_a ê_a`.
    pub fn quadratic(&self, c: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(c);
        (v.transpose() * &self.matrix * &v)[(0, 0)]
    }
}

/// Trapezoid weights on `n_nodes` equispaced nodes.
pub fn trapezoid_weights(n_nodes: usize, dt: f64) -> Vec<f64> {
    let mut w = vec![dt; n_nodes];
    if n_nodes > 0 {
        w[0] = 0.5 * dt;
        w[n_nodes - 1] = 0.5 * dt;
    }
    if n_nodes == 1 {
        w[0] = 0.0;
    }
    w
}

fn positions(traj: &Trajectory, subspace: &[ModeIndex]) -> Result<Vec<usize>> {
    if subspace.is_empty() {
        return Err(invalid("projection subspace is empty"));
    }
    subspace.iter().map(|k| traj.basis().index(*k)).collect()
}

/// `M(t)` on `span{ê_a : a ∈ subspace}`.
pub fn malliavin_forward(traj: &Trajectory, t: f64, subspace: &[ModeIndex], route: ForwardRoute) -> Result<MalliavinForm> {
    let end = traj.node_index(t)?;
    let pos = positions(traj, subspace)?;
    let (matrix, provenance) = match route {
        ForwardRoute::Gram => (gram(traj, end, &pos), Provenance::ForwardGram),
        ForwardRoute::Lyapunov => {
            let full = lyapunov(traj, end);
            let g = DMatrix::from_fn(pos.len(), pos.len(), |a, b| BASIS_NORM_SQ * full[(pos[a], pos[b])]);
            (g, Provenance::Lyapunov)
        }
    };
    Ok(MalliavinForm {
        modes: subspace.to_vec(),
        matrix,
        provenance,
        time: t,
        path_index: traj.path_index(),
    })
}

/// Tangent columns read off through the transpose: the `a`-th coefficient
/// of `V_{k,s_i}(t)` is entry `k` of the discrete adjoint of `δ_a` at node
/// `i`. One backward sweep per subspace mode.
fn gram(traj: &Trajectory, end: usize, pos: &[usize]) -> DMatrix<f64> {
    let model = traj.model();
    let n = model.dim();
    let weights = trapezoid_weights(end + 1, traj.dt());
    let rows: Vec<Vec<Vec<f64>>> = pos
        .iter()
        .map(|&a| {
            let mut delta = vec![0.0; n];
            delta[a] = 1.0;
            adjoint_path(traj, end, &delta, 0, AdjointScheme::Discrete)
        })
        .collect();
    let forced = model.forced();
    let d = pos.len();
    let mut g = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let mut acc = 0.0;
            for (i, w) in weights.iter().enumerate() {
                let (ra, rb) = (&rows[a][i], &rows[b][i]);
                acc += w * forced.iter().map(|&k| ra[k] * rb[k]).sum::<f64>();
            }
            g[(a, b)] = BASIS_NORM_SQ * acc;
            g[(b, a)] = g[(a, b)];
        }
    }
    g
}

/// Dense one-step map `J_n = diag(E)(I − dt·L_{w_n})`.
pub fn step_matrix(model: &GalerkinModel, w: &[f64]) -> DMatrix<f64> {
    let n = model.dim();
    let left = model.table().left_matrix(w);
    let right = model.table().right_matrix(w);
    let dt = model.dt();
    DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        model.decay()[i] * (id - dt * (left[i * n + j] + right[i * n + j]))
    })
}

/// Full coefficient-space matrix `Σ_k ∫ v_k v_kᵀ` by the Lyapunov recursion.
fn lyapunov(traj: &Trajectory, end: usize) -> DMatrix<f64> {
    let model = traj.model();
    let n = model.dim();
    let half = 0.5 * traj.dt();
    let mut q = DMatrix::zeros(n, n);
    for &k in model.forced() {
        q[(k, k)] = 1.0;
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for step in 0..end {
        let j = step_matrix(model, &traj.states()[step]);
        let mut next = &j * &m * j.transpose();
        for &k in model.forced() {
            let col = j.column(k);
            next.ger(half, &col, &col, 1.0);
        }
        next += &q * half;
        m = next;
    }
    m
}

/// `⟨M(t)φ, φ⟩` from the tangent columns, evaluated for a single `φ`
/// through the transpose of the discrete tangent map.
pub fn malliavin_forward_form(traj: &Trajectory, t: f64, phi: &SpectralField) -> Result<f64> {
    same_basis(traj.basis(), phi.basis())?;
    let end = traj.node_index(t)?;
    let u = adjoint_path(traj, end, phi.coeffs(), 0, AdjointScheme::Discrete);
    let forced = traj.model().forced();
    let w = trapezoid_weights(end + 1, traj.dt());
    Ok(u.iter()
        .zip(&w)
        .map(|(ui, wi)| wi * forced.iter().map(|&k| (BASIS_NORM_SQ * ui[k]).powi(2)).sum::<f64>())
        .sum())
}

/// `Σ_{k∈Z*} ⟨e_k, U^{t,φ}(s_i)⟩²` at every node `s_i ≤ t`.
pub fn backward_integrand(traj: &Trajectory, t: f64, phi: &SpectralField) -> Result<Vec<f64>> {
    same_basis(traj.basis(), phi.basis())?;
    let end = traj.node_index(t)?;
    let u = adjoint_path(traj, end, phi.coeffs(), 0, AdjointScheme::Continuous);
    let forced = traj.model().forced();
    Ok(u.iter()
        .map(|ui| forced.iter().map(|&k| (BASIS_NORM_SQ * ui[k]).powi(2)).sum())
        .collect())
}

/// `⟨M(t)φ, φ⟩ = Σ_k ∫₀ᵗ ⟨e_k, U^{t,φ}(s)⟩² ds` from one backward solve.
pub fn malliavin_backward_form(traj: &Trajectory, t: f64, phi: &SpectralField) -> Result<f64> {
    let f = backward_integrand(traj, t, phi)?;
    let w = trapezoid_weights(f.len(), traj.dt());
    Ok(dot(&f, &w))
}

/// The backward form polarized on `span{ê_a}`: one adjoint solve per mode.
pub fn malliavin_backward_matrix(traj: &Trajectory, t: f64, subspace: &[ModeIndex]) -> Result<MalliavinForm> {
    let end = traj.node_index(t)?;
    let pos = positions(traj, subspace)?;
    let model = traj.model();
    let n = model.dim();
    let unit = BASIS_NORM_SQ.sqrt().recip();
    let proj: Vec<Vec<Vec<f64>>> = pos
        .iter()
        .map(|&a| {
            let mut phi = vec![0.0; n];
            phi[a] = unit;
            adjoint_path(traj, end, &phi, 0, AdjointScheme::Continuous)
                .into_iter()
                .map(|u| model.forced().iter().map(|&k| BASIS_NORM_SQ * u[k]).collect())
                .collect()
        })
        .collect();
    let w = trapezoid_weights(end + 1, traj.dt());
    let d = pos.len();
    let g = DMatrix::from_fn(d, d, |a, b| {
        w.iter()
            .enumerate()
            .map(|(i, wi)| wi * dot(&proj[a][i], &proj[b][i]))
            .sum()
    });
    Ok(MalliavinForm {
        modes: subspace.to_vec(),
        matrix: g,
        provenance: Provenance::BackwardForm,
        time: t,
        path_index: traj.path_index(),
    })
}

/// Default `ε` grid `10^{-1} … 10^{-8}`.
pub fn default_epsilons() -> Vec<f64> {
    (1..=8).map(|e| 10f64.powi(-e)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSpectrum {
    pub path: u64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub trace: f64,
    pub lambda_min_h1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub epsilon: f64,
    pub frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub paths: Vec<PathSpectrum>,
    pub tail: Vec<TailRow>,
    /// Least-squares slope of `log P̂` against `log ε` over rows with
    /// `0 < P̂ < 1`; absent with fewer than two such rows.
    pub slope: Option<f64>,
    pub warnings: Vec<String>,
}

impl TailReport {
    pub fn write_paths_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["path", "lambda_min", "lambda_max", "trace", "lambda_min_h1"]).map_err(csv_err)?;
        for p in &self.paths {
            wtr.write_record(&[
                p.path.to_string(),
                p.lambda_min.to_string(),
                p.lambda_max.to_string(),
                p.trace.to_string(),
                p.lambda_min_h1.to_string(),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_tail_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["epsilon", "frequency"]).map_err(csv_err)?;
        for r in &self.tail {
            wtr.write_record(&[r.epsilon.to_string(), r.frequency.to_string()]).map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Monte Carlo over paths `0..n_paths` of the smallest eigenvalue of the
/// projected matrix at time `t`.
pub fn min_eigenvalue_tail(
    config: &SimConfig,
    t: f64,
    subspace: &[ModeIndex],
    n_paths: usize,
    epsilons: &[f64],
) -> Result<TailReport> {
    if n_paths == 0 {
        return Err(invalid("n_paths must be positive"));
    }
    let model = GalerkinModel::new(config)?;
    let mut warnings = Vec::new();
    let reach = reachable_modes(&config.forcing, config.radius, DEFAULT_MAX_SHELLS);
    match reach {
        Ok(r) => {
            for k in subspace.iter().filter(|k| !r.reached.contains(k)) {
                warnings.push(format!("mode {k} is not reachable from the forcing within radius {}", config.radius));
            }
        }
        Err(e) => warnings.push(format!("reachability check skipped: {e}")),
    }
    let paths: Vec<Result<PathSpectrum>> = par::map_indexed(n_paths, |p| {
        let traj = simulate_with(&model, config, p as u64)?;
        let form = malliavin_forward(&traj, t, subspace, ForwardRoute::Gram)?;
        let ev = form.eigenvalues()?;
        Ok(PathSpectrum {
            path: p as u64,
            lambda_min: ev[0],
            lambda_max: *ev.last().unwrap(),
            trace: form.trace(),
            lambda_min_h1: form.h1_min_eigenvalue()?,
        })
    });
    let paths: Vec<PathSpectrum> = paths.into_iter().collect::<Result<_>>()?;
    let tail: Vec<TailRow> = epsilons
        .iter()
        .map(|&e| TailRow {
            epsilon: e,
            frequency: paths.iter().filter(|p| p.lambda_min < e).count() as f64 / n_paths as f64,
        })
        .collect();
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .filter(|r| r.frequency > 0.0 && r.frequency < 1.0)
        .map(|r| (r.epsilon.ln(), r.frequency.ln()))
        .collect();
    let slope = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(TailReport {
        paths,
        tail,
        slope,
        warnings,
    })
}

/// Splitting of the adjoint derivative along a path,
/// `∂_s U(s) = X(s) + Σ_j Y_j(s) W_j(s)`, with
///
/// ```text
/// X = νΛ²U − B(Π₀^⊥w, U) + C(U, Π₀^⊥w) − B(R, U) + C(U, R)
/// Y_j = −B(e_j, U) + C(U, e_j)
/// R(s) = Π₀w(0) + ∫₀ˢ (νΔΠ₀w − Π₀B(w, w)) dr
/// ```
///
/// where `Π₀` projects onto the forced modes. `R` is the drift part of
/// `Π₀w`, so `Π₀w = R + Σ W_j e_j` up to discretization error.
#[derive(Clone, Debug)]
pub struct BracketDecomposition {
    pub times: Vec<f64>,
    /// `U^{φ,T}` at each node of `[t0, T]`.
    pub u: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    /// Forced modes in channel order, and `Y_j` per channel and node.
    pub forced: Vec<ModeIndex>,
    pub y: Vec<Vec<Vec<f64>>>,
    /// `W_j(s)` per node and channel.
    pub wiener: Vec<Vec<f64>>,
    dt: f64,
}

fn y_field(model: &GalerkinModel, j: usize, u: &[f64]) -> Vec<f64> {
    let n = model.dim();
    let mut e = vec![0.0; n];
    e[j] = 1.0;
    let mut out = vec![0.0; n];
    model.neg_linearization_transpose(&e, u, &mut out);
    // −Lᵀ gives B(e, U) − C(U, e); the sign is flipped for Y.
    out.iter_mut().for_each(|x| *x = -*x);
    out
}

pub fn bracket_decomposition(traj: &Trajectory, t0: f64, t_end: f64, phi: &SpectralField) -> Result<BracketDecomposition> {
    same_basis(traj.basis(), phi.basis())?;
    let (i0, i1) = (traj.node_index(t0)?, traj.node_index(t_end)?);
    if i0 >= i1 {
        return Err(invalid(format!("need t0 < T, got {t0} and {t_end}")));
    }
    let model = traj.model();
    let n = model.dim();
    let (nu, dt) = (model.nu(), traj.dt());
    let forced = model.forced();
    let u = adjoint_path(traj, i1, phi.coeffs(), i0, AdjointScheme::Continuous);

    // R by the trapezoid rule from time 0.
    let drift = |w: &[f64]| -> Vec<f64> {
        let mut b = vec![0.0; n];
        model.table().apply_into(w, w, &mut b);
        forced.iter().map(|&k| -nu * model.basis().norm_sq(k) * w[k] - b[k]).collect()
    };
    let mut r_forced: Vec<Vec<f64>> = Vec::with_capacity(i1 + 1);
    r_forced.push(forced.iter().map(|&k| traj.states()[0][k]).collect());
    let mut prev = drift(&traj.states()[0]);
    for i in 1..=i1 {
        let cur = drift(&traj.states()[i]);
        let next: Vec<f64> = r_forced[i - 1]
            .iter()
            .zip(prev.iter().zip(&cur))
            .map(|(r, (a, b))| r + 0.5 * dt * (a + b))
            .collect();
        r_forced.push(next);
        prev = cur;
    }
    let wiener = traj.wiener_path();

    let mut x = Vec::new();
    let mut r = Vec::new();
    let mut y: Vec<Vec<Vec<f64>>> = vec![Vec::new(); forced.len()];
    for (off, ui) in u.iter().enumerate() {
        let i = i0 + off;
        let mut perp = traj.states()[i].clone();
        let mut ri = vec![0.0; n];
        for (c, &k) in forced.iter().enumerate() {
            perp[k] = 0.0;
            ri[k] = r_forced[i][c];
        }
        let mut xi: Vec<f64> = ui.iter().zip(model.basis().norms_sq()).map(|(a, k2)| nu * k2 * a).collect();
        let mut tmp = vec![0.0; n];
        for base in [&perp, &ri] {
            model.neg_linearization_transpose(base, ui, &mut tmp);
            // −B(w, U) + C(U, w) is minus the helper's output.
            xi.iter_mut().zip(&tmp).for_each(|(a, b)| *a -= b);
        }
        for (c, &k) in forced.iter().enumerate() {
            y[c].push(y_field(model, k, ui));
        }
        x.push(xi);
        r.push(ri);
    }
    Ok(BracketDecomposition {
        times: (i0..=i1).map(|i| traj.time(i)).collect(),
        u,
        x,
        r,
        forced: model.forced_modes().to_vec(),
        y,
        wiener: wiener[i0..=i1].to_vec(),
        dt,
    })
}

/// Worst relative gap between `X + Σ Y_j W_j` and a centred difference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub max_relative_error: f64,
    pub mean_relative_error: f64,
    pub nodes: usize,
}

/// One pairing identity evaluated across all `(j, ℓ) ∈ Z²₊ × Z²₊` and nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingIdentity {
    pub name: String,
    pub cases: usize,
    /// Least-squares constant `κ` in `lhs = κ · c(j,ℓ)[…]`.
    pub fitted_constant: f64,
    /// `max |lhs − κ·rhs|` relative to `max |lhs|`.
    pub residual_at_fit: f64,
    /// `max |lhs − π²·rhs|` relative to `max |lhs|`.
    pub residual_at_pi_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub identities: Vec<PairingIdentity>,
    /// Least-squares constant over all four identities together.
    pub global_constant: f64,
    pub constant_over_pi_sq: f64,
    /// Every identity holds with one shared constant.
    pub structure_holds: bool,
    /// The shared constant is `π²`.
    pub constant_is_pi_sq: bool,
}

impl BracketDecomposition {
    pub fn is_zero(&self) -> bool {
        self.x.iter().chain(self.y.iter().flatten()).all(|v| v.iter().all(|c| *c == 0.0))
    }

    /// `X + Σ Y_j W_j` at node offset `i`.
    pub fn reconstruct(&self, i: usize) -> Vec<f64> {
        let mut out = self.x[i].clone();
        for (c, yc) in self.y.iter().enumerate() {
            let w = self.wiener[i][c];
            out.iter_mut().zip(&yc[i]).for_each(|(o, y)| *o += w * y);
        }
        out
    }

    pub fn reconstruction(&self) -> ReconstructionReport {
        let mut errs = Vec::new();
        for i in 1..self.u.len().saturating_sub(1) {
            let fd: Vec<f64> = self.u[i + 1]
                .iter()
                .zip(&self.u[i - 1])
                .map(|(a, b)| (a - b) / (2.0 * self.dt))
                .collect();
            let rec = self.reconstruct(i);
            let num = rec.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let den = dot(&fd, &fd).sqrt();
            if den > 0.0 {
                errs.push(num / den);
            }
        }
        ReconstructionReport {
            max_relative_error: errs.iter().copied().fold(0.0, f64::max),
            mean_relative_error: if errs.is_empty() { 0.0 } else { errs.iter().sum::<f64>() / errs.len() as f64 },
            nodes: errs.len(),
        }
    }

    /// Checks the four coordinate formulas for `⟨Y_{±j}, e_{±ℓ}⟩`, `j, ℓ`
    /// in the upper class, at every node. `Y_j = −B(e_j, U) + C(U, e_j)` is
    /// formed for every upper-class `j` of the basis, forced or not.
    pub fn pairing_check(&self, traj: &Trajectory) -> PairingReport {
        let model = traj.model();
        let basis = model.basis();
        let plus: Vec<ModeIndex> = basis.modes().iter().copied().filter(|m| m.is_plus()).collect();
        let names = [
            "<Y_j, e_l> = k c(j,l)[U_{-|l-j|} + U_{-(l+j)}]",
            "<Y_-j, e_-l> = k c(j,l)[U_{-|l-j|} - U_{-(l+j)}]",
            "<Y_-j, e_l> = k c(j,l)[sgn(l-j) U_{|l-j|} - U_{l+j}]",
            "<Y_j, e_-l> = -k c(j,l)[sgn(l-j) U_{|l-j|} + U_{l+j}]",
        ];
        let mut pairs: [Vec<(f64, f64)>; 4] = Default::default();
        for u in &self.u {
            let coef = |m: Option<ModeIndex>| m.and_then(|m| basis.index_of(m)).map_or(0.0, |i| u[i]);
            let ys: Vec<(Vec<f64>, Vec<f64>)> = plus
                .iter()
                .map(|&j| {
                    let jp = basis.index_of(j).unwrap();
                    let jm = basis.index_of(-j).unwrap();
                    (y_field(model, jp, u), y_field(model, jm, u))
                })
                .collect();
            for (ji, &j) in plus.iter().enumerate() {
                let (yj, ymj) = &ys[ji];
                for &l in &plus {
                    let c = interaction_coeff(j, l);
                    let lmj = ModeIndex::new(l.k1() - j.k1(), l.k2() - j.k2()).ok();
                    let lpj = ModeIndex::of(l.k1() + j.k1(), l.k2() + j.k2());
                    let neg_abs = coef(lmj.map(|m| -m.canonical()));
                    let abs = coef(lmj.map(|m| m.canonical()));
                    let sgn = lmj.map_or(0.0, |m| m.sign() as f64);
                    let (lp, lm) = (basis.index_of(l).unwrap(), basis.index_of(-l).unwrap());
                    let ip = |f: &Vec<f64>, i: usize| BASIS_NORM_SQ * f[i];
                    pairs[0].push((ip(yj, lp), c * (neg_abs + coef(Some(-lpj)))));
                    pairs[1].push((ip(ymj, lm), c * (neg_abs - coef(Some(-lpj)))));
                    pairs[2].push((ip(ymj, lp), c * (sgn * abs - coef(Some(lpj)))));
                    pairs[3].push((ip(yj, lm), -c * (sgn * abs + coef(Some(lpj)))));
                }
            }
        }
        let fit = |p: &[(f64, f64)]| {
            let num: f64 = p.iter().map(|(a, b)| a * b).sum();
            let den: f64 = p.iter().map(|(_, b)| b * b).sum();
            if den > 0.0 { num / den } else { 0.0 }
        };
        let resid = |p: &[(f64, f64)], k: f64| {
            let scale = p.iter().fold(0.0f64, |m, (a, _)| m.max(a.abs())).max(f64::MIN_POSITIVE);
            p.iter().fold(0.0f64, |m, (a, b)| m.max((a - k * b).abs())) / scale
        };
        let all: Vec<(f64, f64)> = pairs.iter().flatten().copied().collect();
        let global = fit(&all);
        let pi2 = PI * PI;
        let identities: Vec<PairingIdentity> = pairs
            .iter()
            .zip(names)
            .map(|(p, name)| PairingIdentity {
                name: name.to_string(),
                cases: p.len(),
                fitted_constant: fit(p),
                residual_at_fit: resid(p, global),
                residual_at_pi_sq: resid(p, pi2),
            })
            .collect();
        let structure_holds = identities.iter().all(|i| i.residual_at_fit <= 1e-10);
        PairingReport {
            constant_is_pi_sq: structure_holds && ((global - pi2) / pi2).abs() <= 1e-10,
            identities,
            global_constant: global,
            constant_over_pi_sq: global / pi2,
            structure_holds,
        }
    }
}
