//! Linearized dynamics along a stored trajectory: the forward tangent flow
//! `J_{s,t}`, the backward adjoint flow `U^{t,φ}`, second variations, and
//! an adjoint-gradient control search.
//!
//! All flows run on the trajectory's own grid with the exponential Euler
//! scheme of the simulator. Grid node `n` holds `w(t_n)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::lattice::ModeIndex;
use crate::sde::{self, GalerkinModel, SimConfig, Trajectory};
use crate::spectral::{same_basis, SpectralField};

/// How the backward adjoint equation is discretized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjointScheme {
    /// Exponential Euler applied to the continuous adjoint equation. Its
    /// pairing with the tangent flow is constant only up to `O(dt)`.
    Continuous,
    /// The exact transpose of the discrete tangent map.
    Discrete,
}

fn nodes(traj: &Trajectory, s: f64, t: f64) -> Result<(usize, usize)> {
    let (i, j) = (traj.node_index(s)?, traj.node_index(t)?);
    if i > j {
        return Err(invalid(format!("start time {s} exceeds end time {t}")));
    }
    Ok((i, j))
}

fn check_field(traj: &Trajectory, f: &SpectralField) -> Result<()> {
    same_basis(traj.basis(), f.basis())
}

/// `V(t_n)` for `n = start..=end`, with `V(t_start) = phi`.
pub fn tangent_path(traj: &Trajectory, start: usize, phi: &[f64], end: usize) -> Vec<Vec<f64>> {
    let model = traj.model();
    let mut out = Vec::with_capacity(end - start + 1);
    out.push(phi.to_vec());
    for n in start..end {
        let mut next = vec![0.0; phi.len()];
        model.tangent_step(&traj.states()[n], &out[n - start], &mut next);
        out.push(next);
    }
    out
}

/// `J_{s,t} φ`.
pub fn tangent_flow(traj: &Trajectory, s: f64, phi: &SpectralField, t: f64) -> Result<SpectralField> {
    check_field(traj, phi)?;
    let (i, j) = nodes(traj, s, t)?;
    let mut path = tangent_path(traj, i, phi.coeffs(), j);
    Ok(traj.model().field(path.pop().expect("nonempty")))
}

/// `U(t_n)` for `n = start..=end` (index `n − start`), with `U(t_end) = phi`.
pub fn adjoint_path(traj: &Trajectory, end: usize, phi: &[f64], start: usize, scheme: AdjointScheme) -> Vec<Vec<f64>> {
    let model = traj.model();
    let mut rev = Vec::with_capacity(end - start + 1);
    rev.push(phi.to_vec());
    for n in (start..end).rev() {
        let later = rev.last().expect("nonempty");
        let mut next = vec![0.0; phi.len()];
        match scheme {
            AdjointScheme::Continuous => model.adjoint_step_continuous(&traj.states()[n + 1], later, &mut next),
            AdjointScheme::Discrete => model.adjoint_step_discrete(&traj.states()[n], later, &mut next),
        }
        rev.push(next);
    }
    rev.reverse();
    rev
}

/// `U^{t,φ}(s)` by the continuous-adjoint scheme.
pub fn adjoint_flow(traj: &Trajectory, t: f64, phi: &SpectralField, s: f64) -> Result<SpectralField> {
    adjoint_flow_with(traj, t, phi, s, AdjointScheme::Continuous)
}

pub fn adjoint_flow_with(
    traj: &Trajectory,
    t: f64,
    phi: &SpectralField,
    s: f64,
    scheme: AdjointScheme,
) -> Result<SpectralField> {
    check_field(traj, phi)?;
    let (i, j) = nodes(traj, s, t)?;
    let path = adjoint_path(traj, j, phi.coeffs(), i, scheme);
    Ok(traj.model().field(path.into_iter().next().expect("nonempty")))
}

/// `r ↦ ⟨V_{k,s}(r), U^{t,φ}(r)⟩` on every node of `[s, t]`.
pub fn duality_series(traj: &Trajectory, k: ModeIndex, s: f64, t: f64, phi: &SpectralField) -> Result<Vec<f64>> {
    check_field(traj, phi)?;
    let (i, j) = nodes(traj, s, t)?;
    let ek = SpectralField::basis_vector(traj.basis(), k)?;
    let v = tangent_path(traj, i, ek.coeffs(), j);
    let u = adjoint_path(traj, j, phi.coeffs(), i, AdjointScheme::Continuous);
    Ok(v.into_iter()
        .zip(u)
        .map(|(v, u)| crate::spectral::BASIS_NORM_SQ * crate::spectral::dot(&v, &u))
        .collect())
}

/// Largest absolute deviation of the duality pairing from its mean over
/// the nodes of `[s, t]`. The continuum pairing is constant.
pub fn duality_drift(traj: &Trajectory, k: ModeIndex, s: f64, t: f64, phi: &SpectralField) -> Result<f64> {
    let p = duality_series(traj, k, s, t, phi)?;
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    Ok(p.iter().fold(0.0, |m, x| m.max((x - mean).abs())))
}

/// Second derivative of `w(t)` in the directions `φ1` injected at `s1` and
/// `φ2` injected at `s2`.
///
/// Differentiating the integrator twice gives the exact recursion
/// `J2_{n+1} = E(J2_n − dt[L_n J2_n + B̃(V1_n, V2_n)])` started from zero
/// at `max(s1, s2)`, where `B̃(f, g) = B(f, g) + B(g, f)` and `V1`, `V2` are
/// tangent paths. The result is the derivative of the discrete solution map.
pub fn second_variation(
    traj: &Trajectory,
    s1: f64,
    phi1: &SpectralField,
    s2: f64,
    phi2: &SpectralField,
    t: f64,
) -> Result<SpectralField> {
    check_field(traj, phi1)?;
    check_field(traj, phi2)?;
    let (i1, i2, end) = (traj.node_index(s1)?, traj.node_index(s2)?, traj.node_index(t)?);
    let model = traj.model();
    let n = model.dim();
    let start = i1.max(i2);
    if end <= start {
        return Ok(SpectralField::zeros(traj.basis()));
    }
    let v1 = tangent_path(traj, i1, phi1.coeffs(), end);
    let v2 = tangent_path(traj, i2, phi2.coeffs(), end);
    let mut j2 = vec![0.0; n];
    let mut lin = vec![0.0; n];
    let mut src = vec![0.0; n];
    for step in start..end {
        model.linearization(&traj.states()[step], &j2, &mut lin);
        model.linearization(&v1[step - i1], &v2[step - i2], &mut src);
        for (((x, l), s), e) in j2.iter_mut().zip(&lin).zip(&src).zip(model.decay()) {
            *x = e * (*x - model.dt() * (l + s));
        }
    }
    Ok(model.field(j2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlOptions {
    pub max_iterations: usize,
    /// Success threshold on `|Π w(t) − x|`.
    pub tolerance: f64,
    pub initial_step: f64,
}

impl Default for ControlOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-6,
            initial_step: 1.0,
        }
    }
}

/// Deterministic steering on `[s, t]` from the state that path 0 of the
/// configuration reaches at time `s`.
///
/// The control `h` is piecewise constant on the grid, one value per step
/// and forced mode, and enters the integrator in place of the Wiener
/// increment as `h·dt`. Projected coordinates are plain coefficients of
/// the listed modes, and the objective is `J(h) = ½ Σ (α_p(t) − x_p)²`.
#[derive(Clone, Debug)]
pub struct ControlProblem {
    model: Arc<GalerkinModel>,
    start_state: Vec<f64>,
    n_steps: usize,
    projection: Vec<usize>,
    target: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ControlResult {
    /// `h[n][c]` for step `n` and forcing channel `c`.
    pub controls: Vec<Vec<f64>>,
    pub endpoint: SpectralField,
    pub projected: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ControlProblem {
    pub fn new(config: &SimConfig, projection: &[ModeIndex], target: &[f64], s: f64, t: f64) -> Result<Self> {
        if projection.len() != target.len() {
            return Err(LabError::LengthMismatch {
                expected: projection.len(),
                actual: target.len(),
            });
        }
        if target.iter().any(|x| !x.is_finite()) {
            return Err(invalid("control target must be finite"));
        }
        let base = sde::simulate(config)?;
        let (i, j) = nodes(&base, s, t)?;
        let model = base.model().clone();
        let projection = projection.iter().map(|k| model.basis().index(*k)).collect::<Result<_>>()?;
        Ok(Self {
            start_state: base.states()[i].clone(),
            model,
            n_steps: j - i,
            projection,
            target: target.to_vec(),
        })
    }

    pub fn model(&self) -> &Arc<GalerkinModel> {
        &self.model
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_channels(&self) -> usize {
        self.model.forced().len()
    }

    pub fn zero_control(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.n_channels()]; self.n_steps]
    }

    /// Every node of the controlled path.
    pub fn states(&self, h: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let dt = self.model.dt();
        let mut states = Vec::with_capacity(self.n_steps + 1);
        states.push(self.start_state.clone());
        for hn in h {
            let dw: Vec<f64> = hn.iter().map(|x| x * dt).collect();
            let mut next = vec![0.0; self.model.dim()];
            self.model.step(states.last().unwrap(), &dw, &mut next);
            states.push(next);
        }
        states
    }

    pub fn project(&self, state: &[f64]) -> Vec<f64> {
        self.projection.iter().map(|&i| state[i]).collect()
    }

    pub fn objective(&self, h: &[Vec<f64>]) -> f64 {
        let end = self.states(h).pop().unwrap();
        0.5 * self
            .project(&end)
            .iter()
            .zip(&self.target)
            .map(|(a, x)| (a - x).powi(2))
            .sum::<f64>()
    }

    /// Objective and its gradient, via the transpose of the discrete
    /// tangent map (one backward sweep).
    pub fn gradient(&self, h: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
        let states = self.states(h);
        let end = states.last().unwrap();
        let mut lambda = vec![0.0; self.model.dim()];
        let mut j = 0.0;
        for (&i, x) in self.projection.iter().zip(&self.target) {
            let r = end[i] - x;
            lambda[i] += r;
            j += 0.5 * r * r;
        }
        let dt = self.model.dt();
        let mut grad = vec![vec![0.0; self.n_channels()]; self.n_steps];
        let mut next = vec![0.0; lambda.len()];
        for n in (0..self.n_steps).rev() {
            for (c, (&i, g)) in self.model.forced().iter().zip(self.model.gain()).enumerate() {
                grad[n][c] = g * dt * lambda[i];
            }
            self.model.adjoint_step_discrete(&states[n], &lambda, &mut next);
            std::mem::swap(&mut lambda, &mut next);
        }
        (j, grad)
    }
}

/// Gradient descent with backtracking on the control objective.
///
/// The step halves until the objective decreases and doubles after every
/// accepted step. Starts from zero control.
pub fn control_search(
    config: &SimConfig,
    projection: &[ModeIndex],
    target: &[f64],
    s: f64,
    t: f64,
    options: &ControlOptions,
) -> Result<ControlResult> {
    let problem = ControlProblem::new(config, projection, target, s, t)?;
    let mut h = problem.zero_control();
    let mut step = options.initial_step;
    let (mut j, mut grad) = problem.gradient(&h);
    let mut iterations = 0;
    while (2.0 * j).sqrt() > options.tolerance && iterations < options.max_iterations {
        iterations += 1;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<Vec<f64>> = h
                .iter()
                .zip(&grad)
                .map(|(hn, gn)| hn.iter().zip(gn).map(|(a, g)| a - step * g).collect())
                .collect();
            let jt = problem.objective(&trial);
            if jt < j {
                h = trial;
                accepted = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        (j, grad) = problem.gradient(&h);
    }
    let end = problem.states(&h).pop().unwrap();
    let projected = problem.project(&end);
    let residual = (2.0 * j).sqrt();
    Ok(ControlResult {
        controls: h,
        endpoint: problem.model.field(end),
        projected,
        residual,
        iterations,
        converged: residual <= options.tolerance,
    })
}
