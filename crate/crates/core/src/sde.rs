//! Time integration of the truncated stochastic vorticity equation
//!
//! ```text
//! dα_ℓ + ν|ℓ|² α_ℓ dt + B(w, w)_ℓ dt = 1_{Z*}(ℓ) dW_ℓ
//! ```
//!
//! by exponential Euler–Maruyama: the diagonal linear part is integrated
//! exactly, the nonlinearity is explicit, and each forced mode receives
//! its increment scaled so that the linear subproblem has the exact
//! Ornstein–Uhlenbeck step variance.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::lattice::{ForcingGeometry, ModeIndex};
use crate::par;
use crate::rng::NoiseStream;
use crate::spectral::{csv_err, Basis, InteractionTable, ModeCoeff, SpectralField, BASIS_NORM_SQ};

/// Coefficients above this magnitude abort the integration.
pub const BLOW_UP_LIMIT: f64 = 1e12;

fn default_nu() -> f64 {
    0.5
}
fn default_radius() -> f64 {
    6.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_t_final() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_nu")]
    pub nu: f64,
    /// Forced wavenumbers, one independent Wiener process each.
    pub forcing: ForcingGeometry,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default)]
    pub initial: Vec<ModeCoeff>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            nu: default_nu(),
            forcing: ForcingGeometry::four_mode(),
            radius: default_radius(),
            dt: default_dt(),
            t_final: default_t_final(),
            initial: Vec::new(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return Err(invalid(format!("viscosity must be nonnegative, got {}", self.nu)));
        }
        if !(self.dt > 0.0) || !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(invalid("dt and t_final must be positive"));
        }
        if self.dt >= self.t_final {
            return Err(invalid(format!("dt = {} must be below t_final = {}", self.dt, self.t_final)));
        }
        let ratio = self.t_final / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(invalid(format!(
                "t_final = {} is not an integer multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        if !(self.radius >= 1.0) || !self.radius.is_finite() {
            return Err(invalid(format!("radius must be at least 1, got {}", self.radius)));
        }
        if let Some(k) = self.forcing.z_star().iter().find(|k| !k.within(self.radius)) {
            return Err(LabError::ModeOutsideBasis(k.k1(), k.k2()));
        }
        if let Some(e) = self.initial.iter().find(|e| !e.mode.within(self.radius)) {
            return Err(LabError::ModeOutsideBasis(e.mode.k1(), e.mode.k2()));
        }
        if let Some(e) = self.initial.iter().find(|e| !e.coeff.is_finite()) {
            return Err(invalid(format!("initial coefficient of {} is not finite", e.mode)));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..self.clone() }
    }
}

/// The discretized drift and noise of one configuration: basis, triad
/// table, and per-mode integrating factors.
#[derive(Debug)]
pub struct GalerkinModel {
    basis: Arc<Basis>,
    table: InteractionTable,
    nu: f64,
    dt: f64,
    forced: Vec<usize>,
    forced_modes: Vec<ModeIndex>,
    decay: Vec<f64>,
    gain: Vec<f64>,
}

impl GalerkinModel {
    pub fn new(config: &SimConfig) -> Result<Arc<Self>> {
        config.validate()?;
        let basis = Basis::new(config.radius)?;
        let table = InteractionTable::build(&basis);
        let (nu, dt) = (config.nu, config.dt);
        let decay: Vec<f64> = basis.norms_sq().iter().map(|n2| (-nu * n2 * dt).exp()).collect();
        let forced_modes: Vec<ModeIndex> = config.forcing.z_star().iter().copied().collect();
        let forced: Vec<usize> = forced_modes.iter().map(|k| basis.index(*k)).collect::<Result<_>>()?;
        let gain = forced
            .iter()
            .map(|&i| {
                let x = nu * basis.norm_sq(i) * dt;
                if x == 0.0 {
                    1.0
                } else {
                    (-(-2.0 * x).exp_m1() / (2.0 * x)).sqrt()
                }
            })
            .collect();
        Ok(Arc::new(Self {
            basis,
            table,
            nu,
            dt,
            forced,
            forced_modes,
            decay,
            gain,
        }))
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn table(&self) -> &InteractionTable {
        &self.table
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Basis positions of the forced modes, in channel order.
    pub fn forced(&self) -> &[usize] {
        &self.forced
    }

    pub fn forced_modes(&self) -> &[ModeIndex] {
        &self.forced_modes
    }

    /// `e^{−ν|ℓ|² dt}` per basis position.
    pub fn decay(&self) -> &[f64] {
        &self.decay
    }

    /// Noise scaling per forcing channel.
    pub fn gain(&self) -> &[f64] {
        &self.gain
    }

    /// `out = E(α − dt·B(α, α)) + g·ΔW`.
    pub fn step(&self, alpha: &[f64], dw: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.table.apply_into(alpha, alpha, out);
        for ((o, a), e) in out.iter_mut().zip(alpha).zip(&self.decay) {
            *o = e * (a - self.dt * *o);
        }
        for ((&i, g), d) in self.forced.iter().zip(&self.gain).zip(dw) {
            out[i] += g * d;
        }
    }

    /// `out = B(w, v) + B(v, w)`.
    pub fn linearization(&self, w: &[f64], v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.table.apply_into(w, v, out);
        self.table.apply_into(v, w, out);
    }

    /// `out = −L_wᵀ u = B(w, u) − C(u, w)`.
    pub fn neg_linearization_transpose(&self, w: &[f64], u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.table.apply_into(w, u, out);
        let mut c = vec![0.0; out.len()];
        self.table.adjoint_into(u, w, &mut c);
        for (o, c) in out.iter_mut().zip(&c) {
            *o -= c;
        }
    }

    /// One step of the linearized scheme: `out = E(v − dt·L_w v)`.
    pub fn tangent_step(&self, w: &[f64], v: &[f64], out: &mut [f64]) {
        self.linearization(w, v, out);
        for ((o, v), e) in out.iter_mut().zip(v).zip(&self.decay) {
            *o = e * (v - self.dt * *o);
        }
    }

    /// Exponential Euler for the backward adjoint equation in reversed time,
    /// evaluating the coefficients at the later node `w`.
    pub fn adjoint_step_continuous(&self, w: &[f64], u: &[f64], out: &mut [f64]) {
        self.neg_linearization_transpose(w, u, out);
        for ((o, u), e) in out.iter_mut().zip(u).zip(&self.decay) {
            *o = e * (u + self.dt * *o);
        }
    }

    /// Exact transpose of [`Self::tangent_step`] at base state `w`.
    pub fn adjoint_step_discrete(&self, w: &[f64], u: &[f64], out: &mut [f64]) {
        let ut: Vec<f64> = u.iter().zip(&self.decay).map(|(u, e)| e * u).collect();
        self.neg_linearization_transpose(w, &ut, out);
        for (o, u) in out.iter_mut().zip(&ut) {
            *o = u + self.dt * *o;
        }
    }

    pub fn field(&self, coeffs: Vec<f64>) -> SpectralField {
        SpectralField::from_raw(&self.basis, coeffs)
    }
}

/// A stored path: every node of the grid plus the increments driving it.
#[derive(Clone, Debug)]
pub struct Trajectory {
    model: Arc<GalerkinModel>,
    config: SimConfig,
    path_index: u64,
    states: Vec<Vec<f64>>,
    increments: Vec<Vec<f64>>,
}

/// Integrates one path whose noise is read from the counter stream.
pub fn simulate(config: &SimConfig) -> Result<Trajectory> {
    simulate_path(config, 0)
}

pub fn simulate_path(config: &SimConfig, path_index: u64) -> Result<Trajectory> {
    let model = GalerkinModel::new(config)?;
    simulate_with(&model, config, path_index)
}

/// Like [`simulate_path`] but reusing a prebuilt model.
pub fn simulate_with(model: &Arc<GalerkinModel>, config: &SimConfig, path_index: u64) -> Result<Trajectory> {
    let increments = wiener_increments(config, path_index, config.dt);
    replay_with(model, config, path_index, increments)
}

/// Increments of path `path_index` sampled on a grid of step `dt`.
pub fn wiener_increments(config: &SimConfig, path_index: u64, dt: f64) -> Vec<Vec<f64>> {
    let n_ch = config.forcing.len();
    let stream = NoiseStream::new(config.seed, path_index, n_ch);
    let n = (config.t_final / dt).round() as usize;
    (0..n)
        .map(|step| {
            let mut row = vec![0.0; n_ch];
            stream.increments(step as u64, dt, &mut row);
            row
        })
        .collect()
}

/// Integrates with caller-supplied increments (one row per step).
pub fn replay(config: &SimConfig, increments: Vec<Vec<f64>>) -> Result<Trajectory> {
    let model = GalerkinModel::new(config)?;
    replay_with(&model, config, 0, increments)
}

pub fn replay_with(
    model: &Arc<GalerkinModel>,
    config: &SimConfig,
    path_index: u64,
    increments: Vec<Vec<f64>>,
) -> Result<Trajectory> {
    let n = config.n_steps();
    if increments.len() != n {
        return Err(LabError::LengthMismatch {
            expected: n,
            actual: increments.len(),
        });
    }
    if let Some(row) = increments.iter().find(|r| r.len() != model.forced.len()) {
        return Err(LabError::LengthMismatch {
            expected: model.forced.len(),
            actual: row.len(),
        });
    }
    let initial = SpectralField::from_mode_coeffs(model.basis(), &config.initial)?;
    let mut states = Vec::with_capacity(n + 1);
    states.push(initial.into_coeffs());
    for (step, dw) in increments.iter().enumerate() {
        let mut next = vec![0.0; model.dim()];
        model.step(&states[step], dw, &mut next);
        if next.iter().any(|c| !(c.abs() <= BLOW_UP_LIMIT)) {
            return Err(LabError::BlowUp {
                step: step + 1,
                limit: BLOW_UP_LIMIT,
            });
        }
        states.push(next);
    }
    Ok(Trajectory {
        model: model.clone(),
        config: config.clone(),
        path_index,
        states,
        increments,
    })
}

/// Independent paths `0..n_paths` of one configuration.
pub fn simulate_ensemble(config: &SimConfig, n_paths: usize) -> Result<Vec<Trajectory>> {
    let model = GalerkinModel::new(config)?;
    par::map_indexed(n_paths, |p| simulate_with(&model, config, p as u64))
        .into_iter()
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: SimConfig,
    path: u64,
    modes: Vec<ModeIndex>,
    forced: Vec<ModeIndex>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    t: f64,
    coeffs: Vec<f64>,
    /// Increments driving the step that leaves this node; empty at the end.
    increments: Vec<f64>,
}

impl Trajectory {
    pub fn model(&self) -> &Arc<GalerkinModel> {
        &self.model
    }

    pub fn basis(&self) -> &Arc<Basis> {
        self.model.basis()
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    pub fn n_steps(&self) -> usize {
        self.increments.len()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.config.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps()).map(|i| self.time(i)).collect()
    }

    /// Grid index of `t`; times off the grid are rejected.
    pub fn node_index(&self, t: f64) -> Result<usize> {
        let x = t / self.config.dt;
        let i = x.round();
        if !x.is_finite() || (x - i).abs() > 1e-9 * i.abs().max(1.0) || i < 0.0 || i as usize > self.n_steps() {
            return Err(LabError::OffGrid { time: t, dt: self.config.dt });
        }
        Ok(i as usize)
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn state(&self, i: usize) -> SpectralField {
        self.model.field(self.states[i].clone())
    }

    pub fn final_state(&self) -> SpectralField {
        self.state(self.n_steps())
    }

    pub fn increments(&self) -> &[Vec<f64>] {
        &self.increments
    }

    /// `W(t_i)` per channel, starting from zero.
    pub fn wiener_path(&self) -> Vec<Vec<f64>> {
        let mut w = vec![vec![0.0; self.model.forced.len()]];
        for dw in &self.increments {
            let last = w.last().unwrap();
            w.push(last.iter().zip(dw).map(|(a, b)| a + b).collect());
        }
        w
    }

    /// `E₀ = Σ_{k∈Z*} ‖e_k‖²`.
    pub fn forcing_energy(&self) -> f64 {
        self.model.forced.len() as f64 * BASIS_NORM_SQ
    }

    /// `‖w(t_i)‖²` at every node.
    pub fn enstrophy_series(&self) -> Vec<f64> {
        self.states.iter().map(|s| self.model.field(s.clone()).norm().powi(2)).collect()
    }

    /// `⟨w, Λ^{−2} w⟩` at every node.
    pub fn energy_series(&self) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| {
                let f = self.model.field(s.clone());
                f.inner(&f.inverse_laplacian()).expect("same basis")
            })
            .collect()
    }

    pub fn h1_series(&self) -> Vec<f64> {
        self.states.iter().map(|s| self.model.field(s.clone()).h1_norm_sq()).collect()
    }

    /// `r(t_i) = ‖w(t_i)‖² − ‖w(0)‖² + 2ν∫₀^{t_i}‖w‖₁² ds − E₀ t_i`, with the
    /// time integral by the trapezoid rule.
    pub fn enstrophy_residual(&self) -> Vec<f64> {
        let ens = self.enstrophy_series();
        let h1 = self.h1_series();
        let (dt, nu, e0) = (self.dt(), self.model.nu, self.forcing_energy());
        let mut integral = 0.0;
        let mut out = Vec::with_capacity(ens.len());
        for i in 0..ens.len() {
            if i > 0 {
                integral += 0.5 * dt * (h1[i - 1] + h1[i]);
            }
            out.push(ens[i] - ens[0] + 2.0 * nu * integral - e0 * self.time(i));
        }
        out
    }

    /// CSV columns `t,enstrophy,energy,h1_sq,residual`.
    pub fn write_norms_csv<W: Write>(&self, writer: W) -> Result<()> {
        let (ens, en, h1, r) = (
            self.enstrophy_series(),
            self.energy_series(),
            self.h1_series(),
            self.enstrophy_residual(),
        );
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["t", "enstrophy", "energy", "h1_sq", "residual"]).map_err(csv_err)?;
        for i in 0..ens.len() {
            wtr.write_record(&[
                self.time(i).to_string(),
                ens[i].to_string(),
                en[i].to_string(),
                h1[i].to_string(),
                r[i].to_string(),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// JSON lines: a header `{config, path, modes, forced}` followed by one
    /// `{t, coeffs, increments}` record per node.
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        let header = Header {
            config: self.config.clone(),
            path: self.path_index,
            modes: self.basis().modes().to_vec(),
            forced: self.model.forced_modes.clone(),
        };
        serde_json::to_writer(&mut writer, &header)?;
        writer.write_all(b"\n")?;
        for (i, s) in self.states.iter().enumerate() {
            let rec = NodeRecord {
                t: self.time(i),
                coeffs: s.clone(),
                increments: self.increments.get(i).cloned().unwrap_or_default(),
            };
            serde_json::to_writer(&mut writer, &rec)?;
            writer.write_all(b"\n")?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Reads [`Self::write_jsonl`] output and checks that replaying the
    /// stored increments reproduces the stored states bit for bit.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let first = lines.next().ok_or_else(|| LabError::MalformedRecord("empty input".into()))??;
        let header: Header = serde_json::from_str(&first)?;
        let model = GalerkinModel::new(&header.config)?;
        if header.modes != model.basis().modes() || header.forced != model.forced_modes {
            return Err(LabError::MalformedRecord("mode listing does not match the configuration".into()));
        }
        let mut states = Vec::new();
        let mut increments = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: NodeRecord = serde_json::from_str(&line)?;
            if !rec.increments.is_empty() {
                increments.push(rec.increments);
            }
            states.push(rec.coeffs);
        }
        let traj = replay_with(&model, &header.config, header.path, increments)?;
        if traj.states != states {
            return Err(LabError::MalformedRecord("stored states differ from the replayed path".into()));
        }
        Ok(traj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SimConfig {
        SimConfig {
            radius: 3.0,
            t_final: 0.2,
            seed: 11,
            ..SimConfig::default()
        }
    }

    #[test]
    fn validation() {
        assert!(cfg().validate().is_ok());
        assert!(SimConfig { dt: 0.3, ..cfg() }.validate().is_err());
        assert!(SimConfig { dt: 0.003, ..cfg() }.validate().is_err());
        assert!(SimConfig { nu: -1.0, ..cfg() }.validate().is_err());
        let far = ForcingGeometry::from_pairs(&[[4, 0], [-4, 0]]).unwrap();
        assert!(SimConfig { forcing: far, ..cfg() }.validate().is_err());
    }

    #[test]
    fn zero_state_stays_zero() {
        let c = SimConfig {
            forcing: ForcingGeometry::unforced(),
            ..cfg()
        };
        let t = simulate(&c).unwrap();
        assert!(t.states().iter().all(|s| s.iter().all(|x| *x == 0.0)));
        assert!(t.enstrophy_residual().iter().all(|r| *r == 0.0));
    }

    #[test]
    fn single_mode_decays_exactly() {
        let k = ModeIndex::of(2, 1);
        let c = SimConfig {
            forcing: ForcingGeometry::unforced(),
            initial: vec![ModeCoeff { mode: k, coeff: 1.0 }],
            ..cfg()
        };
        let t = simulate(&c).unwrap();
        let last = t.final_state();
        let expect = (-c.nu * 5.0 * c.t_final).exp();
        assert!((last.coeff(k).unwrap() - expect).abs() < 1e-12);
        assert!(last.coeffs().iter().filter(|x| **x != 0.0).count() == 1);
    }

    #[test]
    fn replay_is_bit_exact() {
        let t = simulate_path(&cfg(), 3).unwrap();
        let again = simulate_path(&cfg(), 3).unwrap();
        assert_eq!(t.states(), again.states());
        let r = replay(&cfg(), t.increments().to_vec()).unwrap();
        assert_eq!(t.states(), r.states());
        assert_ne!(simulate_path(&cfg(), 4).unwrap().states(), t.states());
    }

    #[test]
    fn jsonl_round_trip() {
        let t = simulate(&cfg()).unwrap();
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let back = Trajectory::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back.states(), t.states());
        assert_eq!(back.increments(), t.increments());
        let text = String::from_utf8(buf).unwrap();
        let tampered = text.replacen("\"coeffs\":[0.0", "\"coeffs\":[1.0", 1);
        assert!(Trajectory::read_jsonl(tampered.as_bytes()).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let c = SimConfig {
            nu: 0.0,
            dt: 0.05,
            t_final: 5.0,
            initial: vec![
                ModeCoeff { mode: ModeIndex::of(1, 0), coeff: 400.0 },
                ModeCoeff { mode: ModeIndex::of(1, 1), coeff: 400.0 },
                ModeCoeff { mode: ModeIndex::of(0, 2), coeff: 400.0 },
            ],
            ..cfg()
        };
        assert!(matches!(simulate(&c), Err(LabError::BlowUp { .. })));
    }

    #[test]
    fn node_lookup() {
        let t = simulate(&cfg()).unwrap();
        assert_eq!(t.node_index(0.1).unwrap(), 100);
        assert!(matches!(t.node_index(0.10005), Err(LabError::OffGrid { .. })));
        assert!(t.node_index(0.3).is_err());
        assert_eq!(t.forcing_energy(), 4.0 * BASIS_NORM_SQ);
    }
}
