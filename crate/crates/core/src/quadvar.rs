//! Quadratic-variation estimators, the two-scale partition and its
//! small-ball events, Hölder transfer checks and Gaussian tail bounds.

use std::f64::consts::PI;
use std::path::Path;

use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::par;
use crate::rng::NoiseStream;
use crate::spectral::csv_err;

/// Relative tolerance for matching a requested time against a sample grid.
const GRID_TOL: f64 = 1e-9;

/// A real process sampled on an increasing grid starting at 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampledProcess {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SampledProcess {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(LabError::LengthMismatch { expected: times.len(), actual: values.len() });
        }
        if times.is_empty() || times[0] != 0.0 {
            return Err(invalid("sample grid must start at 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(invalid("sample times must be finite and strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sampled values must be finite"));
        }
        Ok(Self { times, values })
    }

    /// `n + 1` equally spaced nodes on `[0, t_final]`.
    pub fn uniform(t_final: f64, values: Vec<f64>) -> Result<Self> {
        if !(t_final > 0.0) || values.len() < 2 {
            return Err(invalid("uniform grid needs t_final > 0 and at least two nodes"));
        }
        let n = values.len() - 1;
        Self::new(uniform_grid(t_final, n), values)
    }

    /// Samples `f` on a uniform grid.
    pub fn from_fn(t_final: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let times = uniform_grid(t_final, n);
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Node index of `t`, or `None` if `t` is not on the grid.
    pub fn locate(&self, t: f64) -> Option<usize> {
        locate(&self.times, t)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `α`-Hölder constant over grid pairs with `0 < |s − r| ≤ 1`.
    pub fn holder_constant(&self, alpha: f64) -> f64 {
        holder_constant(&self.times, &self.values, alpha)
    }

    /// `max(‖f‖∞, H_α(f))`.
    pub fn holder_norm(&self, alpha: f64) -> f64 {
        self.sup_norm().max(self.holder_constant(alpha))
    }

    /// `∫₀ᵀ |f|^ℓ` by the trapezoid rule.
    pub fn lp_integral(&self, ell: f64) -> f64 {
        self.times
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0].abs().powf(ell) + v[1].abs().powf(ell)))
            .sum()
    }
}

pub fn uniform_grid(t_final: f64, n: usize) -> Vec<f64> {
    let h = t_final / n as f64;
    (0..=n).map(|i| if i == n { t_final } else { i as f64 * h }).collect()
}

fn locate(times: &[f64], t: f64) -> Option<usize> {
    let tol = GRID_TOL * times.last().map_or(1.0, |x| x.abs().max(1.0));
    let i = times.partition_point(|&s| s < t - tol);
    (i < times.len() && (times[i] - t).abs() <= tol).then_some(i)
}

fn holder_constant(times: &[f64], values: &[f64], alpha: f64) -> f64 {
    let mut h = 0.0f64;
    for i in 0..times.len() {
        for j in i + 1..times.len() {
            let d = times[j] - times[i];
            if d > 1.0 {
                break;
            }
            h = h.max((values[j] - values[i]).abs() / d.powf(alpha));
        }
    }
    h
}

/// Squared-increment sum of `z` over `partition`, whose points must lie on
/// the sample grid.
pub fn qv_estimate(z: &SampledProcess, partition: &[f64]) -> Result<f64> {
    let idx = partition
        .iter()
        .map(|&t| z.locate(t).ok_or(LabError::OffGrid { time: t, dt: f64::NAN }))
        .collect::<Result<Vec<_>>>()?;
    if idx.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("partition must be nondecreasing"));
    }
    Ok(idx.windows(2).map(|w| (z.values[w[1]] - z.values[w[0]]).powi(2)).sum())
}

/// Two-scale partition: blocks of width `Δ`, each cut into sub-steps of
/// width `δ = Δ^{5/3}` (the last one clipped at the block end).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionScheme {
    pub delta_cap: f64,
    pub delta: f64,
    pub horizon: f64,
    /// `t_0, …, t_m` with `t_m = T`.
    pub block_times: Vec<f64>,
    /// `s_0(k), …, s_{M(k)}(k)` for each block `k < m`.
    pub sub_times: Vec<Vec<f64>>,
}

impl PartitionScheme {
    /// Number of blocks `m`.
    pub fn m(&self) -> usize {
        self.block_times.len() - 1
    }

    /// Sub-step count `M(k)`.
    pub fn block_count(&self, k: usize) -> usize {
        self.sub_times[k].len() - 1
    }

    /// All partition points, sorted, without duplicates.
    pub fn all_times(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        for s in &self.sub_times {
            out.extend_from_slice(&s[1..]);
        }
        out
    }
}

/// Builds the scheme for `0 < Δ ≤ T`. Counts are taken as ceilings of the
/// exact ratios with a 1e−12 relative guard so that `t_m = T` and
/// `s_{M(k)}(k) = t_{k+1}` hold exactly.
pub fn partition_scheme(delta_cap: f64, horizon: f64) -> Result<PartitionScheme> {
    if !(delta_cap > 0.0 && delta_cap <= horizon && horizon.is_finite()) {
        return Err(invalid(format!("need 0 < Δ ≤ T, got Δ = {delta_cap}, T = {horizon}")));
    }
    let delta = delta_cap.powf(5.0 / 3.0);
    let m = ceil_guarded(horizon / delta_cap);
    let block_times: Vec<f64> =
        (0..=m).map(|k| if k == m { horizon } else { (k as f64 * delta_cap).min(horizon) }).collect();
    let sub_times = block_times
        .windows(2)
        .map(|w| {
            let big_m = ceil_guarded((w[1] - w[0]) / delta);
            (0..=big_m).map(|l| if l == big_m { w[1] } else { (w[0] + l as f64 * delta).min(w[1]) }).collect()
        })
        .collect();
    Ok(PartitionScheme { delta_cap, delta, horizon, block_times, sub_times })
}

fn ceil_guarded(x: f64) -> usize {
    ((x * (1.0 - 1e-12)).ceil() as usize).max(1)
}

/// Independent Wiener paths sampled on a shared grid.
#[derive(Clone, Debug)]
pub struct WienerEnsemble {
    times: Vec<f64>,
    /// `paths[p][i][node]`.
    paths: Vec<Vec<Vec<f64>>>,
}

impl WienerEnsemble {
    /// Draws `n_paths` paths of `n_channels` Brownian motions on `times`
    /// (increasing, starting at 0). Path `p` uses stream `p` of `seed`.
    pub fn sample(times: Vec<f64>, n_channels: usize, n_paths: usize, seed: u64) -> Result<Self> {
        if times.first() != Some(&0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("grid must start at 0 and increase strictly"));
        }
        if n_channels == 0 {
            return Err(invalid("need at least one channel"));
        }
        let paths = par::map_indexed(n_paths, |p| {
            let noise = NoiseStream::new(seed, p as u64, n_channels);
            (0..n_channels)
                .map(|c| {
                    let mut w = Vec::with_capacity(times.len());
                    w.push(0.0);
                    for (step, t) in times.windows(2).enumerate() {
                        let prev = *w.last().unwrap();
                        w.push(prev + (t[1] - t[0]).sqrt() * noise.normal(step as u64, c));
                    }
                    w
                })
                .collect()
        });
        Ok(Self { times, paths })
    }

    /// Grid containing every point of each scheme.
    pub fn grid_for(schemes: &[&PartitionScheme]) -> Vec<f64> {
        let mut all: Vec<f64> = schemes.iter().flat_map(|s| s.all_times()).collect();
        all.sort_by(f64::total_cmp);
        let tol = GRID_TOL * all.last().copied().unwrap_or(1.0).max(1.0);
        all.dedup_by(|a, b| (*a - *b).abs() <= tol);
        all
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn n_channels(&self) -> usize {
        self.paths.first().map_or(0, |p| p.len())
    }

    pub fn channel(&self, path: usize, channel: usize) -> SampledProcess {
        SampledProcess { times: self.times.clone(), values: self.paths[path][channel].clone() }
    }
}

/// Empirical frequency with a 95% Wilson interval and, where available,
/// the analytic upper bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventEstimate {
    pub event: &'static str,
    pub count: usize,
    pub n: usize,
    pub frequency: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound: Option<f64>,
}

impl EventEstimate {
    fn new(event: &'static str, count: usize, n: usize, bound: Option<f64>) -> Self {
        let (ci_low, ci_high) = wilson_interval(count, n, 1.96);
        Self { event, count, n, frequency: count as f64 / n as f64, ci_low, ci_high, bound }
    }

    /// Frequency is compatible with the bound: the Wilson lower limit does
    /// not exceed it. Vacuously true without a bound.
    pub fn within_bound(&self) -> bool {
        self.bound.is_none_or(|b| self.ci_low <= b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventReport {
    pub delta_cap: f64,
    pub horizon: f64,
    pub n_channels: usize,
    pub omega_a: EventEstimate,
    pub omega_b: EventEstimate,
    pub omega_c: EventEstimate,
}

impl EventReport {
    pub fn events(&self) -> [&EventEstimate; 3] {
        [&self.omega_a, &self.omega_b, &self.omega_c]
    }

    /// Rows `delta_cap,n_channels,event,count,n,frequency,ci_low,ci_high,bound`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_event_csv(std::slice::from_ref(self), path)
    }
}

pub fn write_event_csv(reports: &[EventReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["delta_cap", "n_channels", "event", "count", "n", "frequency", "ci_low", "ci_high", "bound"])
        .map_err(csv_err)?;
    for r in reports {
        for e in r.events() {
            w.write_record([
                r.delta_cap.to_string(),
                r.n_channels.to_string(),
                e.event.to_string(),
                e.count.to_string(),
                e.n.to_string(),
                e.frequency.to_string(),
                e.ci_low.to_string(),
                e.ci_high.to_string(),
                e.bound.map_or(String::new(), |b| b.to_string()),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// 95%-style Wilson score interval for `count` successes in `n` trials.
pub fn wilson_interval(count: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = count as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Per-path statistics behind the three events.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathEventStats {
    /// `inf_{k,i} (1/M(k)) Σ_ℓ (δ_ℓ^k W_i)² / δ_ℓ^k`.
    pub min_normalized_qv: f64,
    /// `sup_{k, i≠j} (1/M(k)) |Σ_ℓ δ_ℓ^k W_i δ_ℓ^k W_j / δ_ℓ^k|`.
    pub max_cross: f64,
    /// `sup_i max(‖W_i‖∞, H_{1/4}(W_i))`.
    pub max_holder_norm: f64,
}

impl PathEventStats {
    pub fn omega_a(&self) -> bool {
        self.min_normalized_qv <= 0.5
    }

    pub fn omega_b(&self, delta_cap: f64, n_channels: usize) -> bool {
        self.max_cross >= omega_b_threshold(delta_cap, n_channels)
    }

    pub fn omega_c(&self, delta_cap: f64) -> bool {
        self.max_holder_norm > omega_c_threshold(delta_cap)
    }
}

pub fn omega_b_threshold(delta_cap: f64, n_channels: usize) -> f64 {
    delta_cap.powf(3.0 / 14.0) / (3.0 * (n_channels * n_channels) as f64)
}

pub fn omega_c_threshold(delta_cap: f64) -> f64 {
    delta_cap.powf(-1.0 / 28.0)
}

/// Evaluates the event statistics of one path; `w[i]` are channel values
/// on `times`, and `idx[k]` the grid indices of the block `k` sub-points.
fn path_stats(times: &[f64], w: &[Vec<f64>], idx: &[Vec<usize>]) -> PathEventStats {
    let n = w.len();
    let mut min_qv = f64::INFINITY;
    let mut max_cross = 0.0f64;
    for block in idx {
        let m = (block.len() - 1) as f64;
        let mut diag = vec![0.0; n];
        let mut cross = vec![0.0; n * n];
        for s in block.windows(2) {
            let d = times[s[1]] - times[s[0]];
            let inc: Vec<f64> = w.iter().map(|wi| wi[s[1]] - wi[s[0]]).collect();
            for i in 0..n {
                diag[i] += inc[i] * inc[i] / d;
                for j in i + 1..n {
                    cross[i * n + j] += inc[i] * inc[j] / d;
                }
            }
        }
        for i in 0..n {
            min_qv = min_qv.min(diag[i] / m);
            for j in i + 1..n {
                max_cross = max_cross.max(cross[i * n + j].abs() / m);
            }
        }
    }
    let max_holder_norm = w
        .iter()
        .map(|wi| {
            let sup = wi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            sup.max(holder_constant(times, wi, 0.25))
        })
        .fold(0.0, f64::max);
    PathEventStats { min_normalized_qv: min_qv, max_cross, max_holder_norm }
}

/// Grid indices for every scheme point; rejects schemes the ensemble grid
/// cannot resolve.
fn scheme_indices(times: &[f64], scheme: &PartitionScheme) -> Result<Vec<Vec<usize>>> {
    if (times.last().copied().unwrap_or(0.0) - scheme.horizon).abs() > GRID_TOL * scheme.horizon.max(1.0) {
        return Err(LabError::InsufficientResolution(format!(
            "ensemble horizon {} differs from scheme horizon {}",
            times.last().copied().unwrap_or(0.0),
            scheme.horizon
        )));
    }
    scheme
        .sub_times
        .iter()
        .map(|block| {
            block
                .iter()
                .map(|&t| {
                    locate(times, t).ok_or_else(|| {
                        LabError::InsufficientResolution(format!(
                            "partition point {t} (δ = {}) is not on the sample grid",
                            scheme.delta
                        ))
                    })
                })
                .collect()
        })
        .collect()
}

/// Per-path statistics for every path in the ensemble.
pub fn event_statistics(ensemble: &WienerEnsemble, scheme: &PartitionScheme) -> Result<Vec<PathEventStats>> {
    let idx = scheme_indices(&ensemble.times, scheme)?;
    Ok(par::map_indexed(ensemble.n_paths(), |p| path_stats(&ensemble.times, &ensemble.paths[p], &idx)))
}

/// Empirical frequencies of `Ω_a`, `Ω_b`, `Ω_c` over the ensemble.
pub fn event_frequencies(ensemble: &WienerEnsemble, scheme: &PartitionScheme) -> Result<EventReport> {
    let stats = event_statistics(ensemble, scheme)?;
    let n = stats.len();
    if n == 0 {
        return Err(invalid("empty ensemble"));
    }
    let nc = ensemble.n_channels();
    let d = scheme.delta_cap;
    let t = scheme.horizon;
    let count = |f: &dyn Fn(&PathEventStats) -> bool| stats.iter().filter(|s| f(s)).count();
    Ok(EventReport {
        delta_cap: d,
        horizon: t,
        n_channels: nc,
        omega_a: EventEstimate::new("omega_a", count(&|s| s.omega_a()), n, Some(omega_a_bound(d, t, nc))),
        omega_b: EventEstimate::new("omega_b", count(&|s| s.omega_b(d, nc)), n, Some(omega_b_bound(d, t, nc))),
        omega_c: EventEstimate::new("omega_c", count(&|s| s.omega_c(d)), n, None),
    })
}

/// `P(Ω_a(Δ)) ≤ (2TN/√π) Δ^{−2/3} exp(−Δ^{−2/3}/20)`.
pub fn omega_a_bound(delta_cap: f64, horizon: f64, n_channels: usize) -> f64 {
    let r = delta_cap.powf(-2.0 / 3.0);
    2.0 * horizon * n_channels as f64 / PI.sqrt() * r * (-r / 20.0).exp()
}

/// `P(Ω_b(Δ)) ≤ 6N²TΔ^{−1} exp(−Δ^{−19/42}/(3N²))`.
pub fn omega_b_bound(delta_cap: f64, horizon: f64, n_channels: usize) -> f64 {
    let n2 = (n_channels * n_channels) as f64;
    6.0 * n2 * horizon / delta_cap * (-delta_cap.powf(-19.0 / 42.0) / (3.0 * n2)).exp()
}

/// Combined bound `8TN² exp(−γΔ^{−2/5})/Δ` with `γ = min(1/(3N²), 1/20)`,
/// stated for `Δ ≤ ½ ∧ T`.
pub fn omega_ab_union_bound(delta_cap: f64, horizon: f64, n_channels: usize) -> f64 {
    let n2 = (n_channels * n_channels) as f64;
    let gamma = (1.0 / (3.0 * n2)).min(1.0 / 20.0);
    8.0 * horizon * n2 * (-gamma * delta_cap.powf(-0.4)).exp() / delta_cap
}

/// One level of the `ε^{(1/152)^j}` cascade.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CascadeRow {
    pub level: u32,
    pub exponent: f64,
    pub epsilon: f64,
    /// `Δ = ε_j^{14/75}` used for the level-`j` events.
    pub delta_cap: f64,
}

pub fn cascade_table(epsilon: f64, levels: u32) -> Result<Vec<CascadeRow>> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("cascade needs ε in (0, 1)"));
    }
    Ok((0..levels)
        .map(|j| {
            let exponent = (1.0f64 / 152.0).powi(j as i32);
            let eps_j = epsilon.powf(exponent);
            CascadeRow { level: j, exponent, epsilon: eps_j, delta_cap: eps_j.powf(14.0 / 75.0) }
        })
        .collect())
}

/// The two small-ball bounds for sums of `M` squared (resp. multiplied)
/// independent standard normals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmallBallBounds {
    pub gamma: f64,
    /// `P(χ²_M ≤ cM) ≤ (πM)^{−1/2} exp(−γM/2)`.
    pub chi_square: f64,
    /// `P(|Σ η η̃| ≥ cM) ≤ 2 exp(−c²M/4)`.
    pub cross: f64,
    /// `(M/4π)^{1/2} exp(−γM/2)`: the same argument with the Stirling
    /// lower bound `Γ(z) ≥ (2π/z)^{1/2}(z/e)^z`. The prefactor of
    /// `chi_square` is smaller by `M/2` and is not a valid bound.
    pub chi_square_stirling: f64,
}

pub fn chi_square_small_ball_bound(c: f64, m: usize) -> Result<SmallBallBounds> {
    if !(c > 0.0 && c < 1.0) {
        return Err(invalid(format!("c must lie in (0, 1), got {c}")));
    }
    let mf = m as f64;
    if !(mf > 2.0 / (1.0 - c)) {
        return Err(invalid(format!("need M > 2/(1 − c) = {}, got {m}", 2.0 / (1.0 - c))));
    }
    let gamma = c - 1.0 - c.ln();
    Ok(SmallBallBounds {
        gamma,
        chi_square: (PI * mf).powf(-0.5) * (-gamma * mf / 2.0).exp(),
        cross: 2.0 * (-c * c * mf / 4.0).exp(),
        chi_square_stirling: (mf / (4.0 * PI)).sqrt() * (-gamma * mf / 2.0).exp(),
    })
}

/// `ln Γ(m/2)` by the exact recursions for integer and half-integer
/// arguments.
pub fn ln_gamma_half(m: usize) -> f64 {
    assert!(m > 0);
    if m.is_multiple_of(2) {
        (1..m / 2).map(|j| (j as f64).ln()).sum()
    } else {
        0.5 * PI.ln() + (0..m / 2).map(|j| (j as f64 + 0.5).ln()).sum::<f64>()
    }
}

/// `P(χ²_M ≤ x)` by adaptive Simpson integration of the density, after
/// the substitution `t = u²` which removes the singularity at 0 for `M = 1`.
pub fn chi_square_cdf(m: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = m as f64 / 2.0;
    let log_norm = k * 2f64.ln() + ln_gamma_half(m);
    let f = |u: f64| {
        if u <= 0.0 {
            if m == 1 { 2.0 * (-log_norm).exp() } else { 0.0 }
        } else {
            2.0 * ((m as f64 - 1.0) * u.ln() - u * u / 2.0 - log_norm).exp()
        }
    };
    adaptive_simpson(&f, 0.0, x.sqrt(), 1e-10)
}

/// Adaptive Simpson with a relative tolerance on the total.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    // A coarse composite pass fixes the scale of the absolute tolerance.
    let n = 64;
    let h = (b - a) / n as f64;
    let mut coarse = 0.0;
    for i in 0..n {
        let (l, r) = (a + i as f64 * h, a + (i + 1) as f64 * h);
        coarse += simpson(f(l), f(0.5 * (l + r)), f(r), r - l);
    }
    let tol = rel_tol * coarse.abs().max(f64::MIN_POSITIVE);
    (0..n)
        .map(|i| {
            let (l, r) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fl, fm, fr) = (f(l), f(0.5 * (l + r)), f(r));
            simpson_rec(f, l, r, fl, fm, fr, simpson(fl, fm, fr, r - l), tol / n as f64, 48)
        })
        .sum()
}

fn simpson(fa: f64, fm: f64, fb: f64, w: f64) -> f64 {
    w / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Parameters for [`holder_transfer`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolderParams {
    pub alpha: f64,
    pub gamma: f64,
    pub eps: f64,
    /// Integrability exponent `ℓ` for the `L^ℓ → L^∞` transfer.
    pub ell: f64,
}

/// One implication `premise ⇒ conclusion`, with measured quantities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImplicationCheck {
    pub name: &'static str,
    /// `c` such that the Hölder premise holds with equality on the grid.
    pub c: f64,
    pub premise: bool,
    pub lhs: f64,
    pub bound: f64,
    pub conclusion: bool,
}

impl ImplicationCheck {
    pub fn holds(&self) -> bool {
        !self.premise || self.conclusion
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolderReport {
    pub params: HolderParams,
    pub g_sup: f64,
    pub g_holder: f64,
    pub g_lp: f64,
    pub h_sup: f64,
    pub h_holder: f64,
    /// `‖G‖∞ ≤ ε ⇒ ‖H‖∞ ≤ (2+c)ε^{(α−γ)/(1+α)}` where `G' = H`.
    pub derivative: ImplicationCheck,
    /// `∫|G|^ℓ < ε ⇒ ‖G‖∞ < (1+c)ε^{(α−γ)/(1+ℓα)}`.
    pub integral: ImplicationCheck,
}

impl HolderReport {
    pub fn holds(&self) -> bool {
        self.derivative.holds() && self.integral.holds()
    }
}

/// Checks both Hölder transfer implications on sampled `G` and `H = G'`.
/// The constant `c` in each Hölder premise is the smallest one the grid
/// admits, so the premise reduces to the remaining hypothesis.
pub fn holder_transfer(g: &SampledProcess, h: &SampledProcess, params: HolderParams) -> Result<HolderReport> {
    let HolderParams { alpha, gamma, eps, ell } = params;
    if !(alpha > gamma && gamma > 0.0 && alpha <= 1.0) {
        return Err(invalid("need 0 < γ < α ≤ 1"));
    }
    if !(eps > 0.0 && ell >= 1.0) {
        return Err(invalid("need ε > 0 and ℓ ≥ 1"));
    }
    if g.times != h.times {
        return Err(invalid("G and H must share a grid"));
    }
    let (g_sup, h_sup) = (g.sup_norm(), h.sup_norm());
    let g_holder = g.holder_constant(alpha);
    let h_holder = h.holder_constant(alpha);
    let g_lp = g.lp_integral(ell);

    let c_h = h_holder * eps.powf(gamma);
    let b1 = (2.0 + c_h) * eps.powf((alpha - gamma) / (1.0 + alpha));
    let derivative = ImplicationCheck {
        name: "sup_to_derivative",
        c: c_h,
        premise: g_sup <= eps,
        lhs: h_sup,
        bound: b1,
        conclusion: h_sup <= b1,
    };
    let c_g = g_holder * eps.powf(gamma);
    let b2 = (1.0 + c_g) * eps.powf((alpha - gamma) / (1.0 + ell * alpha));
    let integral = ImplicationCheck {
        name: "lp_to_sup",
        c: c_g,
        premise: g_lp < eps,
        lhs: g_sup,
        bound: b2,
        conclusion: g_sup < b2,
    };
    Ok(HolderReport { params, g_sup, g_holder, g_lp, h_sup, h_holder, derivative, integral })
}
