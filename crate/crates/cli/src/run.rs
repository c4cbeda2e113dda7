//! Experiment pipelines and artifact writing.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nslab_core::flows::{control_search, ControlOptions};
use nslab_core::lattice::{ball, is_generating, reachable_modes};
use nslab_core::malliavin::{bracket_decomposition, min_eigenvalue_tail};
use nslab_core::quadvar::{
    cascade_table, event_frequencies, omega_ab_union_bound, partition_scheme, write_event_csv, PartitionScheme,
    WienerEnsemble,
};
use nslab_core::sde::{simulate_with, GalerkinModel};
use nslab_core::{par, simulate, LabError, SpectralField};
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, Kind};

type Result<T> = std::result::Result<T, LabError>;

/// Output directory plus the list of files written so far.
pub struct Sink {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.into(), artifacts: Vec::new() })
    }

    fn open(&mut self, name: &str) -> Result<BufWriter<File>> {
        let f = File::create(self.dir.join(name))?;
        self.artifacts.push(name.into());
        Ok(BufWriter::new(f))
    }

    fn csv(&mut self, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
        Ok(csv::Writer::from_writer(self.open(name)?))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        std::io::Write::write_all(&mut w, b"\n")?;
        Ok(())
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.into());
        self.dir.join(name)
    }
}

fn csv_err(e: csv::Error) -> LabError {
    LabError::Io(e.into())
}

/// Runs the pipeline, then writes `manifest.json`. Returns the pipeline
/// error, if any, after the manifest records it.
pub fn run(config: &ExperimentConfig, raw: &serde_json::Value, sink: &mut Sink) -> std::result::Result<(), String> {
    let start = Instant::now();
    let kind = config.experiment.expect("resolved config");
    let outcome = match kind {
        Kind::Simulate => run_simulate(config, sink),
        Kind::Malliavin => run_malliavin(config, sink),
        Kind::Lattice => run_lattice(config, sink),
        Kind::Quadvar => run_quadvar(config, sink),
        Kind::Control => run_control(config, sink),
        Kind::Bracket => run_bracket(config, sink),
    };
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": kind,
        "seed": config.sim.seed,
        "config": raw,
        "resolved": config,
        "parallel": par::is_parallel(),
        "status": if outcome.is_ok() { "complete" } else { "partial" },
        "error": outcome.as_ref().err().map(|e| e.to_string()),
        "artifacts": sink.artifacts,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    sink.json("manifest.json", &manifest).map_err(|e| e.to_string())?;
    outcome.map_err(|e| e.to_string())
}

fn run_simulate(config: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let sim = &config.sim;
    let model = GalerkinModel::new(sim)?;
    let paths = par::map_indexed(config.analysis.n_paths, |p| simulate_with(&model, sim, p as u64));
    let mut coeffs = sink.csv("coefficients.csv")?;
    let mut header = vec!["path".to_string(), "t".to_string()];
    header.extend(model.basis().modes().iter().map(|m| format!("a[{},{}]", m.k1(), m.k2())));
    coeffs.write_record(&header).map_err(csv_err)?;
    for (p, traj) in paths.into_iter().enumerate() {
        let traj = traj?;
        traj.write_jsonl(sink.open(&format!("trajectory_{p}.jsonl"))?)?;
        traj.write_norms_csv(sink.open(&format!("norms_{p}.csv"))?)?;
        for (i, s) in traj.states().iter().enumerate() {
            let mut row = vec![p.to_string(), traj.time(i).to_string()];
            row.extend(s.iter().map(|c| c.to_string()));
            coeffs.write_record(&row).map_err(csv_err)?;
        }
    }
    coeffs.flush()?;
    Ok(())
}

fn run_malliavin(config: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let a = &config.analysis;
    let t = a.t.unwrap_or(config.sim.t_final);
    let report = min_eigenvalue_tail(&config.sim, t, &a.subspace, a.n_paths, &a.epsilons)?;
    report.write_paths_csv(sink.open("spectra.csv")?)?;
    report.write_tail_csv(sink.open("tail.csv")?)?;
    sink.json("malliavin.json", &json!({ "t": t, "slope": report.slope, "warnings": report.warnings }))
}

fn run_lattice(config: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let (g, radius) = (&config.sim.forcing, config.sim.radius);
    let verdict = is_generating(g);
    let reach = reachable_modes(g, radius, config.analysis.max_shells)?;
    let mut w = sink.csv("reachability.csv")?;
    w.write_record(["k1", "k2", "forced", "shell", "reached"]).map_err(csv_err)?;
    for k in ball(radius) {
        let shell = reach.shells.iter().position(|s| s.contains(&k)).map(|i| (i + 1).to_string());
        w.write_record([
            k.k1().to_string(),
            k.k2().to_string(),
            g.z_star().contains(&k).to_string(),
            shell.unwrap_or_default(),
            reach.reached.contains(&k).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    sink.json(
        "lattice.json",
        &json!({
            "radius": radius,
            "forcing": g,
            "is_generating": verdict.generating,
            "failures": verdict.failures.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
            "covers_ball": reach.covers_ball(radius),
            "saturated": reach.saturated,
            "shell_sizes": reach.shells.iter().map(|s| s.len()).collect::<Vec<_>>(),
            "reached": reach.reached,
        }),
    )
}

fn run_quadvar(config: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let a = &config.analysis;
    let schemes = a
        .deltas
        .iter()
        .map(|&d| partition_scheme(d, a.horizon))
        .collect::<Result<Vec<PartitionScheme>>>()?;
    let refs: Vec<&PartitionScheme> = schemes.iter().collect();
    let ens = WienerEnsemble::sample(WienerEnsemble::grid_for(&refs), a.n_channels, a.n_paths, config.sim.seed)?;
    let reports = schemes.iter().map(|s| event_frequencies(&ens, s)).collect::<Result<Vec<_>>>()?;
    write_event_csv(&reports, &sink.path("events.csv"))?;
    let mut w = sink.csv("schemes.csv")?;
    w.write_record(["delta_cap", "delta", "blocks", "union_bound_ab"]).map_err(csv_err)?;
    for s in &schemes {
        w.write_record([
            s.delta_cap.to_string(),
            s.delta.to_string(),
            s.m().to_string(),
            omega_ab_union_bound(s.delta_cap, s.horizon, a.n_channels).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    if let Some(eps) = a.cascade_epsilon {
        let mut w = sink.csv("cascade.csv")?;
        w.write_record(["level", "exponent", "epsilon", "delta_cap"]).map_err(csv_err)?;
        for r in cascade_table(eps, a.cascade_levels)? {
            w.write_record([r.level.to_string(), r.exponent.to_string(), r.epsilon.to_string(), r.delta_cap.to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn run_control(config: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let a = &config.analysis;
    let t = a.t.unwrap_or(config.sim.t_final);
    let options = ControlOptions {
        max_iterations: a.max_iterations,
        tolerance: a.tolerance,
        ..ControlOptions::default()
    };
    let r = control_search(&config.sim, &a.subspace, &a.target, a.t0, t, &options)?;
    let mut w = sink.csv("controls.csv")?;
    let channels = r.controls.first().map_or(0, Vec::len);
    let mut header = vec!["step".to_string()];
    header.extend((0..channels).map(|c| format!("h{c}")));
    w.write_record(&header).map_err(csv_err)?;
    for (n, h) in r.controls.iter().enumerate() {
        let mut row = vec![n.to_string()];
        row.extend(h.iter().map(|x| x.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    sink.json(
        "control.json",
        &json!({
            "s": a.t0,
            "t": t,
            "projection": a.subspace,
            "target": a.target,
            "projected": r.projected,
            "residual": r.residual,
            "iterations": r.iterations,
            "converged": r.converged,
            "endpoint": r.endpoint.to_mode_coeffs(),
        }),
    )
}

fn run_bracket(config: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let a = &config.analysis;
    let t = a.t.unwrap_or(config.sim.t_final);
    let traj = simulate(&config.sim)?;
    let phi = SpectralField::from_mode_coeffs(traj.basis(), &a.phi)?;
    let dec = bracket_decomposition(&traj, a.t0, t, &phi)?;
    let rec = dec.reconstruction();
    let pairing = dec.pairing_check(&traj);
    let mut w = sink.csv("pairings.csv")?;
    w.write_record(["identity", "cases", "fitted_constant", "residual_at_fit", "residual_at_pi_sq"])
        .map_err(csv_err)?;
    for p in &pairing.identities {
        w.write_record([
            p.name.clone(),
            p.cases.to_string(),
            p.fitted_constant.to_string(),
            p.residual_at_fit.to_string(),
            p.residual_at_pi_sq.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    sink.json(
        "bracket.json",
        &json!({
            "t0": a.t0,
            "t": t,
            "reconstruction": { "max_relative_error": rec.max_relative_error, "mean_relative_error": rec.mean_relative_error, "nodes": rec.nodes },
            "global_constant": pairing.global_constant,
            "constant_over_pi_sq": pairing.constant_over_pi_sq,
            "structure_holds": pairing.structure_holds,
            "constant_is_pi_sq": pairing.constant_is_pi_sq,
        }),
    )
}
