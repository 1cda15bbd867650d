//! Trajectory pools, ensemble statistics and report documents.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Engine, Mode, ResolvedModel, RunConfig};
use crate::accumulator::{Histogram, Recording, TrajectoryAccumulator};
use crate::cme::{stationary_fim, stationary_iaf, stationary_sensitivity, CmeOracle};
use crate::error::{Error, Result};
use crate::parrep::{run_parrep, CycleRecord, ParRepParams};
use crate::rng::{RngStream, StreamKey};
use crate::sensitivity::{
    accumulate_fim, combine_bounds, estimate_iaf, mean_var, Direction, FimEstimate, IafEstimate,
    SensitivityBoundReport, Z95,
};
use crate::ssa::run_ssa;

/// Outcome of one trajectory, complete or interrupted.
#[derive(Clone, Debug)]
pub struct TrajectoryResult {
    pub index: usize,
    pub accumulator: TrajectoryAccumulator,
    pub cycles: Vec<CycleRecord>,
    pub error: Option<Error>,
}

#[derive(Clone, Debug)]
pub struct Pool {
    pub engine: Engine,
    pub results: Vec<TrajectoryResult>,
    pub wall: f64,
}

impl Pool {
    pub fn completed(&self) -> Vec<&TrajectoryAccumulator> {
        self.results
            .iter()
            .filter(|r| r.error.is_none())
            .map(|r| &r.accumulator)
            .collect()
    }

    pub fn errors(&self) -> Vec<(usize, &Error)> {
        self.results
            .iter()
            .filter_map(|r| r.error.as_ref().map(|e| (r.index, e)))
            .collect()
    }
}

/// Everything a trajectory pool needs besides the model.
#[derive(Clone, Debug)]
pub struct PoolSpec {
    pub engine: Engine,
    pub params: Option<ParRepParams>,
    pub t_end: f64,
    pub seed: u64,
    pub n_traj: usize,
    pub recording: Recording,
}

/// Runs `n_traj` independent trajectories on the current rayon pool. Results are
/// ordered by trajectory index and do not depend on the number of workers.
pub fn run_pool(model: &ResolvedModel, spec: &PoolSpec) -> Pool {
    let start = Instant::now();
    let results = (0..spec.n_traj)
        .into_par_iter()
        .map(|i| run_one(model, spec, i))
        .collect();
    Pool {
        engine: spec.engine,
        results,
        wall: start.elapsed().as_secs_f64(),
    }
}

fn run_one(model: &ResolvedModel, spec: &PoolSpec, index: usize) -> TrajectoryResult {
    let net = &model.network;
    match spec.engine {
        Engine::Ssa => {
            let mut rng = RngStream::new(spec.seed, StreamKey::serial(index as u32, 0));
            match run_ssa(net, &model.initial, spec.t_end, &spec.recording, &mut rng) {
                Ok(acc) => TrajectoryResult {
                    index,
                    accumulator: acc,
                    cycles: Vec::new(),
                    error: None,
                },
                Err(e) => TrajectoryResult {
                    index,
                    accumulator: e.partial,
                    cycles: Vec::new(),
                    error: Some(e.error),
                },
            }
        }
        Engine::Parrep => {
            let params = spec.params.as_ref().expect("ParRep pool needs parameters");
            let params = ParRepParams {
                t_end: spec.t_end,
                seed: spec.seed,
                ..params.clone()
            };
            match run_parrep(
                net,
                &model.initial,
                &model.regions,
                &params,
                &spec.recording,
                index as u32,
            ) {
                Ok(r) => TrajectoryResult {
                    index,
                    accumulator: r.accumulator,
                    cycles: r.cycles,
                    error: None,
                },
                Err(e) => TrajectoryResult {
                    index,
                    accumulator: e.partial.accumulator,
                    cycles: e.partial.cycles,
                    error: Some(e.error),
                },
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableSummary {
    pub label: String,
    pub mean: f64,
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParRepStats {
    pub cycles: usize,
    pub parallel_phases: usize,
    pub mean_parallel_rounds: f64,
    pub dephasing_restarts: u64,
    /// Fraction of simulated time produced by parallel phases.
    pub parallel_time_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub engine: Engine,
    pub n_traj: usize,
    pub completed: usize,
    pub sampled_time: f64,
    pub observables: Vec<ObservableSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parrep: Option<ParRepStats>,
}

/// Across-trajectory mean of each time average with a 95% normal half-width.
pub fn summarize(pool: &Pool) -> EnsembleSummary {
    let done = pool.completed();
    let n_obs = pool
        .results
        .first()
        .map_or(0, |r| r.accumulator.integrals.len());
    let observables = (0..n_obs)
        .map(|i| {
            let avgs: Vec<f64> = done.iter().map(|a| a.average(i)).collect();
            let (mean, var) = mean_var(&avgs);
            let half_width = if avgs.len() > 1 {
                Z95 * (var / avgs.len() as f64).sqrt()
            } else {
                f64::NAN
            };
            ObservableSummary {
                label: pool.results[0].accumulator.observables()[i].label.clone(),
                mean,
                half_width,
            }
        })
        .collect();
    let parrep = (pool.engine == Engine::Parrep).then(|| {
        let cycles: Vec<&CycleRecord> = pool.results.iter().flat_map(|r| &r.cycles).collect();
        let parallel: Vec<&&CycleRecord> =
            cycles.iter().filter(|c| c.parallel_rounds > 0).collect();
        let par_time: f64 = cycles.iter().map(|c| c.parallel_time).sum();
        let total: f64 = pool.results.iter().map(|r| r.accumulator.clock).sum();
        ParRepStats {
            cycles: cycles.len(),
            parallel_phases: parallel.len(),
            mean_parallel_rounds: if parallel.is_empty() {
                0.0
            } else {
                parallel
                    .iter()
                    .map(|c| c.parallel_rounds as f64)
                    .sum::<f64>()
                    / parallel.len() as f64
            },
            dephasing_restarts: cycles.iter().map(|c| c.dephasing_restarts).sum(),
            parallel_time_fraction: if total > 0.0 { par_time / total } else { 0.0 },
        }
    });
    EnsembleSummary {
        engine: pool.engine,
        n_traj: pool.results.len(),
        completed: done.len(),
        sampled_time: done.iter().map(|a| a.sampled_time).sum(),
        observables,
        parrep,
    }
}

/// Pooled histogram of the completed trajectories.
pub fn pooled_histogram(pool: &Pool) -> Option<Histogram> {
    let mut done = pool.completed().into_iter();
    let mut h = done.next()?.histogram.clone()?;
    for acc in done {
        let other = acc.histogram.as_ref()?;
        for (a, b) in h.mass.iter_mut().zip(&other.mass) {
            *a += b;
        }
        h.underflow += other.underflow;
        h.overflow += other.overflow;
    }
    Some(h)
}

/// CME marginal aggregated onto the histogram's bins.
pub fn binned_marginal(oracle: &CmeOracle, h: &Histogram) -> Vec<f64> {
    let b = &h.binning;
    let mut out = vec![0.0; b.count];
    for (x, p) in oracle.states().iter().zip(oracle.pi()) {
        let v = x[b.species] - b.lo;
        if v >= 0 {
            if let Some(m) = out.get_mut((v / b.width) as usize) {
                *m += p;
            }
        }
    }
    out
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[derive(Clone, Debug, Serialize)]
pub struct SensitivityOutput {
    pub fim: FimEstimate,
    pub confidence: f64,
    pub iaf: Vec<IafEstimate>,
    pub bounds: SensitivityBoundReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cme: Option<CmeSensitivity>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CmeSensitivity {
    pub fim: Vec<Vec<f64>>,
    pub iaf: Vec<(String, f64)>,
    /// Signed `∂π(f)/∂c_k` per observable.
    pub sensitivities: Vec<(String, Vec<f64>)>,
}

pub fn sensitivity_analysis(
    model: &ResolvedModel,
    pool: &Pool,
    window: f64,
    oracle: Option<&CmeOracle>,
) -> Result<SensitivityOutput> {
    let done = pool.completed();
    let names = model.network.params().names().to_vec();
    let fim = accumulate_fim(&names, &done)?;
    let iaf = model
        .observables
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let ys: Vec<f64> = done.iter().map(|a| a.integrals[i]).collect();
            estimate_iaf(&o.label, &ys, window)
        })
        .collect::<Result<Vec<_>>>()?;
    let bounds = combine_bounds(&fim, &iaf, &Direction::canonical(&names))?;
    let cme = match oracle {
        Some(o) => {
            let net = &model.network;
            let mut sensitivities = Vec::new();
            let mut iafs = Vec::new();
            for obs in &model.observables {
                sensitivities.push((
                    obs.label.clone(),
                    stationary_sensitivity(net, &o.generator, &o.solution, |x| obs.eval(x))?,
                ));
                iafs.push((
                    obs.label.clone(),
                    stationary_iaf(&o.generator, &o.solution, |x| obs.eval(x))?,
                ));
            }
            Some(CmeSensitivity {
                fim: stationary_fim(net, &o.generator, &o.solution),
                iaf: iafs,
                sensitivities,
            })
        }
        None => None,
    };
    Ok(SensitivityOutput {
        fim,
        confidence: 0.95,
        iaf,
        bounds,
        cme,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SpeedupRecord {
    pub serial_wall: f64,
    pub parrep_wall: f64,
    pub replicas: usize,
    pub decorrelation: u64,
    pub dephasing: u64,
    pub speedup: f64,
    pub n_traj: usize,
    pub t_end: f64,
    pub threads: usize,
    pub wall_decorrelation: f64,
    pub wall_dephasing: f64,
    pub wall_parallel: f64,
    /// Simulated time per wall second.
    pub serial_throughput: f64,
    pub parrep_throughput: f64,
}

pub fn speedup_record(
    serial: &Pool,
    parrep: &Pool,
    params: &ParRepParams,
    t_end: f64,
) -> SpeedupRecord {
    let cycles = parrep.results.iter().flat_map(|r| &r.cycles);
    let (mut d, mut p, mut q) = (0.0, 0.0, 0.0);
    for c in cycles {
        d += c.wall_decorrelation;
        p += c.wall_dephasing;
        q += c.wall_parallel;
    }
    let sim = |pool: &Pool| {
        pool.results
            .iter()
            .map(|r| r.accumulator.clock)
            .sum::<f64>()
    };
    SpeedupRecord {
        serial_wall: serial.wall,
        parrep_wall: parrep.wall,
        replicas: params.replicas,
        decorrelation: params.decorrelation,
        dephasing: params.dephasing,
        speedup: serial.wall / parrep.wall,
        n_traj: parrep.results.len(),
        t_end,
        threads: rayon::current_num_threads(),
        wall_decorrelation: d,
        wall_dephasing: p,
        wall_parallel: q,
        serial_throughput: sim(serial) / serial.wall,
        parrep_throughput: sim(parrep) / parrep.wall,
    }
}

/// Named output documents of one experiment.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub files: Vec<(String, String)>,
    /// First engine error, if any trajectory was interrupted.
    pub error: Option<Error>,
}

impl Report {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_str())
    }

    pub fn push(&mut self, name: &str, content: String) {
        self.files.push((name.to_string(), content));
    }

    pub fn write(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, content) in &self.files {
            std::fs::write(dir.join(name), content)?;
        }
        Ok(())
    }
}

pub fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn histogram_csv(h: &Histogram, cme: Option<&[f64]>) -> String {
    let norm = h.normalized();
    let mut s = String::from(if cme.is_some() {
        "bin_lower,bin_upper,fraction,cme\n"
    } else {
        "bin_lower,bin_upper,fraction\n"
    });
    for (i, f) in norm.iter().enumerate() {
        let lo = h.binning.bin_lower(i);
        let hi = lo + h.binning.width - 1;
        match cme {
            Some(c) => writeln!(s, "{lo},{hi},{f},{}", c[i]),
            None => writeln!(s, "{lo},{hi},{f}"),
        }
        .unwrap();
    }
    s
}

pub fn cycles_csv(pool: &Pool) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "trajectory",
        "cycle",
        "region",
        "decorrelation_jumps",
        "decorrelation_time",
        "region_changes",
        "reached_qsd",
        "dephasing_restarts",
        "parallel_rounds",
        "exit_replica",
        "parallel_time",
        "wall_decorrelation",
        "wall_dephasing",
        "wall_parallel",
    ])
    .unwrap();
    for r in &pool.results {
        for c in &r.cycles {
            w.write_record([
                r.index.to_string(),
                c.cycle.to_string(),
                c.region.clone(),
                c.decorrelation_jumps.to_string(),
                c.decorrelation_time.to_string(),
                c.region_changes.to_string(),
                c.reached_qsd.to_string(),
                c.dephasing_restarts.to_string(),
                c.parallel_rounds.to_string(),
                c.exit_replica.to_string(),
                c.parallel_time.to_string(),
                c.wall_decorrelation.to_string(),
                c.wall_dephasing.to_string(),
                c.wall_parallel.to_string(),
            ])
            .unwrap();
        }
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn fim_csv(s: &SensitivityOutput) -> String {
    let f = &s.fim;
    let mut out = String::from("element,parameter,estimate,half_width");
    if s.cme.is_some() {
        out.push_str(",cme");
    }
    out.push('\n');
    for k in 0..f.dim() {
        write!(
            out,
            "({},{}),{},{:.6e},{:.6e}",
            k + 1,
            k + 1,
            f.names[k],
            f.matrix[k][k],
            f.half_widths[k][k]
        )
        .unwrap();
        if let Some(c) = &s.cme {
            write!(out, ",{:.6e}", c.fim[k][k]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn bounds_csv(s: &SensitivityOutput) -> String {
    let mut out = String::from("observable,parameter,iaf,fim_diagonal,bound");
    if s.cme.is_some() {
        out.push_str(",cme_sensitivity");
    }
    out.push('\n');
    let names = &s.fim.names;
    for e in &s.bounds.entries {
        write!(
            out,
            "{},{},{:.6e},{:.6e},{:.6e}",
            e.observable, e.direction, e.iaf, e.quadratic_form, e.bound
        )
        .unwrap();
        if let Some(c) = &s.cme {
            let k = names.iter().position(|n| *n == e.direction).unwrap();
            let sens = c
                .sensitivities
                .iter()
                .find(|(l, _)| *l == e.observable)
                .map(|(_, v)| v[k])
                .unwrap();
            write!(out, ",{sens:.6e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn iaf_csv(s: &SensitivityOutput) -> String {
    let mut out = String::from("observable,iaf,window,n_traj\n");
    for i in &s.iaf {
        writeln!(out, "{},{:.6e},{},{}", i.label, i.value, i.window, i.n_traj).unwrap();
    }
    out
}

fn recording(cfg: &RunConfig, model: &ResolvedModel, fim: bool) -> Recording {
    Recording {
        observables: model.observables.clone(),
        binning: model.binning.clone(),
        fim,
        record_from: cfg.burn_in,
    }
}

pub fn pool_spec(cfg: &RunConfig, model: &ResolvedModel, engine: Engine, fim: bool) -> PoolSpec {
    PoolSpec {
        engine,
        params: cfg.parrep_params(),
        t_end: cfg.t_end.unwrap_or(0.0),
        seed: cfg.seed,
        n_traj: cfg.n_traj,
        recording: recording(cfg, model, fim),
    }
}

fn config_header(cfg: &RunConfig, model: &ResolvedModel, header: Option<&str>) -> Value {
    let mut v = json!({
        "model": model.name,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "n_traj": cfg.n_traj,
        "burn_in": cfg.burn_in,
        "initial_state": model.initial.0,
        "regions": model.regions,
    });
    if let Some(h) = header {
        v["header"] = json!(h);
    }
    if let Some(t) = cfg.t_end {
        v["t_end"] = json!(t);
    }
    if cfg.uses_parrep() || cfg.mode == Mode::Parrep {
        v["parrep"] = json!(cfg.parrep);
    }
    if cfg.mode == Mode::Sensitivity {
        v["engine"] = json!(cfg.engine);
    }
    v
}

fn errors_json(pool: &Pool) -> Value {
    Value::Array(
        pool.errors()
            .into_iter()
            .map(|(i, e)| json!({"trajectory": i, "class": e.class(), "message": e.to_string()}))
            .collect(),
    )
}

/// Runs one experiment described by `cfg` and renders its documents.
///
/// `summary.json` never contains wall-clock quantities, so it is byte-identical
/// for a fixed seed regardless of the worker count.
pub fn run_experiment(cfg: &RunConfig, header: Option<&str>) -> Result<Report> {
    let model = cfg.resolve()?;
    let mut summary = config_header(cfg, &model, header);
    let mut report = Report::default();
    let oracle = match &model.state_box {
        Some(b) => Some(CmeOracle::new(&model.network, b)?),
        None => None,
    };
    if let Some(o) = &oracle {
        o.generator.index_of(&model.initial)?;
        summary["cme"] = json!({
            "states": o.states().len(),
            "residual": o.solution.residual,
            "boundary_mass": o.boundary_mass(),
            "observables": model.observables.iter().map(|obs| json!({
                "label": obs.label,
                "mean": crate::cme::stationary_moments(&o.generator, &o.solution, |x| obs.eval(x)),
            })).collect::<Vec<_>>(),
        });
    }

    match cfg.mode {
        Mode::Cme => {
            let o = oracle.as_ref().expect("validated");
            let mut s = String::from("state,probability\n");
            for (x, p) in o.states().iter().zip(o.pi()) {
                let cells: Vec<String> = x.iter().map(|v| v.to_string()).collect();
                writeln!(s, "\"{}\",{p:e}", cells.join(" ")).unwrap();
            }
            report.push("cme.csv", s);
            let net = &model.network;
            let sens: Vec<Value> = model
                .observables
                .iter()
                .map(|obs| {
                    stationary_sensitivity(net, &o.generator, &o.solution, |x| obs.eval(x))
                        .map(|v| json!({"label": obs.label, "sensitivity": v}))
                })
                .collect::<Result<_>>()?;
            summary["cme"]["parameters"] = json!(net.params().names());
            summary["cme"]["sensitivities"] = Value::Array(sens);
        }
        Mode::Ssa | Mode::Parrep | Mode::Sensitivity => {
            let engine = match cfg.mode {
                Mode::Ssa => Engine::Ssa,
                Mode::Parrep => Engine::Parrep,
                _ => cfg.engine,
            };
            let fim = cfg.mode == Mode::Sensitivity;
            let pool = run_pool(&model, &pool_spec(cfg, &model, engine, fim));
            let ens = summarize(&pool);
            summary["results"] = json!(ens);
            summary["errors"] = errors_json(&pool);
            summary["partial"] = json!(!pool.errors().is_empty());
            report.error = pool.errors().first().map(|(_, e)| (*e).clone());
            if let Some(h) = pooled_histogram(&pool) {
                let cme = oracle.as_ref().map(|o| binned_marginal(o, &h));
                if let Some(c) = &cme {
                    summary["histogram_tv_to_cme"] = json!(total_variation(&h.normalized(), c));
                }
                report.push("histogram.csv", histogram_csv(&h, cme.as_deref()));
            }
            if oracle.is_some() {
                for (i, obs) in ens.observables.iter().enumerate() {
                    let exact = summary["cme"]["observables"][i]["mean"].as_f64().unwrap();
                    summary["cme"]["observables"][i]["relative_error"] =
                        json!((obs.mean - exact).abs() / exact.abs());
                }
            }
            if engine == Engine::Parrep {
                report.push("cycles.csv", cycles_csv(&pool));
            }
            if fim && !pool.completed().is_empty() {
                let s = sensitivity_analysis(&model, &pool, cfg.window(), oracle.as_ref())?;
                report.push("sensitivity.json", json_text(&json!(s)));
                report.push("fim.csv", fim_csv(&s));
                report.push("iaf.csv", iaf_csv(&s));
                report.push("bounds.csv", bounds_csv(&s));
            }
            if cfg.compare_ssa && engine == Engine::Parrep {
                let serial = run_pool(&model, &pool_spec(cfg, &model, Engine::Ssa, fim));
                summary["ssa_results"] = json!(summarize(&serial));
                let rec = speedup_record(
                    &serial,
                    &pool,
                    &cfg.parrep_params().unwrap(),
                    cfg.t_end.unwrap(),
                );
                report.push("speedup.json", json_text(&json!(rec)));
            }
        }
        Mode::Reproduce => unreachable!("reproduce targets are expanded before run_experiment"),
    }
    report
        .files
        .insert(0, ("summary.json".into(), json_text(&summary)));
    Ok(report)
}
