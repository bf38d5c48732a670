//! Spec-driven dispatch of the experiment families.

use std::path::{Path, PathBuf};
use std::time::Instant;

use dicke_core::master::EvolveOptions;
use dicke_core::trajectories::{waiting_time_distribution, ChannelLabel};
use serde::Serialize;

use crate::config::{initial_state, ChannelSpec, ExperimentKind, ExperimentSpec};
use crate::criteria::{self, Outcome, CRITERIA};
use crate::error::{Result, RunError};
use crate::experiments::{
    angular, angular_table, coupling_scan, events_table, run_evolve, run_timescales, run_trajectories, summarize,
    time_grid, waiting_edges,
};
use crate::output::{num, Manifest, OutputDir, Table};
use crate::plot::{self, Figure};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    ValidationFailed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::ValidationFailed => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub status: Status,
    pub manifest: Manifest,
    pub outcomes: Vec<Outcome>,
}

/// Loads `path` and runs it, checking it describes `expected` when given.
pub fn run_file(path: &Path, expected: Option<ExperimentKind>, opts: &RunOptions) -> Result<RunReport> {
    let (spec, _) = ExperimentSpec::load(path)?;
    if let Some(kind) = expected {
        if spec.experiment != kind {
            return Err(RunError::spec(
                "experiment",
                format!("spec describes `{}`, subcommand is `{}`", spec.experiment.name(), kind.name()),
            ));
        }
    }
    run_spec(spec, opts)
}

/// Runs `spec` after applying command-line overrides. The effective spec is
/// archived as `spec.json`, so rerunning it reproduces every table.
pub fn run_spec(mut spec: ExperimentSpec, opts: &RunOptions) -> Result<RunReport> {
    let start = Instant::now();
    if let Some(seed) = opts.seed {
        spec.numerics.seed = seed;
    }
    if opts.threads.is_some() {
        spec.numerics.threads = opts.threads;
    }
    spec.validate()?;
    let root = opts
        .out
        .clone()
        .or_else(|| spec.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut out = OutputDir::create(&root)?;
    let archived = serde_json::to_string_pretty(&spec)? + "\n";
    out.write_bytes("spec.json", archived.as_bytes())?;

    let (figures, outcomes) = match spec.experiment {
        ExperimentKind::CouplingScan => (coupling(&spec, &mut out)?, Vec::new()),
        ExperimentKind::Evolve => (evolve(&spec, &mut out)?, Vec::new()),
        ExperimentKind::Trajectories => (trajectories(&spec, &mut out)?, Vec::new()),
        ExperimentKind::Timescales => (timescales(&spec, &mut out)?, Vec::new()),
        ExperimentKind::Validate => (Vec::new(), validate(&spec, &mut out)?),
    };
    if spec.output.plots.unwrap_or(true) && !figures.is_empty() {
        plot::emit_plot_data(&mut out, &figures)?;
    }
    let threads = spec.numerics.threads.unwrap_or_else(rayon::current_num_threads);
    let manifest = out.finish(
        spec.experiment.name(),
        &archived,
        spec.numerics.seed,
        threads,
        start.elapsed().as_secs_f64(),
    )?;
    let status = if outcomes.iter().all(|o| o.pass) {
        Status::Success
    } else {
        Status::ValidationFailed
    };
    Ok(RunReport {
        status,
        manifest,
        outcomes,
    })
}

fn coupling(spec: &ExperimentSpec, out: &mut OutputDir) -> Result<Vec<Figure>> {
    let n = &spec.numerics;
    let table = coupling_scan(&spec.coupling.params()?, n.xi_min, n.xi_max, n.n_points, &n.etas)?;
    out.write_table("coefficients.csv", &table)?;
    plot::coupling_figures(&table, &n.etas)
}

fn geometry(spec: &ExperimentSpec) -> Result<dicke_core::geometry::AtomConfig> {
    spec.geometry
        .as_ref()
        .ok_or_else(|| RunError::spec("geometry", "missing"))?
        .build(spec.coupling.lambda0_m)
}

#[derive(Serialize)]
struct EvolveSummary<'a> {
    method: &'a str,
    adaptive_steps: u64,
    max_trace_error: f64,
    min_eigenvalue: f64,
}

fn evolve(spec: &ExperimentSpec, out: &mut OutputDir) -> Result<Vec<Figure>> {
    let n = &spec.numerics;
    let cfg = geometry(spec)?;
    let params = spec.coupling.params()?;
    let m = dicke_core::coupling::build_coupling_matrices(&cfg, &params)?;
    let psi0 = initial_state(&n.initial_state, cfg.n_atoms())?;
    let opts = EvolveOptions {
        method: n.method.into(),
        rtol: n.rtol,
        atol: n.atol,
        ..EvolveOptions::default()
    };
    let res = run_evolve(&m, &psi0, &time_grid(n), &opts)?;
    out.write_table("populations.csv", &res.table)?;
    let method = format!("{:?}", res.result.method).to_lowercase();
    out.write_json(
        "summary.json",
        &EvolveSummary {
            method: &method,
            adaptive_steps: res.result.steps,
            max_trace_error: res.result.traces.iter().fold(0.0, |a, t| a.max((t - 1.0).abs())),
            min_eigenvalue: res.result.min_eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min),
        },
    )?;
    plot::evolve_figures(&res.table)
}

#[derive(Serialize)]
struct TrajectorySummary {
    with_dipole: crate::experiments::EnsembleSummary,
    without_dipole: Option<crate::experiments::EnsembleSummary>,
    photon_count_p_fewer: Option<f64>,
    photon_time_welch_p_greater: Option<f64>,
}

fn trajectories(spec: &ExperimentSpec, out: &mut OutputDir) -> Result<Vec<Figure>> {
    let n = &spec.numerics;
    let cfg = geometry(spec)?;
    let params = spec.coupling.params()?;
    let psi0 = initial_state(&n.initial_state, cfg.n_atoms())?;
    let res = run_trajectories(&cfg, &params, &psi0, &n.initial_state, n, n.seed, n.threads)?;
    out.write_table("events.csv", &events_table(&res.records, 0))?;
    if let Some(r) = &res.reference {
        out.write_table("events_without_dipole.csv", &events_table(r, 0))?;
    }

    let k = n.photon_index;
    let waits = |recs: &[dicke_core::trajectories::TrajectoryRecord]| -> Vec<f64> {
        recs.iter().filter_map(|r| r.waiting_time(k)).collect()
    };
    let w_with = waits(&res.records);
    let w_without = res.reference.as_deref().map(waits).unwrap_or_default();
    let edges = waiting_edges(&[&w_with, &w_without], n.histogram_bins);
    let mut header = vec!["t_mid_per_gamma", "t_lo_per_gamma", "t_hi_per_gamma", "w_with_dipole_per_gamma"];
    if res.reference.is_some() {
        header.push("w_without_dipole_per_gamma");
    }
    let mut wt = Table::new(&header);
    let hist_with = waiting_time_distribution(&res.records, k, edges.clone()).ok();
    let hist_without = res
        .reference
        .as_deref()
        .and_then(|r| waiting_time_distribution(r, k, edges.clone()).ok());
    let dens = |h: &Option<dicke_core::trajectories::WaitingTimeDistribution>, i: usize| {
        h.as_ref().map_or(0.0, |h| h.histogram.density(h.samples.len())[i])
    };
    for i in 0..edges.len() - 1 {
        let mut row = vec![
            num(0.5 * (edges[i] + edges[i + 1])),
            num(edges[i]),
            num(edges[i + 1]),
            num(dens(&hist_with, i)),
        ];
        if res.reference.is_some() {
            row.push(num(dens(&hist_without, i)));
        }
        wt.push(row);
    }
    out.write_table("waiting_times.csv", &wt)?;
    let mut figures = vec![plot::waiting_figure(&wt)?];

    let directed = n.channels == ChannelSpec::Directed
        && res.records.iter().flat_map(|r| &r.events).all(|e| matches!(e.channel, ChannelLabel::Angular { .. }));
    if directed {
        let a = angular(&res.records, n)?;
        let b = res.reference.as_deref().map(|r| angular(r, n)).transpose()?;
        let table = angular_table(&a, b.as_ref())?;
        out.write_table("angular.csv", &table)?;
        if b.is_some() {
            figures.push(plot::angular_figure(&table)?);
        }
    }

    let n_max = cfg.n_atoms();
    let with = summarize("with_dipole", &res.records, n_max);
    let without = res.reference.as_deref().map(|r| summarize("without_dipole", r, n_max));
    let (mut p_fewer, mut p_welch) = (None, None);
    if let Some(r) = &res.reference {
        let total = |x: &[dicke_core::trajectories::TrajectoryRecord]| x.iter().map(|t| t.events.len() as u64).sum::<u64>();
        p_fewer = Some(crate::stats::binomial_fewer(total(&res.records), total(r))?);
        let last = |x: &[dicke_core::trajectories::TrajectoryRecord]| {
            x.iter().filter_map(|t| t.photon_time(n_max)).collect::<Vec<f64>>()
        };
        p_welch = crate::stats::welch_t_test(&last(&res.records), &last(r)).ok().map(|w| w.p_greater);
    }
    out.write_json(
        "summary.json",
        &TrajectorySummary {
            with_dipole: with,
            without_dipole: without,
            photon_count_p_fewer: p_fewer,
            photon_time_welch_p_greater: p_welch,
        },
    )?;
    Ok(figures)
}

fn timescales(spec: &ExperimentSpec, out: &mut OutputDir) -> Result<Vec<Figure>> {
    let table = run_timescales(&spec.coupling.params()?, &spec.numerics)?;
    out.write_table("timescales.csv", &table)?;
    Ok(vec![plot::timescale_figure(&table)?])
}

fn validate(spec: &ExperimentSpec, out: &mut OutputDir) -> Result<Vec<Outcome>> {
    let ids = spec.numerics.criteria.clone().unwrap_or_else(|| CRITERIA.to_vec());
    let mut outcomes = Vec::new();
    for id in ids {
        let o = criteria::run(id, spec.numerics.seed, spec.numerics.threads)?;
        println!("{}", o.line());
        outcomes.push(o);
    }
    let mut t = Table::new(&["criterion", "name", "pass", "elapsed_s", "time_limit_s", "detail"]);
    for o in &outcomes {
        t.push(vec![
            o.id.to_string(),
            o.name.clone(),
            o.pass.to_string(),
            num(o.elapsed_s),
            num(o.time_limit_s),
            o.detail.clone(),
        ]);
    }
    out.write_table("criteria.csv", &t)?;
    out.write_json("criteria.json", &outcomes)?;
    Ok(outcomes)
}
