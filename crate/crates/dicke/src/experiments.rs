//! The experiment families behind the CLI subcommands.

use std::f64::consts::PI;

use dicke_core::analysis::{mixing_commutator_norm, ratio_scan, MixingVariant, ScanOptions, TDickeOptions, TimescaleRow};
use dicke_core::coupling::{
    build_coupling_matrices, delta_par_reg, delta_par_unreg, delta_perp_reg, delta_perp_unreg, gamma_reg, gamma_unreg,
    CouplingMatrices, CouplingMode, CouplingParams, DecayModel,
};
use dicke_core::geometry::{linear_chain, AtomConfig};
use dicke_core::master::{evolve, linear_times, log_times, populations, DensityMatrix, EvolutionResult, EvolveOptions};
use dicke_core::operators::{build_h_between_jumps, dicke_basis_three, PureState};
use dicke_core::trajectories::{
    angular_distribution, directed_jump_ops, source_mode_jumps, AngularBins, AngularDistribution, ChannelLabel,
    JumpChannel, TrajectoryRecord, TrajectorySimulator,
};
use nalgebra::Vector3;
use serde::Serialize;

use crate::config::{ChannelSpec, NumericsSpec, TimeGrid};
use crate::ensemble::run_streams;
use crate::error::{Result, RunError};
use crate::output::{num, Table};
use crate::stats::mean_and_se;

/// All coefficients at one `(xi, eta)`, shifts in units of `E0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientRow {
    pub xi: f64,
    pub eta: f64,
    pub gamma_reg: f64,
    pub gamma_unreg: f64,
    pub delta_perp_reg: f64,
    pub delta_par_reg: f64,
    pub delta_perp_unreg: f64,
    pub delta_par_unreg: f64,
}

impl CoefficientRow {
    pub fn sum_reg(&self) -> f64 {
        self.delta_perp_reg + self.delta_par_reg
    }

    pub fn sum_unreg(&self) -> f64 {
        self.delta_perp_unreg + self.delta_par_unreg
    }
}

/// Coefficients in rate units (`gamma = params.gamma`).
pub fn coefficient_row(xi: f64, eta: f64, params: &CouplingParams) -> Result<CoefficientRow> {
    Ok(CoefficientRow {
        xi,
        eta,
        gamma_reg: gamma_reg(xi, eta, params)?,
        gamma_unreg: gamma_unreg(xi, eta, params)?,
        delta_perp_reg: delta_perp_reg(xi, eta, params)?,
        delta_par_reg: delta_par_reg(xi, eta, params)?,
        delta_perp_unreg: delta_perp_unreg(xi, eta, params)?,
        delta_par_unreg: delta_par_unreg(xi, eta, params)?,
    })
}

pub fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.log10(), b.log10());
    (0..n)
        .map(|k| 10f64.powf(la + (lb - la) * k as f64 / (n.max(2) - 1) as f64))
        .collect()
}

/// Coefficient curves for every orientation in `etas`.
pub fn coupling_scan(params: &CouplingParams, xi_min: f64, xi_max: f64, n_points: usize, etas: &[f64]) -> Result<Table> {
    let mut t = Table::new(&[
        "xi",
        "eta",
        "gamma_reg_per_gamma",
        "gamma_unreg_per_gamma",
        "delta_perp_reg_over_E0",
        "delta_par_reg_over_E0",
        "delta_par_reg_scaled_1e4",
        "sum_reg_over_E0",
        "delta_perp_unreg_over_E0",
        "delta_par_unreg_over_E0",
        "sum_unreg_over_E0",
        "sign_change_reg",
        "sign_change_unreg",
    ]);
    let e0 = params.e0_rate();
    let g = params.gamma;
    for &eta in etas {
        let mut prev: Option<CoefficientRow> = None;
        for xi in log_space(xi_min, xi_max, n_points) {
            let r = coefficient_row(xi, eta, params)?;
            let flip = |a: f64, b: Option<f64>| match b {
                Some(b) if a.signum() != b.signum() => "1",
                _ => "0",
            };
            t.push(vec![
                num(xi),
                num(eta),
                num(r.gamma_reg / g),
                num(r.gamma_unreg / g),
                num(r.delta_perp_reg / e0),
                num(r.delta_par_reg / e0),
                num(1e4 * r.delta_par_reg / e0),
                num(r.sum_reg() / e0),
                num(r.delta_perp_unreg / e0),
                num(r.delta_par_unreg / e0),
                num(r.sum_unreg() / e0),
                flip(r.sum_reg(), prev.map(|p| p.sum_reg())).into(),
                flip(r.sum_unreg(), prev.map(|p| p.sum_unreg())).into(),
            ]);
            prev = Some(r);
        }
    }
    Ok(t)
}

/// Three-atom chain of the population-mixing study: `xi = 0.005`, axis along
/// the dipole, near-Dicke shifts.
pub fn mixing_chain(params: &CouplingParams) -> Result<(AtomConfig, CouplingMatrices)> {
    let cfg = linear_chain(3, 0.005, true)?;
    let m = build_coupling_matrices(&cfg, &params.with_mode(CouplingMode::DickeExpansion))?;
    Ok((cfg, m))
}

/// Five-atom chain with `r = 1e-10 m`, perpendicular to the dipole, with
/// regularized decay. `with_dipole` adds the regularized shifts.
pub fn five_atom_chain(params: &CouplingParams, with_dipole: bool, lambda0_m: f64) -> Result<(AtomConfig, CouplingMatrices)> {
    let xi = 2.0 * PI * 1e-10 / lambda0_m;
    let cfg = linear_chain(5, xi, false)?;
    let mode = if with_dipole {
        CouplingMode::Regularized
    } else {
        CouplingMode::None
    };
    let p = params.with_mode(mode).with_decay(DecayModel::Regularized);
    let m = build_coupling_matrices(&cfg, &p)?;
    Ok((cfg, m))
}

pub fn time_grid(n: &NumericsSpec) -> Vec<f64> {
    match n.time_grid {
        TimeGrid::Log => log_times(n.t_min, n.t_max, n.n_times),
        TimeGrid::Linear => linear_times(n.t_max, n.n_times),
    }
}

/// Named observables reported for an `n_atoms` system.
pub fn observables(n_atoms: usize) -> Result<Vec<(String, PureState)>> {
    let mut out = Vec::new();
    if n_atoms == 3 {
        let (b, c, d) = dicke_basis_three();
        out.push(("P_b".to_string(), b));
        out.push(("P_c".to_string(), c));
        out.push(("P_d".to_string(), d));
    }
    for k in 0..=n_atoms {
        out.push((format!("P_dicke_{k}"), PureState::dicke(n_atoms, k)?));
    }
    Ok(out)
}

pub struct EvolveOutput {
    pub result: EvolutionResult,
    pub table: Table,
}

pub fn run_evolve(matrices: &CouplingMatrices, psi0: &PureState, times: &[f64], opts: &EvolveOptions) -> Result<EvolveOutput> {
    let n = matrices.n_atoms();
    let obs = observables(n)?;
    let states: Vec<PureState> = obs.iter().map(|(_, s)| s.clone()).collect();
    let rho0 = DensityMatrix::from_pure(psi0);
    let result = evolve(&rho0, matrices, times, opts)?;
    let pops = populations(&result, &states)?;
    let mut header: Vec<String> = vec!["t_per_gamma".into(), "trace".into(), "min_eigenvalue".into()];
    header.extend(obs.iter().map(|(name, _)| name.clone()));
    header.extend((0..=n).map(|k| format!("P_sector_{k}")));
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for (i, t) in result.times.iter().enumerate() {
        let mut row = vec![num(*t), num(result.traces[i]), num(result.min_eigenvalues[i])];
        row.extend(pops.iter().map(|p| num(p[i])));
        row.extend((0..=n).map(|k| num(result.states[i].sector_population(k as u32))));
        table.push(row);
    }
    Ok(EvolveOutput { result, table })
}

/// Jump channels of the requested kind.
pub fn channels_for(kind: ChannelSpec, config: &AtomConfig, matrices: &CouplingMatrices, params: &CouplingParams, bins: AngularBins) -> Result<Vec<JumpChannel>> {
    Ok(match kind {
        ChannelSpec::Source => source_mode_jumps(matrices)?,
        ChannelSpec::Directed => directed_jump_ops(config, bins, params.gamma_tilde(), Vector3::x())?.channels,
    })
}

pub fn simulator(matrices: &CouplingMatrices, channels: Vec<JumpChannel>, t_max: f64) -> Result<TrajectorySimulator> {
    let hb = build_h_between_jumps(matrices)?;
    Ok(TrajectorySimulator::new(&hb, channels, t_max)?)
}

pub fn events_table(records: &[TrajectoryRecord], offset: usize) -> Table {
    let mut t = Table::new(&["traj_id", "jump_index", "time", "theta_bin", "phi_bin", "source_mode"]);
    for (i, r) in records.iter().enumerate() {
        for (j, e) in r.events.iter().enumerate() {
            let (th, ph, src) = match e.channel {
                ChannelLabel::Angular { theta, phi } => (theta.to_string(), phi.to_string(), String::new()),
                ChannelLabel::Source(k) => (String::new(), String::new(), k.to_string()),
            };
            t.push(vec![(i + offset).to_string(), (j + 1).to_string(), num(e.time), th, ph, src]);
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhotonTime {
    pub photon: usize,
    pub n_records: usize,
    pub mean_time: f64,
    pub std_err: f64,
    pub mean_waiting_time: f64,
    pub waiting_std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub label: String,
    pub n_traj: usize,
    pub total_photons: usize,
    pub mean_photon_count: f64,
    pub photon_times: Vec<PhotonTime>,
}

pub fn summarize(label: &str, records: &[TrajectoryRecord], max_photons: usize) -> EnsembleSummary {
    let total: usize = records.iter().map(|r| r.events.len()).sum();
    let photon_times = (1..=max_photons)
        .map(|k| {
            let times: Vec<f64> = records.iter().filter_map(|r| r.photon_time(k)).collect();
            let waits: Vec<f64> = records.iter().filter_map(|r| r.waiting_time(k)).collect();
            let (m, se) = mean_and_se(&times);
            let (mw, sew) = mean_and_se(&waits);
            PhotonTime {
                photon: k,
                n_records: times.len(),
                mean_time: m,
                std_err: se,
                mean_waiting_time: mw,
                waiting_std_err: sew,
            }
        })
        .collect();
    EnsembleSummary {
        label: label.into(),
        n_traj: records.len(),
        total_photons: total,
        mean_photon_count: total as f64 / records.len().max(1) as f64,
        photon_times,
    }
}

pub fn angular_table(with: &AngularDistribution, without: Option<&AngularDistribution>) -> Result<Table> {
    let mut t = Table::new(&["theta", "cos_lo", "cos_hi", "counts", "sigma_per_traj_sr", "counts_reference", "sigma_reference", "sigma_prime"]);
    let sigma = with.sigma();
    let reference = without.map(|w| w.sigma());
    let diff = match without {
        Some(w) => Some(dicke_core::trajectories::angular_difference(w, with)?),
        None => None,
    };
    for (i, th) in with.theta_centers().iter().enumerate() {
        t.push(vec![
            num(*th),
            num(with.cos_edges[i]),
            num(with.cos_edges[i + 1]),
            with.counts[i].to_string(),
            num(sigma[i]),
            without.map_or(String::new(), |w| w.counts[i].to_string()),
            reference.as_ref().map_or(String::new(), |r| num(r[i])),
            diff.as_ref().map_or(String::new(), |d| num(d[i])),
        ]);
    }
    Ok(t)
}

/// Histogram of waiting times for a photon index on common edges.
pub fn waiting_edges(samples: &[&[f64]], bins: usize) -> Vec<f64> {
    let hi = samples
        .iter()
        .flat_map(|s| s.iter())
        .fold(0.0f64, |a, &b| a.max(b))
        .max(1e-12);
    (0..=bins).map(|k| hi * 1.000001 * k as f64 / bins as f64).collect()
}

pub struct TrajectoryOutput {
    pub records: Vec<TrajectoryRecord>,
    pub reference: Option<Vec<TrajectoryRecord>>,
}

/// Ensemble over `config`; with `compare_without_dipole` a second,
/// independent ensemble with shifts switched off is drawn from streams
/// `n_traj..2 n_traj` of the same seed.
pub fn run_trajectories(
    config: &AtomConfig,
    params: &CouplingParams,
    psi0: &PureState,
    label: &str,
    n: &NumericsSpec,
    seed: u64,
    threads: Option<usize>,
) -> Result<TrajectoryOutput> {
    let bins = AngularBins {
        n_theta: n.n_theta,
        n_phi: n.n_phi,
    };
    let build = |p: &CouplingParams, first: u64| -> Result<Vec<TrajectoryRecord>> {
        let m = build_coupling_matrices(config, p)?;
        let ch = channels_for(n.channels, config, &m, p, bins)?;
        let sim = simulator(&m, ch, n.t_max)?;
        run_streams(&sim, psi0, label, seed, first..first + n.n_traj as u64, threads)
    };
    if n.n_traj == 0 {
        return Err(RunError::spec("numerics.n_traj", "must be at least 1"));
    }
    let records = build(params, 0)?;
    let reference = if n.compare_without_dipole {
        let p = params.with_mode(CouplingMode::None).with_decay(params.decay_model());
        Some(build(&p, n.n_traj as u64)?)
    } else {
        None
    };
    Ok(TrajectoryOutput { records, reference })
}

pub fn angular(records: &[TrajectoryRecord], n: &NumericsSpec) -> Result<AngularDistribution> {
    Ok(angular_distribution(
        records,
        AngularBins {
            n_theta: n.n_theta,
            n_phi: n.n_phi,
        },
    )?)
}

pub fn timescale_table(rows: &[TimescaleRow], literal: &[TimescaleRow], commutators: &[Option<f64>]) -> Table {
    let mut t = Table::new(&[
        "n_atoms",
        "spacing_lambda0",
        "xi",
        "t_dicke",
        "t_rate",
        "ratio",
        "min_gamma_ratio",
        "validity_flag",
        "t_dicke_literal",
        "is_bound",
        "commutator_norm",
    ]);
    for ((r, l), c) in rows.iter().zip(literal).zip(commutators) {
        t.push(vec![
            r.n_atoms.to_string(),
            num(r.spacing_lambda0),
            num(r.xi),
            num(r.t_dicke),
            num(r.t_rate),
            num(r.ratio),
            num(r.min_gamma_ratio),
            r.validity.as_str().into(),
            num(l.t_dicke),
            r.is_bound.to_string(),
            c.map_or(String::new(), num),
        ]);
    }
    t
}

/// Scan rows for the configured variant plus the literal variant and the
/// commutator diagnostic (up to eight atoms).
pub fn run_timescales(params: &CouplingParams, n: &NumericsSpec) -> Result<Table> {
    let ns: Vec<usize> = (n.n_min..=n.n_max).collect();
    let opts = ScanOptions {
        t_dicke: TDickeOptions {
            variant: n.t_dicke_variant.into(),
            sector: n.sector,
        },
        axis_parallel: n.axis_parallel_to_dipole,
    };
    let literal = ScanOptions {
        t_dicke: TDickeOptions {
            variant: MixingVariant::Literal,
            sector: n.sector,
        },
        ..opts
    };
    let rows = ratio_scan(&ns, &n.spacings_lambda0, params, opts)?.rows;
    let lit = ratio_scan(&ns, &n.spacings_lambda0, params, literal)?.rows;
    let comm = rows
        .iter()
        .map(|r| {
            if r.n_atoms > 8 {
                return Ok(None);
            }
            let cfg = linear_chain(r.n_atoms, r.xi, n.axis_parallel_to_dipole)?;
            let m = build_coupling_matrices(&cfg, &params.with_mode(CouplingMode::DickeExpansion))?;
            Ok(Some(mixing_commutator_norm(&m)?))
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(RunError::Empty("timescale scan produced no rows".into()));
    }
    Ok(timescale_table(&rows, &lit, &comm))
}
