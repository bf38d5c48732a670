//! Quantum-jump unraveling of the master equation.
//!
//! Between jumps the unnormalized state follows `exp(-i H_B t)`; a jump
//! happens when its squared norm falls to a uniform random level, and the
//! channel is drawn with probability proportional to `|C_k psi|^2`.
//! Every channel is a linear combination `sum_n c_n s_n` of atomic lowering
//! operators.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coupling::CouplingMatrices;
use crate::error::{invalid, Error, Result};
use crate::expm::{taylor_apply, DyadicExp};
use crate::geometry::AtomConfig;
use crate::operators::{atom_bit, excitations, hopping_matrix, OperatorMatrix, PureState};
use crate::{CMatrix, CVector, RMatrix, C64};

/// Identifies the detector or mode that registered a photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelLabel {
    /// Eigenmode `k` of the decay matrix.
    Source(usize),
    /// Far-field direction bin.
    Angular { theta: usize, phi: usize },
}

/// Jump operator `sum_n coeffs[n] s_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpChannel {
    pub coeffs: Vec<C64>,
    pub label: ChannelLabel,
}

impl JumpChannel {
    /// Dense matrix of the channel operator.
    pub fn matrix(&self) -> CMatrix {
        let n = self.coeffs.len();
        let dim = 1usize << n;
        let mut out = CMatrix::zeros(dim, dim);
        for s in 0..dim {
            for (atom, c) in self.coeffs.iter().enumerate() {
                let bit = atom_bit(n, atom);
                if s & bit != 0 {
                    out[(s & !bit, s)] += *c;
                }
            }
        }
        out
    }
}

/// `sum_k c_kn^* c_km`, the atom-space matrix of `sum_k C_k^dag C_k`.
pub fn channel_rate_matrix(channels: &[JumpChannel]) -> CMatrix {
    let n = channels.first().map_or(0, |c| c.coeffs.len());
    let mut out = CMatrix::zeros(n, n);
    for ch in channels {
        for a in 0..n {
            for b in 0..n {
                out[(a, b)] += ch.coeffs[a].conj() * ch.coeffs[b];
            }
        }
    }
    out
}

/// Source-mode channels `sqrt(2 g_k) sum_n v_kn s_n` from the eigenpairs of
/// the decay matrix; modes with `g_k <= 1e-12 gamma_max` are dropped.
pub fn source_mode_jumps(matrices: &CouplingMatrices) -> Result<Vec<JumpChannel>> {
    let eig = SymmetricEigen::new(matrices.gamma.clone());
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out = Vec::new();
    for k in order {
        let g = eig.eigenvalues[k];
        if g < -1e-10 * scale {
            return Err(Error::InvalidCoupling(format!("decay matrix eigenvalue {g} is negative")));
        }
        if g <= 1e-12 * scale {
            continue;
        }
        let amp = libm::sqrt(2.0 * g);
        let coeffs = eig.eigenvectors.column(k).iter().map(|&v| C64::new(amp * v, 0.0)).collect();
        out.push(JumpChannel {
            coeffs,
            label: ChannelLabel::Source(out.len()),
        });
    }
    Ok(out)
}

/// Direction binning with equal `cos(theta)` widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AngularBins {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for AngularBins {
    fn default() -> Self {
        Self { n_theta: 30, n_phi: 30 }
    }
}

impl AngularBins {
    /// Solid angle of one `(theta, phi)` cell.
    pub fn cell_solid_angle(&self) -> f64 {
        (2.0 / self.n_theta as f64) * (2.0 * PI / self.n_phi as f64)
    }

    /// Edges `cos(theta)` from `+1` down to `-1`.
    pub fn cos_edges(&self) -> Vec<f64> {
        (0..=self.n_theta).map(|i| 1.0 - 2.0 * i as f64 / self.n_theta as f64).collect()
    }

    /// Polar angle at the `cos(theta)` midpoint of bin `i`.
    pub fn theta_center(&self, i: usize) -> f64 {
        let c = 1.0 - (2.0 * i as f64 + 1.0) / self.n_theta as f64;
        libm::acos(c)
    }

    pub fn phi_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * 2.0 * PI / self.n_phi as f64
    }
}

/// Orthonormal frame with `e3` along the polar axis and `e1` along the
/// dipole component transverse to it.
fn detector_frame(polar_axis: Vector3<f64>, dipole: Vector3<f64>) -> Result<[Vector3<f64>; 3]> {
    let n = polar_axis.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(invalid("polar axis must be a nonzero vector"));
    }
    let e3 = polar_axis / n;
    let mut e1 = dipole - e3 * dipole.dot(&e3);
    if e1.norm() < 1e-9 {
        let trial = if e3.z.abs() < 0.9 { Vector3::z() } else { Vector3::y() };
        e1 = trial - e3 * trial.dot(&e3);
    }
    let e1 = e1.normalize();
    Ok([e1, e3.cross(&e1), e3])
}

/// Single-atom dipole pattern `3/(8 pi) (1 - (d . R)^2)`.
pub fn dipole_pattern(dipole: &Vector3<f64>, direction: &Vector3<f64>) -> f64 {
    let c = dipole.dot(direction);
    3.0 / (8.0 * PI) * (1.0 - c * c)
}

/// Directed-detection channels for far-field direction bins.
#[derive(Debug, Clone)]
pub struct DirectedChannels {
    pub channels: Vec<JumpChannel>,
    pub bins: AngularBins,
    /// `sum_bins D dOmega`; tends to one with finer bins.
    pub pattern_weight: f64,
}

/// Directed channels `sqrt(rate D dOmega) sum_n exp(-i R . r_n) s_n`, one per
/// `(theta, phi)` bin centroid, with `theta` measured from `polar_axis`.
pub fn directed_jump_ops(
    config: &AtomConfig,
    bins: AngularBins,
    rate: f64,
    polar_axis: Vector3<f64>,
) -> Result<DirectedChannels> {
    if bins.n_theta < 8 || bins.n_phi < 8 {
        return Err(invalid(format!(
            "angular binning {}x{} is too coarse (need at least 8x8)",
            bins.n_theta, bins.n_phi
        )));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(invalid("detection rate must be positive"));
    }
    let d = config.dipole();
    let [e1, e2, e3] = detector_frame(polar_axis, d)?;
    let d_omega = bins.cell_solid_angle();
    let mut channels = Vec::with_capacity(bins.n_theta * bins.n_phi);
    let mut weight = 0.0;
    for i in 0..bins.n_theta {
        let theta = bins.theta_center(i);
        let (st, ct) = (libm::sin(theta), libm::cos(theta));
        for j in 0..bins.n_phi {
            let phi = bins.phi_center(j);
            let dir = e1 * (st * libm::cos(phi)) + e2 * (st * libm::sin(phi)) + e3 * ct;
            let pattern = dipole_pattern(&d, &dir);
            weight += pattern * d_omega;
            let amp = libm::sqrt(rate * pattern * d_omega);
            let coeffs = config
                .positions()
                .iter()
                .map(|r| {
                    let phase = -dir.dot(r);
                    C64::new(amp * libm::cos(phase), amp * libm::sin(phase))
                })
                .collect();
            channels.push(JumpChannel {
                coeffs,
                label: ChannelLabel::Angular { theta: i, phi: j },
            });
        }
    }
    Ok(DirectedChannels {
        channels,
        bins,
        pattern_weight: weight,
    })
}

/// One registered photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub channel: ChannelLabel,
}

/// Outcome of one Monte Carlo realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub stream: u64,
    pub initial_label: String,
    pub events: Vec<JumpEvent>,
    pub end_time: f64,
}

impl TrajectoryRecord {
    /// Emission time of photon `k` (one based).
    pub fn photon_time(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.events.get(i)).map(|e| e.time)
    }

    /// Delay between photons `k - 1` and `k`, counting from `t = 0` for `k = 1`.
    pub fn waiting_time(&self, k: usize) -> Option<f64> {
        let t = self.photon_time(k)?;
        let prev = if k == 1 { 0.0 } else { self.photon_time(k - 1)? };
        Some(t - prev)
    }
}

/// Random stream of trajectory `stream` under `seed`.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Absolute accuracy of jump times.
pub const JUMP_TIME_TOL: f64 = 1e-10;

/// Reusable propagator for many trajectories with the same generator.
#[derive(Debug, Clone)]
pub struct TrajectorySimulator {
    n_atoms: usize,
    generator: CMatrix,
    /// Anti-Hermitian part `G` of `H_B = H - i G`.
    decay: CMatrix,
    table: DyadicExp,
    channels: Vec<JumpChannel>,
    t_max: f64,
}

/// Result of a run with state sampling.
#[derive(Debug, Clone)]
pub struct SampledRun {
    pub record: TrajectoryRecord,
    /// `samples[c][s]`: population of observable `s` at checkpoint `c`.
    pub samples: Vec<Vec<f64>>,
    /// Normalized state right after the requested number of jumps.
    pub snapshot: Option<PureState>,
}

impl TrajectorySimulator {
    pub fn new(h_b: &OperatorMatrix, channels: Vec<JumpChannel>, t_max: f64) -> Result<Self> {
        let dim = h_b.dim();
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(invalid("t_max must be positive and finite"));
        }
        if channels.is_empty() {
            return Err(invalid("at least one jump channel is required"));
        }
        let n_atoms = channels[0].coeffs.len();
        if dim != 1usize << n_atoms || channels.iter().any(|c| c.coeffs.len() != n_atoms) {
            return Err(invalid("channel and generator dimensions differ"));
        }
        let generator = &h_b.entries * C64::new(0.0, -1.0);
        let decay = (h_b.entries.adjoint() - &h_b.entries) * C64::new(0.0, -0.5);
        let table = DyadicExp::new(generator.clone(), t_max);
        Ok(Self {
            n_atoms,
            generator,
            decay,
            table,
            channels,
            t_max,
        })
    }

    pub fn channels(&self) -> &[JumpChannel] {
        &self.channels
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// `exp(-i H_B t) psi`.
    pub fn propagate(&self, t: f64, psi: &CVector) -> CVector {
        self.table.apply(t, psi)
    }

    /// No-jump density `-d/dt |exp(-i H_B t) psi|^2 = 2 <psi_t|G|psi_t>`.
    pub fn no_jump_density(&self, psi: &PureState, times: &[f64]) -> Vec<f64> {
        times
            .iter()
            .map(|&t| {
                let v = self.propagate(t, &psi.amplitudes);
                2.0 * v.dotc(&(&self.decay * &v)).re
            })
            .collect()
    }

    pub fn run(&self, psi0: &PureState, label: &str, seed: u64, stream: u64) -> Result<TrajectoryRecord> {
        Ok(self.run_sampled(psi0, label, seed, stream, &[], &[], None)?.record)
    }

    /// Runs one trajectory, recording observable populations of the
    /// normalized conditional state at `checkpoints` and optionally the
    /// state after `snapshot_after` jumps.
    #[allow(clippy::too_many_arguments)]
    pub fn run_sampled(
        &self,
        psi0: &PureState,
        label: &str,
        seed: u64,
        stream: u64,
        checkpoints: &[f64],
        observables: &[PureState],
        snapshot_after: Option<usize>,
    ) -> Result<SampledRun> {
        if psi0.dim() != self.generator.nrows() {
            return Err(invalid("initial state dimension differs from the generator"));
        }
        if !psi0.normalized {
            return Err(invalid("initial state must be normalized"));
        }
        if checkpoints.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("checkpoints must be non-decreasing"));
        }
        let mut rng = trajectory_rng(seed, stream);
        let mut psi = psi0.amplitudes.clone();
        let mut t = 0.0;
        let mut events = Vec::new();
        let mut samples = Vec::with_capacity(checkpoints.len());
        let mut next_cp = 0;
        let mut snapshot = None;
        if snapshot_after == Some(0) {
            snapshot = Some(PureState::normalized(psi.clone())?);
        }
        let record_until = |limit: f64, t: f64, psi: &CVector, next_cp: &mut usize, samples: &mut Vec<Vec<f64>>| {
            while *next_cp < checkpoints.len() && checkpoints[*next_cp] <= limit {
                let v = self.propagate(checkpoints[*next_cp] - t, psi);
                samples.push(observe(&v, observables));
                *next_cp += 1;
            }
        };
        loop {
            if is_ground(&psi) {
                break;
            }
            let level: f64 = 1.0 - rng.random::<f64>();
            let horizon = self.t_max - t;
            let Some((tau, phi)) = self.find_jump(&psi, level, horizon) else {
                break;
            };
            record_until(t + tau, t, &psi, &mut next_cp, &mut samples);
            let (label, next) = self.select_channel(&phi, &mut rng)?;
            t += tau;
            psi = next;
            events.push(JumpEvent { time: t, channel: label });
            if snapshot_after == Some(events.len()) {
                snapshot = Some(PureState::normalized(psi.clone())?);
            }
        }
        record_until(f64::INFINITY, t, &psi, &mut next_cp, &mut samples);
        Ok(SampledRun {
            record: TrajectoryRecord {
                seed,
                stream,
                initial_label: String::from(label),
                events,
                end_time: self.t_max,
            },
            samples,
            snapshot,
        })
    }

    /// Time to the next jump and the unnormalized state just before it, or
    /// `None` if the norm stays above `level` for the whole horizon.
    fn find_jump(&self, psi: &CVector, level: f64, horizon: f64) -> Option<(f64, CVector)> {
        if horizon <= 0.0 {
            return None;
        }
        let end = self.propagate(horizon, psi);
        if end.norm_squared() > level {
            return None;
        }
        let h0 = self.table.h0();
        let mut phi = psi.clone();
        let mut start = 0.0;
        for j in (0..self.table.levels()).rev() {
            let span = h0 * (1u64 << j) as f64;
            if start + span > horizon {
                continue;
            }
            let cand = self.table.apply_level(j, &phi);
            if cand.norm_squared() > level {
                phi = cand;
                start += span;
            }
        }
        let width = h0.min(horizon - start);
        let tau = self.refine(&phi, level, width);
        let state = taylor_apply(&self.generator, tau, &phi);
        Some((start + tau, state))
    }

    /// Safeguarded Newton iteration for `|exp(A tau) phi|^2 = level` on `[0, width]`.
    fn refine(&self, phi: &CVector, level: f64, width: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, width);
        let mut tau = 0.5 * width;
        for _ in 0..200 {
            let v = taylor_apply(&self.generator, tau, phi);
            let f = v.norm_squared() - level;
            if f > 0.0 {
                lo = tau;
            } else {
                hi = tau;
            }
            let slope = -2.0 * v.dotc(&(&self.decay * &v)).re;
            let newton = if slope < 0.0 { tau - f / slope } else { f64::NAN };
            let next = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let converged = (next - tau).abs() < 0.25 * JUMP_TIME_TOL || hi - lo < JUMP_TIME_TOL;
            tau = next;
            if converged {
                break;
            }
        }
        tau
    }

    fn select_channel(&self, phi: &CVector, rng: &mut ChaCha8Rng) -> Result<(ChannelLabel, CVector)> {
        let n = self.n_atoms;
        let lowered: Vec<CVector> = (0..n).map(|atom| lower(phi, n, atom)).collect();
        let gram = CMatrix::from_fn(n, n, |a, b| lowered[a].dotc(&lowered[b]));
        let weights: Vec<f64> = self
            .channels
            .iter()
            .map(|ch| {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..n {
                    for b in 0..n {
                        acc += ch.coeffs[a].conj() * gram[(a, b)] * ch.coeffs[b];
                    }
                }
                acc.re.max(0.0)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::IntegrationFailure {
                time: f64::NAN,
                reason: String::from("jump requested from a state with zero emission rate"),
            });
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = weights.len() - 1;
        for (k, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                pick = k;
                break;
            }
        }
        let ch = &self.channels[pick];
        let mut out = CVector::zeros(phi.len());
        for (c, v) in ch.coeffs.iter().zip(&lowered) {
            out.axpy(*c, v, C64::new(1.0, 0.0));
        }
        let norm = out.norm();
        Ok((ch.label, out.unscale(norm)))
    }
}

fn lower(v: &CVector, n_atoms: usize, atom: usize) -> CVector {
    let bit = atom_bit(n_atoms, atom);
    CVector::from_fn(v.len(), |s, _| {
        if s & bit == 0 {
            v[s | bit]
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

fn is_ground(v: &CVector) -> bool {
    v.iter().enumerate().skip(1).all(|(_, a)| a.norm_sqr() == 0.0)
}

fn observe(v: &CVector, observables: &[PureState]) -> Vec<f64> {
    let norm = v.norm_squared();
    observables.iter().map(|s| s.amplitudes.dotc(v).norm_sqr() / norm).collect()
}

/// One trajectory with a freshly built propagator.
pub fn run_trajectory(
    psi0: &PureState,
    h_b: &OperatorMatrix,
    channels: Vec<JumpChannel>,
    t_max: f64,
    seed: u64,
) -> Result<TrajectoryRecord> {
    TrajectorySimulator::new(h_b, channels, t_max)?.run(psi0, "custom", seed, 0)
}

/// Histogram on explicit edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(edges: Vec<f64>, samples: &[f64]) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("histogram edges must be strictly increasing"));
        }
        let mut counts = vec![0u64; edges.len() - 1];
        for &x in samples {
            if x < edges[0] || x > edges[edges.len() - 1] {
                continue;
            }
            let k = edges.partition_point(|&e| e <= x).saturating_sub(1).min(counts.len() - 1);
            counts[k] += 1;
        }
        Ok(Self { edges, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts divided by `n_samples` times bin width.
    pub fn density(&self, n_samples: usize) -> Vec<f64> {
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&c, w)| c as f64 / (n_samples as f64 * (w[1] - w[0])))
            .collect()
    }
}

/// Waiting times of photon `k` across records.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitingTimeDistribution {
    pub photon_index: usize,
    pub samples: Vec<f64>,
    pub histogram: Histogram,
}

pub fn waiting_time_distribution(records: &[TrajectoryRecord], photon_index: usize, edges: Vec<f64>) -> Result<WaitingTimeDistribution> {
    if photon_index == 0 {
        return Err(invalid("photon index is one based"));
    }
    let samples: Vec<f64> = records.iter().filter_map(|r| r.waiting_time(photon_index)).collect();
    if samples.is_empty() {
        return Err(Error::EmptyDistribution(format!("no record contains {photon_index} photons")));
    }
    let histogram = Histogram::new(edges, &samples)?;
    Ok(WaitingTimeDistribution {
        photon_index,
        samples,
        histogram,
    })
}

/// Photon counts per polar bin, summed over azimuth and photon number.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularDistribution {
    pub cos_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_traj: usize,
    /// Solid angle of one polar ring.
    pub ring_solid_angle: f64,
}

impl AngularDistribution {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts per trajectory and unit solid angle.
    pub fn sigma(&self) -> Vec<f64> {
        let norm = self.n_traj.max(1) as f64 * self.ring_solid_angle;
        self.counts.iter().map(|&c| c as f64 / norm).collect()
    }

    pub fn theta_centers(&self) -> Vec<f64> {
        self.cos_edges.windows(2).map(|w| libm::acos(0.5 * (w[0] + w[1]))).collect()
    }
}

pub fn angular_distribution(records: &[TrajectoryRecord], bins: AngularBins) -> Result<AngularDistribution> {
    let mut counts = vec![0u64; bins.n_theta];
    for r in records {
        for e in &r.events {
            match e.channel {
                ChannelLabel::Angular { theta, .. } if theta < bins.n_theta => counts[theta] += 1,
                ChannelLabel::Angular { theta, .. } => {
                    return Err(invalid(format!("polar bin {theta} outside {} bins", bins.n_theta)))
                }
                ChannelLabel::Source(_) => return Err(invalid("record was produced with source-mode channels")),
            }
        }
    }
    Ok(AngularDistribution {
        cos_edges: bins.cos_edges(),
        counts,
        n_traj: records.len(),
        ring_solid_angle: 2.0 * PI * 2.0 / bins.n_theta as f64,
    })
}

/// `sigma_a - sigma_b` per polar bin.
pub fn angular_difference(a: &AngularDistribution, b: &AngularDistribution) -> Result<Vec<f64>> {
    if a.cos_edges != b.cos_edges {
        return Err(invalid("angular distributions use different binning"));
    }
    Ok(a.sigma().iter().zip(b.sigma()).map(|(x, y)| x - y).collect())
}

/// `(1/2) sum_k C_k^dag C_k` on the full space; equals the decay operator
/// `sum gamma_nm s_n^+ s_m` when the channels unravel the master equation.
pub fn channel_rate_operator(channels: &[JumpChannel]) -> CMatrix {
    let k = channel_rate_matrix(channels);
    let n = k.nrows();
    let re = RMatrix::from_fn(n, n, |a, b| 0.5 * k[(a, b)].re);
    let im = RMatrix::from_fn(n, n, |a, b| 0.5 * k[(a, b)].im);
    let hr = hopping_matrix(&re, true);
    let hi = hopping_matrix(&im, true);
    CMatrix::from_fn(hr.nrows(), hr.ncols(), |i, j| C64::new(hr[(i, j)], hi[(i, j)]))
}

/// Ensemble mean number of photons.
pub fn mean_photon_count(records: &[TrajectoryRecord]) -> f64 {
    records.iter().map(|r| r.events.len()).sum::<usize>() as f64 / records.len().max(1) as f64
}

/// Largest excitation number present in `psi`.
pub fn excitation_bound(psi: &PureState) -> u32 {
    psi.amplitudes
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm_sqr() > 0.0)
        .map(|(s, _)| excitations(s))
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{build_coupling_matrices, CouplingParams};
    use crate::geometry::linear_chain;
    use crate::operators::{build_h_between_jumps, decay_operator, dicke_basis_three};

    #[test]
    fn equal_couplings_have_one_source_mode() {
        let m = CouplingMatrices::uniform(3, 0.5, 0.0).unwrap();
        let ch = source_mode_jumps(&m).unwrap();
        assert_eq!(ch.len(), 1);
        let c0 = ch[0].coeffs[0];
        assert!(ch[0].coeffs.iter().all(|c| (c - c0).norm() < 1e-12));
        assert!((c0.norm() - 1.0).abs() < 1e-12);
        let single = source_mode_jumps(&CouplingMatrices::uniform(1, 0.5, 0.0).unwrap()).unwrap();
        assert_eq!(single.len(), 1);
        assert!((single[0].coeffs[0].re.abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn source_modes_reproduce_decay_operator() {
        let cfg = linear_chain(4, 1.0, false).unwrap();
        let m = build_coupling_matrices(&cfg, &CouplingParams::default()).unwrap();
        let ch = source_mode_jumps(&m).unwrap();
        assert_eq!(ch.len(), 4);
        let g = decay_operator(&m);
        let r = channel_rate_operator(&ch);
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                assert!((r[(i, j)] - C64::new(g[(i, j)], 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn directed_pattern_is_normalized() {
        let cfg = linear_chain(1, 1.0, false).unwrap();
        let d = directed_jump_ops(&cfg, AngularBins::default(), 1.0, Vector3::x()).unwrap();
        assert!((d.pattern_weight - 1.0).abs() < 1e-3);
        let k = channel_rate_matrix(&d.channels);
        assert!((k[(0, 0)].re - 1.0).abs() < 1e-3);
        let coarse = AngularBins { n_theta: 4, n_phi: 30 };
        assert!(directed_jump_ops(&cfg, coarse, 1.0, Vector3::x()).is_err());
    }

    #[test]
    fn colocated_directed_channels_are_collective() {
        let cfg = linear_chain(3, 1e-12, false).unwrap();
        let d = directed_jump_ops(&cfg, AngularBins { n_theta: 8, n_phi: 8 }, 1.0, Vector3::x()).unwrap();
        for ch in &d.channels {
            let c0 = ch.coeffs[0];
            assert!(ch.coeffs.iter().all(|c| (c - c0).norm() < 1e-10 * c0.norm().max(1e-300)));
        }
    }

    #[test]
    fn dark_state_never_jumps_and_cascade_is_complete() {
        let m = CouplingMatrices::uniform(3, 0.5, 1.0e3).unwrap();
        let hb = build_h_between_jumps(&m).unwrap();
        let sim = TrajectorySimulator::new(&hb, source_mode_jumps(&m).unwrap(), 50.0).unwrap();
        let (b, _, _) = dicke_basis_three();
        for k in 0..20 {
            assert!(sim.run(&b, "b", 7, k).unwrap().events.is_empty());
        }
        let top = PureState::fully_excited(3).unwrap();
        for k in 0..50 {
            let r = sim.run(&top, "eee", 3, k).unwrap();
            assert_eq!(r.events.len(), 3);
            assert!(r.events.windows(2).all(|w| w[1].time > w[0].time));
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = linear_chain(3, 0.3, true).unwrap();
        let m = build_coupling_matrices(&cfg, &CouplingParams::default()).unwrap();
        let hb = build_h_between_jumps(&m).unwrap();
        let top = PureState::fully_excited(3).unwrap();
        let a = run_trajectory(&top, &hb, source_mode_jumps(&m).unwrap(), 20.0, 11).unwrap();
        let b = run_trajectory(&top, &hb, source_mode_jumps(&m).unwrap(), 20.0, 11).unwrap();
        assert_eq!(a.events, b.events);
        let c = run_trajectory(&top, &hb, source_mode_jumps(&m).unwrap(), 20.0, 12).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn single_atom_waiting_times_are_exponential() {
        let m = CouplingMatrices::uniform(1, 0.5, 0.0).unwrap();
        let hb = build_h_between_jumps(&m).unwrap();
        let sim = TrajectorySimulator::new(&hb, source_mode_jumps(&m).unwrap(), 40.0).unwrap();
        let e = PureState::basis(1, 1).unwrap();
        let recs: Vec<_> = (0..4000).map(|k| sim.run(&e, "e", 5, k).unwrap()).collect();
        let mean = recs.iter().map(|r| r.photon_time(1).unwrap()).sum::<f64>() / recs.len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "{mean}");
        let dens = sim.no_jump_density(&e, &[0.0, 1.0]);
        assert!((dens[0] - 1.0).abs() < 1e-12);
        assert!((dens[1] - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn histogram_basics() {
        let h = Histogram::new(vec![0.0, 1.0, 2.0], &[0.5, 1.0, 1.5, 3.0]).unwrap();
        assert_eq!(h.counts, vec![1, 2]);
        assert!(Histogram::new(vec![1.0, 1.0], &[]).is_err());
        assert!(matches!(
            waiting_time_distribution(&[], 1, vec![0.0, 1.0]),
            Err(Error::EmptyDistribution(_))
        ));
    }
}
