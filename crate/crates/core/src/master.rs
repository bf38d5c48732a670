//! Lindblad evolution of the atomic density matrix,
//!
//! `drho/dt = -i[H_d, rho] + sum_{nm} gamma_nm (2 s_m rho s_n^+ - s_n^+ s_m rho - rho s_n^+ s_m)`,
//!
//! with `s_m` the lowering operator of atom `m`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::SymmetricEigen;

use crate::coupling::CouplingMatrices;
use crate::ddouble::CDd;
use crate::error::{invalid, Error, Result};
use crate::expm::DdDyadicExp;
use crate::operators::{atom_bit, build_h_between_jumps, build_h_dipole, excitations, hermiticity_defect, PureState};
use crate::{CMatrix, RMatrix, C64};

/// Hermitian, unit-trace, positive state of the atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub entries: CMatrix,
}

/// Tolerances of the density-matrix invariants.
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-8;

impl DensityMatrix {
    /// Checks the invariants before wrapping.
    pub fn new(entries: CMatrix) -> Result<Self> {
        let rho = Self { entries };
        if let Some(reason) = rho.invariant_violation(1.0) {
            return Err(invalid(reason));
        }
        Ok(rho)
    }

    pub fn from_pure(state: &PureState) -> Self {
        let v = &state.amplitudes;
        let n = v.norm_squared();
        Self {
            entries: (v * v.adjoint()).unscale(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `<s|rho|s>` for a normalized state.
    pub fn population(&self, state: &PureState) -> Result<f64> {
        if !state.normalized {
            return Err(invalid("population requires a normalized state"));
        }
        if state.dim() != self.dim() {
            return Err(invalid("state and density matrix dimensions differ"));
        }
        let p = state.expectation(&self.entries);
        if p.im.abs() > 1e-10 {
            return Err(invalid(format!("population has imaginary part {:e}", p.im)));
        }
        Ok(p.re)
    }

    /// Total population with exactly `k` excitations.
    pub fn sector_population(&self, k: u32) -> f64 {
        (0..self.dim())
            .filter(|&s| excitations(s) == k)
            .map(|s| self.entries[(s, s)].re)
            .sum()
    }

    fn invariant_violation(&self, expected_trace: f64) -> Option<String> {
        let herm = hermiticity_defect(&self.entries);
        if herm > HERMITIAN_TOL {
            return Some(format!("hermiticity defect {herm:e}"));
        }
        let tr = self.trace();
        if (tr - expected_trace).abs() > TRACE_TOL {
            return Some(format!("trace {tr} deviates from {expected_trace}"));
        }
        let low = self.min_eigenvalue();
        if low < -POSITIVITY_TOL {
            return Some(format!("negative eigenvalue {low:e}"));
        }
        None
    }
}

/// Precomputed generator of the master equation.
#[derive(Debug, Clone)]
pub struct Lindbladian {
    n_atoms: usize,
    /// `H_d - i G` with `G = sum gamma_nm s_n^+ s_m`.
    effective: CMatrix,
    /// Pair weights `2 gamma_nm` of the recycling term.
    recycle: RMatrix,
    h_norm: f64,
}

impl Lindbladian {
    pub fn new(matrices: &CouplingMatrices) -> Result<Self> {
        let h = build_h_dipole(matrices)?;
        let h_norm = h
            .entries
            .row_iter()
            .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(Self {
            n_atoms: matrices.n_atoms(),
            effective: build_h_between_jumps(matrices)?.entries,
            recycle: &matrices.gamma * 2.0,
            h_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.effective.nrows()
    }

    /// Upper bound on the spectral norm of `H_d` (maximum row sum).
    pub fn hamiltonian_norm(&self) -> f64 {
        self.h_norm
    }

    /// Time derivative of `rho`.
    pub fn rhs(&self, rho: &CMatrix) -> CMatrix {
        let k = &self.effective;
        let neg_i = C64::new(0.0, -1.0);
        let mut out = (k * rho - rho * k.adjoint()) * neg_i;
        self.add_recycling(rho, &mut out);
        out
    }

    fn add_recycling(&self, rho: &CMatrix, out: &mut CMatrix) {
        let n = self.n_atoms;
        let dim = self.dim();
        for m in 0..n {
            let bm = atom_bit(n, m);
            for nn in 0..n {
                let w = self.recycle[(nn, m)];
                if w == 0.0 {
                    continue;
                }
                let bn = atom_bit(n, nn);
                for b in (0..dim).filter(|b| b & bn == 0) {
                    for a in (0..dim).filter(|a| a & bm == 0) {
                        out[(a, b)] += rho[(a | bm, b | bn)] * w;
                    }
                }
            }
        }
    }

    /// Superoperator restricted to the coherences `rho[a][b]` with a fixed
    /// excitation difference; `pairs` lists the `(a, b)` of each local index.
    fn block(&self, pairs: &[(usize, usize)]) -> CMatrix {
        let dim = self.dim();
        let n = self.n_atoms;
        let mut local = vec![usize::MAX; dim * dim];
        for (i, &(a, b)) in pairs.iter().enumerate() {
            local[a * dim + b] = i;
        }
        let k = &self.effective;
        let mut out = CMatrix::zeros(pairs.len(), pairs.len());
        let neg_i = C64::new(0.0, -1.0);
        for (col, &(a, b)) in pairs.iter().enumerate() {
            for c in 0..dim {
                let left = k[(c, a)];
                if left != C64::new(0.0, 0.0) {
                    out[(local[c * dim + b], col)] += neg_i * left;
                }
                let right = k[(c, b)];
                if right != C64::new(0.0, 0.0) {
                    out[(local[a * dim + c], col)] -= neg_i * right.conj();
                }
            }
            for m in (0..n).filter(|&m| a & atom_bit(n, m) != 0) {
                for nn in (0..n).filter(|&nn| b & atom_bit(n, nn) != 0) {
                    let w = self.recycle[(nn, m)];
                    if w != 0.0 {
                        let row = local[(a & !atom_bit(n, m)) * dim + (b & !atom_bit(n, nn))];
                        out[(row, col)] += C64::new(w, 0.0);
                    }
                }
            }
        }
        out
    }
}

/// Time derivative of `rho` under the master equation.
pub fn lindblad_rhs(rho: &DensityMatrix, matrices: &CouplingMatrices) -> Result<CMatrix> {
    let l = Lindbladian::new(matrices)?;
    if rho.dim() != l.dim() {
        return Err(invalid(format!(
            "density matrix of dimension {} does not match {} atoms",
            rho.dim(),
            matrices.n_atoms()
        )));
    }
    Ok(l.rhs(&rho.entries))
}

/// Integration strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Embedded Dormand-Prince 5(4) with step control.
    Adaptive,
    /// Exact exponential of the superoperator, blockwise in double-double.
    Propagator,
    /// `Propagator` when the adaptive step count would be excessive and the
    /// superoperator is small enough, otherwise `Adaptive`.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    /// Further caps the step below `0.05 / |H_d|`.
    pub dt_max: Option<f64>,
    pub max_steps: u64,
    pub check_invariants: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            rtol: 1e-8,
            atol: 1e-12,
            dt_max: None,
            max_steps: 20_000_000,
            check_invariants: true,
        }
    }
}

/// Largest atom number for which `Auto` may pick the propagator.
pub const PROPAGATOR_MAX_ATOMS: usize = 4;
/// Adaptive step estimate above which `Auto` switches to the propagator.
pub const AUTO_STEP_THRESHOLD: f64 = 2.0e5;

/// Sampled trajectory of the density matrix.
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub traces: Vec<f64>,
    pub min_eigenvalues: Vec<f64>,
    pub method: Method,
    /// Accepted adaptive steps (zero for the propagator).
    pub steps: u64,
}

/// `n` log-spaced times between `t_min` and `t_max`, preceded by `0`.
pub fn log_times(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    if n == 0 {
        return out;
    }
    let (a, b) = (libm::log10(t_min), libm::log10(t_max));
    out.extend((0..n).map(|k| {
        let f = if n == 1 { 1.0 } else { k as f64 / (n - 1) as f64 };
        libm::pow(10.0, a + (b - a) * f)
    }));
    out
}

/// `n + 1` equally spaced times on `[0, t_max]`.
pub fn linear_times(t_max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| t_max * k as f64 / n.max(1) as f64).collect()
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(invalid("no output times requested"));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("output times must be finite and non-negative"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("output times must be non-decreasing"));
    }
    Ok(())
}

/// Evolves `rho0` and samples it at `times`.
pub fn evolve(rho0: &DensityMatrix, matrices: &CouplingMatrices, times: &[f64], opts: &EvolveOptions) -> Result<EvolutionResult> {
    check_times(times)?;
    let l = Lindbladian::new(matrices)?;
    if rho0.dim() != l.dim() {
        return Err(invalid("initial state dimension does not match the atom number"));
    }
    let t_final = times[times.len() - 1];
    let dt_cap = step_cap(&l, opts);
    let method = match opts.method {
        Method::Auto => {
            let estimate = t_final / dt_cap;
            if estimate > AUTO_STEP_THRESHOLD && matrices.n_atoms() <= PROPAGATOR_MAX_ATOMS {
                Method::Propagator
            } else {
                Method::Adaptive
            }
        }
        m => m,
    };
    let (states, steps) = match method {
        Method::Propagator => (propagate(&l, rho0, times), 0),
        _ => integrate(&l, rho0, times, dt_cap, opts)?,
    };
    let trace0 = rho0.trace();
    let mut traces = Vec::with_capacity(states.len());
    let mut mins = Vec::with_capacity(states.len());
    for (t, rho) in times.iter().zip(&states) {
        traces.push(rho.trace());
        mins.push(rho.min_eigenvalue());
        if opts.check_invariants {
            if let Some(reason) = rho.invariant_violation(trace0) {
                return Err(Error::IntegrationFailure { time: *t, reason });
            }
        }
    }
    Ok(EvolutionResult {
        times: times.to_vec(),
        states,
        traces,
        min_eigenvalues: mins,
        method,
        steps,
    })
}

fn step_cap(l: &Lindbladian, opts: &EvolveOptions) -> f64 {
    let mut cap = f64::INFINITY;
    if l.hamiltonian_norm() > 0.0 {
        cap = 0.05 / l.hamiltonian_norm();
    }
    if let Some(d) = opts.dt_max {
        cap = cap.min(d);
    }
    let decay = l.recycle.iter().fold(0.0f64, |a, b| a.max(b.abs())) * l.n_atoms as f64;
    if decay > 0.0 {
        cap = cap.min(0.5 / decay);
    }
    if cap.is_finite() {
        cap
    } else {
        1.0
    }
}

/// Populations `<s|rho(t)|s>` for each state, one series per state.
pub fn populations(result: &EvolutionResult, states: &[PureState]) -> Result<Vec<Vec<f64>>> {
    states
        .iter()
        .map(|s| result.states.iter().map(|rho| rho.population(s)).collect())
        .collect()
}

fn propagate(l: &Lindbladian, rho0: &DensityMatrix, times: &[f64]) -> Vec<DensityMatrix> {
    let dim = l.dim();
    let n = l.n_atoms as i64;
    let t_max = times[times.len() - 1];
    let mut outputs = vec![CMatrix::zeros(dim, dim); times.len()];
    for diff in -n..=n {
        let pairs: Vec<(usize, usize)> = (0..dim)
            .flat_map(|a| (0..dim).map(move |b| (a, b)))
            .filter(|&(a, b)| excitations(a) as i64 - excitations(b) as i64 == diff)
            .collect();
        if pairs.iter().all(|&(a, b)| rho0.entries[(a, b)] == C64::new(0.0, 0.0)) {
            continue;
        }
        let table = DdDyadicExp::new(&l.block(&pairs), t_max.max(f64::MIN_POSITIVE));
        let v0: Vec<CDd> = pairs.iter().map(|&(a, b)| CDd::from_c64(rho0.entries[(a, b)])).collect();
        for (out, &t) in outputs.iter_mut().zip(times) {
            let v = table.apply(t, v0.clone());
            for (&(a, b), z) in pairs.iter().zip(v) {
                out[(a, b)] = z.to_c64();
            }
        }
    }
    outputs.into_iter().map(|entries| DensityMatrix { entries }).collect()
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn integrate(
    l: &Lindbladian,
    rho0: &DensityMatrix,
    times: &[f64],
    dt_cap: f64,
    opts: &EvolveOptions,
) -> Result<(Vec<DensityMatrix>, u64)> {
    let mut y = rho0.entries.clone();
    let mut t = 0.0;
    let mut h = dt_cap.min(times.iter().copied().find(|&x| x > 0.0).unwrap_or(dt_cap));
    let mut k1 = l.rhs(&y);
    let mut steps = 0u64;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while t < target {
            if steps >= opts.max_steps {
                return Err(Error::IntegrationFailure {
                    time: t,
                    reason: format!("step budget of {} exhausted", opts.max_steps),
                });
            }
            let last = target - t <= h * (1.0 + 1e-12);
            let step = if last { target - t } else { h };
            let mut ks: [CMatrix; 7] = core::array::from_fn(|_| CMatrix::zeros(0, 0));
            ks[0] = k1.clone();
            for s in 1..7 {
                let mut ys = y.clone();
                for (j, kj) in ks.iter().enumerate().take(s) {
                    if A[s][j] != 0.0 {
                        ys += kj * C64::new(step * A[s][j], 0.0);
                    }
                }
                ks[s] = l.rhs(&ys);
            }
            let mut y5 = y.clone();
            let mut err = CMatrix::zeros(y.nrows(), y.ncols());
            for (s, ks_s) in ks.iter().enumerate() {
                if B5[s] != 0.0 {
                    y5 += ks_s * C64::new(step * B5[s], 0.0);
                }
                let e = B5[s] - B4[s];
                if e != 0.0 {
                    err += ks_s * C64::new(step * e, 0.0);
                }
            }
            let mut acc = 0.0;
            for (e, (a, b)) in err.iter().zip(y.iter().zip(y5.iter())) {
                let scale = opts.atol + opts.rtol * a.norm().max(b.norm());
                let r = e.norm() / scale;
                acc += r * r;
            }
            let ratio = libm::sqrt(acc / err.len() as f64);
            if ratio <= 1.0 {
                t = if last { target } else { t + step };
                y = y5;
                k1 = ks[6].clone();
                steps += 1;
            }
            let factor = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * libm::pow(ratio, -0.2)).clamp(0.2, 5.0)
            };
            if !last || ratio > 1.0 {
                h = (step * factor).min(dt_cap);
            }
            if h < 1e-15 * t.max(1e-300) || h < f64::MIN_POSITIVE * 1e10 {
                return Err(Error::IntegrationFailure {
                    time: t,
                    reason: format!("step size underflow (h = {h:e})"),
                });
            }
        }
        out.push(DensityMatrix { entries: y.clone() });
    }
    Ok((out, steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{build_coupling_matrices, CouplingMode, CouplingParams};
    use crate::geometry::linear_chain;
    use crate::operators::dicke_basis_three;

    fn fig3_matrices() -> CouplingMatrices {
        let cfg = linear_chain(3, 0.005, true).unwrap();
        let p = CouplingParams::default().with_mode(CouplingMode::DickeExpansion);
        build_coupling_matrices(&cfg, &p).unwrap()
    }

    #[test]
    fn single_atom_decays_exponentially() {
        let m = CouplingMatrices::uniform(1, 0.5, 0.0).unwrap();
        let rho = DensityMatrix::from_pure(&PureState::basis(1, 1).unwrap());
        let d = lindblad_rhs(&rho, &m).unwrap();
        assert!((d[(1, 1)].re + 1.0).abs() < 1e-15);
        assert!((d[(0, 0)].re - 1.0).abs() < 1e-15);
        let times = linear_times(3.0, 30);
        for method in [Method::Adaptive, Method::Propagator] {
            let opts = EvolveOptions { method, ..Default::default() };
            let r = evolve(&rho, &m, &times, &opts).unwrap();
            for (t, s) in r.times.iter().zip(&r.states) {
                assert!((s.entries[(1, 1)].re - (-t).exp()).abs() < 1e-9, "{method:?} {t}");
            }
        }
    }

    #[test]
    fn ground_state_is_stationary() {
        let m = fig3_matrices();
        let rho = DensityMatrix::from_pure(&PureState::ground(3).unwrap());
        assert_eq!(lindblad_rhs(&rho, &m).unwrap().norm(), 0.0);
    }

    #[test]
    fn rhs_is_traceless() {
        let m = fig3_matrices();
        let mut a = CMatrix::from_fn(8, 8, |i, j| C64::new((i * 3 + j) as f64 * 0.01, (i as f64 - j as f64) * 0.02));
        a = &a * a.adjoint();
        let tr: f64 = a.diagonal().iter().map(|z| z.re).sum();
        let rho = DensityMatrix { entries: a.unscale(tr) };
        let d = lindblad_rhs(&rho, &m).unwrap();
        let trace: C64 = d.diagonal().iter().sum();
        assert!(trace.norm() < 1e-12 * d.norm());
    }

    #[test]
    fn methods_agree_on_short_window() {
        let m = fig3_matrices();
        let (b, c, d) = dicke_basis_three();
        let rho = DensityMatrix::from_pure(&b);
        let times = linear_times(2e-5, 20);
        let opts = EvolveOptions { method: Method::Adaptive, ..Default::default() };
        let ra = evolve(&rho, &m, &times, &opts).unwrap();
        let opts = EvolveOptions { method: Method::Propagator, ..Default::default() };
        let rp = evolve(&rho, &m, &times, &opts).unwrap();
        let pa = populations(&ra, &[b.clone(), c.clone(), d.clone()]).unwrap();
        let pp = populations(&rp, &[b, c, d]).unwrap();
        for (sa, sp) in pa.iter().zip(&pp) {
            for (x, y) in sa.iter().zip(sp) {
                assert!((x - y).abs() < 1e-6);
            }
        }
        assert!(ra.steps > 0);
    }

    #[test]
    fn uniform_couplings_keep_dark_state() {
        let m = CouplingMatrices::uniform(3, 0.5, 2.0e6).unwrap();
        let (b, _, _) = dicke_basis_three();
        let rho = DensityMatrix::from_pure(&b);
        let r = evolve(&rho, &m, &log_times(1e-6, 10.0, 40), &EvolveOptions::default()).unwrap();
        assert_eq!(r.method, Method::Propagator);
        for s in &r.states {
            assert!((s.population(&b).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bright_state_decays_at_three_gamma() {
        let m = CouplingMatrices::uniform(3, 0.5, 0.0).unwrap();
        let (_, _, d) = dicke_basis_three();
        let rho = DensityMatrix::from_pure(&d);
        let r = evolve(&rho, &m, &linear_times(1.0, 10), &EvolveOptions::default()).unwrap();
        for (t, s) in r.times.iter().zip(&r.states) {
            assert!((s.population(&d).unwrap() - (-3.0 * t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn bad_requests_fail() {
        let m = fig3_matrices();
        let rho = DensityMatrix::from_pure(&PureState::ground(2).unwrap());
        assert!(evolve(&rho, &m, &[0.0, 1.0], &EvolveOptions::default()).is_err());
        let rho = DensityMatrix::from_pure(&PureState::ground(3).unwrap());
        assert!(evolve(&rho, &m, &[1.0, 0.5], &EvolveOptions::default()).is_err());
        assert!(evolve(&rho, &m, &[], &EvolveOptions::default()).is_err());
        let tight = EvolveOptions { method: Method::Adaptive, max_steps: 10, ..Default::default() };
        let e = evolve(&rho, &m, &[1.0], &tight);
        assert!(matches!(e, Err(Error::IntegrationFailure { .. })));
    }
}
