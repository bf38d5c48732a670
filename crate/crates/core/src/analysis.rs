//! Competing timescales: dipole-dipole mixing versus superradiant emission.

use alloc::vec::Vec;
use core::f64::consts::PI;


use crate::coupling::{build_coupling_matrices, gamma_reg, CouplingMatrices, CouplingMode, CouplingParams};
use crate::error::{invalid, Result};
use crate::geometry::linear_chain;
use crate::operators::{decay_operator, excitations, hopping_matrix, MAX_ATOMS, OperatorMatrix};
use crate::{CMatrix, RMatrix, C64};

/// Which part of `H_d` sets the mixing time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MixingVariant {
    /// `H_d` with its components along the identity and `R+ R-` removed
    /// inside the sector.
    #[default]
    Mixing,
    /// The full sector block of `H_d`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TDickeOptions {
    pub variant: MixingVariant,
    /// Excitation sector; `None` selects `floor(N / 2)`.
    pub sector: Option<u32>,
}

/// Mixing timescale and how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingTime {
    /// `1 / |lambda|_max`, infinite when nothing mixes.
    pub time: f64,
    pub max_eigenvalue: f64,
    pub sector: u32,
    /// Set when `time` comes from the coupling bound instead of an
    /// eigenvalue.
    pub is_bound: bool,
}

impl MixingTime {
    pub fn is_infinite(&self) -> bool {
        self.time.is_infinite()
    }

    fn from_eigenvalue(max_eigenvalue: f64, sector: u32, is_bound: bool) -> Self {
        let time = if max_eigenvalue > 0.0 { 1.0 / max_eigenvalue } else { f64::INFINITY };
        Self {
            time,
            max_eigenvalue,
            sector,
            is_bound,
        }
    }
}

/// Fastest collective emission time `{ (g/2) N (N/2 + 1) }^-1`.
pub fn t_rate(n_atoms: usize, gamma_tilde: f64) -> Result<f64> {
    if n_atoms == 0 {
        return Err(invalid("at least one atom is required"));
    }
    if !(gamma_tilde > 0.0 && gamma_tilde.is_finite()) {
        return Err(invalid("decay rate must be positive"));
    }
    let n = n_atoms as f64;
    Ok(1.0 / (0.5 * gamma_tilde * n * (0.5 * n + 1.0)))
}

fn sector_indices(n_atoms: usize, k: u32) -> Vec<usize> {
    (0..1usize << n_atoms).filter(|&s| excitations(s) == k).collect()
}

fn resolve_sector(n_atoms: usize, sector: Option<u32>) -> Result<u32> {
    let k = sector.unwrap_or((n_atoms / 2) as u32);
    if k as usize > n_atoms {
        return Err(invalid("sector exceeds the number of atoms"));
    }
    Ok(k)
}

/// Frobenius projection of `h` off `span{I, p}`.
fn remove_uniform_part(h: &CMatrix, p: &CMatrix) -> CMatrix {
    let dim = h.nrows() as f64;
    let tr_p = p.trace().re;
    let tr_pp = p.dotc(p).re;
    let tr_h = h.trace();
    let tr_ph = p.dotc(h);
    let det = dim * tr_pp - tr_p * tr_p;
    let (a, b) = if det.abs() > 1e-12 * dim * tr_pp.max(1.0) {
        ((tr_h * tr_pp - tr_ph * tr_p) / det, (tr_ph * dim - tr_h * tr_p) / det)
    } else {
        (tr_h / dim, C64::new(0.0, 0.0))
    };
    let mut out = h - p * b;
    for i in 0..h.nrows() {
        out[(i, i)] -= a;
    }
    out
}

fn max_abs_eigenvalue(h: &CMatrix) -> f64 {
    if h.nrows() == 0 {
        return 0.0;
    }
    h.clone().symmetric_eigenvalues().iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn sector_block(a: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])])
}

/// Values below this fraction of the sector norm count as zero.
const ZERO_SPECTRUM: f64 = 1e-12;

fn mixing_time_of_block(h: &CMatrix, p: &CMatrix, variant: MixingVariant, k: u32) -> MixingTime {
    let scale = h.norm();
    let target = match variant {
        MixingVariant::Mixing => remove_uniform_part(h, p),
        MixingVariant::Literal => h.clone(),
    };
    let lam = max_abs_eigenvalue(&target);
    let lam = if lam <= ZERO_SPECTRUM * scale { 0.0 } else { lam };
    MixingTime::from_eigenvalue(lam, k, false)
}

/// `t_Dicke` of a full `2^N` dipole Hamiltonian.
pub fn t_dicke(h_d: &OperatorMatrix, opts: TDickeOptions) -> Result<MixingTime> {
    let dim = h_d.dim();
    if !dim.is_power_of_two() || dim < 2 {
        return Err(invalid("operator dimension is not 2^N"));
    }
    if !h_d.hermitian {
        return Err(invalid("t_Dicke needs a Hermitian operator"));
    }
    let n_atoms = dim.trailing_zeros() as usize;
    let k = resolve_sector(n_atoms, opts.sector)?;
    let idx = sector_indices(n_atoms, k);
    let h = sector_block(&h_d.entries, &idx);
    let ones = RMatrix::from_element(n_atoms, n_atoms, 1.0);
    let p_full = hopping_matrix(&ones, true).map(|v| C64::new(v, 0.0));
    let p = sector_block(&p_full, &idx);
    Ok(mixing_time_of_block(&h, &p, opts.variant, k))
}

/// Sector block of `sum_{n != m} w_nm s_n^+ s_m` built without the full space.
fn sector_hopping(weights: &RMatrix, idx: &[usize], with_diagonal: bool) -> CMatrix {
    let n_atoms = weights.nrows();
    let position = |s: usize| idx.binary_search(&s).ok();
    let mut out = CMatrix::zeros(idx.len(), idx.len());
    for (col, &s) in idx.iter().enumerate() {
        for m in 0..n_atoms {
            let bm = 1usize << (n_atoms - 1 - m);
            if s & bm == 0 {
                continue;
            }
            let lowered = s & !bm;
            for n in 0..n_atoms {
                if n == m && !with_diagonal {
                    continue;
                }
                let bn = 1usize << (n_atoms - 1 - n);
                if lowered & bn != 0 {
                    continue;
                }
                if let Some(row) = position(lowered | bn) {
                    out[(row, col)] += C64::new(weights[(n, m)], 0.0);
                }
            }
        }
    }
    out
}

/// `t_Dicke` from a shift matrix, switching to the bound
/// `N max |Delta_nm - mean Delta|` above [`MAX_ATOMS`] atoms.
pub fn t_dicke_from_shifts(delta: &RMatrix, opts: TDickeOptions) -> Result<MixingTime> {
    let n_atoms = delta.nrows();
    if n_atoms == 0 || delta.ncols() != n_atoms {
        return Err(invalid("shift matrix must be square and nonempty"));
    }
    let k = resolve_sector(n_atoms, opts.sector)?;
    if n_atoms > MAX_ATOMS {
        return Ok(MixingTime::from_eigenvalue(mixing_bound(delta, opts.variant), k, true));
    }
    let idx = sector_indices(n_atoms, k);
    let h = sector_hopping(delta, &idx, false);
    let ones = RMatrix::from_element(n_atoms, n_atoms, 1.0);
    let p = sector_hopping(&ones, &idx, true);
    Ok(mixing_time_of_block(&h, &p, opts.variant, k))
}

fn mixing_bound(delta: &RMatrix, variant: MixingVariant) -> f64 {
    let n = delta.nrows();
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += delta[(i, j)];
                count += 1;
            }
        }
    }
    let offset = match variant {
        MixingVariant::Mixing if count > 0 => sum / count as f64,
        _ => 0.0,
    };
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                worst = worst.max((delta[(i, j)] - offset).abs());
            }
        }
    }
    worst * n as f64
}

/// Frobenius norm of `[H_mix, G]` with `G = sum gamma_nm s_n^+ s_m`.
pub fn mixing_commutator_norm(matrices: &CouplingMatrices) -> Result<f64> {
    let n = matrices.n_atoms();
    if n > MAX_ATOMS {
        return Err(crate::Error::TooLarge(alloc::format!("{n} atoms exceed the dense limit")));
    }
    let delta = matrices.delta_total();
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += delta[(i, j)];
                count += 1;
            }
        }
    }
    let mean = if count > 0 { sum / count as f64 } else { 0.0 };
    let mixing = RMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { delta[(i, j)] - mean });
    let h = hopping_matrix(&mixing, false);
    let g = decay_operator(matrices);
    Ok((&h * &g - &g * &h).norm())
}

/// Whether the near-Dicke couplings can be trusted for a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validity {
    Valid,
    /// Nearest-neighbour distance below the Bohr radius.
    BelowBohrRadius,
    /// Largest pair separation beyond the near-Dicke window.
    BeyondNearDicke,
}

impl Validity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Validity::Valid => "valid",
            Validity::BelowBohrRadius => "below_bohr_radius",
            Validity::BeyondNearDicke => "beyond_near_dicke",
        }
    }
}

/// Largest pair `xi` for which the linear expansions are used unflagged.
pub const NEAR_DICKE_XI_MAX: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimescaleRow {
    pub n_atoms: usize,
    pub spacing_lambda0: f64,
    pub xi: f64,
    pub t_dicke: f64,
    pub t_rate: f64,
    pub ratio: f64,
    /// `min 2 gamma_nm / gamma` across distinct pairs.
    pub min_gamma_ratio: f64,
    pub validity: Validity,
    pub is_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimescaleTable {
    pub rows: Vec<TimescaleRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScanOptions {
    pub t_dicke: TDickeOptions,
    /// Chain axis along the dipole.
    pub axis_parallel: bool,
}

/// One row of the scan for an `n_atoms` chain with spacing in units of `lambda0`.
pub fn timescale_row(n_atoms: usize, spacing_lambda0: f64, params: &CouplingParams, opts: ScanOptions) -> Result<TimescaleRow> {
    if !(spacing_lambda0 > 0.0 && spacing_lambda0.is_finite()) {
        return Err(invalid("spacing must be positive"));
    }
    let xi = 2.0 * PI * spacing_lambda0;
    let config = linear_chain(n_atoms, xi, opts.axis_parallel)?;
    let expansion = params.with_mode(CouplingMode::DickeExpansion);
    let matrices = build_coupling_matrices(&config, &expansion)?;
    let mixing = t_dicke_from_shifts(&matrices.delta_total(), opts.t_dicke)?;
    let rate = t_rate(n_atoms, params.gamma_tilde())?;
    let mut min_gamma_ratio = f64::INFINITY;
    for (_, _, g) in config.pairs() {
        min_gamma_ratio = min_gamma_ratio.min(2.0 * gamma_reg(g.xi, g.eta, params)? / params.gamma);
    }
    let max_xi = xi * (n_atoms.saturating_sub(1)) as f64;
    let validity = if xi < params.k0_a0 {
        Validity::BelowBohrRadius
    } else if max_xi > NEAR_DICKE_XI_MAX {
        Validity::BeyondNearDicke
    } else {
        Validity::Valid
    };
    Ok(TimescaleRow {
        n_atoms,
        spacing_lambda0,
        xi,
        t_dicke: mixing.time,
        t_rate: rate,
        ratio: mixing.time / rate,
        min_gamma_ratio,
        validity,
        is_bound: mixing.is_bound,
    })
}

/// Rows for every `(N, spacing)` combination, `N` varying fastest.
pub fn ratio_scan(n_range: &[usize], spacings_lambda0: &[f64], params: &CouplingParams, opts: ScanOptions) -> Result<TimescaleTable> {
    let mut rows = Vec::with_capacity(n_range.len() * spacings_lambda0.len());
    for &s in spacings_lambda0 {
        for &n in n_range {
            rows.push(timescale_row(n, s, params, opts)?);
        }
    }
    Ok(TimescaleTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::build_h_dipole;
    use proptest::prelude::*;

    #[test]
    fn t_rate_values() {
        assert!((t_rate(2, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((t_rate(4, 1.0).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((t_rate(1, 2.0).unwrap() - 4.0 / 6.0).abs() < 1e-15);
        assert!(t_rate(0, 1.0).is_err());
    }

    #[test]
    fn uniform_shifts_do_not_mix() {
        let m = CouplingMatrices::uniform(4, 0.5, 3.0e6).unwrap();
        let h = build_h_dipole(&m).unwrap();
        let t = t_dicke(&h, TDickeOptions::default()).unwrap();
        assert!(t.is_infinite());
        let lit = t_dicke(&h, TDickeOptions { variant: MixingVariant::Literal, sector: None }).unwrap();
        assert!(lit.time.is_finite());
    }

    #[test]
    fn two_atom_single_excitation() {
        let m = CouplingMatrices::uniform(2, 0.5, 1.0e6).unwrap();
        let h = build_h_dipole(&m).unwrap();
        let t = t_dicke(&h, TDickeOptions { variant: MixingVariant::Literal, sector: Some(1) }).unwrap();
        assert!((t.time * 1.0e6 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_space_and_sector_paths_agree() {
        let cfg = linear_chain(5, 0.01, false).unwrap();
        let p = CouplingParams::default().with_mode(CouplingMode::DickeExpansion);
        let m = build_coupling_matrices(&cfg, &p).unwrap();
        let h = build_h_dipole(&m).unwrap();
        for variant in [MixingVariant::Mixing, MixingVariant::Literal] {
            let o = TDickeOptions { variant, sector: None };
            let a = t_dicke(&h, o).unwrap();
            let b = t_dicke_from_shifts(&m.delta_total(), o).unwrap();
            assert!(((a.time - b.time) / a.time).abs() < 1e-9);
        }
    }

    #[test]
    fn bound_used_above_dense_limit() {
        let cfg = linear_chain(14, 0.002, false).unwrap();
        let p = CouplingParams::default().with_mode(CouplingMode::DickeExpansion);
        let m = build_coupling_matrices(&cfg, &p).unwrap();
        let t = t_dicke_from_shifts(&m.delta_total(), TDickeOptions::default()).unwrap();
        assert!(t.is_bound && t.time.is_finite() && t.time > 0.0);
    }

    #[test]
    fn scan_row_invariants() {
        let p = CouplingParams::default();
        let row = timescale_row(5, 3.0e-4, &p, ScanOptions::default()).unwrap();
        assert!(row.t_dicke > 0.0 && row.t_rate > 0.0);
        assert!((row.ratio - row.t_dicke / row.t_rate).abs() <= 1e-12 * row.ratio);
        assert!(row.min_gamma_ratio > 0.99);
        assert_eq!(row.validity, Validity::BelowBohrRadius);
    }

    proptest! {
        #[test]
        fn identity_and_uniform_shifts_leave_mixing_time(offset in -1e6f64..1e6, seed in 0u64..1000) {
            let n = 4;
            let mut d = RMatrix::zeros(n, n);
            let mut x = seed as f64 + 1.0;
            for i in 0..n {
                for j in 0..i {
                    x = (x * 7.31 + 0.17).fract();
                    d[(i, j)] = 1.0e3 * (x - 0.5);
                    d[(j, i)] = d[(i, j)];
                }
            }
            let base = t_dicke_from_shifts(&d, TDickeOptions::default()).unwrap();
            let shifted = RMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { d[(i, j)] + offset });
            let moved = t_dicke_from_shifts(&shifted, TDickeOptions::default()).unwrap();
            prop_assert!(((base.time - moved.time) / base.time).abs() < 1e-6);
            let doubled = d.map(|v| 2.0 * v);
            let half = t_dicke_from_shifts(&doubled, TDickeOptions::default()).unwrap();
            prop_assert!((half.time * 2.0 / base.time - 1.0).abs() < 1e-9);
        }
    }
}
