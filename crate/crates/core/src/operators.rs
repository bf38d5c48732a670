//! Operator algebra on the `2^N`-dimensional atomic space.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use nalgebra::Matrix3;

use crate::coupling::CouplingMatrices;
use crate::error::{invalid, Error, Result};
use crate::{CMatrix, CVector, RMatrix, C64};

/// Largest atom number handled by the dense representation.
pub const MAX_ATOMS: usize = 12;

/// Hilbert-space dimension for `n_atoms` atoms.
pub fn dimension(n_atoms: usize) -> Result<usize> {
    if n_atoms == 0 {
        return Err(invalid("need at least one atom"));
    }
    if n_atoms > MAX_ATOMS {
        return Err(Error::TooLarge(format!(
            "{n_atoms} atoms exceed the dense limit of {MAX_ATOMS}"
        )));
    }
    Ok(1 << n_atoms)
}

/// Bit mask of atom `atom` in a basis index (atom 0 is the most significant bit).
#[inline]
pub fn atom_bit(n_atoms: usize, atom: usize) -> usize {
    1 << (n_atoms - 1 - atom)
}

/// Number of excited atoms in basis state `index`.
#[inline]
pub fn excitations(index: usize) -> u32 {
    index.count_ones()
}

/// Dense operator with a Hermiticity tag.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub entries: CMatrix,
    pub hermitian: bool,
}

impl OperatorMatrix {
    fn general(entries: CMatrix) -> Self {
        Self {
            entries,
            hermitian: false,
        }
    }

    /// Tags `entries` as Hermitian after checking `max |A - A^dag| < 1e-12`.
    pub fn hermitian(entries: CMatrix) -> Result<Self> {
        let dev = hermiticity_defect(&entries);
        if dev >= 1e-12 * entries.iter().fold(1.0f64, |a, z| a.max(z.norm())) {
            return Err(invalid(format!("matrix is not Hermitian (defect {dev:e})")));
        }
        Ok(Self {
            entries,
            hermitian: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// `max |A - A^dag|` over entries.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Single-site operator kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaKind {
    Plus,
    Minus,
    Z,
}

/// `sigma` acting on `atom` and identity elsewhere.
pub fn sigma_op(n_atoms: usize, atom: usize, kind: SigmaKind) -> Result<OperatorMatrix> {
    let dim = dimension(n_atoms)?;
    if atom >= n_atoms {
        return Err(invalid(format!("atom {atom} out of range for {n_atoms} atoms")));
    }
    let bit = atom_bit(n_atoms, atom);
    let mut m = CMatrix::zeros(dim, dim);
    for s in 0..dim {
        let excited = s & bit != 0;
        match kind {
            SigmaKind::Plus if !excited => m[(s | bit, s)] = C64::new(1.0, 0.0),
            SigmaKind::Minus if excited => m[(s & !bit, s)] = C64::new(1.0, 0.0),
            SigmaKind::Z => m[(s, s)] = C64::new(if excited { 1.0 } else { -1.0 }, 0.0),
            _ => {}
        }
    }
    Ok(match kind {
        SigmaKind::Z => OperatorMatrix {
            entries: m,
            hermitian: true,
        },
        _ => OperatorMatrix::general(m),
    })
}

/// Collective raising, lowering and inversion operators, with
/// `R_z = sum sigma_z / 2`.
pub fn collective_ops(n_atoms: usize) -> Result<(OperatorMatrix, OperatorMatrix, OperatorMatrix)> {
    let dim = dimension(n_atoms)?;
    let mut plus = CMatrix::zeros(dim, dim);
    let mut z = CMatrix::zeros(dim, dim);
    for s in 0..dim {
        for atom in 0..n_atoms {
            let bit = atom_bit(n_atoms, atom);
            if s & bit == 0 {
                plus[(s | bit, s)] += C64::new(1.0, 0.0);
            }
        }
        z[(s, s)] = C64::new(excitations(s) as f64 - 0.5 * n_atoms as f64, 0.0);
    }
    let minus = plus.adjoint();
    Ok((
        OperatorMatrix::general(plus),
        OperatorMatrix::general(minus),
        OperatorMatrix {
            entries: z,
            hermitian: true,
        },
    ))
}

/// Real matrix of `sum_{n,m} w_nm sigma_n+ sigma_m-` over all pairs,
/// including `n = m` when `with_diagonal`.
pub(crate) fn hopping_matrix(weights: &RMatrix, with_diagonal: bool) -> RMatrix {
    let n_atoms = weights.nrows();
    let dim = 1usize << n_atoms;
    let mut out = RMatrix::zeros(dim, dim);
    for s in 0..dim {
        for m in 0..n_atoms {
            let bm = atom_bit(n_atoms, m);
            if s & bm == 0 {
                continue;
            }
            let lowered = s & !bm;
            for n in 0..n_atoms {
                if n == m && !with_diagonal {
                    continue;
                }
                let bn = atom_bit(n_atoms, n);
                if lowered & bn != 0 {
                    continue;
                }
                out[(lowered | bn, s)] += weights[(n, m)];
            }
        }
    }
    out
}

fn check_matrices(m: &CouplingMatrices) -> Result<()> {
    let n = m.n_atoms();
    dimension(n)?;
    let d = m.delta_total();
    for i in 0..n {
        for j in 0..i {
            let tol = 1e-12 * d[(i, j)].abs().max(d[(j, i)].abs());
            if (d[(i, j)] - d[(j, i)]).abs() > tol {
                return Err(invalid("shift matrix is not symmetric"));
            }
            let tol = 1e-12 * m.gamma[(i, j)].abs().max(m.gamma[(j, i)].abs());
            if (m.gamma[(i, j)] - m.gamma[(j, i)]).abs() > tol {
                return Err(invalid("decay matrix is not symmetric"));
            }
        }
    }
    Ok(())
}

fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|v| C64::new(v, 0.0))
}

/// Dipole-dipole Hamiltonian `sum_{n != m} Delta_nm sigma_n+ sigma_m-` (rate units).
pub fn build_h_dipole(matrices: &CouplingMatrices) -> Result<OperatorMatrix> {
    check_matrices(matrices)?;
    Ok(OperatorMatrix {
        entries: to_complex(&hopping_matrix(&matrices.delta_total(), false)),
        hermitian: true,
    })
}

/// Decay operator `sum_{n,m} gamma_nm sigma_n+ sigma_m-` (diagonal included).
pub fn decay_operator(matrices: &CouplingMatrices) -> RMatrix {
    hopping_matrix(&matrices.gamma, true)
}

/// Generator of the no-jump evolution,
/// `H_d - i sum_{n,m} gamma_nm sigma_n+ sigma_m-`.
///
/// Its anti-Hermitian part equals half the total jump rate operator, so the
/// unnormalized state norm decays at the rate prescribed by the master
/// equation.
pub fn build_h_between_jumps(matrices: &CouplingMatrices) -> Result<OperatorMatrix> {
    let h = build_h_dipole(matrices)?;
    let g = decay_operator(matrices);
    let entries = CMatrix::from_fn(h.dim(), h.dim(), |i, j| h.entries[(i, j)] - C64::new(0.0, g[(i, j)]));
    Ok(OperatorMatrix::general(entries))
}

/// State vector with an explicit normalization tag.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    pub amplitudes: CVector,
    pub n_atoms: usize,
    pub normalized: bool,
}

impl PureState {
    /// Wraps amplitudes, tagging them normalized when `|norm - 1| < 1e-9`.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(invalid(format!("state length {dim} is not 2^N")));
        }
        let n_atoms = dim.trailing_zeros() as usize;
        dimension(n_atoms)?;
        let normalized = (amplitudes.norm() - 1.0).abs() < 1e-9;
        Ok(Self {
            amplitudes,
            n_atoms,
            normalized,
        })
    }

    /// Normalized copy of `amplitudes`.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(invalid("cannot normalize a zero state"));
        }
        Self::new(amplitudes.unscale(norm))
    }

    /// Computational basis state with the given index.
    pub fn basis(n_atoms: usize, index: usize) -> Result<Self> {
        let dim = dimension(n_atoms)?;
        if index >= dim {
            return Err(invalid(format!("basis index {index} out of range")));
        }
        let mut v = CVector::zeros(dim);
        v[index] = C64::new(1.0, 0.0);
        Self::new(v)
    }

    pub fn ground(n_atoms: usize) -> Result<Self> {
        Self::basis(n_atoms, 0)
    }

    pub fn fully_excited(n_atoms: usize) -> Result<Self> {
        Self::basis(n_atoms, dimension(n_atoms)? - 1)
    }

    /// Single-excitation state `sum_n c_n |atom n excited>`, normalized.
    pub fn single_excitation(coeffs: &[C64]) -> Result<Self> {
        let n_atoms = coeffs.len();
        let dim = dimension(n_atoms)?;
        let mut v = CVector::zeros(dim);
        for (atom, c) in coeffs.iter().enumerate() {
            v[atom_bit(n_atoms, atom)] = *c;
        }
        Self::normalized(v)
    }

    /// Symmetric Dicke state with `k` excitations.
    pub fn dicke(n_atoms: usize, k: usize) -> Result<Self> {
        let dim = dimension(n_atoms)?;
        if k > n_atoms {
            return Err(invalid(format!("{k} excitations exceed {n_atoms} atoms")));
        }
        let v = CVector::from_fn(dim, |s, _| {
            if excitations(s) as usize == k {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self::normalized(v)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// `<self|a|self>`.
    pub fn expectation(&self, a: &CMatrix) -> C64 {
        self.amplitudes.dotc(&(a * &self.amplitudes))
    }

    /// `|<self|other>|^2`.
    pub fn overlap_sqr(&self, other: &PureState) -> f64 {
        self.amplitudes.dotc(&other.amplitudes).norm_sqr()
    }

    /// Highest excitation number with nonzero amplitude.
    pub fn max_excitation(&self) -> u32 {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(s, _)| excitations(s))
            .max()
            .unwrap_or(0)
    }
}

/// The three single-excitation states of three atoms.
///
/// With atom 0 as the leading ket symbol:
/// `b = (|100> + |010> - 2|001>)/sqrt6`, `c = (|100> - |010>)/sqrt2`,
/// `d = (|100> + |010> + |001>)/sqrt3`.
pub fn dicke_basis_three() -> (PureState, PureState, PureState) {
    let r = |v: f64| C64::new(v, 0.0);
    let b = PureState::single_excitation(&[r(1.0), r(1.0), r(-2.0)]);
    let c = PureState::single_excitation(&[r(1.0), r(-1.0), r(0.0)]);
    let d = PureState::single_excitation(&[r(1.0), r(1.0), r(1.0)]);
    match (b, c, d) {
        (Ok(b), Ok(c), Ok(d)) => (b, c, d),
        _ => unreachable!("fixed three-atom states are valid"),
    }
}

/// The dipole Hamiltonian of three atoms restricted to `{b, c, d}`.
///
/// Off-diagonal entries are the pairwise-difference mixing elements; the
/// diagonal is the expectation of the full Hamiltonian in each state.
pub fn three_atom_mixing_hamiltonian(delta_12: f64, delta_23: f64, delta_13: f64) -> Matrix3<f64> {
    let s3 = libm::sqrt(3.0);
    let s6 = libm::sqrt(6.0);
    let bc = (delta_23 - delta_13) / s3;
    let bd = (2.0 * delta_12 - delta_23 - delta_13) / (3.0 * SQRT_2);
    let cd = (delta_13 - delta_23) / s6;
    let bb = (delta_12 - 2.0 * delta_13 - 2.0 * delta_23) / 3.0;
    let cc = -delta_12;
    let dd = 2.0 * (delta_12 + delta_13 + delta_23) / 3.0;
    Matrix3::new(bb, bc, bd, bc, cc, cd, bd, cd, dd)
}

/// `<s|A|s>` for each state in `states`, as a Gram-like matrix `<s_i|A|s_j>`.
pub fn project(a: &CMatrix, states: &[&PureState]) -> CMatrix {
    let k = states.len();
    let images: Vec<CVector> = states.iter().map(|s| a * &s.amplitudes).collect();
    CMatrix::from_fn(k, k, |i, j| states[i].amplitudes.dotc(&images[j]))
}

/// Frobenius norm of `[a, b]`.
pub fn commutator_norm(a: &CMatrix, b: &CMatrix) -> f64 {
    (a * b - b * a).norm()
}
