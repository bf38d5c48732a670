//! Dense Liouvillian built term by term from Kronecker products.
//!
//! `vec` is column stacking, so `vec(A X B) = (B^T kron A) vec(X)`.

use alloc::format;
use alloc::vec::Vec;

use crate::coupling::CouplingMatrices;
use crate::error::{invalid, Error, Result};
use crate::master::DensityMatrix;
use crate::operators::{sigma_op, SigmaKind};
use crate::{CMatrix, CVector, C64};

/// Largest chain handled by the brute-force oracle.
pub const BRUTE_FORCE_MAX_ATOMS: usize = 4;

/// `4^N x 4^N` superoperator of the master equation.
pub fn brute_force_liouvillian(matrices: &CouplingMatrices) -> Result<CMatrix> {
    let n = matrices.n_atoms();
    if n > BRUTE_FORCE_MAX_ATOMS {
        return Err(Error::TooLarge(format!(
            "brute-force Liouvillian handles at most {BRUTE_FORCE_MAX_ATOMS} atoms, got {n}"
        )));
    }
    if n == 0 {
        return Err(invalid("at least one atom is required"));
    }
    let plus: Vec<CMatrix> = (0..n).map(|a| sigma_op(n, a, SigmaKind::Plus).map(|o| o.entries)).collect::<Result<_>>()?;
    let minus: Vec<CMatrix> = (0..n).map(|a| sigma_op(n, a, SigmaKind::Minus).map(|o| o.entries)).collect::<Result<_>>()?;
    let dim = 1usize << n;
    let id = CMatrix::identity(dim, dim);
    let delta = matrices.delta_total();
    let mut h = CMatrix::zeros(dim, dim);
    for a in 0..n {
        for b in 0..n {
            if a != b {
                h += (&plus[a] * &minus[b]) * C64::new(delta[(a, b)], 0.0);
            }
        }
    }
    let minus_i = C64::new(0.0, -1.0);
    let mut l = (id.kronecker(&h) - h.transpose().kronecker(&id)) * minus_i;
    for a in 0..n {
        for b in 0..n {
            let g = matrices.gamma[(a, b)];
            if g == 0.0 {
                continue;
            }
            let pm = &plus[a] * &minus[b];
            let term = plus[a].transpose().kronecker(&minus[b]) * C64::new(2.0, 0.0)
                - id.kronecker(&pm)
                - pm.transpose().kronecker(&id);
            l += term * C64::new(g, 0.0);
        }
    }
    Ok(l)
}

fn vec_of(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

fn unvec(v: &CVector, dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

/// `exp(a)` by 13th-order Padé approximation with scaling and squaring.
pub fn expm_pade13(a: &CMatrix) -> Result<CMatrix> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm = a
        .column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    if !norm.is_finite() {
        return Err(invalid("matrix exponential of a non-finite matrix"));
    }
    let s = if norm > THETA13 {
        libm::ceil(libm::log2(norm / THETA13)) as i32
    } else {
        0
    };
    let a = a * C64::new(libm::ldexp(1.0, -s), 0.0);
    let c = |k: usize| C64::new(B[k], 0.0);
    let id = CMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * c(13) + &a4 * c(11) + &a2 * c(9));
    let u = &a * (u_inner + &a6 * c(7) + &a4 * c(5) + &a2 * c(3) + &id * c(1));
    let v_inner = &a6 * (&a6 * c(12) + &a4 * c(10) + &a2 * c(8));
    let v = v_inner + &a6 * c(6) + &a4 * c(4) + &a2 * c(2) + &id * c(0);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| invalid("Padé denominator is singular"))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// Evolves `rho0` by `exp(L t)` at each requested time.
pub fn brute_force_evolve(rho0: &DensityMatrix, matrices: &CouplingMatrices, times: &[f64]) -> Result<Vec<DensityMatrix>> {
    let l = brute_force_liouvillian(matrices)?;
    let dim = rho0.dim();
    if dim * dim != l.nrows() {
        return Err(invalid("density matrix dimension differs from the couplings"));
    }
    let v0 = vec_of(&rho0.entries);
    times
        .iter()
        .map(|&t| {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(invalid("times must be finite and non-negative"));
            }
            let e = expm_pade13(&(&l * C64::new(t, 0.0)))?;
            Ok(DensityMatrix {
                entries: unvec(&(e * &v0), dim),
            })
        })
        .collect()
}

/// First time in `[0, t_max]` at which `population` crosses `level` upward,
/// located by bisection on the brute-force propagator.
pub fn brute_force_first_crossing(
    rho0: &DensityMatrix,
    matrices: &CouplingMatrices,
    population: impl Fn(&DensityMatrix) -> f64,
    level: f64,
    t_max: f64,
    scan_points: usize,
    rel_tol: f64,
) -> Result<Option<f64>> {
    let l = brute_force_liouvillian(matrices)?;
    let dim = rho0.dim();
    let v0 = vec_of(&rho0.entries);
    let value_at = |t: f64| -> Result<f64> {
        let e = expm_pade13(&(&l * C64::new(t, 0.0)))?;
        Ok(population(&DensityMatrix {
            entries: unvec(&(e * &v0), dim),
        }))
    };
    let step = t_max / scan_points.max(1) as f64;
    let e_step = expm_pade13(&(&l * C64::new(step, 0.0)))?;
    let mut v = v0.clone();
    let mut prev_t = 0.0;
    if population(rho0) > level {
        return Ok(Some(0.0));
    }
    for k in 1..=scan_points.max(1) {
        v = &e_step * v;
        let t = k as f64 * step;
        let p = population(&DensityMatrix {
            entries: unvec(&v, dim),
        });
        if p > level {
            let (mut lo, mut hi) = (prev_t, t);
            while hi - lo > rel_tol * hi {
                let mid = 0.5 * (lo + hi);
                if value_at(mid)? > level {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(0.5 * (lo + hi)));
        }
        prev_t = t;
    }
    Ok(None)
}
