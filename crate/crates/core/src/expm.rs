//! Exponentials of constant generators by scaled Taylor series and
//! repeated squaring.
//!
//! A generator `A` is sampled at base step `h0` with `|A h0|_1 <= 1/2`.
//! The table holds `exp(A h0 2^j)`; any time `t = n h0 + tau` is reached by
//! the binary digits of `n` plus a Taylor matvec for the remainder `tau`.

use alloc::vec;
use alloc::vec::Vec;

use crate::ddouble::{CDd, Dd};
use crate::{CMatrix, CVector, C64};

/// Target `|A h0|_1`.
const BASE_NORM: f64 = 0.5;
const TAYLOR_TERMS_F64: usize = 20;
const TAYLOR_TERMS_DD: usize = 32;

/// Maximum absolute column sum.
pub(crate) fn norm1(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn base_step(norm: f64, t_max: f64) -> f64 {
    if norm > 0.0 {
        (BASE_NORM / norm).min(t_max.max(f64::MIN_POSITIVE))
    } else {
        t_max.max(1.0)
    }
}

fn levels_for(h0: f64, t_max: f64) -> usize {
    let mut levels = 1;
    let mut span = h0;
    while span < t_max {
        span *= 2.0;
        levels += 1;
    }
    levels
}

/// `exp(A tau) v` by Taylor series; requires `|A tau|` of order one or less.
pub(crate) fn taylor_apply(a: &CMatrix, tau: f64, v: &CVector) -> CVector {
    let mut term = v.clone();
    let mut acc = v.clone();
    let mut k = 1.0;
    while k <= 60.0 {
        term = (a * &term) * C64::new(tau / k, 0.0);
        acc += &term;
        if term.norm() <= 1e-18 * acc.norm() {
            break;
        }
        k += 1.0;
    }
    acc
}

/// Dyadic table of `exp(A h0 2^j)` in double precision.
#[derive(Debug, Clone)]
pub(crate) struct DyadicExp {
    generator: CMatrix,
    h0: f64,
    powers: Vec<CMatrix>,
}

impl DyadicExp {
    pub(crate) fn new(generator: CMatrix, t_max: f64) -> Self {
        let h0 = base_step(norm1(&generator), t_max);
        let dim = generator.nrows();
        let scaled = &generator * C64::new(h0, 0.0);
        let mut e = CMatrix::identity(dim, dim);
        for k in (1..=TAYLOR_TERMS_F64).rev() {
            e = CMatrix::identity(dim, dim) + (&scaled * e) * C64::new(1.0 / k as f64, 0.0);
        }
        let levels = levels_for(h0, t_max);
        let mut powers = Vec::with_capacity(levels);
        powers.push(e);
        for j in 1..levels {
            let p = &powers[j - 1] * &powers[j - 1];
            powers.push(p);
        }
        Self { generator, h0, powers }
    }

    pub(crate) fn h0(&self) -> f64 {
        self.h0
    }

    pub(crate) fn levels(&self) -> usize {
        self.powers.len()
    }

    /// `exp(A h0 2^j) v`.
    pub(crate) fn apply_level(&self, j: usize, v: &CVector) -> CVector {
        &self.powers[j] * v
    }

    pub(crate) fn apply_remainder(&self, tau: f64, v: &CVector) -> CVector {
        if tau <= 0.0 {
            v.clone()
        } else {
            taylor_apply(&self.generator, tau, v)
        }
    }

    /// `exp(A t) v` for `0 <= t`; times beyond the table are reached by
    /// repeating the top level.
    pub(crate) fn apply(&self, t: f64, v: &CVector) -> CVector {
        let mut out = v.clone();
        let mut remaining = t;
        for j in (0..self.levels()).rev() {
            let span = self.h0 * (1u64 << j) as f64;
            while remaining >= span {
                out = self.apply_level(j, &out);
                remaining -= span;
            }
        }
        self.apply_remainder(remaining, &out)
    }
}

/// Dense square matrix of double-double complex entries, row major.
#[derive(Debug, Clone)]
pub(crate) struct DdMatrix {
    n: usize,
    data: Vec<CDd>,
}

impl DdMatrix {
    fn identity(n: usize) -> Self {
        let mut data = vec![CDd::ZERO; n * n];
        for i in 0..n {
            data[i * n + i].re = Dd::ONE;
        }
        Self { n, data }
    }

    pub(crate) fn from_c64(a: &CMatrix) -> Self {
        let n = a.nrows();
        let data = (0..n * n).map(|k| CDd::from_c64(a[(k / n, k % n)])).collect();
        Self { n, data }
    }

    fn mul(&self, b: &DdMatrix) -> DdMatrix {
        let n = self.n;
        let mut out = vec![CDd::ZERO; n * n];
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let dst = &mut out[i * n..(i + 1) * n];
            for (k, &aik) in row.iter().enumerate() {
                if aik.re.hi == 0.0 && aik.im.hi == 0.0 {
                    continue;
                }
                let brow = &b.data[k * n..(k + 1) * n];
                for (d, &bkj) in dst.iter_mut().zip(brow) {
                    d.mul_acc(aik, bkj);
                }
            }
        }
        DdMatrix { n, data: out }
    }

    fn scale(&self, s: Dd) -> DdMatrix {
        DdMatrix {
            n: self.n,
            data: self.data.iter().map(|z| z.scale(s)).collect(),
        }
    }

    fn add_identity(&mut self) {
        for i in 0..self.n {
            self.data[i * self.n + i].re += Dd::ONE;
        }
    }

    pub(crate) fn matvec(&self, v: &[CDd]) -> Vec<CDd> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut acc = CDd::ZERO;
                for (a, x) in self.data[i * n..(i + 1) * n].iter().zip(v) {
                    acc.mul_acc(*a, *x);
                }
                acc
            })
            .collect()
    }
}

/// Dyadic exponential table held in double-double precision.
#[derive(Debug, Clone)]
pub(crate) struct DdDyadicExp {
    generator: DdMatrix,
    h0: f64,
    powers: Vec<DdMatrix>,
}

impl DdDyadicExp {
    pub(crate) fn new(generator: &CMatrix, t_max: f64) -> Self {
        let h0 = base_step(norm1(generator), t_max);
        let g = DdMatrix::from_c64(generator);
        let n = g.n;
        let scaled = g.scale(Dd::new(h0));
        let mut e = DdMatrix::identity(n);
        for k in (1..=TAYLOR_TERMS_DD).rev() {
            e = scaled.mul(&e).scale(Dd::ONE / Dd::new(k as f64));
            e.add_identity();
        }
        let levels = levels_for(h0, t_max);
        let mut powers = Vec::with_capacity(levels);
        powers.push(e);
        for j in 1..levels {
            let p = powers[j - 1].mul(&powers[j - 1]);
            powers.push(p);
        }
        Self { generator: g, h0, powers }
    }

    fn remainder(&self, tau: Dd, v: Vec<CDd>) -> Vec<CDd> {
        if tau.hi <= 0.0 {
            return v;
        }
        let mut term = v.clone();
        let mut acc = v;
        for k in 1..=TAYLOR_TERMS_DD + 8 {
            let coef = tau / Dd::new(k as f64);
            term = self.generator.matvec(&term).into_iter().map(|z| z.scale(coef)).collect();
            let mut small = true;
            for (a, t) in acc.iter_mut().zip(&term) {
                *a = *a + *t;
                if libm::fabs(t.re.hi) > 1e-34 || libm::fabs(t.im.hi) > 1e-34 {
                    small = false;
                }
            }
            if small {
                break;
            }
        }
        acc
    }

    /// `exp(A t) v` with all intermediate arithmetic in double-double.
    pub(crate) fn apply(&self, t: f64, v: Vec<CDd>) -> Vec<CDd> {
        let mut out = v;
        let mut remaining = Dd::new(t);
        for j in (0..self.powers.len()).rev() {
            let span = Dd::new(self.h0).ldexp(j as i32);
            while remaining >= span {
                out = self.powers[j].matvec(&out);
                remaining -= span;
            }
        }
        self.remainder(remaining, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation(w: f64, g: f64) -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(-g, 0.0), C64::new(0.0, -w), C64::new(0.0, -w), C64::new(-g, 0.0)],
        )
    }

    #[test]
    fn dyadic_exponential_matches_closed_form() {
        let (w, g) = (3.0e5, 0.7);
        let a = rotation(w, g);
        let e = DyadicExp::new(a.clone(), 20.0);
        let v = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        for &t in &[0.0, 1e-7, 3.3e-3, 1.0, 7.77] {
            let out = e.apply(t, &v);
            let damp = (-g * t).exp();
            let expect0 = C64::new(damp * (w * t).cos(), 0.0);
            let expect1 = C64::new(0.0, -damp * (w * t).sin());
            let tol = 1e-15 * w * t.max(1e-6) * 10.0 + 1e-13;
            assert!((out[0] - expect0).norm() < tol, "t = {t}");
            assert!((out[1] - expect1).norm() < tol, "t = {t}");
        }
    }

    #[test]
    fn dd_table_preserves_norm_of_unitary_flow() {
        let a = rotation(4.0e6, 0.0);
        let e = DdDyadicExp::new(&a, 10.0);
        let v = vec![
            CDd {
                re: Dd::ONE,
                im: Dd::ZERO,
            },
            CDd::ZERO,
        ];
        let out = e.apply(9.87654321, v);
        let n = out[0].norm_sqr() + out[1].norm_sqr() - Dd::ONE;
        assert!(libm::fabs(n.to_f64()) < 1e-20);
        let c = Dd::new(4.0e6).mul_f64(9.87654321).cos().to_f64();
        assert!((out[0].re.to_f64() - c).abs() < 1e-14);
    }
}
