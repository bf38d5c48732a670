//! Double-double arithmetic (about 31 significant digits).
//!
//! A value is the unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
//! Products use Dekker splitting so no hardware FMA is assumed.

use core::cmp::Ordering;
use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const SPLITTER: f64 = 134_217_729.0; // 2^27 + 1

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    let t = SPLITTER * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const PI: Dd = Dd {
        hi: core::f64::consts::PI,
        lo: 1.2246467991473532e-16,
    };
    pub const LN2: Dd = Dd {
        hi: core::f64::consts::LN_2,
        lo: 2.3190468138462996e-17,
    };
    pub const SQRT2: Dd = Dd {
        hi: core::f64::consts::SQRT_2,
        lo: -9.667293313452913e-17,
    };
    // pi/2 split into three non-overlapping doubles for argument reduction.
    const HALF_PI_PARTS: [f64; 3] = [
        core::f64::consts::FRAC_PI_2,
        6.123233995736766e-17,
        -1.4973849048591698e-33,
    ];

    #[inline]
    pub const fn new(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }

    pub fn ldexp(self, k: i32) -> Dd {
        Dd {
            hi: libm::ldexp(self.hi, k),
            lo: libm::ldexp(self.lo, k),
        }
    }

    pub fn sqr(self) -> Dd {
        self * self
    }

    pub fn recip(self) -> Dd {
        Dd::ONE / self
    }

    pub fn powi(self, n: u32) -> Dd {
        let mut acc = Dd::ONE;
        let mut base = self;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc *= base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let y = libm::sqrt(self.hi);
        let ysq = Dd::from(y) * Dd::from(y);
        Dd::from(y) + (self - ysq) * Dd::from(0.5 / y)
    }

    /// `exp(x) - 1`, accurate for small `|x|`.
    pub fn exp_m1(self) -> Dd {
        if libm::fabs(self.hi) > 0.5 {
            return self.exp() - Dd::ONE;
        }
        // Halve until tiny, sum the series, then double with (1+s)^2 - 1 = s(2+s).
        let mut r = self;
        let mut halvings = 0;
        while libm::fabs(r.hi) > 1.0 / 1024.0 {
            r = r.ldexp(-1);
            halvings += 1;
        }
        let mut term = r;
        let mut sum = r;
        let mut k = 2.0;
        while libm::fabs(term.hi) > 1e-36 * libm::fabs(sum.hi).max(1e-300) {
            term = term * r / Dd::from(k);
            sum += term;
            k += 1.0;
        }
        for _ in 0..halvings {
            sum = sum * (sum + Dd::from(2.0));
        }
        sum
    }

    pub fn exp(self) -> Dd {
        if self.hi > 709.0 {
            return Dd::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let k = libm::round(self.hi / Dd::LN2.hi);
        let r = self - Dd::LN2.mul_f64(k);
        (r.exp_m1() + Dd::ONE).ldexp(k as i32)
    }

    /// Natural logarithm by one Newton step on `exp`.
    pub fn ln(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::new(f64::NAN);
        }
        let y = Dd::from(libm::log(self.hi));
        y + self * (-y).exp() - Dd::ONE
    }

    fn reduce_half_pi(self) -> (Dd, i64) {
        let k = libm::round(self.hi / Dd::HALF_PI_PARTS[0]);
        let mut r = self;
        for p in Dd::HALF_PI_PARTS {
            let (h, l) = two_prod(k, p);
            r -= Dd { hi: h, lo: l };
        }
        (r, k as i64)
    }

    fn sin_cos_taylor(r: Dd) -> (Dd, Dd) {
        let r2 = r * r;
        let mut s_term = r;
        let mut s = r;
        let mut c_term = Dd::ONE;
        let mut c = Dd::ONE;
        let mut k = 1.0;
        loop {
            c_term = -(c_term * r2) / Dd::from(k * (k + 1.0));
            s_term = -(s_term * r2) / Dd::from((k + 1.0) * (k + 2.0));
            c += c_term;
            s += s_term;
            k += 2.0;
            if libm::fabs(c_term.hi) < 1e-36 && libm::fabs(s_term.hi) < 1e-36 * libm::fabs(s.hi) {
                break;
            }
            if k > 80.0 {
                break;
            }
        }
        (s, c)
    }

    pub fn sin_cos(self) -> (Dd, Dd) {
        let (r, k) = self.reduce_half_pi();
        let (s, c) = Dd::sin_cos_taylor(r);
        match k.rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }

    pub fn sin(self) -> Dd {
        self.sin_cos().0
    }

    pub fn cos(self) -> Dd {
        self.sin_cos().1
    }
}

impl From<f64> for Dd {
    #[inline]
    fn from(x: f64) -> Dd {
        Dd::new(x)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * b.lo + self.lo * b.hi));
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

impl AddAssign for Dd {
    #[inline]
    fn add_assign(&mut self, b: Dd) {
        *self = *self + b;
    }
}

impl SubAssign for Dd {
    #[inline]
    fn sub_assign(&mut self, b: Dd) {
        *self = *self - b;
    }
}

impl MulAssign for Dd {
    #[inline]
    fn mul_assign(&mut self, b: Dd) {
        *self = *self * b;
    }
}

/// Complex number with double-double parts.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CDd {
    pub re: Dd,
    pub im: Dd,
}

impl CDd {
    pub const ZERO: CDd = CDd {
        re: Dd::ZERO,
        im: Dd::ZERO,
    };

    #[inline]
    pub fn from_c64(z: crate::C64) -> CDd {
        CDd {
            re: Dd::new(z.re),
            im: Dd::new(z.im),
        }
    }

    #[inline]
    pub fn to_c64(self) -> crate::C64 {
        crate::C64::new(self.re.to_f64(), self.im.to_f64())
    }

    #[inline]
    pub fn scale(self, s: Dd) -> CDd {
        CDd {
            re: self.re * s,
            im: self.im * s,
        }
    }

    #[inline]
    pub fn norm_sqr(self) -> Dd {
        self.re * self.re + self.im * self.im
    }

    /// `self += a * b`.
    #[inline]
    pub fn mul_acc(&mut self, a: CDd, b: CDd) {
        self.re += a.re * b.re - a.im * b.im;
        self.im += a.re * b.im + a.im * b.re;
    }
}

impl Add for CDd {
    type Output = CDd;
    #[inline]
    fn add(self, b: CDd) -> CDd {
        CDd {
            re: self.re + b.re,
            im: self.im + b.im,
        }
    }
}

impl Sub for CDd {
    type Output = CDd;
    #[inline]
    fn sub(self, b: CDd) -> CDd {
        CDd {
            re: self.re - b.re,
            im: self.im - b.im,
        }
    }
}

impl Mul for CDd {
    type Output = CDd;
    #[inline]
    fn mul(self, b: CDd) -> CDd {
        let mut out = CDd::ZERO;
        out.mul_acc(self, b);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Dd, b: f64, tol: f64) -> bool {
        libm::fabs(a.to_f64() - b) <= tol * libm::fabs(b).max(1e-300)
    }

    #[test]
    fn arithmetic_is_exact_beyond_double() {
        let one_third = Dd::ONE / Dd::new(3.0);
        let back = one_third * Dd::new(3.0) - Dd::ONE;
        assert!(libm::fabs(back.to_f64()) < 1e-31);
        let x = Dd::new(1.0) + Dd::new(1e-20);
        assert_eq!(x.lo, 1e-20);
    }

    #[test]
    fn elementary_functions_agree_with_libm() {
        for &x in &[-3.7, -0.3, 1e-9, 0.5, 1.0, 2.0, 7.25, 40.0] {
            let d = Dd::new(x);
            assert!(close(d.exp(), libm::exp(x), 1e-15));
            assert!(close(d.sin(), libm::sin(x), 1e-14));
            assert!(close(d.cos(), libm::cos(x), 1e-14));
            if x > 0.0 {
                assert!(close(d.ln(), libm::log(x), 1e-15));
            }
        }
    }

    #[test]
    fn identities_hold_to_double_double_precision() {
        for &x in &[0.1, 0.7, 1.3, 3.0, 11.0, 123.4] {
            let d = Dd::new(x);
            let (s, c) = d.sin_cos();
            let one = s * s + c * c - Dd::ONE;
            assert!(libm::fabs(one.to_f64()) < 1e-30, "{x}: {one:?}");
            let round = d.exp().ln() - d;
            assert!(libm::fabs(round.to_f64()) < 1e-29 * x.max(1.0), "{x}: {round:?}");
        }
        let sin_pi = Dd::PI.sin();
        assert!(libm::fabs(sin_pi.to_f64()) < 1e-31);
        let e = Dd::ONE.exp();
        // e to 32 digits: 2.7182818284590452353602874713527
        let err = e - Dd::new(core::f64::consts::E) - Dd::new(1.4456468917292502e-16);
        assert!(libm::fabs(err.to_f64()) < 1e-31);
    }

    #[test]
    fn expm1_keeps_relative_precision() {
        let x = Dd::new(1e-12);
        let v = x.exp_m1();
        let expect = Dd::new(1e-12) + Dd::new(5e-25);
        assert!(libm::fabs((v - expect).to_f64()) < 1e-36);
    }
}
