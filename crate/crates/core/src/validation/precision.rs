//! Reference coupling coefficients in double-double arithmetic.
//!
//! Closed forms are assembled from truncated exponential tails, so every
//! cancelling low-order term is removed symbolically before any rounding.
//! Large arguments use the literal expressions with double-double
//! `sin`, `cos` and `exp`.

use crate::coupling::CouplingParams;
use crate::ddouble::{CDd, Dd};
use crate::error::{invalid, Result};

/// Below this argument the tail expansions are used.
const TAIL_MAX: f64 = 0.5;
const MAX_TERMS: usize = 80;

/// `sum_{k >= from} z^k / k!`.
fn exp_tail(z: CDd, from: usize) -> CDd {
    let mut term = CDd {
        re: Dd::ONE,
        im: Dd::ZERO,
    };
    let mut acc = CDd::ZERO;
    for k in 0..from + MAX_TERMS {
        if k > 0 {
            term = (term * z).scale(Dd::ONE / Dd::new(k as f64));
        }
        if k >= from {
            acc = acc + term;
            if libm::fabs(term.re.hi) + libm::fabs(term.im.hi) < 1e-40 * (libm::fabs(acc.re.hi) + libm::fabs(acc.im.hi)) {
                break;
            }
        }
    }
    acc
}

fn imag(x: Dd) -> CDd {
    CDd { re: Dd::ZERO, im: x }
}

fn real(x: Dd) -> CDd {
    CDd { re: x, im: Dd::ZERO }
}

/// `cos x - sum_{k < kmin} (-1)^k x^{2k} / (2k)!`.
fn cos_tail(x: Dd, kmin: usize) -> Dd {
    exp_tail(imag(x), 2 * kmin).re
}

/// `sin x - sum_{k < kmin} (-1)^k x^{2k+1} / (2k+1)!`.
fn sin_tail(x: Dd, kmin: usize) -> Dd {
    exp_tail(imag(x), 2 * kmin + 1).im
}

/// `cos x / x^2 - sin x / x^3 + sin x / x`.
pub fn alpha_dd(x: Dd) -> Dd {
    let x3 = x * x * x;
    if x.hi < TAIL_MAX {
        // x cos x - sin x = x (cos x - 1) - (sin x - x)
        (x * cos_tail(x, 1) - sin_tail(x, 1)) / x3 + (x + sin_tail(x, 1)) / x
    } else {
        let (s, c) = x.sin_cos();
        c / (x * x) - s / x3 + s / x
    }
}

/// `3 sin x / x^3 - 3 cos x / x^2 - sin x / x`.
pub fn beta_dd(x: Dd) -> Dd {
    let x2 = x * x;
    let x3 = x2 * x;
    if x.hi < TAIL_MAX {
        // numerator 3 (sin - x cos) - x^2 sin with the x^3 terms removed
        let num = sin_tail(x, 2).mul_f64(3.0) - (x * cos_tail(x, 2)).mul_f64(3.0) - x2 * sin_tail(x, 1);
        num / x3
    } else {
        let (s, c) = x.sin_cos();
        s.mul_f64(3.0) / x3 - c.mul_f64(3.0) / x2 - s / x
    }
}

/// `(cos x + x sin x - 1 - x^2/2) / x^3`.
fn trig_remainder_dd(x: Dd) -> Dd {
    let x3 = x * x * x;
    if x.hi < TAIL_MAX {
        (cos_tail(x, 2) + x * sin_tail(x, 1)) / x3
    } else {
        let (s, c) = x.sin_cos();
        (c + x * s - Dd::ONE - (x * x).mul_f64(0.5)) / x3
    }
}

/// `(e^{-y} (1 + y) - 1 + y^2 / 2) / y^3`.
fn exp_remainder_dd(y: Dd) -> Dd {
    let y3 = y * y * y;
    if y.hi < TAIL_MAX {
        let t3 = exp_tail(real(-y), 3).re;
        y3.mul_f64(0.5) / y3 + (t3 * (Dd::ONE + y)) / y3
    } else {
        ((-y).exp() * (Dd::ONE + y) - Dd::ONE + (y * y).mul_f64(0.5)) / y3
    }
}

/// `[1 - e^{-u}((1 + u) cos u + u sin u)] / u^3`.
fn damped_trig_dd(u: Dd) -> Dd {
    let u3 = u * u * u;
    if u.hi < TAIL_MAX {
        let z = CDd { re: -u, im: u };
        let t = exp_tail(z, 3);
        (u3 - (Dd::ONE + u) * t.re - u * t.im) / u3
    } else {
        let e = (-u).exp();
        let (s, c) = u.sin_cos();
        (Dd::ONE - e * ((Dd::ONE + u) * c + u * s)) / u3
    }
}

fn expm1_neg_over_dd(y: Dd) -> Dd {
    if y.hi == 0.0 {
        -Dd::ONE
    } else {
        (-y).exp_m1() / y
    }
}

fn one_minus_cos_over_dd(x: Dd) -> Dd {
    if x.hi < TAIL_MAX {
        -cos_tail(x, 1) / x
    } else {
        (Dd::ONE - x.cos()) / x
    }
}

/// Every coupling coefficient at one pair geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCoefficients {
    pub gamma_unreg: Dd,
    pub delta_perp_unreg: Dd,
    pub delta_par_unreg: Dd,
    pub gamma_reg: Dd,
    pub delta_perp_reg: Dd,
    pub delta_par_reg: Dd,
}

/// Coefficients to about 30 significant digits, independent of the
/// double-precision kernels.
pub fn high_precision_coefficients(xi: f64, eta: f64, params: &CouplingParams) -> Result<ReferenceCoefficients> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(invalid("separation must be positive and finite"));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid("orientation parameter must lie in [0, 1]"));
    }
    params.validate()?;
    let x = Dd::new(xi);
    let eta = Dd::new(eta);
    let one_m3eta = Dd::ONE - eta.mul_f64(3.0);
    let one_meta = Dd::ONE - eta;
    let gamma = Dd::new(params.gamma);
    let gamma_t = Dd::new(params.gamma_tilde());
    let three_q = Dd::new(0.75);
    let radiation = alpha_dd(x) + eta * beta_dd(x);

    let x3 = x * x * x;
    let (s, c) = x.sin_cos();
    let aniso_unreg = s / (x * x) + (c - Dd::ONE) / x3;
    let aniso_unreg = if x.hi < TAIL_MAX {
        (sin_tail(x, 1) * x + cos_tail(x, 1) + (x * x)) / x3
    } else {
        aniso_unreg
    };

    let l = Dd::new(params.lambda_perp_over_k0);
    let y = x * l;
    let perp_reg_bracket = one_m3eta * (l * exp_remainder_dd(y) + trig_remainder_dd(x))
        + one_meta * (l * expm1_neg_over_dd(y) + one_minus_cos_over_dd(x));

    let m = Dd::new(params.lambda_par_over_k0);
    let u = x * m / Dd::SQRT2;
    let damped_sin = if u.hi < TAIL_MAX {
        // e^{-u} sin u / u = Im e^{(-1+i)u} / u
        let z = CDd { re: -u, im: u };
        (u + exp_tail(z, 2).im) / u
    } else {
        (-u).exp() * u.sin() / u
    };
    let par_scale = three_q * gamma * m * m * m / (Dd::SQRT2.mul_f64(2.0));

    Ok(ReferenceCoefficients {
        gamma_unreg: three_q * gamma * radiation,
        delta_perp_unreg: three_q * gamma * ((eta - Dd::ONE) * c / x + one_m3eta * aniso_unreg),
        delta_par_unreg: three_q * gamma * one_m3eta / x3,
        gamma_reg: three_q * gamma_t * radiation,
        delta_perp_reg: three_q * gamma_t * perp_reg_bracket,
        delta_par_reg: par_scale * (one_m3eta * damped_trig_dd(u) + eta.mul_f64(2.0) * damped_sin),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Dd, b: f64, tol: f64) -> bool {
        libm::fabs((a - Dd::new(b)).to_f64()) <= tol * libm::fabs(b)
    }

    #[test]
    fn tails_and_literal_forms_meet() {
        for &x in &[0.3, 0.49999, 0.50001, 0.7] {
            let xd = Dd::new(x);
            let (s, c) = xd.sin_cos();
            let lit_alpha = c / (xd * xd) - s / (xd * xd * xd) + s / xd;
            assert!(libm::fabs((alpha_dd(xd) - lit_alpha).to_f64()) < 1e-28);
            let lit_beta = s.mul_f64(3.0) / (xd * xd * xd) - c.mul_f64(3.0) / (xd * xd) - s / xd;
            assert!(libm::fabs((beta_dd(xd) - lit_beta).to_f64()) < 1e-27);
        }
    }

    #[test]
    fn small_argument_limits() {
        assert!(close(alpha_dd(Dd::new(1e-8)), 2.0 / 3.0, 1e-15));
        assert!(close(beta_dd(Dd::new(1e-4)), 1e-8 / 15.0, 1e-6));
        assert!(close(trig_remainder_dd(Dd::new(1e-6)), -1e-6 / 8.0, 1e-9));
        assert!(close(exp_remainder_dd(Dd::new(1e-9)), 1.0 / 3.0, 1e-8));
        assert!(close(damped_trig_dd(Dd::new(1e-9)), 2.0 / 3.0, 1e-8));
    }

    #[test]
    fn contact_values() {
        let p = CouplingParams::default();
        let r = high_precision_coefficients(1e-8, 0.0, &p).unwrap();
        let par = p.gamma * p.lambda_par_over_k0.powi(3) / (4.0 * core::f64::consts::SQRT_2);
        assert!(close(r.delta_par_reg, par, 1e-5));
        assert!(close(r.gamma_reg, 0.5 * p.gamma_tilde(), 1e-12));
    }
}
