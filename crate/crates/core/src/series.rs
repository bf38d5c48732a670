//! Cancellation-free kernels shared by the coefficient formulas.
//!
//! Each kernel switches to its Taylor series below an explicit threshold
//! where the closed form loses more than a few digits.

/// Argument below which the trigonometric kernels use their series.
pub(crate) const TRIG_SERIES_MAX: f64 = 1.0;
/// Argument below which the exponential kernels use their series.
pub(crate) const EXP_SERIES_MAX: f64 = 1.0;

const TERMS: usize = 30;

/// `cos x / x^2 - sin x / x^3 + sin x / x`.
pub(crate) fn alpha(x: f64) -> f64 {
    if x < TRIG_SERIES_MAX {
        // coefficient of x^(2j): (-1)^(j+1) [1/(2j+2)! - 1/(2j+3)!] + (-1)^j/(2j+1)!
        let x2 = x * x;
        let mut sum = 0.0;
        let mut pow = 1.0;
        let mut inv_fact = 1.0; // 1/(2j+1)!
        let mut sign = 1.0;
        for j in 0..TERMS / 2 {
            let k = (2 * j + 1) as f64;
            let f2 = inv_fact / (k + 1.0);
            let f3 = f2 / (k + 2.0);
            sum += pow * (sign * inv_fact - sign * (f2 - f3));
            inv_fact = f3;
            pow *= x2;
            sign = -sign;
        }
        sum
    } else {
        let (s, c) = (libm::sin(x), libm::cos(x));
        c / (x * x) - s / (x * x * x) + s / x
    }
}

/// `3 sin x / x^3 - 3 cos x / x^2 - sin x / x`.
pub(crate) fn beta(x: f64) -> f64 {
    if x < TRIG_SERIES_MAX {
        // coefficient of x^(2j): 3(-1)^(j+1) [1/(2j+3)! - 1/(2j+2)!] - (-1)^j/(2j+1)!
        let x2 = x * x;
        let mut sum = 0.0;
        let mut pow = 1.0;
        let mut inv_fact = 1.0;
        let mut sign = 1.0;
        for j in 0..TERMS / 2 {
            let k = (2 * j + 1) as f64;
            let f2 = inv_fact / (k + 1.0);
            let f3 = f2 / (k + 2.0);
            sum += pow * (-3.0 * sign * (f3 - f2) - sign * inv_fact);
            inv_fact = f3;
            pow *= x2;
            sign = -sign;
        }
        sum
    } else {
        let (s, c) = (libm::sin(x), libm::cos(x));
        3.0 * s / (x * x * x) - 3.0 * c / (x * x) - s / x
    }
}

/// `(cos x + x sin x - 1 - x^2/2) / x^3`.
pub(crate) fn trig_remainder(x: f64) -> f64 {
    if x < TRIG_SERIES_MAX {
        // sum_{j>=2} (-1)^j (1 - 2j)/(2j)! x^(2j-3)
        let x2 = x * x;
        let mut pow = x;
        let mut inv_fact = 1.0 / 24.0;
        let mut sum = 0.0;
        let mut sign = 1.0;
        for j in 2..TERMS / 2 + 2 {
            let jf = j as f64;
            sum += sign * (1.0 - 2.0 * jf) * inv_fact * pow;
            inv_fact /= (2.0 * jf + 1.0) * (2.0 * jf + 2.0);
            pow *= x2;
            sign = -sign;
        }
        sum
    } else {
        let (s, c) = (libm::sin(x), libm::cos(x));
        (c + x * s - 1.0 - 0.5 * x * x) / (x * x * x)
    }
}

/// `(e^{-y}(1 + y) - 1 + y^2/2) / y^3`.
pub(crate) fn exp_remainder(y: f64) -> f64 {
    if y < EXP_SERIES_MAX {
        // sum_{n>=3} (-1)^(n+1) (n-1)/n! y^(n-3)
        let mut pow = 1.0;
        let mut inv_fact = 1.0 / 6.0;
        let mut sign = 1.0;
        let mut sum = 0.0;
        for n in 3..TERMS + 3 {
            let nf = n as f64;
            sum += sign * (nf - 1.0) * inv_fact * pow;
            inv_fact /= nf + 1.0;
            pow *= y;
            sign = -sign;
        }
        sum
    } else {
        (libm::exp(-y) * (1.0 + y) - 1.0 + 0.5 * y * y) / (y * y * y)
    }
}

/// `[1 - e^{-u}((1 + u) cos u + u sin u)] / u^3`.
pub(crate) fn damped_trig(u: f64) -> f64 {
    if u < EXP_SERIES_MAX {
        // e^{(-1+i)u} = sum (c_k + i s_k) u^k; the bracket's u^n coefficient
        // is c_n + c_{n-1} + s_{n-1}, and orders 0..2 cancel against the 1.
        // (-1+i)^2 / 2! = -i
        let (mut c, mut s) = (0.0, -1.0);
        let mut sum = 0.0;
        let mut pow = 1.0;
        for n in 3..TERMS + 3 {
            let nf = n as f64;
            let (cn, sn) = ((-c - s) / nf, (c - s) / nf);
            let a = cn + c + s;
            sum -= a * pow;
            c = cn;
            s = sn;
            pow *= u;
        }
        sum
    } else {
        let e = libm::exp(-u);
        (1.0 - e * ((1.0 + u) * libm::cos(u) + u * libm::sin(u))) / (u * u * u)
    }
}

/// `2 sin^2(x/2) / x`, i.e. `(1 - cos x)/x` without cancellation.
pub(crate) fn one_minus_cos_over(x: f64) -> f64 {
    let h = libm::sin(0.5 * x);
    2.0 * h * h / x
}

/// `expm1(-y) / y`, tending to -1 at the origin.
pub(crate) fn expm1_neg_over(y: f64) -> f64 {
    if y == 0.0 {
        -1.0
    } else {
        libm::expm1(-y) / y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_alpha(x: f64) -> f64 {
        let (s, c) = (x.sin(), x.cos());
        c / (x * x) - s / (x * x * x) + s / x
    }

    #[test]
    fn series_branches_match_closed_forms_at_the_switch() {
        for &x in &[0.6, 0.9, 0.999_999, 1.0] {
            let d = direct_alpha(x);
            assert!((alpha(x) - d).abs() < 1e-13, "alpha {x}");
            let s = (x.sin(), x.cos());
            let b = 3.0 * s.0 / (x * x * x) - 3.0 * s.1 / (x * x) - s.0 / x;
            assert!((beta(x) - b).abs() < 1e-13, "beta {x}");
            let q = (s.1 + x * s.0 - 1.0 - 0.5 * x * x) / (x * x * x);
            assert!((trig_remainder(x) - q).abs() < 1e-13, "q {x}");
            let p = ((-x).exp() * (1.0 + x) - 1.0 + 0.5 * x * x) / (x * x * x);
            assert!((exp_remainder(x) - p).abs() < 1e-13, "p {x}");
            let f = (1.0 - (-x).exp() * ((1.0 + x) * s.1 + x * s.0)) / (x * x * x);
            assert!((damped_trig(x) - f).abs() < 1e-13, "f1 {x}");
        }
    }

    #[test]
    fn leading_terms() {
        let x = 1e-4;
        assert!((alpha(x) - (2.0 / 3.0 - 2.0 * x * x / 15.0)).abs() < 1e-17);
        assert!((beta(x) - x * x / 15.0).abs() < 1e-17);
        assert!((trig_remainder(x) - (-x / 8.0 + x * x * x / 144.0)).abs() < 1e-20);
        assert!((exp_remainder(x) - (1.0 / 3.0 - x / 8.0 + x * x / 30.0)).abs() < 1e-14);
        assert!((damped_trig(x) - (2.0 / 3.0 - x / 2.0)).abs() < 1e-8);
        assert_eq!(expm1_neg_over(0.0), -1.0);
    }
}
