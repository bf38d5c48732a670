//! Hypothesis tests used by the acceptance checks.

use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, StudentsT};
use statrs::statistics::Statistics;

use crate::error::{Result, RunError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// One-sided p-value for `mean(a) > mean(b)`.
    pub p_greater: f64,
}

pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(RunError::Empty("Welch test needs two samples of size >= 2".into()));
    }
    let (ma, mb) = (a.mean(), b.mean());
    let (va, vb) = (a.variance() / a.len() as f64, b.variance() / b.len() as f64);
    let se2 = va + vb;
    if se2 == 0.0 {
        let p = if ma > mb { 0.0 } else { 1.0 };
        return Ok(WelchResult {
            t: if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY },
            df: f64::INFINITY,
            p_greater: p,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| RunError::Empty(format!("t distribution: {e}")))?;
    Ok(WelchResult {
        t,
        df,
        p_greater: dist.sf(t),
    })
}

/// `P(X <= k)` for `X ~ Binomial(n, p)`.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> Result<f64> {
    let dist = Binomial::new(p, n).map_err(|e| RunError::Empty(format!("binomial: {e}")))?;
    Ok(dist.cdf(k))
}

/// One-sided test that `count_a` is below `count_b`, conditioning on the
/// total: under equal rates `count_a ~ Binomial(count_a + count_b, 1/2)`.
pub fn binomial_fewer(count_a: u64, count_b: u64) -> Result<f64> {
    binomial_cdf(count_a, count_a + count_b, 0.5)
}

/// Kolmogorov-Smirnov statistic and asymptotic p-value against `cdf`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(RunError::Empty("KS test needs samples".into()));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d = 0.0f64;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    Ok((d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)))
}

/// `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Sample mean and standard error.
pub fn mean_and_se(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = x.mean();
    if x.len() < 2 {
        return (m, f64::NAN);
    }
    (m, (x.variance() / x.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welch_detects_shift() {
        let a: Vec<f64> = (0..50).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
        let b: Vec<f64> = (0..50).map(|i| (i % 5) as f64 * 0.1).collect();
        let r = welch_t_test(&a, &b).unwrap();
        assert!(r.t > 0.0 && r.p_greater < 1e-10);
        let s = welch_t_test(&b, &a).unwrap();
        assert!(s.p_greater > 0.99);
    }

    #[test]
    fn binomial_values() {
        assert!((binomial_cdf(0, 3, 0.5).unwrap() - 0.125).abs() < 1e-12);
        assert!((binomial_fewer(5, 5).unwrap() - 0.623046875).abs() < 1e-9);
        assert!(binomial_fewer(9000, 10000).unwrap() < 1e-10);
    }

    proptest::proptest! {
        #[test]
        fn binomial_tail_matches_direct_sum(a in 0u64..40, b in 0u64..40) {
            let n = a + b;
            let mut direct = 0.0;
            let mut c = 1.0f64;
            for k in 0..=a {
                if k > 0 {
                    c *= (n - k + 1) as f64 / k as f64;
                }
                direct += c;
            }
            direct /= 2f64.powi(n as i32);
            proptest::prop_assert!((binomial_fewer(a, b).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn kolmogorov_reference_points() {
        assert!((kolmogorov_sf(1.0) - 0.26999967).abs() < 1e-6);
        for (lambda, alpha) in [(1.2239, 0.10), (1.3581, 0.05), (1.6276, 0.01)] {
            assert!((kolmogorov_sf(lambda) - alpha).abs() < 2e-4);
        }
    }

    #[test]
    fn ks_accepts_uniform_grid() {
        let x: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let (d, p) = ks_test(&x, |v| v.clamp(0.0, 1.0)).unwrap();
        assert!(d < 1e-3 && p > 0.99);
        let (_, p) = ks_test(&x, |v| (v * v).clamp(0.0, 1.0)).unwrap();
        assert!(p < 1e-6);
    }
}
