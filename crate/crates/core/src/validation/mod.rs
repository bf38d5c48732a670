//! Independent oracles: extended-precision coefficients, a brute-force
//! Liouvillian with its own matrix exponential, and closed-form decay.

mod liouvillian;
mod precision;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use liouvillian::{brute_force_evolve, brute_force_first_crossing, brute_force_liouvillian, expm_pade13, BRUTE_FORCE_MAX_ATOMS};
pub use precision::{alpha_dd, beta_dd, high_precision_coefficients, ReferenceCoefficients};

use crate::coupling::{
    delta_par_reg, delta_par_unreg, delta_perp_reg, delta_perp_unreg, gamma_reg, gamma_unreg, CouplingParams,
};
use crate::error::{invalid, Result};

/// One oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub inputs: String,
    pub reference: f64,
    pub value: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    /// Relative tolerance, or absolute when the reference is zero.
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn compare(name: &str, inputs: String, reference: f64, value: f64, tolerance: f64) -> Self {
        let abs_error = (value - reference).abs();
        let rel_error = if reference != 0.0 { abs_error / reference.abs() } else { abs_error };
        let pass = rel_error <= tolerance;
        Self {
            name: String::from(name),
            inputs,
            reference,
            value,
            abs_error,
            rel_error,
            tolerance,
            pass,
        }
    }
}

/// Excited population `exp(-gamma_tilde t)` of an isolated atom.
pub fn two_level_analytic(gamma_tilde: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid("time must be non-negative"));
    }
    if !(gamma_tilde >= 0.0 && gamma_tilde.is_finite()) {
        return Err(invalid("decay rate must be finite and non-negative"));
    }
    Ok(libm::exp(-gamma_tilde * t))
}

/// Double-precision coefficients against the extended-precision reference.
pub fn certify_coefficients(xi: f64, eta: f64, params: &CouplingParams, tolerance: f64) -> Result<Vec<OracleReport>> {
    let r = high_precision_coefficients(xi, eta, params)?;
    let inputs = format!("xi={xi:e}, eta={eta}");
    let pairs = [
        ("gamma_unreg", r.gamma_unreg, gamma_unreg(xi, eta, params)?),
        ("delta_perp_unreg", r.delta_perp_unreg, delta_perp_unreg(xi, eta, params)?),
        ("delta_par_unreg", r.delta_par_unreg, delta_par_unreg(xi, eta, params)?),
        ("gamma_reg", r.gamma_reg, gamma_reg(xi, eta, params)?),
        ("delta_perp_reg", r.delta_perp_reg, delta_perp_reg(xi, eta, params)?),
        ("delta_par_reg", r.delta_par_reg, delta_par_reg(xi, eta, params)?),
    ];
    Ok(pairs
        .iter()
        .map(|(name, reference, value)| OracleReport::compare(name, inputs.clone(), reference.to_f64(), *value, tolerance))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{alpha_fn, CouplingMatrices};
    use crate::ddouble::Dd;
    use crate::geometry::linear_chain;
    use crate::master::DensityMatrix;
    use crate::operators::PureState;
    use crate::{CMatrix, C64};
    use nalgebra::Complex;
    use proptest::prelude::*;

    #[test]
    fn analytic_decay() {
        assert_eq!(two_level_analytic(2.0, 0.0).unwrap(), 1.0);
        assert!((two_level_analytic(2.0, 0.5).unwrap() - (-1.0f64).exp()).abs() < 1e-16);
        assert!(two_level_analytic(1.0, -1.0).is_err());
    }

    #[test]
    fn alpha_reference_at_tiny_argument() {
        let a = alpha_dd(Dd::new(1e-8)).to_f64();
        assert!((a - 2.0 / 3.0).abs() < 1e-15);
        assert!((alpha_fn(1e-8).unwrap() - a).abs() < 1e-14);
    }

    #[test]
    fn double_precision_certified_away_from_zeros() {
        let p = CouplingParams::default();
        for &xi in &[1e-7, 1e-5, 3e-3, 0.07, 0.4, 0.9, 1.1, 2.5, 7.0] {
            for &eta in &[0.0, 0.25, 1.0] {
                for rep in certify_coefficients(xi, eta, &p, 1e-10).unwrap() {
                    if rep.name == "delta_par_unreg" && (eta - 1.0 / 3.0).abs() < 1e-9 {
                        continue;
                    }
                    assert!(rep.pass, "{rep:?}");
                }
            }
        }
    }

    #[test]
    fn pade_matches_series_and_inverse() {
        let a = CMatrix::from_fn(5, 5, |i, j| C64::new((i as f64 - 2.0 * j as f64) * 0.3, (i * j) as f64 * 0.1));
        let e = expm_pade13(&a).unwrap();
        let mut series = CMatrix::identity(5, 5);
        let mut term = CMatrix::identity(5, 5);
        for k in 1..80 {
            term = (&term * &a) / Complex::new(k as f64, 0.0);
            series += &term;
        }
        assert!((&e - &series).norm() < 1e-11 * series.norm());
        let skew = (&a - a.adjoint()) * C64::new(40.0, 0.0);
        let u = expm_pade13(&skew).unwrap();
        assert!((&u * u.adjoint() - CMatrix::identity(5, 5)).norm() < 1e-11);
    }

    #[test]
    fn zero_couplings_give_zero_superoperator() {
        let m = CouplingMatrices::from_parts(
            crate::RMatrix::zeros(2, 2),
            crate::RMatrix::zeros(2, 2),
            crate::RMatrix::zeros(2, 2),
            crate::coupling::CouplingMode::None,
        )
        .unwrap();
        assert_eq!(brute_force_liouvillian(&m).unwrap().norm(), 0.0);
    }

    #[test]
    fn single_atom_spectrum() {
        let g = 1.3;
        let m = CouplingMatrices::uniform(1, 0.5 * g, 0.0).unwrap();
        let l = brute_force_liouvillian(&m).unwrap();
        assert!(l.iter().all(|z| z.im == 0.0));
        let ev = l.map(|z| z.re).complex_eigenvalues();
        let mut re: Vec<f64> = ev.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + g).abs() < 1e-12);
        assert!((re[1] + 0.5 * g).abs() < 1e-12 && (re[2] + 0.5 * g).abs() < 1e-12);
        assert!(re[3].abs() < 1e-12);
    }

    #[test]
    fn refuses_large_systems() {
        let cfg = linear_chain(5, 0.5, false).unwrap();
        let m = crate::coupling::build_coupling_matrices(&cfg, &CouplingParams::default()).unwrap();
        assert!(matches!(brute_force_liouvillian(&m), Err(crate::Error::TooLarge(_))));
    }

    #[test]
    fn brute_force_single_atom_decay() {
        let m = CouplingMatrices::uniform(1, 0.5, 0.0).unwrap();
        let rho = DensityMatrix::from_pure(&PureState::basis(1, 1).unwrap());
        let out = brute_force_evolve(&rho, &m, &[0.0, 0.7, 3.0]).unwrap();
        for (t, r) in [0.0, 0.7, 3.0].iter().zip(&out) {
            assert!((r.entries[(1, 1)].re - two_level_analytic(1.0, *t).unwrap()).abs() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn reference_satisfies_radiation_identity(x in 0.05f64..3.0) {
            let xd = Dd::new(x);
            let sum = (alpha_dd(xd) + beta_dd(xd)).to_f64();
            let (s, c) = (x.sin(), x.cos());
            let direct = 2.0 * s / (x * x * x) - 2.0 * c / (x * x);
            prop_assert!((sum - direct).abs() < 1e-12 + 1e-15 / (x * x * x));
        }
    }
}
