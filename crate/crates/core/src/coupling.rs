//! Dipole-dipole coupling coefficients and the `N x N` coupling matrices.
//!
//! All rates carry the unit of the supplied single-atom rate `gamma`.
//! `L` and `M` below are the transverse and longitudinal cutoffs divided by
//! `k0`.

use alloc::format;
use core::f64::consts::{PI, SQRT_2};

use nalgebra::SymmetricEigen;

use crate::error::{invalid, Error, Result};
use crate::geometry::AtomConfig;
use crate::series;
use crate::RMatrix;

/// Hydrogen Lyman-alpha wavelength in meters.
pub const LYMAN_ALPHA_M: f64 = 121.6e-9;
/// Electron Compton wavelength in meters.
pub const COMPTON_WAVELENGTH_M: f64 = 2.426_310_238_67e-12;
/// Bohr radius in meters.
pub const BOHR_RADIUS_M: f64 = 5.291_772_109_03e-11;

/// Which coefficient formulas fill the shift matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CouplingMode {
    /// Bare retarded dipole-dipole coefficients.
    Unregularized,
    /// Cutoff-regularized coefficients.
    Regularized,
    /// First-order small-separation expansion of the regularized shifts.
    DickeExpansion,
    /// Shifts switched off; decay stays collective.
    None,
}

/// Which formula fills the decay matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecayModel {
    Unregularized,
    Regularized,
    /// Every entry equals `gamma_tilde / 2`.
    DickeLimit,
}

impl CouplingMode {
    /// Decay model paired with the mode unless overridden.
    pub fn default_decay(self) -> DecayModel {
        match self {
            CouplingMode::Unregularized => DecayModel::Unregularized,
            CouplingMode::Regularized | CouplingMode::None => DecayModel::Regularized,
            CouplingMode::DickeExpansion => DecayModel::DickeLimit,
        }
    }
}

/// Physical parameters of the coupling model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    pub mode: CouplingMode,
    /// Overrides `mode.default_decay()` when set.
    pub decay: Option<DecayModel>,
    pub lambda_perp_over_k0: f64,
    pub lambda_par_over_k0: f64,
    pub gamma: f64,
    /// `k0 * a0`, linking `gamma` to the hydrogen ground-state energy.
    pub k0_a0: f64,
}

impl Default for CouplingParams {
    fn default() -> Self {
        Self::hydrogen(CouplingMode::Regularized, LYMAN_ALPHA_M)
    }
}

impl CouplingParams {
    /// Cutoffs for a hydrogen-like emitter of wavelength `lambda0_m`:
    /// `L = lambda0 / lambda_c` and `M = (3 / 4 pi)^(1/3) / (k0 a0)`.
    pub fn hydrogen(mode: CouplingMode, lambda0_m: f64) -> Self {
        let k0_a0 = 2.0 * PI * BOHR_RADIUS_M / lambda0_m;
        Self {
            mode,
            decay: None,
            lambda_perp_over_k0: lambda0_m / COMPTON_WAVELENGTH_M,
            lambda_par_over_k0: libm::cbrt(3.0 / (4.0 * PI)) / k0_a0,
            gamma: 1.0,
            k0_a0,
        }
    }

    pub fn with_mode(mut self, mode: CouplingMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_decay(mut self, decay: DecayModel) -> Self {
        self.decay = Some(decay);
        self
    }

    pub fn with_cutoffs(mut self, lambda_perp_over_k0: f64, lambda_par_over_k0: f64) -> Self {
        self.lambda_perp_over_k0 = lambda_perp_over_k0;
        self.lambda_par_over_k0 = lambda_par_over_k0;
        self
    }

    pub fn decay_model(&self) -> DecayModel {
        self.decay.unwrap_or_else(|| self.mode.default_decay())
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("lambda_perp_over_k0", self.lambda_perp_over_k0),
            ("lambda_par_over_k0", self.lambda_par_over_k0),
            ("gamma", self.gamma),
            ("k0_a0", self.k0_a0),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Regularized single-atom rate `gamma L^2 / (L^2 + 1)`.
    pub fn gamma_tilde(&self) -> f64 {
        let l2 = self.lambda_perp_over_k0 * self.lambda_perp_over_k0;
        self.gamma * (l2 / (l2 + 1.0))
    }

    /// Hydrogen ground-state energy in units of `hbar * gamma`.
    pub fn e0_over_gamma(&self) -> f64 {
        3.0 / (8.0 * self.k0_a0 * self.k0_a0 * self.k0_a0)
    }

    /// Hydrogen ground-state energy as a rate (`hbar = 1`).
    pub fn e0_rate(&self) -> f64 {
        self.gamma * self.e0_over_gamma()
    }
}

fn check_xi(xi: f64) -> Result<()> {
    if xi > 0.0 && xi.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("separation must be positive and finite, got {xi}")))
    }
}

fn check_pair(xi: f64, eta: f64) -> Result<()> {
    check_xi(xi)?;
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(invalid(format!("orientation parameter must lie in [0, 1], got {eta}")))
    }
}

/// Angular radiation function `cos x/x^2 - sin x/x^3 + sin x/x`.
pub fn alpha_fn(x: f64) -> Result<f64> {
    check_xi(x)?;
    Ok(series::alpha(x))
}

/// Angular radiation function `3 sin x/x^3 - 3 cos x/x^2 - sin x/x`.
pub fn beta_fn(x: f64) -> Result<f64> {
    check_xi(x)?;
    Ok(series::beta(x))
}

/// Collective decay rate without cutoff.
pub fn gamma_unreg(xi: f64, eta: f64, params: &CouplingParams) -> Result<f64> {
    check_pair(xi, eta)?;
    Ok(0.75 * params.gamma * (series::alpha(xi) + eta * series::beta(xi)))
}

/// Static (Coulomb-like) shift without cutoff, `3 gamma (1 - 3 eta) / (4 xi^3)`.
pub fn delta_par_unreg(xi: f64, eta: f64, params: &CouplingParams) -> Result<f64> {
    check_pair(xi, eta)?;
    Ok(0.75 * params.gamma * (1.0 - 3.0 * eta) / (xi * xi * xi))
}

/// Transverse shift without cutoff (static part subtracted).
pub fn delta_perp_unreg(xi: f64, eta: f64, params: &CouplingParams) -> Result<f64> {
    check_pair(xi, eta)?;
    // sin/x^2 + (cos - 1)/x^3 = q(x) + 1/(2x)
    let aniso = series::trig_remainder(xi) + 0.5 / xi;
    Ok(0.75 * params.gamma * ((eta - 1.0) * libm::cos(xi) / xi + (1.0 - 3.0 * eta) * aniso))
}

/// Retarded total shift without cutoff; diverges as `xi^-3`.
pub fn delta_sum_unreg(xi: f64, eta: f64, params: &CouplingParams) -> Result<f64> {
    check_pair(xi, eta)?;
    let (s, c) = (libm::sin(xi), libm::cos(xi));
    let x3 = xi * xi * xi;
    Ok(0.75 * params.gamma * ((eta - 1.0) * c / xi + (1.0 - 3.0 * eta) * (s / (xi * xi) + c / x3)))
}

/// Regularized collective decay rate.
pub fn gamma_reg(xi: f64, eta: f64, params: &CouplingParams) -> Result<f64> {
    check_pair(xi, eta)?;
    params.validate()?;
    Ok(0.75 * params.gamma_tilde() * (series::alpha(xi) + eta * series::beta(xi)))
}

/// Regularized transverse shift; tends to `-gamma_tilde L / 2` at contact.
pub fn delta_perp_reg(xi: f64, eta: f64, params: &CouplingParams) -> Result<f64> {
    check_pair(xi, eta)?;
    params.validate()?;
    let l = params.lambda_perp_over_k0;
    let y = xi * l;
    let aniso = l * series::exp_remainder(y) + series::trig_remainder(xi);
    let iso = l * series::expm1_neg_over(y) + series::one_minus_cos_over(xi);
    Ok(0.75 * params.gamma_tilde() * ((1.0 - 3.0 * eta) * aniso + (1.0 - eta) * iso))
}

/// Regularized static shift; tends to `gamma M^3 / (4 sqrt 2)` at contact.
pub fn delta_par_reg(xi: f64, eta: f64, params: &CouplingParams) -> Result<f64> {
    check_pair(xi, eta)?;
    params.validate()?;
    let m = params.lambda_par_over_k0;
    let u = xi * m / SQRT_2;
    let damped_sin = if u == 0.0 {
        1.0
    } else {
        libm::exp(-u) * libm::sin(u) / u
    };
    let scale = 0.75 * params.gamma * m * m * m / (2.0 * SQRT_2);
    Ok(scale * ((1.0 - 3.0 * eta) * series::damped_trig(u) + 2.0 * eta * damped_sin))
}

/// First-order small-separation forms of the regularized coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearDickeExpansion {
    pub delta_par_lin: f64,
    pub delta_perp_lin: f64,
    pub gamma_const: f64,
    /// Uniform part of the total shift.
    pub delta0: f64,
    /// Separation-dependent part of the total shift.
    pub delta1: f64,
}

impl NearDickeExpansion {
    pub fn total(&self) -> f64 {
        self.delta_par_lin + self.delta_perp_lin
    }
}

/// Linearizations in `xi` around contact.
///
/// `delta0` and `delta1` are the hydrogen-unit split of the static shift,
/// `E0 / (2 sqrt2 pi)` and its first-order correction, with `r / a0 = xi / (k0 a0)`.
pub fn expansions_near_dicke(xi: f64, eta: f64, params: &CouplingParams) -> Result<NearDickeExpansion> {
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(invalid(format!("separation must be non-negative, got {xi}")));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid(format!("orientation parameter must lie in [0, 1], got {eta}")));
    }
    params.validate()?;
    let g = params.gamma;
    let l = params.lambda_perp_over_k0;
    let m = params.lambda_par_over_k0;
    let delta_par_lin = g * m * m * m / (4.0 * SQRT_2) - 3.0 * g * (1.0 + eta) / 32.0 * (m * m) * (m * m) * xi;
    let delta_perp_lin = -0.5 * g * l * l * l / (1.0 + l * l) + 3.0 * g * (3.0 - eta) / 32.0 * l * l * xi;
    let e0 = params.e0_rate();
    let shape = libm::pow(3.0, 4.0 / 3.0) / (libm::pow(2.0, 2.0 / 3.0) * libm::cbrt(PI));
    Ok(NearDickeExpansion {
        delta_par_lin,
        delta_perp_lin,
        gamma_const: 0.5 * params.gamma_tilde(),
        delta0: e0 / (2.0 * SQRT_2 * PI),
        delta1: -e0 / (2.0 * PI) * (1.0 + eta) / 8.0 * shape * (xi / params.k0_a0),
    })
}

/// Single-atom radiative shift `(gamma_tilde / pi) ln L`. Never enters the
/// dynamics.
pub fn lamb_shift_two_level(params: &CouplingParams) -> Result<f64> {
    params.validate()?;
    if params.lambda_perp_over_k0 <= 1.0 {
        return Err(invalid("transverse cutoff must exceed k0"));
    }
    Ok(params.gamma_tilde() / PI * libm::log(params.lambda_perp_over_k0))
}

/// Decay and shift matrices for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrices {
    pub gamma: RMatrix,
    pub delta_perp: RMatrix,
    pub delta_par: RMatrix,
    pub mode: CouplingMode,
}

impl CouplingMatrices {
    /// Wraps user-supplied matrices after checking shape, symmetry, the zero
    /// shift diagonal and positivity of the decay matrix.
    pub fn from_parts(gamma: RMatrix, delta_perp: RMatrix, delta_par: RMatrix, mode: CouplingMode) -> Result<Self> {
        let n = gamma.nrows();
        for (name, m) in [("gamma", &gamma), ("delta_perp", &delta_perp), ("delta_par", &delta_par)] {
            if m.nrows() != n || m.ncols() != n || n == 0 {
                return Err(invalid(format!("{name} must be {n} x {n}")));
            }
            if !is_symmetric(m) {
                return Err(invalid(format!("{name} is not symmetric")));
            }
        }
        if (0..n).any(|k| delta_perp[(k, k)] != 0.0 || delta_par[(k, k)] != 0.0) {
            return Err(invalid("shift matrices must have a zero diagonal"));
        }
        let out = Self {
            gamma,
            delta_perp,
            delta_par,
            mode,
        };
        out.check_decay_psd()?;
        Ok(out)
    }

    /// Every decay entry `gamma_entry`, every off-diagonal shift `delta`
    /// (stored as the static part).
    pub fn uniform(n_atoms: usize, gamma_entry: f64, delta: f64) -> Result<Self> {
        if n_atoms == 0 {
            return Err(invalid("need at least one atom"));
        }
        let gamma = RMatrix::from_element(n_atoms, n_atoms, gamma_entry);
        let mut par = RMatrix::from_element(n_atoms, n_atoms, delta);
        par.fill_diagonal(0.0);
        Self::from_parts(gamma, RMatrix::zeros(n_atoms, n_atoms), par, CouplingMode::DickeExpansion)
    }

    pub fn n_atoms(&self) -> usize {
        self.gamma.nrows()
    }

    /// Total shift `delta_perp + delta_par`.
    pub fn delta_total(&self) -> RMatrix {
        &self.delta_perp + &self.delta_par
    }

    /// Eigenvalues of the decay matrix, ascending.
    pub fn decay_spectrum(&self) -> nalgebra::DVector<f64> {
        let mut ev = SymmetricEigen::new(self.gamma.clone()).eigenvalues;
        ev.as_mut_slice().sort_by(f64::total_cmp);
        ev
    }

    fn check_decay_psd(&self) -> Result<()> {
        let scale = self.gamma.diagonal().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let lowest = self.decay_spectrum()[0];
        if lowest < -1e-10 * scale.max(f64::MIN_POSITIVE) * 2.0 {
            return Err(Error::InvalidCoupling(format!(
                "decay matrix has negative eigenvalue {lowest}"
            )));
        }
        Ok(())
    }
}

fn is_symmetric(m: &RMatrix) -> bool {
    let n = m.nrows();
    (0..n).all(|i| {
        (0..i).all(|j| {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
        })
    })
}

/// Fills the coupling matrices of `config` with the formulas selected by
/// `params`. Shift diagonals are zero; decay diagonals are the contact limit.
pub fn build_coupling_matrices(config: &AtomConfig, params: &CouplingParams) -> Result<CouplingMatrices> {
    params.validate()?;
    let n = config.n_atoms();
    let decay = params.decay_model();
    let self_rate = match decay {
        DecayModel::Unregularized => 0.5 * params.gamma,
        DecayModel::Regularized | DecayModel::DickeLimit => 0.5 * params.gamma_tilde(),
    };
    let mut gamma = RMatrix::from_diagonal_element(n, n, self_rate);
    let mut perp = RMatrix::zeros(n, n);
    let mut par = RMatrix::zeros(n, n);
    for (i, j, g) in config.pairs() {
        let rate = match decay {
            DecayModel::Unregularized => gamma_unreg(g.xi, g.eta, params)?,
            DecayModel::Regularized => gamma_reg(g.xi, g.eta, params)?,
            DecayModel::DickeLimit => self_rate,
        };
        let (dp, dl) = match params.mode {
            CouplingMode::Unregularized => (
                delta_perp_unreg(g.xi, g.eta, params)?,
                delta_par_unreg(g.xi, g.eta, params)?,
            ),
            CouplingMode::Regularized => (
                delta_perp_reg(g.xi, g.eta, params)?,
                delta_par_reg(g.xi, g.eta, params)?,
            ),
            CouplingMode::DickeExpansion => {
                let e = expansions_near_dicke(g.xi, g.eta, params)?;
                (e.delta_perp_lin, e.delta_par_lin)
            }
            CouplingMode::None => (0.0, 0.0),
        };
        for (a, b) in [(i, j), (j, i)] {
            gamma[(a, b)] = rate;
            perp[(a, b)] = dp;
            par[(a, b)] = dl;
        }
    }
    let out = CouplingMatrices {
        gamma,
        delta_perp: perp,
        delta_par: par,
        mode: params.mode,
    };
    out.check_decay_psd()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{equilateral_triangle, linear_chain};
    use proptest::prelude::*;

    fn unit_params() -> CouplingParams {
        CouplingParams::default()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn radiation_functions_at_special_points() {
        assert!((alpha_fn(PI).unwrap() + 1.0 / (PI * PI)).abs() < 1e-15);
        assert!((alpha_fn(2.0 * PI).unwrap() - 1.0 / (4.0 * PI * PI)).abs() < 1e-15);
        assert!((beta_fn(PI).unwrap() - 3.0 / (PI * PI)).abs() < 1e-15);
        let b = beta_fn(PI / 2.0).unwrap();
        assert!((b - (24.0 / PI.powi(3) - 2.0 / PI)).abs() < 1e-15);
        assert!((alpha_fn(1e-8).unwrap() - 2.0 / 3.0).abs() < 1e-10);
        assert!(beta_fn(1e-8).unwrap().abs() < 1e-10);
        assert!(alpha_fn(0.0).is_err());
        assert!(beta_fn(-1.0).is_err());
    }

    #[test]
    fn unregularized_values() {
        let p = unit_params();
        assert!((gamma_unreg(PI, 0.0, &p).unwrap() + 0.75 / (PI * PI)).abs() < 1e-15);
        assert!((gamma_unreg(PI, 1.0, &p).unwrap() - 1.5 / (PI * PI)).abs() < 1e-15);
        assert!((gamma_unreg(1e-9, 0.3, &p).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(delta_par_unreg(1.0, 0.0, &p).unwrap(), 0.75);
        assert_eq!(delta_par_unreg(2.0, 1.0 / 3.0, &p).unwrap(), 0.0);
        assert!((delta_par_unreg(0.1, 1.0, &p).unwrap() + 1500.0).abs() < 1e-9);
        let s = delta_perp_unreg(1.0, 0.0, &p).unwrap() + delta_par_unreg(1.0, 0.0, &p).unwrap();
        assert!((s - 0.75 * 1f64.sin()).abs() < 1e-15);
        let t = delta_sum_unreg(1.0, 1.0 / 3.0, &p).unwrap();
        assert!((t + 0.5 * 1f64.cos()).abs() < 1e-15);
        assert!(delta_par_unreg(0.0, 0.0, &p).is_err());
        assert!(gamma_unreg(1.0, 1.5, &p).is_err());
    }

    #[test]
    fn perp_forms_agree() {
        let p = unit_params();
        for &x in &[0.05, 0.3, 1.0, 4.0, 20.0] {
            for &eta in &[0.0, 0.4, 1.0] {
                let a = delta_perp_unreg(x, eta, &p).unwrap() + delta_par_unreg(x, eta, &p).unwrap();
                let b = delta_sum_unreg(x, eta, &p).unwrap();
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{x} {eta}");
            }
        }
    }

    #[test]
    fn default_cutoffs() {
        let p = unit_params();
        assert!(rel(p.lambda_perp_over_k0, 50_117.25) < 1e-6);
        assert!(rel(p.lambda_par_over_k0, 226.8766) < 1e-6);
        assert!(rel(p.k0_a0, 2.734_3e-3) < 1e-4);
    }

    #[test]
    fn contact_limits() {
        let p = unit_params();
        let gt = p.gamma_tilde();
        let l = p.lambda_perp_over_k0;
        let m = p.lambda_par_over_k0;
        let tiny = 1e-14;
        for &eta in &[0.0, 0.5, 1.0] {
            assert!(rel(gamma_reg(tiny, eta, &p).unwrap(), gt / 2.0) < 1e-12);
            assert!(rel(delta_perp_reg(tiny, eta, &p).unwrap(), -gt * l / 2.0) < 1e-8);
            assert!(rel(delta_par_reg(tiny, eta, &p).unwrap(), m.powi(3) / (4.0 * SQRT_2)) < 1e-9);
        }
    }

    #[test]
    fn large_cutoffs_recover_bare_coefficients() {
        let p = unit_params().with_cutoffs(1e8, 1e8);
        for &x in &[0.1, 0.5, 1.0, 5.0] {
            for &eta in &[0.0, 0.5, 1.0] {
                let a = delta_perp_reg(x, eta, &p).unwrap();
                let b = delta_perp_unreg(x, eta, &p).unwrap();
                assert!(rel(a, b) < 1e-4, "perp {x} {eta}");
                let a = delta_par_reg(x, eta, &p).unwrap();
                let b = delta_par_unreg(x, eta, &p).unwrap();
                if b != 0.0 {
                    assert!(rel(a, b) < 1e-4, "par {x} {eta}");
                }
                let a = gamma_reg(x, eta, &p).unwrap();
                let b = gamma_unreg(x, eta, &p).unwrap();
                assert!(rel(a, b) < 1e-12);
            }
        }
    }

    #[test]
    fn rate_ratio_follows_cutoff() {
        let p = unit_params().with_cutoffs(1e5, 227.0);
        let r = gamma_reg(0.7, 0.2, &p).unwrap() / gamma_unreg(0.7, 0.2, &p).unwrap();
        assert!((r - 1e10 / (1e10 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn lamb_shift() {
        let p = unit_params().with_cutoffs(1e5, 227.0);
        let v = lamb_shift_two_level(&p).unwrap();
        assert!((v / p.gamma_tilde() - 5.0 * 10f64.ln() / PI).abs() < 1e-13);
        let q = unit_params().with_cutoffs(2e5, 227.0);
        let w = lamb_shift_two_level(&q).unwrap();
        assert!((w / q.gamma_tilde() - v / p.gamma_tilde() - 2f64.ln() / PI).abs() < 1e-12);
        assert!(lamb_shift_two_level(&unit_params().with_cutoffs(1.0, 227.0)).is_err());
    }

    #[test]
    fn expansion_split() {
        let p = unit_params();
        let e = expansions_near_dicke(0.0, 0.4, &p).unwrap();
        assert!(rel(e.delta_par_lin, e.delta0) < 1e-12);
        assert_eq!(e.gamma_const, p.gamma_tilde() / 2.0);
        assert_eq!(e.delta1, 0.0);
        // slope of the static shift equals delta1 per unit xi
        let x = 1e-3;
        let f = expansions_near_dicke(x, 0.4, &p).unwrap();
        assert!(rel(f.delta_par_lin - e.delta_par_lin, f.delta1) < 1e-10);
    }

    #[test]
    fn expansion_is_tangent_to_exact_shifts() {
        let p = unit_params();
        for &eta in &[0.0, 1.0] {
            let h = 1e-9;
            let e0 = expansions_near_dicke(0.0, eta, &p).unwrap();
            let e1 = expansions_near_dicke(h, eta, &p).unwrap();
            let slope_par = (e1.delta_par_lin - e0.delta_par_lin) / h;
            let exact = (delta_par_reg(2.0 * h, eta, &p).unwrap() - delta_par_reg(h, eta, &p).unwrap()) / h;
            assert!(rel(exact, slope_par) < 1e-3, "par {eta}: {exact} {slope_par}");
            let h = 1e-12;
            let e1 = expansions_near_dicke(h, eta, &p).unwrap();
            let slope = (e1.delta_perp_lin - e0.delta_perp_lin) / h;
            let exact = (delta_perp_reg(2.0 * h, eta, &p).unwrap() - delta_perp_reg(h, eta, &p).unwrap()) / h;
            assert!(rel(exact, slope) < 1e-3, "perp {eta}: {exact} {slope}");
        }
    }

    #[test]
    fn matrices_in_each_mode() {
        let chain = linear_chain(3, 0.005, true).unwrap();
        let p = unit_params();
        let reg = build_coupling_matrices(&chain, &p).unwrap();
        assert_eq!(reg.delta_perp[(0, 0)], 0.0);
        assert_eq!(reg.gamma[(1, 1)], p.gamma_tilde() / 2.0);
        let d = reg.delta_total();
        assert!((d[(0, 1)] - d[(1, 2)]).abs() < 1e-9 * d[(0, 1)].abs());
        assert!((d[(0, 1)] - d[(0, 2)]).abs() > 1.0);
        let none = build_coupling_matrices(&chain, &p.with_mode(CouplingMode::None)).unwrap();
        assert!(none.delta_total().iter().all(|&v| v == 0.0));
        assert_eq!(none.gamma, reg.gamma);
        let dicke = build_coupling_matrices(&chain, &p.with_mode(CouplingMode::DickeExpansion)).unwrap();
        assert!(dicke.gamma.iter().all(|&v| v == p.gamma_tilde() / 2.0));
        let unreg = build_coupling_matrices(&chain, &p.with_mode(CouplingMode::Unregularized)).unwrap();
        assert_eq!(unreg.gamma[(0, 0)], 0.5);
        let tri = build_coupling_matrices(&equilateral_triangle(0.01).unwrap(), &p).unwrap();
        let t = tri.delta_total();
        assert!((t[(0, 1)] - t[(1, 2)]).abs() <= 1e-12 * t[(0, 1)].abs());
        assert!((t[(0, 1)] - t[(0, 2)]).abs() <= 1e-12 * t[(0, 1)].abs());
    }

    #[test]
    fn colocated_decay_matrix_is_rank_one() {
        let m = CouplingMatrices::uniform(4, 0.5, 0.0).unwrap();
        let ev = m.decay_spectrum();
        assert!((ev[3] - 2.0).abs() < 1e-12);
        assert!(ev.iter().take(3).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn from_parts_rejects_bad_input() {
        let g = RMatrix::from_row_slice(2, 2, &[0.5, 0.6, 0.6, 0.5]);
        let z = RMatrix::zeros(2, 2);
        assert!(matches!(
            CouplingMatrices::from_parts(g, z.clone(), z.clone(), CouplingMode::Regularized),
            Err(Error::InvalidCoupling(_))
        ));
        let g = RMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.2, 0.5]);
        assert!(CouplingMatrices::from_parts(g, z.clone(), z, CouplingMode::Regularized).is_err());
    }

    proptest! {
        #[test]
        fn chain_matrices_are_symmetric_and_psd(n in 2usize..7, s in 1e-4..3.0f64, par in any::<bool>()) {
            let c = linear_chain(n, s, par).unwrap();
            for mode in [CouplingMode::Unregularized, CouplingMode::Regularized, CouplingMode::DickeExpansion] {
                let m = build_coupling_matrices(&c, &unit_params().with_mode(mode)).unwrap();
                prop_assert!(is_symmetric(&m.gamma) && is_symmetric(&m.delta_perp) && is_symmetric(&m.delta_par));
                prop_assert!(m.decay_spectrum()[0] >= -1e-10);
            }
        }

        #[test]
        fn regularized_shifts_are_finite(x in 1e-12..50.0f64, eta in 0.0..=1.0f64) {
            let p = unit_params();
            prop_assert!(delta_perp_reg(x, eta, &p).unwrap().is_finite());
            prop_assert!(delta_par_reg(x, eta, &p).unwrap().is_finite());
        }
    }
}
