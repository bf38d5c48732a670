//! Atomic configurations and pairwise geometry.
//!
//! Positions are stored multiplied by the resonant wavenumber `k0`.
//! Atom indices are zero based; atom `n` here is atom `n + 1` in the usual
//! one-based labelling.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::Vector3;

use crate::error::{invalid, Result};

/// Separation and orientation of one atom pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    /// `k0 * |r_n - r_m|`.
    pub xi: f64,
    /// Squared cosine between the dipole and the pair axis.
    pub eta: f64,
}

/// Atom positions plus the common dipole orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomConfig {
    positions: Vec<Vector3<f64>>,
    dipole: Vector3<f64>,
}

impl AtomConfig {
    /// Builds a configuration, normalising the dipole and rejecting
    /// coincident atoms.
    pub fn new(positions: Vec<Vector3<f64>>, dipole: Vector3<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(invalid("configuration needs at least one atom"));
        }
        if positions.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(invalid("atom positions must be finite"));
        }
        let norm = dipole.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(invalid("dipole direction must be a nonzero finite vector"));
        }
        for (n, a) in positions.iter().enumerate() {
            for (m, b) in positions.iter().enumerate().skip(n + 1) {
                if (a - b).norm() <= 0.0 {
                    return Err(invalid(format!("atoms {n} and {m} coincide")));
                }
            }
        }
        Ok(Self {
            positions,
            dipole: dipole / norm,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    /// Unit dipole direction shared by all atoms.
    pub fn dipole(&self) -> Vector3<f64> {
        self.dipole
    }

    pub fn pair_geometry(&self, n: usize, m: usize) -> Result<PairGeometry> {
        let count = self.n_atoms();
        if n >= count || m >= count {
            return Err(invalid(format!("atom index out of range for {count} atoms")));
        }
        if n == m {
            return Err(invalid("pair geometry is undefined for n = m"));
        }
        let r = self.positions[n] - self.positions[m];
        let xi = r.norm();
        let cos = self.dipole.dot(&r) / xi;
        Ok(PairGeometry {
            xi,
            eta: (cos * cos).clamp(0.0, 1.0),
        })
    }

    /// All unordered pairs `(n, m, geometry)` with `n < m`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, PairGeometry)> + '_ {
        let count = self.n_atoms();
        (0..count).flat_map(move |n| {
            (n + 1..count).map(move |m| {
                let r = self.positions[n] - self.positions[m];
                let xi = r.norm();
                let cos = self.dipole.dot(&r) / xi;
                (
                    n,
                    m,
                    PairGeometry {
                        xi,
                        eta: (cos * cos).clamp(0.0, 1.0),
                    },
                )
            })
        })
    }

    /// Smallest pairwise `xi`, or `None` for a single atom.
    pub fn min_separation(&self) -> Option<f64> {
        self.pairs().map(|(_, _, g)| g.xi).reduce(f64::min)
    }
}

/// Equally spaced atoms along x. The dipole is along x when
/// `axis_parallel_to_dipole`, otherwise along z.
pub fn linear_chain(n_atoms: usize, spacing_xi: f64, axis_parallel_to_dipole: bool) -> Result<AtomConfig> {
    if n_atoms < 1 {
        return Err(invalid("chain needs at least one atom"));
    }
    if !(spacing_xi > 0.0 && spacing_xi.is_finite()) {
        return Err(invalid(format!("chain spacing must be positive, got {spacing_xi}")));
    }
    let positions = (0..n_atoms)
        .map(|k| Vector3::new(k as f64 * spacing_xi, 0.0, 0.0))
        .collect();
    let dipole = if axis_parallel_to_dipole {
        Vector3::x()
    } else {
        Vector3::z()
    };
    AtomConfig::new(positions, dipole)
}

/// Three atoms on an equilateral triangle in the xy plane with the dipole
/// along z, so every pair has `eta = 0`.
pub fn equilateral_triangle(side_xi: f64) -> Result<AtomConfig> {
    if !(side_xi > 0.0 && side_xi.is_finite()) {
        return Err(invalid(format!("triangle side must be positive, got {side_xi}")));
    }
    let h = side_xi * libm::sqrt(3.0) / 2.0;
    let positions = alloc::vec![
        Vector3::new(0.0, 0.0, 0.0),
        Vector3::new(side_xi, 0.0, 0.0),
        Vector3::new(side_xi / 2.0, h, 0.0),
    ];
    AtomConfig::new(positions, Vector3::z())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Unit};
    use proptest::prelude::*;

    #[test]
    fn chain_pairs_follow_index_distance() {
        let c = linear_chain(3, 0.005, true).unwrap();
        let g12 = c.pair_geometry(0, 1).unwrap();
        let g13 = c.pair_geometry(0, 2).unwrap();
        assert!((g12.xi - 0.005).abs() < 1e-18);
        assert!((g13.xi - 0.01).abs() < 1e-18);
        assert_eq!(g13.eta, 1.0);
        let perp = linear_chain(5, 0.0032, false).unwrap();
        assert!(perp.pairs().all(|(_, _, g)| g.eta == 0.0));
        assert_eq!(perp.pairs().count(), 10);
    }

    #[test]
    fn single_atom_has_no_pairs() {
        let c = linear_chain(1, 1.0, true).unwrap();
        assert_eq!(c.pairs().count(), 0);
        assert!(c.min_separation().is_none());
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(linear_chain(0, 1.0, true).is_err());
        assert!(linear_chain(3, 0.0, true).is_err());
        assert!(linear_chain(3, -1.0, true).is_err());
        assert!(equilateral_triangle(0.0).is_err());
        let c = linear_chain(2, 1.0, true).unwrap();
        assert!(c.pair_geometry(1, 1).is_err());
        assert!(c.pair_geometry(0, 2).is_err());
        let same = AtomConfig::new(alloc::vec![Vector3::zeros(), Vector3::zeros()], Vector3::z());
        assert!(same.is_err());
    }

    #[test]
    fn triangle_is_uniform() {
        let t = equilateral_triangle(0.01).unwrap();
        for (_, _, g) in t.pairs() {
            assert!((g.xi - 0.01).abs() < 1e-15);
            assert!(g.eta.abs() < 1e-30);
        }
    }

    #[test]
    fn eta_of_diagonal_pair() {
        let c = AtomConfig::new(
            alloc::vec![Vector3::zeros(), Vector3::new(1.0, 0.0, 1.0)],
            Vector3::z(),
        )
        .unwrap();
        assert!((c.pair_geometry(0, 1).unwrap().eta - 0.5).abs() < 1e-15);
        let c = AtomConfig::new(alloc::vec![Vector3::zeros(), Vector3::x()], Vector3::z()).unwrap();
        assert_eq!(c.pair_geometry(0, 1).unwrap().eta, 0.0);
    }

    fn vec3() -> impl Strategy<Value = Vector3<f64>> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn geometry_is_symmetric_and_rotation_invariant(
            a in vec3(), b in vec3(), c in vec3(), d in vec3(),
            axis in vec3(), angle in -3.2..3.2f64,
        ) {
            prop_assume!((a - b).norm() > 1e-3 && (a - c).norm() > 1e-3 && (b - c).norm() > 1e-3);
            prop_assume!(d.norm() > 1e-3 && axis.norm() > 1e-3);
            let cfg = AtomConfig::new(alloc::vec![a, b, c], d).unwrap();
            let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
            let turned = AtomConfig::new(
                alloc::vec![rot * a, rot * b, rot * c], rot * d,
            ).unwrap();
            for n in 0..3 {
                for m in 0..3 {
                    if n == m { continue; }
                    let g = cfg.pair_geometry(n, m).unwrap();
                    let h = cfg.pair_geometry(m, n).unwrap();
                    prop_assert_eq!(g.xi, h.xi);
                    prop_assert!((g.eta - h.eta).abs() < 1e-15);
                    let r = turned.pair_geometry(n, m).unwrap();
                    prop_assert!((g.eta - r.eta).abs() < 1e-12);
                    prop_assert!((0.0..=1.0).contains(&g.eta));
                }
            }
        }

        #[test]
        fn chain_separation_is_exact_multiple(n in 2usize..12, s in 1e-4..10.0f64) {
            let c = linear_chain(n, s, false).unwrap();
            for (i, j, g) in c.pairs() {
                let expect = (j - i) as f64 * s;
                prop_assert!((g.xi - expect).abs() <= 2.0 * f64::EPSILON * j as f64 * s);
            }
        }
    }
}
