//! JSON experiment files.

use std::path::Path;

use dicke_core::analysis::MixingVariant;
use dicke_core::coupling::{CouplingMode, CouplingParams, DecayModel, LYMAN_ALPHA_M};
use dicke_core::geometry::{equilateral_triangle, linear_chain, AtomConfig};
use dicke_core::master::Method;
use dicke_core::operators::{dicke_basis_three, PureState};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RunError};

/// Major.minor of the accepted schema.
pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CouplingScan,
    Evolve,
    Trajectories,
    Timescales,
    Validate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::CouplingScan => "coupling-scan",
            ExperimentKind::Evolve => "evolve",
            ExperimentKind::Trajectories => "trajectories",
            ExperimentKind::Timescales => "timescales",
            ExperimentKind::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema_version: String,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub geometry: Option<GeometrySpec>,
    #[serde(default)]
    pub coupling: CouplingSpec,
    #[serde(default)]
    pub numerics: NumericsSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// A length given in exactly one unit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Length {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meters: Option<f64>,
}

impl Length {
    /// Value in units of `1 / k0`.
    pub fn to_xi(&self, field: &str, lambda0_m: f64) -> Result<f64> {
        let k0 = 2.0 * std::f64::consts::PI / lambda0_m;
        match (self.xi, self.lambda0, self.meters) {
            (Some(x), None, None) => Ok(x),
            (None, Some(l), None) => Ok(2.0 * std::f64::consts::PI * l),
            (None, None, Some(m)) => Ok(k0 * m),
            _ => Err(RunError::spec(field, "give exactly one of xi, lambda0, meters")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    Chain {
        n_atoms: usize,
        spacing: Length,
        #[serde(default)]
        axis_parallel_to_dipole: bool,
    },
    Triangle {
        side: Length,
    },
    Explicit {
        positions_xi: Vec<[f64; 3]>,
        dipole: [f64; 3],
    },
}

impl GeometrySpec {
    pub fn build(&self, lambda0_m: f64) -> Result<AtomConfig> {
        Ok(match self {
            GeometrySpec::Chain {
                n_atoms,
                spacing,
                axis_parallel_to_dipole,
            } => linear_chain(*n_atoms, spacing.to_xi("geometry.spacing", lambda0_m)?, *axis_parallel_to_dipole)?,
            GeometrySpec::Triangle { side } => equilateral_triangle(side.to_xi("geometry.side", lambda0_m)?)?,
            GeometrySpec::Explicit { positions_xi, dipole } => AtomConfig::new(
                positions_xi.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect(),
                Vector3::new(dipole[0], dipole[1], dipole[2]),
            )?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    Unregularized,
    Regularized,
    DickeExpansion,
    None,
}

impl From<ModeSpec> for CouplingMode {
    fn from(m: ModeSpec) -> Self {
        match m {
            ModeSpec::Unregularized => CouplingMode::Unregularized,
            ModeSpec::Regularized => CouplingMode::Regularized,
            ModeSpec::DickeExpansion => CouplingMode::DickeExpansion,
            ModeSpec::None => CouplingMode::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecaySpec {
    Unregularized,
    Regularized,
    DickeLimit,
}

impl From<DecaySpec> for DecayModel {
    fn from(d: DecaySpec) -> Self {
        match d {
            DecaySpec::Unregularized => DecayModel::Unregularized,
            DecaySpec::Regularized => DecayModel::Regularized,
            DecaySpec::DickeLimit => DecayModel::DickeLimit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    #[serde(default = "default_mode")]
    pub mode: ModeSpec,
    #[serde(default)]
    pub decay: Option<DecaySpec>,
    #[serde(default = "default_lambda0")]
    pub lambda0_m: f64,
    #[serde(default)]
    pub lambda_perp_over_k0: Option<f64>,
    #[serde(default)]
    pub lambda_par_over_k0: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
}

fn default_mode() -> ModeSpec {
    ModeSpec::Regularized
}

fn default_lambda0() -> f64 {
    LYMAN_ALPHA_M
}

impl Default for CouplingSpec {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            decay: None,
            lambda0_m: default_lambda0(),
            lambda_perp_over_k0: None,
            lambda_par_over_k0: None,
            gamma: None,
        }
    }
}

impl CouplingSpec {
    pub fn params(&self) -> Result<CouplingParams> {
        if !(self.lambda0_m > 0.0 && self.lambda0_m.is_finite()) {
            return Err(RunError::spec("coupling.lambda0_m", "must be positive"));
        }
        let mut p = CouplingParams::hydrogen(self.mode.into(), self.lambda0_m);
        if let Some(d) = self.decay {
            p = p.with_decay(d.into());
        }
        if let Some(l) = self.lambda_perp_over_k0 {
            p.lambda_perp_over_k0 = l;
        }
        if let Some(m) = self.lambda_par_over_k0 {
            p.lambda_par_over_k0 = m;
        }
        if let Some(g) = self.gamma {
            p.gamma = g;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeGrid {
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    Auto,
    Adaptive,
    Propagator,
}

impl From<MethodSpec> for Method {
    fn from(m: MethodSpec) -> Self {
        match m {
            MethodSpec::Auto => Method::Auto,
            MethodSpec::Adaptive => Method::Adaptive,
            MethodSpec::Propagator => Method::Propagator,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSpec {
    Source,
    Directed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantSpec {
    Mixing,
    Literal,
}

impl From<VariantSpec> for MixingVariant {
    fn from(v: VariantSpec) -> Self {
        match v {
            VariantSpec::Mixing => MixingVariant::Mixing,
            VariantSpec::Literal => MixingVariant::Literal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSpec {
    pub seed: u64,
    pub threads: Option<usize>,
    // coupling-scan
    pub xi_min: f64,
    pub xi_max: f64,
    pub n_points: usize,
    pub etas: Vec<f64>,
    // evolve and trajectories
    pub initial_state: String,
    pub t_min: f64,
    pub t_max: f64,
    pub n_times: usize,
    pub time_grid: TimeGrid,
    pub method: MethodSpec,
    pub rtol: f64,
    pub atol: f64,
    // trajectories
    pub n_traj: usize,
    pub channels: ChannelSpec,
    pub n_theta: usize,
    pub n_phi: usize,
    pub photon_index: usize,
    pub histogram_bins: usize,
    pub compare_without_dipole: bool,
    // timescales
    pub n_min: usize,
    pub n_max: usize,
    pub spacings_lambda0: Vec<f64>,
    pub t_dicke_variant: VariantSpec,
    pub sector: Option<u32>,
    pub axis_parallel_to_dipole: bool,
    // validate
    pub criteria: Option<Vec<u32>>,
}

impl Default for NumericsSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            threads: None,
            xi_min: 1e-4,
            xi_max: 10.0,
            n_points: 200,
            etas: vec![0.0, 1.0],
            initial_state: "excited".into(),
            t_min: 1e-7,
            t_max: 10.0,
            n_times: 200,
            time_grid: TimeGrid::Log,
            method: MethodSpec::Auto,
            rtol: 1e-8,
            atol: 1e-12,
            n_traj: 1000,
            channels: ChannelSpec::Source,
            n_theta: 30,
            n_phi: 30,
            photon_index: 1,
            histogram_bins: 50,
            compare_without_dipole: false,
            n_min: 4,
            n_max: 20,
            spacings_lambda0: vec![1.7e-4, 2.55e-4, 3.4e-4, 4.25e-4, 5.1e-4],
            t_dicke_variant: VariantSpec::Mixing,
            sector: None,
            axis_parallel_to_dipole: false,
            criteria: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: Option<String>,
    pub plots: Option<bool>,
}

/// State named by `label`: `excited`, `ground`, `b`, `c`, `d` (three
/// atoms), `dicke:K` or `basis:I`.
pub fn initial_state(label: &str, n_atoms: usize) -> Result<PureState> {
    let field = "numerics.initial_state";
    let three = |pick: usize| -> Result<PureState> {
        if n_atoms != 3 {
            return Err(RunError::spec(field, format!("state `{label}` needs three atoms")));
        }
        let (b, c, d) = dicke_basis_three();
        Ok([b, c, d][pick].clone())
    };
    match label {
        "excited" => Ok(PureState::fully_excited(n_atoms)?),
        "ground" => Ok(PureState::ground(n_atoms)?),
        "b" => three(0),
        "c" => three(1),
        "d" => three(2),
        _ => {
            if let Some(k) = label.strip_prefix("dicke:") {
                let k = k.parse().map_err(|_| RunError::spec(field, format!("bad excitation number in `{label}`")))?;
                Ok(PureState::dicke(n_atoms, k)?)
            } else if let Some(i) = label.strip_prefix("basis:") {
                let i = i.parse().map_err(|_| RunError::spec(field, format!("bad basis index in `{label}`")))?;
                Ok(PureState::basis(n_atoms, i)?)
            } else {
                Err(RunError::spec(field, format!("unknown state `{label}`")))
            }
        }
    }
}

fn check_version(version: &str) -> Result<()> {
    let parse = |s: &str| -> Option<(u32, u32)> {
        let (a, b) = s.split_once('.')?;
        Some((a.parse().ok()?, b.parse().ok()?))
    };
    let (major, _) = parse(version).ok_or_else(|| RunError::spec("schema_version", format!("`{version}` is not MAJOR.MINOR")))?;
    let (ours, _) = parse(SCHEMA_VERSION).expect("valid built-in version");
    if major > ours {
        return Err(RunError::spec(
            "schema_version",
            format!("spec uses schema {version}, this build reads {SCHEMA_VERSION}"),
        ));
    }
    Ok(())
}

impl ExperimentSpec {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text).map_err(|e| RunError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        Ok((Self::from_json(&text, path)?, text))
    }

    pub fn validate(&self) -> Result<()> {
        check_version(&self.schema_version)?;
        self.coupling.params()?;
        let n = &self.numerics;
        match self.experiment {
            ExperimentKind::Evolve | ExperimentKind::Trajectories => {
                let geometry = self
                    .geometry
                    .as_ref()
                    .ok_or_else(|| RunError::spec("geometry", format!("required for {}", self.experiment.name())))?;
                let config = geometry.build(self.coupling.lambda0_m)?;
                initial_state(&n.initial_state, config.n_atoms())?;
                if !(n.t_max > 0.0 && n.t_max.is_finite()) {
                    return Err(RunError::spec("numerics.t_max", "must be positive"));
                }
                if n.time_grid == TimeGrid::Log && !(n.t_min > 0.0 && n.t_min < n.t_max) {
                    return Err(RunError::spec("numerics.t_min", "log grids need 0 < t_min < t_max"));
                }
                if self.experiment == ExperimentKind::Trajectories && n.n_traj == 0 {
                    return Err(RunError::spec("numerics.n_traj", "must be at least 1"));
                }
            }
            ExperimentKind::CouplingScan => {
                if !(n.xi_min > 0.0 && n.xi_min < n.xi_max) || n.n_points < 2 {
                    return Err(RunError::spec("numerics.xi_min", "need 0 < xi_min < xi_max and n_points >= 2"));
                }
                if n.etas.iter().any(|e| !(0.0..=1.0).contains(e)) {
                    return Err(RunError::spec("numerics.etas", "orientations must lie in [0, 1]"));
                }
            }
            ExperimentKind::Timescales => {
                if n.n_min == 0 || n.n_min > n.n_max {
                    return Err(RunError::spec("numerics.n_min", "need 1 <= n_min <= n_max"));
                }
                if n.spacings_lambda0.is_empty() || n.spacings_lambda0.iter().any(|s| !(*s > 0.0)) {
                    return Err(RunError::spec("numerics.spacings_lambda0", "need positive spacings"));
                }
            }
            ExperimentKind::Validate => {}
        }
        Ok(())
    }
}
