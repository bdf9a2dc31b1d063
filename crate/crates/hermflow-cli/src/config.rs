//! Run configuration: JSON schema, validation, and tolerance overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hermflow_core::{variational::Quadrature, Tolerances};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// One experiment configuration, loaded from `--config <path>`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Fiber dimension; must be even and at least 2.
    pub dim: usize,
    /// Number of field sample points.
    pub num_points: usize,
    /// Master seed for generation, velocity draws and probes.
    pub seed: u64,
    /// Frame dispersion for generation: `f = I + spread * U`.
    pub spread: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Retract the pair and re-project the velocity every k steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retraction_every: Option<usize>,
    pub quadrature: QuadratureSpec,
    pub output_dir: PathBuf,
    /// Named overrides applied to the global tolerance record.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    /// Velocity choice for `integrate`.
    #[serde(default)]
    pub velocity: VelocitySpec,
}

fn default_t_end() -> f64 {
    1.0
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadratureSpec {
    Trapezoid,
    Simpson,
}

impl From<QuadratureSpec> for Quadrature {
    fn from(spec: QuadratureSpec) -> Quadrature {
        match spec {
            QuadratureSpec::Trapezoid => Quadrature::Trapezoid,
            QuadratureSpec::Simpson => Quadrature::Simpson,
        }
    }
}

/// Either seeded random tangent draws (projected onto the tangent space) or
/// explicit right-translated `(H, A)` arrays per point.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VelocitySpec {
    #[default]
    Random,
    Explicit(Vec<ExplicitVelocity>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplicitVelocity {
    pub point_id: u64,
    pub h: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        let config: RunConfig = serde_json::from_str(&text).map_err(|e| {
            CliError::Validation(format!("invalid config {}: {e}", path.display()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.dim < 2 || self.dim % 2 != 0 {
            return Err(CliError::Validation(format!(
                "dim must be even and >= 2, got {}",
                self.dim
            )));
        }
        if self.num_points < 1 {
            return Err(CliError::Validation("num_points must be >= 1".into()));
        }
        if !(self.dt > 0.0) {
            return Err(CliError::Validation("dt must be positive".into()));
        }
        if !(self.t_end > 0.0) {
            return Err(CliError::Validation("t_end must be positive".into()));
        }
        if !(self.spread >= 0.0) {
            return Err(CliError::Validation("spread must be >= 0".into()));
        }
        if self.retraction_every == Some(0) {
            return Err(CliError::Validation("retraction_every must be >= 1".into()));
        }
        Ok(())
    }

    /// The global tolerance record with this config's overrides applied.
    pub fn tolerances(&self) -> Result<Tolerances, CliError> {
        let mut tol = Tolerances::default();
        let unknown =
            tol.apply_overrides(self.tolerances.iter().map(|(k, v)| (k.as_str(), *v)));
        if !unknown.is_empty() {
            return Err(CliError::Validation(format!(
                "unknown tolerance override(s): {}",
                unknown.join(", ")
            )));
        }
        Ok(tol)
    }
}
