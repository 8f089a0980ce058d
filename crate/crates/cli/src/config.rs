//! Run configuration: a single JSON document, validated before any computation.

use crate::error::CliError;
use clap::ValueEnum;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use toda_tba::model::{HillZeros, ModelParams, SpectralPolynomial, TruncationConfig};
use toda_tba::nlie::Grid;
use toda_tba::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Check,
    Nlie,
    Quantize,
    Spectrum,
    OracleN2,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Check => "check",
            Mode::Nlie => "nlie",
            Mode::Quantize => "quantize",
            Mode::Spectrum => "spectrum",
            Mode::OracleN2 => "oracle-n2",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    pub hbar: f64,
    pub g: f64,
    pub kappa: f64,
}

/// A complex input written either as a plain number or as `[re, im]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexInput {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexInput> for Complex64 {
    fn from(v: ComplexInput) -> Self {
        match v {
            ComplexInput::Real(re) => Complex64::new(re, 0.0),
            ComplexInput::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tol: Option<f64>,
    #[serde(default)]
    pub exec: Exec,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<ComplexInput>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<ComplexInput>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum_numbers: Option<Vec<i64>>,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub output: OutputConfig,
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Re-labels a core validation error with its path inside the config document.
fn scoped(prefix: &str, err: toda_tba::TodaError) -> CliError {
    match err {
        toda_tba::TodaError::Validation { field, message } => {
            let field = match field.as_str() {
                "n_particles" => "n",
                f => f,
            };
            invalid(&format!("{prefix}{field}"), message)
        }
        other => CliError::Core(other),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid("--config", format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        let m = &self.model;
        ModelParams::new(m.n, m.hbar, m.g, m.kappa).map_err(|e| scoped("model.", e))
    }

    pub fn tolerance(&self, default: f64) -> Result<f64, CliError> {
        match self.numerics.tol {
            Some(t) if !(t > 0.0 && t < 1.0) => Err(invalid("numerics.tol", format!("must lie in (0, 1), got {t}"))),
            Some(t) => Ok(t),
            None => Ok(default),
        }
    }

    pub fn truncation(&self, params: &ModelParams) -> Result<TruncationConfig, CliError> {
        let base = TruncationConfig::default_for(params);
        let depth = self.numerics.truncation_depth.unwrap_or(base.depth);
        let tail_tol = self.numerics.tail_tol.unwrap_or(base.tail_tol);
        TruncationConfig::new(depth, tail_tol, params).map_err(|e| match e {
            toda_tba::TodaError::Validation { field, message } if field == "depth" => invalid("numerics.truncation_depth", message),
            other => scoped("numerics.", other),
        })
    }

    pub fn tau(&self, params: &ModelParams) -> Result<SpectralPolynomial, CliError> {
        let roots = self.roots("tau", self.tau.as_deref(), params)?;
        SpectralPolynomial::new(roots, params.hbar()).map_err(|e| scoped("", e))
    }

    pub fn deltas(&self, params: &ModelParams) -> Result<HillZeros, CliError> {
        let roots = self.roots("deltas", self.deltas.as_deref(), params)?;
        HillZeros::new(roots, params.hbar()).map_err(|e| match e {
            toda_tba::TodaError::Validation { message, .. } => invalid("deltas", message),
            other => CliError::Core(other),
        })
    }

    fn roots(&self, field: &str, values: Option<&[ComplexInput]>, params: &ModelParams) -> Result<Vec<Complex64>, CliError> {
        let values = values.ok_or_else(|| invalid(field, "required for this mode"))?;
        if values.len() != params.n_particles() {
            return Err(invalid(
                field,
                format!("expected {} values, got {}", params.n_particles(), values.len()),
            ));
        }
        Ok(values.iter().map(|&v| v.into()).collect())
    }

    pub fn quantum_numbers(&self) -> Result<Vec<i64>, CliError> {
        self.quantum_numbers
            .clone()
            .ok_or_else(|| invalid("quantum_numbers", "required for this mode"))
    }

    /// Explicit grid from `numerics`, or the default one for the given zeros.
    pub fn grid(&self, zeros: &HillZeros, params: &ModelParams) -> Result<Grid, CliError> {
        let default = Grid::for_zeros(zeros, params);
        if self.numerics.lambda_max.is_none() && self.numerics.grid_points.is_none() {
            return Ok(default);
        }
        let lambda_max = self.numerics.lambda_max.unwrap_or(default.lambda_max());
        if !(lambda_max > 0.0 && lambda_max.is_finite()) {
            return Err(invalid(
                "numerics.lambda_max",
                format!("must be positive and finite, got {lambda_max}"),
            ));
        }
        let spacing = match self.numerics.grid_points {
            Some(p) if p < 7 => return Err(invalid("numerics.grid_points", format!("need at least 7 points, got {p}"))),
            Some(p) => 2.0 * lambda_max / (p - 1) as f64,
            None => default.spacing(),
        };
        let grid = Grid::new(lambda_max, spacing).map_err(|e| scoped("numerics.", e))?;
        grid.check(zeros, params).map_err(|e| scoped("numerics.", e))?;
        Ok(grid)
    }

    pub fn check_mode(&self, mode: Mode) -> Result<(), CliError> {
        match self.mode {
            Some(m) if m != mode => Err(invalid(
                "mode",
                format!("config is for `{}` but `{}` was requested", m.name(), mode.name()),
            )),
            _ => Ok(()),
        }
    }
}
