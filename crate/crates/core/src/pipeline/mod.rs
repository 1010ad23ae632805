//! File-based orchestration behind the `ancestral` binary: configuration,
//! delimited-text I/O, run manifests and plot emission.
//!
//! Exit codes are a stable contract: 0 success or verdict pass, 1 verdict
//! fail, 2 input error, 3 numerical failure.

mod io;
mod manifest;
mod plot;
mod run;

pub use manifest::{FileDigest, Manifest, StageRecord};
pub use plot::{line_chart, Series};
pub use run::{
    run_folklore, run_index, run_model_solve, run_model_sweep, run_regress, run_reproduce,
    respondent_table, run_simulate, ReproduceReport, RunOutcome,
};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{AttentionError, AttentionModel};
use crate::econometrics::{EconError, RegressionSpec};
use crate::folklore::FolkloreError;
use crate::transmission::{
    ClimateProcess, CohortConfig, GroupLayout, SimulationError, Transmission,
};
use crate::variability::{VariabilityConfig, VariabilityError};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Input(_) | PipelineError::Io { .. } => EXIT_INPUT,
            PipelineError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<VariabilityError> for PipelineError {
    fn from(e: VariabilityError) -> Self {
        PipelineError::Input(e.to_string())
    }
}

impl From<AttentionError> for PipelineError {
    fn from(e: AttentionError) -> Self {
        match e {
            AttentionError::Invalid(_) | AttentionError::BadGrid => {
                PipelineError::Input(e.to_string())
            }
            _ => PipelineError::Numerical(e.to_string()),
        }
    }
}

impl From<SimulationError> for PipelineError {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::Variability(v) => v.into(),
            SimulationError::Attention(a) => a.into(),
            other => PipelineError::Input(other.to_string()),
        }
    }
}

impl From<EconError> for PipelineError {
    fn from(e: EconError) -> Self {
        match e {
            EconError::Collinear(_)
            | EconError::TooFewObservations { .. }
            | EconError::TooFewClusters(_)
            | EconError::FlatCurve
            | EconError::NotConvex => PipelineError::Numerical(e.to_string()),
            _ => PipelineError::Input(e.to_string()),
        }
    }
}

impl From<FolkloreError> for PipelineError {
    fn from(e: FolkloreError) -> Self {
        PipelineError::Input(e.to_string())
    }
}

/// Optional input files; command-line flags take precedence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputPaths {
    /// `unit_id,year,anomaly`
    pub anomalies: Option<PathBuf>,
    /// `group_id,unit_id`
    pub links: Option<PathBuf>,
    /// `group_id,true_scale,cell,n_respondents`
    pub groups: Option<PathBuf>,
    /// Respondent-level table for `regress`.
    pub data: Option<PathBuf>,
    /// `group_id,motif_id,description`
    pub catalog: Option<PathBuf>,
    /// One term per line.
    pub dictionary: Option<PathBuf>,
}

/// Simulation settings other than the period, which comes from
/// `[variability]`, and the seed, which is global.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CohortSection {
    pub noise_sd: f64,
    pub response_levels: usize,
    pub n_controls: usize,
    pub motifs_per_generation: usize,
    pub climate: ClimateProcess,
    pub transmission: Transmission,
}

impl Default for CohortSection {
    fn default() -> Self {
        let c = CohortConfig::default();
        Self {
            noise_sd: c.noise_sd,
            response_levels: c.response_levels,
            n_controls: c.n_controls,
            motifs_per_generation: c.motifs_per_generation,
            climate: c.climate,
            transmission: c.transmission,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub theta_min: f64,
    pub theta_max: f64,
    pub points: usize,
    pub log_spaced: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            theta_min: 0.005,
            theta_max: 0.5,
            points: 500,
            log_spaced: true,
        }
    }
}

impl SweepSection {
    pub fn grid(&self) -> Result<Vec<f64>, PipelineError> {
        if !(self.theta_min > 0.0 && self.theta_max >= self.theta_min && self.theta_max.is_finite())
        {
            return Err(PipelineError::Input(format!(
                "sweep range [{}, {}] must be positive and ordered",
                self.theta_min, self.theta_max
            )));
        }
        if self.points == 0 {
            return Err(PipelineError::Input("sweep needs at least one point".into()));
        }
        if self.points == 1 {
            return Ok(vec![self.theta_min]);
        }
        if self.log_spaced {
            return Ok(crate::attention::log_grid(self.theta_min, self.theta_max, self.points));
        }
        let step = (self.theta_max - self.theta_min) / (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| self.theta_min + step * i as f64)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub inputs: InputPaths,
    #[serde(default)]
    pub variability: VariabilityConfig,
    #[serde(default = "AttentionModel::simulation_default")]
    pub model: AttentionModel,
    #[serde(default)]
    pub cohort: CohortSection,
    #[serde(default)]
    pub layout: GroupLayout,
    #[serde(default = "default_regression")]
    pub regression: RegressionSpec,
    #[serde(default)]
    pub sweep: SweepSection,
    /// Points at which `model solve` reports the solution.
    #[serde(default = "default_solve_thetas")]
    pub solve_thetas: Vec<f64>,
    #[serde(default = "default_level")]
    pub u_shape_level: f64,
    #[serde(default = "default_margins_points")]
    pub margins_points: usize,
    #[serde(default = "default_true")]
    pub emit_svg: bool,
}

fn default_seed() -> u64 {
    CohortConfig::default().seed
}

fn default_regression() -> RegressionSpec {
    RegressionSpec {
        outcome: "attention".into(),
        variable: "avg_variability".into(),
        degree: 2,
        controls: vec!["ctrl_1".into(), "ctrl_2".into()],
        fixed_effect: Some("cell".into()),
        cluster: "group_id".into(),
    }
}

fn default_solve_thetas() -> Vec<f64> {
    vec![0.02, 0.05, 0.1]
}

fn default_level() -> f64 {
    0.01
}

fn default_margins_points() -> usize {
    101
}

fn default_true() -> bool {
    true
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: default_seed(),
            inputs: InputPaths::default(),
            variability: VariabilityConfig::default(),
            model: AttentionModel::simulation_default(),
            cohort: CohortSection::default(),
            layout: GroupLayout::default(),
            regression: default_regression(),
            sweep: SweepSection::default(),
            solve_thetas: default_solve_thetas(),
            u_shape_level: default_level(),
            margins_points: default_margins_points(),
            emit_svg: true,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| PipelineError::Input(format!("config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(PipelineError::Input(format!(
                "config: schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            PipelineError::Input(m) => PipelineError::Input(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn cohort_config(&self) -> CohortConfig {
        CohortConfig {
            variability: self.variability,
            noise_sd: self.cohort.noise_sd,
            response_levels: self.cohort.response_levels,
            n_controls: self.cohort.n_controls,
            motifs_per_generation: self.cohort.motifs_per_generation,
            climate: self.cohort.climate,
            transmission: self.cohort.transmission,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.variability.validate()?;
        self.model.validate()?;
        self.cohort_config().validate()?;
        self.regression.validate()?;
        if !(self.u_shape_level > 0.0 && self.u_shape_level < 1.0) {
            return Err(PipelineError::Input(format!(
                "u_shape_level {} must lie in (0, 1)",
                self.u_shape_level
            )));
        }
        if self.margins_points < 2 {
            return Err(PipelineError::Input("margins_points must be at least 2".into()));
        }
        Ok(())
    }
}
