//! Seeded cultural-transmission simulator.
//!
//! Each synthetic group gets an ancestral anomaly history, its variability
//! index, a prior scale formed as the mean of per-generation intensities, and
//! survey-style attention answers from the attention model plus noise. Folklore
//! motif counts accumulate one Bernoulli(`xi*`) draw per motif and generation.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{AttentionError, AttentionModel};
use crate::folklore::{MotifCatalog, MotifEntry};
use crate::seed::rng_for;
use crate::variability::{
    average_variability, TemperatureSeries, VariabilityConfig, VariabilityError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("invalid group {group_id}: {reason}")]
    InvalidGroup { group_id: String, reason: String },
    #[error("duplicate group id {0}")]
    DuplicateGroup(String),
    #[error("invalid cohort configuration: {0}")]
    Config(String),
    #[error("cannot form a prior from zero generations")]
    NoGenerations,
    #[error(transparent)]
    Variability(#[from] VariabilityError),
    #[error(transparent)]
    Attention(#[from] AttentionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub group_id: String,
    /// Standard deviation of the simulated anomalies, °C.
    pub true_scale: f64,
    /// Fixed-effect cell key.
    pub cell: String,
    pub n_respondents: usize,
}

impl GroupSpec {
    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |reason: &str| SimulationError::InvalidGroup {
            group_id: self.group_id.clone(),
            reason: reason.to_string(),
        };
        if !(self.true_scale.is_finite() && self.true_scale > 0.0) {
            return Err(bad("true_scale must be positive and finite"));
        }
        if self.n_respondents == 0 {
            return Err(bad("n_respondents must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClimateProcess {
    Iid,
    /// Stationary AR(1) with the same marginal standard deviation.
    Ar1 { phi: f64 },
}

/// `theta = anchor + gain * (mean_eta - anchor)`. `gain = 1` is the plain
/// mean; smaller gains mute transmission toward `anchor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transmission {
    pub gain: f64,
    pub anchor: f64,
}

impl Default for Transmission {
    fn default() -> Self {
        Self {
            gain: 1.0,
            anchor: 0.0,
        }
    }
}

impl Transmission {
    pub fn apply(&self, mean_eta: f64) -> f64 {
        (self.anchor + self.gain * (mean_eta - self.anchor)).max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CohortConfig {
    pub variability: VariabilityConfig,
    pub noise_sd: f64,
    pub response_levels: usize,
    pub n_controls: usize,
    pub motifs_per_generation: usize,
    pub climate: ClimateProcess,
    pub transmission: Transmission,
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            variability: VariabilityConfig::default(),
            noise_sd: 0.1,
            response_levels: 6,
            n_controls: 2,
            motifs_per_generation: 4,
            climate: ClimateProcess::Iid,
            transmission: Transmission::default(),
            seed: 20_240_601,
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        self.variability.validate()?;
        if self.response_levels < 2 {
            return Err(SimulationError::Config("response_levels must be at least 2".into()));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(SimulationError::Config("noise_sd must be nonnegative".into()));
        }
        if self.motifs_per_generation == 0 {
            return Err(SimulationError::Config("motifs_per_generation must be at least 1".into()));
        }
        if let ClimateProcess::Ar1 { phi } = self.climate {
            if !(phi.abs() < 1.0) {
                return Err(SimulationError::Config(format!("AR(1) phi={phi} must satisfy |phi| < 1")));
            }
        }
        if !(self.transmission.gain.is_finite() && self.transmission.anchor.is_finite()) {
            return Err(SimulationError::Config("transmission must be finite".into()));
        }
        Ok(())
    }
}

/// Layout used when no group file is supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroupLayout {
    pub n_groups: usize,
    pub respondents_per_group: usize,
    pub n_cells: usize,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for GroupLayout {
    fn default() -> Self {
        Self {
            n_groups: 2000,
            respondents_per_group: 5,
            n_cells: 40,
            scale_min: 0.026,
            scale_max: 0.163,
        }
    }
}

impl GroupLayout {
    /// Scales uniform on `[scale_min, scale_max]`, cells uniform.
    pub fn generate(&self, seed: u64) -> Vec<GroupSpec> {
        let mut rng = rng_for(seed, "layout", "");
        let width = (self.n_groups.max(1) as f64).log10().floor() as usize + 1;
        (0..self.n_groups)
            .map(|i| GroupSpec {
                group_id: format!("g{:0width$}", i + 1, width = width),
                true_scale: rng.random_range(self.scale_min..=self.scale_max),
                cell: format!("c{:02}", rng.random_range(0..self.n_cells.max(1))),
                n_respondents: self.respondents_per_group,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRespondent {
    pub group_id: String,
    pub cell: String,
    pub avg_variability: f64,
    pub attention: f64,
    pub controls: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FolkloreCount {
    pub group_id: String,
    pub env_motifs: u64,
    pub total_motifs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupOutcome {
    pub group_id: String,
    pub true_scale: f64,
    pub avg_variability: f64,
    pub theta: f64,
    pub xi_star: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub respondents: Vec<SyntheticRespondent>,
    pub folklore: Vec<FolkloreCount>,
    pub groups: Vec<GroupOutcome>,
    pub n_controls: usize,
}

/// Gaussian anomalies with standard deviation `true_scale` over the
/// configured period.
pub fn simulate_climate(
    unit_id: &str,
    true_scale: f64,
    period: &VariabilityConfig,
    process: ClimateProcess,
    seed: u64,
) -> Result<TemperatureSeries, SimulationError> {
    if !(true_scale.is_finite() && true_scale > 0.0) {
        return Err(SimulationError::InvalidGroup {
            group_id: unit_id.to_string(),
            reason: "true_scale must be positive and finite".into(),
        });
    }
    let years = period.period_years();
    if years < period.span_years as usize {
        return Err(SimulationError::Config("period shorter than one generation".into()));
    }
    let mut rng = rng_for(seed, "climate", unit_id);
    let mut values = Vec::with_capacity(years);
    match process {
        ClimateProcess::Iid => {
            for _ in 0..years {
                let z: f64 = rng.sample(StandardNormal);
                values.push(true_scale * z);
            }
        }
        ClimateProcess::Ar1 { phi } => {
            let innovation = (1.0 - phi * phi).sqrt();
            let mut x: f64 = rng.sample::<f64, _>(StandardNormal);
            for _ in 0..years {
                values.push(true_scale * x);
                let z: f64 = rng.sample(StandardNormal);
                x = phi * x + innovation * z;
            }
        }
    }
    Ok(TemperatureSeries::from_contiguous(unit_id, period.period_start, &values)?)
}

/// Prior scale as the sample mean of per-generation intensities.
pub fn transmit_prior(eta_hats: &[f64]) -> Result<f64, SimulationError> {
    if eta_hats.is_empty() {
        return Err(SimulationError::NoGenerations);
    }
    Ok(eta_hats.iter().sum::<f64>() / eta_hats.len() as f64)
}

/// Clamps to `[0, 1]` and snaps to the nearest of `k / (levels - 1)`;
/// midpoints round up.
pub fn snap_response(raw: f64, levels: usize) -> f64 {
    let steps = (levels - 1) as f64;
    (raw.clamp(0.0, 1.0) * steps + 0.5).floor().min(steps) / steps
}

fn draw_response(xi_star: f64, noise: &Normal<f64>, levels: usize, rng: &mut impl Rng) -> f64 {
    snap_response(xi_star + noise.sample(rng), levels)
}

pub fn simulate_response(
    theta: f64,
    model: &AttentionModel,
    noise_sd: f64,
    response_levels: usize,
    seed: u64,
) -> Result<f64, SimulationError> {
    if response_levels < 2 {
        return Err(SimulationError::Config("response_levels must be at least 2".into()));
    }
    let noise = Normal::new(0.0, noise_sd)
        .map_err(|e| SimulationError::Config(format!("noise_sd: {e}")))?;
    let xi = model.xi_star(theta)?;
    let mut rng = rng_for(seed, "respond", "");
    Ok(draw_response(xi, &noise, response_levels, &mut rng))
}

/// Motif `m` of generation `g` is environmental iff its uniform draw falls
/// below `xi*(theta_g)`. Reusing a seed across paths couples the draws, so
/// counts are monotone in attention.
pub fn simulate_folklore(
    theta_path: &[f64],
    model: &AttentionModel,
    motifs_per_generation: usize,
    seed: u64,
) -> Result<(u64, u64), SimulationError> {
    if motifs_per_generation == 0 {
        return Err(SimulationError::Config("motifs_per_generation must be at least 1".into()));
    }
    let mut rng = rng_for(seed, "folklore", "");
    let mut env = 0u64;
    for &theta in theta_path {
        let xi = model.xi_star(theta)?;
        for _ in 0..motifs_per_generation {
            if rng.random::<f64>() < xi {
                env += 1;
            }
        }
    }
    Ok((env, (theta_path.len() * motifs_per_generation) as u64))
}

pub fn build_dataset(
    groups: &[GroupSpec],
    config: &CohortConfig,
    model: &AttentionModel,
) -> Result<SyntheticDataset, SimulationError> {
    config.validate()?;
    model.validate()?;
    let mut seen = BTreeSet::new();
    for g in groups {
        g.validate()?;
        if !seen.insert(g.group_id.as_str()) {
            return Err(SimulationError::DuplicateGroup(g.group_id.clone()));
        }
    }
    let noise = Normal::new(0.0, config.noise_sd)
        .map_err(|e| SimulationError::Config(format!("noise_sd: {e}")))?;

    let mut per_group = groups
        .par_iter()
        .map(|g| simulate_group(g, config, model, &noise))
        .collect::<Result<Vec<_>, _>>()?;
    per_group.sort_by(|a, b| a.0.group_id.cmp(&b.0.group_id));

    let mut out = SyntheticDataset {
        n_controls: config.n_controls,
        ..SyntheticDataset::default()
    };
    for (outcome, respondents, folklore) in per_group {
        out.groups.push(outcome);
        out.respondents.extend(respondents);
        out.folklore.push(folklore);
    }
    Ok(out)
}

fn simulate_group(
    g: &GroupSpec,
    config: &CohortConfig,
    model: &AttentionModel,
    noise: &Normal<f64>,
) -> Result<(GroupOutcome, Vec<SyntheticRespondent>, FolkloreCount), SimulationError> {
    let series = simulate_climate(&g.group_id, g.true_scale, &config.variability, config.climate, config.seed)?;
    let index = average_variability(&series, &config.variability)?;
    let mean_eta = transmit_prior(&index.eta_hats())?;
    let theta = config.transmission.apply(mean_eta);
    let xi_star = model.xi_star(theta)?;

    let mut rng = rng_for(config.seed, "respond", &g.group_id);
    let respondents = (0..g.n_respondents)
        .map(|_| {
            let attention = draw_response(xi_star, noise, config.response_levels, &mut rng);
            let controls = (0..config.n_controls)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            SyntheticRespondent {
                group_id: g.group_id.clone(),
                cell: g.cell.clone(),
                avg_variability: index.avg_variability,
                attention,
                controls,
            }
        })
        .collect();

    let path = vec![theta; index.per_generation.len()];
    let folk_seed = crate::seed::derive_seed(config.seed, "folklore", &g.group_id);
    let (env, total) = simulate_folklore(&path, model, config.motifs_per_generation, folk_seed)?;

    Ok((
        GroupOutcome {
            group_id: g.group_id.clone(),
            true_scale: g.true_scale,
            avg_variability: index.avg_variability,
            theta,
            xi_star,
        },
        respondents,
        FolkloreCount {
            group_id: g.group_id.clone(),
            env_motifs: env,
            total_motifs: total,
        },
    ))
}

/// Motif catalog realizing the given counts: environmental motifs mention
/// `env_term`, the rest carry neutral text.
pub fn synthetic_catalog(counts: &[FolkloreCount], env_term: &str) -> MotifCatalog {
    let mut entries = Vec::new();
    for c in counts {
        for m in 0..c.total_motifs {
            let description = if m < c.env_motifs {
                format!("A tale of the {env_term} that came in the time of the ancestors")
            } else {
                "A trickster outwits the chief and marries his daughter".to_string()
            };
            entries.push(MotifEntry {
                group_id: c.group_id.clone(),
                motif_id: format!("m{m}"),
                description,
            });
        }
    }
    MotifCatalog::new(entries).expect("generated motif ids are unique")
}
