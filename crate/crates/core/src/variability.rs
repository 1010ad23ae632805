//! Ancestral climate-variability index.
//!
//! A unit's yearly anomaly series is cut into non-overlapping generation
//! windows. Within each window the deviation intensity is the mean distance
//! of the excursions beyond the `(alpha, 1 - alpha)` empirical quantile band,
//! and the unit's index is the mean of those intensities across windows.
//!
//! Quantiles use the inverse empirical CDF without interpolation (type 1), and
//! excursions are counted with strict inequalities, so values tied with a
//! quantile never count as excursions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Products `n * p` within this distance of an integer are treated as that
/// integer when locating quantile ranks. Keeps `1 - 0.2` and `0.8` on the same
/// rank.
const RANK_SNAP: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VariabilityError {
    #[error("empty input")]
    Empty,
    #[error("unit {unit_id}: non-finite anomaly in year {year}")]
    NonFinite { unit_id: String, year: i32 },
    #[error("unit {unit_id}: years not strictly increasing at {year}")]
    Unordered { unit_id: String, year: i32 },
    #[error("unit {unit_id}: missing year {year} inside the index period")]
    MissingYear { unit_id: String, year: i32 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("groups reference unknown units: {}", .0.join(", "))]
    UnknownUnits(Vec<String>),
}

/// Yearly temperature anomalies (°C) for one grid cell or ethnic group.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureSeries {
    unit_id: String,
    observations: Vec<(i32, f64)>,
}

impl TemperatureSeries {
    pub fn new(
        unit_id: impl Into<String>,
        observations: Vec<(i32, f64)>,
    ) -> Result<Self, VariabilityError> {
        let unit_id = unit_id.into();
        for (i, &(year, anomaly)) in observations.iter().enumerate() {
            if !anomaly.is_finite() {
                return Err(VariabilityError::NonFinite { unit_id, year });
            }
            if i > 0 && observations[i - 1].0 >= year {
                return Err(VariabilityError::Unordered { unit_id, year });
            }
        }
        Ok(Self {
            unit_id,
            observations,
        })
    }

    /// Builds a gap-free series starting at `first_year`.
    pub fn from_contiguous(
        unit_id: impl Into<String>,
        first_year: i32,
        anomalies: &[f64],
    ) -> Result<Self, VariabilityError> {
        let observations = anomalies
            .iter()
            .enumerate()
            .map(|(i, &a)| (first_year + i as i32, a))
            .collect();
        Self::new(unit_id, observations)
    }

    pub fn unit_id(&self) -> &str {
        &self.unit_id
    }

    pub fn observations(&self) -> &[(i32, f64)] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// Mean absolute distance of excursions to the violated quantile.
    QuantileDeviation,
    /// Mean squared distance of excursions to the violated quantile.
    SquaredQuantileDeviation,
    /// Population standard deviation of the window.
    StdDev,
}

impl Measure {
    pub const ALL: [Measure; 3] = [
        Measure::QuantileDeviation,
        Measure::SquaredQuantileDeviation,
        Measure::StdDev,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariabilityConfig {
    pub period_start: i32,
    /// Exclusive.
    pub period_end: i32,
    pub span_years: u32,
    pub alpha: f64,
    pub measure: Measure,
}

impl Default for VariabilityConfig {
    /// 1600-1920 in 20-year generations with the 20-80 band.
    fn default() -> Self {
        Self {
            period_start: 1600,
            period_end: 1920,
            span_years: 20,
            alpha: 0.2,
            measure: Measure::QuantileDeviation,
        }
    }
}

impl VariabilityConfig {
    pub fn validate(&self) -> Result<(), VariabilityError> {
        if self.period_end <= self.period_start {
            return Err(VariabilityError::Config(format!(
                "period_end {} must exceed period_start {}",
                self.period_end, self.period_start
            )));
        }
        if self.span_years < 2 {
            return Err(VariabilityError::Config(format!(
                "span_years must be at least 2, got {}",
                self.span_years
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(VariabilityError::Config(format!(
                "alpha must lie in (0, 0.5), got {}",
                self.alpha
            )));
        }
        if self.generations() == 0 {
            return Err(VariabilityError::Config(format!(
                "no full {}-year generation fits in [{}, {})",
                self.span_years, self.period_start, self.period_end
            )));
        }
        Ok(())
    }

    /// Number of full generation windows in the period.
    pub fn generations(&self) -> usize {
        if self.period_end <= self.period_start || self.span_years == 0 {
            return 0;
        }
        ((self.period_end - self.period_start) as u32 / self.span_years) as usize
    }

    pub fn period_years(&self) -> usize {
        (self.period_end - self.period_start).max(0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationVariability {
    /// 1-based.
    pub generation_index: usize,
    pub eta_hat: f64,
    pub excursion_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AncestralVariability {
    pub unit_id: String,
    pub avg_variability: f64,
    pub per_generation: Vec<GenerationVariability>,
    pub config_used: VariabilityConfig,
}

impl AncestralVariability {
    pub fn eta_hats(&self) -> Vec<f64> {
        self.per_generation.iter().map(|g| g.eta_hat).collect()
    }
}

/// Splits the series into `floor((end - start) / span)` consecutive windows.
/// A trailing partial window is dropped; a missing year inside any kept
/// window is an error.
pub fn partition_generations(
    series: &TemperatureSeries,
    config: &VariabilityConfig,
) -> Result<Vec<Vec<f64>>, VariabilityError> {
    config.validate()?;
    let span = config.span_years as usize;
    let covered_end = config.period_start + (config.generations() * span) as i32;
    let by_year: BTreeMap<i32, f64> = series
        .observations
        .iter()
        .copied()
        .filter(|&(y, _)| y >= config.period_start && y < covered_end)
        .collect();

    let mut windows = Vec::with_capacity(config.generations());
    for g in 0..config.generations() {
        let start = config.period_start + (g * span) as i32;
        let mut window = Vec::with_capacity(span);
        for year in start..start + span as i32 {
            match by_year.get(&year) {
                Some(&v) => window.push(v),
                None => {
                    return Err(VariabilityError::MissingYear {
                        unit_id: series.unit_id.clone(),
                        year,
                    })
                }
            }
        }
        windows.push(window);
    }
    Ok(windows)
}

/// 1-based rank of the type-1 quantile at probability `p` among `n` values.
fn quantile_rank(n: usize, p: f64) -> usize {
    let r = (p * n as f64 - RANK_SNAP).ceil();
    (r.max(1.0) as usize).min(n)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Inverse empirical CDF: the smallest sorted value whose rank / n is at
/// least `p`. No interpolation.
pub fn empirical_quantile(values: &[f64], p: f64) -> Result<f64, VariabilityError> {
    if values.is_empty() {
        return Err(VariabilityError::Empty);
    }
    let s = sorted(values);
    Ok(s[quantile_rank(s.len(), p) - 1])
}

fn quantile_band(values: &[f64], alpha: f64) -> (f64, f64) {
    let s = sorted(values);
    let n = s.len();
    (s[quantile_rank(n, alpha) - 1], s[quantile_rank(n, 1.0 - alpha) - 1])
}

/// Sums `dist(|v - q|)` over strict excursions below the lower or above the
/// upper quantile and returns (mean, count). Zero excursions give zero.
fn excursion_mean(values: &[f64], alpha: f64, dist: impl Fn(f64) -> f64) -> (f64, usize) {
    let (lo, hi) = quantile_band(values, alpha);
    let mut total = 0.0;
    let mut count = 0usize;
    for &v in values {
        if v < lo {
            total += dist(lo - v);
            count += 1;
        } else if v > hi {
            total += dist(v - hi);
            count += 1;
        }
    }
    if count == 0 {
        (0.0, 0)
    } else {
        (total / count as f64, count)
    }
}

/// Average intensity of excursions outside the `(alpha, 1 - alpha)` band.
/// Returns `(eta_hat, excursion_count)`.
pub fn deviation_intensity(values: &[f64], alpha: f64) -> Result<(f64, usize), VariabilityError> {
    check_window(values, alpha)?;
    Ok(excursion_mean(values, alpha, |d| d))
}

fn check_window(values: &[f64], alpha: f64) -> Result<(), VariabilityError> {
    if values.is_empty() {
        return Err(VariabilityError::Empty);
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(VariabilityError::Config(format!(
            "alpha must lie in (0, 0.5), got {alpha}"
        )));
    }
    Ok(())
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Per-window statistic for the configured measure. `generation_index` is
/// left at 0; [`average_variability`] fills it in.
pub fn generation_variability(
    values: &[f64],
    config: &VariabilityConfig,
) -> Result<GenerationVariability, VariabilityError> {
    let (eta_hat, excursion_count) = match config.measure {
        Measure::QuantileDeviation => {
            check_window(values, config.alpha)?;
            excursion_mean(values, config.alpha, |d| d)
        }
        Measure::SquaredQuantileDeviation => {
            check_window(values, config.alpha)?;
            excursion_mean(values, config.alpha, |d| d * d)
        }
        Measure::StdDev => {
            if values.is_empty() {
                return Err(VariabilityError::Empty);
            }
            (population_std(values), values.len())
        }
    };
    Ok(GenerationVariability {
        generation_index: 0,
        eta_hat,
        excursion_count,
    })
}

pub fn average_variability(
    series: &TemperatureSeries,
    config: &VariabilityConfig,
) -> Result<AncestralVariability, VariabilityError> {
    let windows = partition_generations(series, config)?;
    let per_generation = windows
        .iter()
        .enumerate()
        .map(|(g, w)| {
            generation_variability(w, config).map(|mut gv| {
                gv.generation_index = g + 1;
                gv
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let avg_variability =
        per_generation.iter().map(|g| g.eta_hat).sum::<f64>() / per_generation.len() as f64;
    Ok(AncestralVariability {
        unit_id: series.unit_id.clone(),
        avg_variability,
        per_generation,
        config_used: *config,
    })
}

/// Joins a group → unit link table onto a unit index. Every group must
/// resolve; unresolved groups are reported together.
pub fn attach_to_groups(
    index: &BTreeMap<String, AncestralVariability>,
    link_table: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, AncestralVariability>, VariabilityError> {
    let missing: Vec<String> = link_table
        .iter()
        .filter(|(_, unit)| !index.contains_key(*unit))
        .map(|(group, _)| group.clone())
        .collect();
    if !missing.is_empty() {
        return Err(VariabilityError::UnknownUnits(missing));
    }
    Ok(link_table
        .iter()
        .map(|(group, unit)| (group.clone(), index[unit].clone()))
        .collect())
}
