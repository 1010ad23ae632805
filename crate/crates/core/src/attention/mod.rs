//! Rational-inattention attention model.
//!
//! An agent facing quadratic loss around an unknown Gaussian optimum chooses
//! an attention level `xi = 1 - posterior_var / prior_var` at Shannon cost
//! `c(xi) = (kappa / 2) ln(1 / (1 - xi))`. The stakes of learning are
//! `V = W(theta) + L(theta)`, the expected exploitation and protection weights
//! under a prior on climate variability drawn from a scale family with scale
//! `theta`. The optimum is `xi* = max(0, 1 - kappa / (2 V))`.
//!
//! Because `V` is convex in `theta` with a single trough, `xi*` falls, sits at
//! zero on the level set `{V < kappa / 2}`, then rises: see [`find_thresholds`]
//! and [`verify_single_trough`].

mod quadrature;
mod thresholds;
mod trough;

pub use quadrature::{normal_expectation, GaussHermite, NonConvergence, QuadratureSettings, LADDER};
pub use thresholds::{find_thresholds, ThresholdSearch, Thresholds};
pub use trough::{verify_single_trough, TroughFailure, TroughReport, FLAT_TOL, MIN_TROUGH_POINTS};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest attention level considered by numerical search.
pub const XI_CAP: f64 = 1.0 - 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttentionError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(
        "quadrature did not converge at theta={theta}: {nodes} nodes gave {estimate}, previous rule {previous}"
    )]
    Quadrature {
        theta: f64,
        nodes: usize,
        estimate: f64,
        previous: f64,
    },
    #[error("no bracket for the minimum of W+L within theta <= {theta_max}")]
    NoBracket { theta_max: f64 },
    #[error("information cannot be negative: posterior variance {posterior} exceeds prior {prior}")]
    NegativeInformation { prior: f64, posterior: f64 },
    #[error("theta grid must be positive and strictly increasing")]
    BadGrid,
}

/// Stakes of learning: exploitation weight `w(eta) = 1 / (a + eta)` with
/// probability `q`, protection weight `l(eta) = b eta^2` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StakesSpec {
    pub q: f64,
    pub sigma_sq: f64,
    pub a: f64,
    pub b: f64,
}

impl StakesSpec {
    pub fn validate(&self) -> Result<(), AttentionError> {
        let finite = [self.q, self.sigma_sq, self.a, self.b]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(AttentionError::Invalid("stakes must be finite".into()));
        }
        // q is allowed to hit 0 or 1 to isolate one motive
        if !(0.0..=1.0).contains(&self.q) {
            return Err(AttentionError::Invalid(format!("q={} outside [0, 1]", self.q)));
        }
        for (name, v) in [("sigma_sq", self.sigma_sq), ("a", self.a), ("b", self.b)] {
            if v <= 0.0 {
                return Err(AttentionError::Invalid(format!("{name}={v} must be positive")));
            }
        }
        Ok(())
    }

    pub fn w(&self, eta: f64) -> f64 {
        1.0 / (self.a + eta)
    }

    pub fn w_prime(&self, eta: f64) -> f64 {
        -1.0 / (self.a + eta).powi(2)
    }

    pub fn w_second(&self, eta: f64) -> f64 {
        2.0 / (self.a + eta).powi(3)
    }

    pub fn l(&self, eta: f64) -> f64 {
        self.b * eta * eta
    }

    pub fn l_prime(&self, eta: f64) -> f64 {
        2.0 * self.b * eta
    }
}

/// Reference distribution `p̄` of a scale family on `eta >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorKind {
    /// `ln eta ~ N(0, log_sd^2)`.
    Lognormal { log_sd: f64 },
    /// All mass at `eta = 1`.
    PointMass,
    /// Finite support; weights are normalized on use.
    Discrete { points: Vec<f64>, weights: Vec<f64> },
}

impl PriorKind {
    pub fn validate(&self) -> Result<(), AttentionError> {
        match self {
            PriorKind::Lognormal { log_sd } => {
                if !(log_sd.is_finite() && *log_sd > 0.0) {
                    return Err(AttentionError::Invalid(format!("log_sd={log_sd} must be positive")));
                }
            }
            PriorKind::PointMass => {}
            PriorKind::Discrete { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(AttentionError::Invalid(
                        "discrete prior needs matching nonempty points and weights".into(),
                    ));
                }
                if points.iter().any(|p| !(p.is_finite() && *p >= 0.0))
                    || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
                    || weights.iter().sum::<f64>() <= 0.0
                {
                    return Err(AttentionError::Invalid(
                        "discrete prior needs nonnegative points and weights with positive total".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Reference mean `mu`.
    pub fn mean(&self) -> f64 {
        match self {
            PriorKind::Lognormal { log_sd } => (log_sd * log_sd / 2.0).exp(),
            PriorKind::PointMass => 1.0,
            PriorKind::Discrete { points, weights } => {
                let t: f64 = weights.iter().sum();
                points.iter().zip(weights).map(|(p, w)| p * w).sum::<f64>() / t
            }
        }
    }

    /// Reference variance `nu^2`.
    pub fn variance(&self) -> f64 {
        match self {
            PriorKind::Lognormal { log_sd } => {
                let s2 = log_sd * log_sd;
                s2.exp_m1() * s2.exp()
            }
            PriorKind::PointMass => 0.0,
            PriorKind::Discrete { points, weights } => {
                let t: f64 = weights.iter().sum();
                let m = self.mean();
                points
                    .iter()
                    .zip(weights)
                    .map(|(p, w)| w * (p - m).powi(2))
                    .sum::<f64>()
                    / t
            }
        }
    }

    /// `E_p̄[f(eta)]`. Lognormal expectations are taken over the underlying
    /// normal variable with refinement-doubled Gauss–Hermite rules.
    pub fn expect(
        &self,
        f: impl Fn(f64) -> f64,
        quad: &QuadratureSettings,
    ) -> Result<f64, NonConvergence> {
        match self {
            PriorKind::Lognormal { log_sd } => {
                normal_expectation(|z| f((log_sd * z).exp()), quad).map(|(v, _)| v)
            }
            PriorKind::PointMass => Ok(f(1.0)),
            PriorKind::Discrete { points, weights } => {
                let t: f64 = weights.iter().sum();
                Ok(points.iter().zip(weights).map(|(&p, &w)| w * f(p)).sum::<f64>() / t)
            }
        }
    }
}

/// Prior `p0(eta) = (1 / theta) p̄(eta / theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorScaleFamily {
    pub kind: PriorKind,
    pub theta: f64,
}

impl PriorScaleFamily {
    pub fn new(kind: PriorKind, theta: f64) -> Result<Self, AttentionError> {
        kind.validate()?;
        if !(theta.is_finite() && theta > 0.0) {
            return Err(AttentionError::Invalid(format!("theta={theta} must be positive")));
        }
        Ok(Self { kind, theta })
    }

    pub fn mean(&self) -> f64 {
        self.kind.mean() * self.theta
    }

    pub fn variance(&self) -> f64 {
        self.kind.variance() * self.theta * self.theta
    }

    /// `E_p0[f(eta)] = E_p̄[f(theta eta)]`.
    pub fn expect(
        &self,
        f: impl Fn(f64) -> f64,
        quad: &QuadratureSettings,
    ) -> Result<f64, AttentionError> {
        let theta = self.theta;
        self.kind
            .expect(|eta| f(theta * eta), quad)
            .map_err(|e| quadrature_error(theta, e))
    }
}

fn quadrature_error(theta: f64, e: NonConvergence) -> AttentionError {
    AttentionError::Quadrature {
        theta,
        nodes: e.nodes,
        estimate: e.estimate,
        previous: e.previous,
    }
}

/// Shannon information cost with marginal value `kappa` per two nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub kappa: f64,
}

impl CostSpec {
    pub fn validate(&self) -> Result<(), AttentionError> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(AttentionError::Invalid(format!("kappa={} must be positive", self.kappa)));
        }
        Ok(())
    }

    /// `(kappa / 2) ln(1 / (1 - xi))`.
    pub fn cost(&self, xi: f64) -> f64 {
        -0.5 * self.kappa * (-xi).ln_1p()
    }

    pub fn marginal(&self, xi: f64) -> f64 {
        0.5 * self.kappa / (1.0 - xi)
    }

    /// `c'(0)`: stakes at or below this buy no attention.
    pub fn threshold(&self) -> f64 {
        0.5 * self.kappa
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedStakes {
    pub w_bar: f64,
    pub l_bar: f64,
}

impl ExpectedStakes {
    pub fn total(&self) -> f64 {
        self.w_bar + self.l_bar
    }
}

/// `W(theta) = sigma^2 q E_p̄[w(theta eta)]` and
/// `L(theta) = sigma^2 (1 - q) E_p̄[l(theta eta)]`.
pub fn expected_stakes(
    stakes: &StakesSpec,
    prior: &PriorScaleFamily,
    quad: &QuadratureSettings,
) -> Result<ExpectedStakes, AttentionError> {
    stakes.validate()?;
    stakes_at(stakes, &prior.kind, prior.theta, quad)
}

/// Same as [`expected_stakes`] but also accepts `theta = 0`, the limit of a
/// prior collapsing on a perfectly stable climate.
pub(crate) fn stakes_at(
    stakes: &StakesSpec,
    kind: &PriorKind,
    theta: f64,
    quad: &QuadratureSettings,
) -> Result<ExpectedStakes, AttentionError> {
    let s2 = stakes.sigma_sq;
    let w_bar = if stakes.q > 0.0 {
        let e = kind
            .expect(|eta| stakes.w(theta * eta), quad)
            .map_err(|e| quadrature_error(theta, e))?;
        s2 * stakes.q * e
    } else {
        0.0
    };
    let l_bar = if stakes.q < 1.0 {
        let e = kind
            .expect(|eta| stakes.l(theta * eta), quad)
            .map_err(|e| quadrature_error(theta, e))?;
        s2 * (1.0 - stakes.q) * e
    } else {
        0.0
    };
    Ok(ExpectedStakes { w_bar, l_bar })
}

/// Closed-form optimum `max(0, 1 - kappa / (2 V))`.
pub fn optimal_attention(stakes_total: f64, cost: &CostSpec) -> f64 {
    if stakes_total <= cost.threshold() {
        0.0
    } else {
        1.0 - cost.kappa / (2.0 * stakes_total)
    }
}

/// Maximizes `xi V - c(xi)` over `[0, XI_CAP]` without using the first-order
/// condition: a 1e-3 grid locates the best cell, a 1e-6 grid scans the
/// cells either side of it, and trisection polishes the result.
pub fn brute_force_attention(stakes_total: f64, cost: &CostSpec) -> f64 {
    let objective = |xi: f64| xi * stakes_total - cost.cost(xi);
    let argmax_on_grid = |lo: f64, hi: f64, step: f64| -> f64 {
        let n = ((hi - lo) / step).ceil() as usize;
        let mut best = (lo, objective(lo));
        for i in 1..=n {
            let xi = (lo + i as f64 * step).min(hi);
            let v = objective(xi);
            if v > best.1 {
                best = (xi, v);
            }
        }
        best.0
    };
    let coarse = argmax_on_grid(0.0, XI_CAP, 1e-3);
    let lo = (coarse - 1e-3).max(0.0);
    let hi = (coarse + 1e-3).min(XI_CAP);
    let fine = argmax_on_grid(lo, hi, 1e-6);

    let (mut a, mut b) = ((fine - 1e-6).max(0.0), (fine + 1e-6).min(XI_CAP));
    for _ in 0..100 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if objective(m1) < objective(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    let polished = 0.5 * (a + b);
    // keep a grid corner if it beats the interior point
    [fine, polished]
        .into_iter()
        .max_by(|x, y| objective(*x).total_cmp(&objective(*y)))
        .unwrap()
}

/// Gaussian mutual information `0.5 ln(sigma^2 / posterior_variance)` in nats.
pub fn gaussian_mutual_information(
    sigma_sq: f64,
    posterior_variance: f64,
) -> Result<f64, AttentionError> {
    if !(sigma_sq > 0.0 && posterior_variance > 0.0) {
        return Err(AttentionError::Invalid("variances must be positive".into()));
    }
    if posterior_variance > sigma_sq {
        return Err(AttentionError::NegativeInformation {
            prior: sigma_sq,
            posterior: posterior_variance,
        });
    }
    Ok(0.5 * (sigma_sq / posterior_variance).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub theta: f64,
    pub xi_star: f64,
    pub w_bar: f64,
    pub l_bar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionSolution {
    pub theta: f64,
    pub xi_star: f64,
    pub posterior_variance: f64,
    pub expected_stakes: f64,
    pub thresholds: Thresholds,
}

/// Complete model: stakes, prior template, cost and numerical settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionModel {
    pub stakes: StakesSpec,
    pub prior: PriorKind,
    pub cost: CostSpec,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
    #[serde(default)]
    pub search: ThresholdSearch,
}

impl AttentionModel {
    /// Illustration configuration: inverse exploitation weight, quadratic
    /// protection weight, lognormal prior, with a nonempty zero-attention
    /// band inside `[0.01, 10]`.
    pub fn illustration() -> Self {
        Self {
            stakes: StakesSpec {
                q: 0.5,
                sigma_sq: 1.0,
                a: 1.0,
                b: 1.0,
            },
            prior: PriorKind::Lognormal { log_sd: 0.5 },
            cost: CostSpec { kappa: 0.9 },
            quadrature: QuadratureSettings::default(),
            search: ThresholdSearch::default(),
        }
    }

    /// Parameters in °C units whose trough sits near 0.05, inside the range
    /// the synthetic cohort generates.
    pub fn simulation_default() -> Self {
        Self {
            stakes: StakesSpec {
                q: 0.5,
                sigma_sq: 1.0,
                a: 0.05,
                b: 500.0,
            },
            prior: PriorKind::Lognormal { log_sd: 0.5 },
            cost: CostSpec { kappa: 12.5 },
            quadrature: QuadratureSettings::default(),
            search: ThresholdSearch::default(),
        }
    }

    pub fn validate(&self) -> Result<(), AttentionError> {
        self.stakes.validate()?;
        self.prior.validate()?;
        self.cost.validate()
    }

    pub fn stakes_at(&self, theta: f64) -> Result<ExpectedStakes, AttentionError> {
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(AttentionError::Invalid(format!("theta={theta} must be nonnegative")));
        }
        stakes_at(&self.stakes, &self.prior, theta, &self.quadrature)
    }

    pub fn xi_star(&self, theta: f64) -> Result<f64, AttentionError> {
        Ok(optimal_attention(self.stakes_at(theta)?.total(), &self.cost))
    }

    pub fn thresholds(&self) -> Result<Thresholds, AttentionError> {
        find_thresholds(&self.stakes, &self.prior, &self.cost, &self.search, &self.quadrature)
    }

    pub fn solve(&self, theta: f64) -> Result<AttentionSolution, AttentionError> {
        self.validate()?;
        let v = self.stakes_at(theta)?.total();
        let xi_star = optimal_attention(v, &self.cost);
        Ok(AttentionSolution {
            theta,
            xi_star,
            posterior_variance: self.stakes.sigma_sq * (1.0 - xi_star),
            expected_stakes: v,
            thresholds: self.thresholds()?,
        })
    }

    /// Midpoint of the zero-attention band, or the argmin of `W + L` when
    /// the band is empty.
    pub fn trough_midpoint(&self) -> Result<f64, AttentionError> {
        let t = self.thresholds()?;
        Ok(if t.level_set_empty {
            t.theta_tilde
        } else {
            0.5 * (t.theta_low + t.theta_high)
        })
    }
}

/// `xi*(theta)` on a positive, strictly increasing grid.
pub fn attention_curve(
    stakes: &StakesSpec,
    prior: &PriorKind,
    cost: &CostSpec,
    theta_grid: &[f64],
    quad: &QuadratureSettings,
) -> Result<Vec<CurvePoint>, AttentionError> {
    stakes.validate()?;
    prior.validate()?;
    cost.validate()?;
    let increasing = theta_grid.windows(2).all(|w| w[0] < w[1]);
    if !increasing || theta_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(AttentionError::BadGrid);
    }
    theta_grid
        .par_iter()
        .map(|&theta| {
            let s = stakes_at(stakes, prior, theta, quad)?;
            Ok(CurvePoint {
                theta,
                xi_star: optimal_attention(s.total(), cost),
                w_bar: s.w_bar,
                l_bar: s.l_bar,
            })
        })
        .collect()
}

impl AttentionModel {
    pub fn curve(&self, theta_grid: &[f64]) -> Result<Vec<CurvePoint>, AttentionError> {
        attention_curve(&self.stakes, &self.prior, &self.cost, theta_grid, &self.quadrature)
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}
