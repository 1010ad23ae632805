//! Thresholds of the zero-attention band.
//!
//! `F = W + L` is convex with a single trough at `theta_tilde`. Attention is
//! zero exactly on the level set `{F < kappa / 2}`, an interval
//! `(theta_low, theta_high)` around the trough. When the set is empty all three
//! thresholds collapse onto `theta_tilde`.

use serde::{Deserialize, Serialize};

use super::{stakes_at, AttentionError, CostSpec, PriorKind, QuadratureSettings, StakesSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdSearch {
    /// Upper end of the searched scale range.
    pub theta_max: f64,
    /// Log-spaced scan points used to bracket the minimum.
    pub scan_points: usize,
    /// Absolute tolerance for golden-section and bisection.
    pub tol: f64,
}

impl Default for ThresholdSearch {
    fn default() -> Self {
        Self {
            theta_max: 1e6,
            scan_points: 241,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub theta_low: f64,
    pub theta_tilde: f64,
    pub theta_high: f64,
    /// `F(theta_tilde)`.
    pub f_min: f64,
    pub level_set_empty: bool,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const MAX_ITER: usize = 400;

pub fn find_thresholds(
    stakes: &StakesSpec,
    prior: &PriorKind,
    cost: &CostSpec,
    search: &ThresholdSearch,
    quad: &QuadratureSettings,
) -> Result<Thresholds, AttentionError> {
    stakes.validate()?;
    prior.validate()?;
    cost.validate()?;
    let f = |theta: f64| stakes_at(stakes, prior, theta, quad).map(|s| s.total());
    let level = cost.threshold();

    // scan 0 plus a log grid up to theta_max
    let n = search.scan_points.max(3);
    let mut scan = Vec::with_capacity(n + 1);
    scan.push(0.0);
    scan.extend(super::log_grid(1e-6_f64.min(search.theta_max / 10.0), search.theta_max, n));
    let values = scan.iter().map(|&t| f(t)).collect::<Result<Vec<_>, _>>()?;
    let k = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    if k == scan.len() - 1 {
        return Err(AttentionError::NoBracket {
            theta_max: search.theta_max,
        });
    }
    let lo = if k == 0 { 0.0 } else { scan[k - 1] };
    let hi = scan[k + 1];
    let theta_tilde = golden_section_min(&f, lo, hi, search.tol)?;
    let f_min = f(theta_tilde)?;

    if f_min >= level {
        return Ok(Thresholds {
            theta_low: theta_tilde,
            theta_tilde,
            theta_high: theta_tilde,
            f_min,
            level_set_empty: true,
        });
    }

    let theta_low = if f(0.0)? < level {
        0.0
    } else {
        bisect_level(&f, level, 0.0, theta_tilde, search.tol)?
    };

    let mut upper = theta_tilde.max(1e-6);
    loop {
        upper *= 2.0;
        if f(upper)? >= level {
            break;
        }
        if upper > search.theta_max {
            return Err(AttentionError::NoBracket {
                theta_max: search.theta_max,
            });
        }
    }
    let theta_high = bisect_level(&f, level, theta_tilde, upper, search.tol)?;

    Ok(Thresholds {
        theta_low,
        theta_tilde,
        theta_high,
        f_min,
        level_set_empty: false,
    })
}

fn golden_section_min(
    f: &impl Fn(f64) -> Result<f64, AttentionError>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<f64, AttentionError> {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..MAX_ITER {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let mid = 0.5 * (a + b);
    // the bracket edge wins when the trough sits on it (e.g. protection only)
    let fa = f(a)?;
    Ok(if fa < f(mid)? { a } else { mid })
}

/// Root of `F = level` in `[lo, hi]`; `F - level` must change sign.
fn bisect_level(
    f: &impl Fn(f64) -> Result<f64, AttentionError>,
    level: f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64, AttentionError> {
    let lo_above = f(lo)? >= level;
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        if (f(mid)? >= level) == lo_above {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
