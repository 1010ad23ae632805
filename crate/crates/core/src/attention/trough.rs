//! Shape check for sampled attention curves: nonincreasing, then flat, then
//! nondecreasing, with no second descent.

use serde::{Deserialize, Serialize};

/// Differences within this band count as flat.
pub const FLAT_TOL: f64 = 1e-12;
pub const MIN_TROUGH_POINTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum TroughFailure {
    InsufficientPoints { points: usize },
    GridNotIncreasing { at: usize },
    /// The curve descends again after rising, at grid index `at`.
    SecondDescent { at: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TroughReport {
    pub passes: bool,
    /// Grid interval bracketing the trough: the minimal stretch widened by one
    /// grid point on each side, so it contains the true minimizer of a
    /// single-troughed function.
    pub trough_interval: Option<(f64, f64)>,
    pub failure: Option<TroughFailure>,
}

impl TroughReport {
    fn fail(failure: TroughFailure) -> Self {
        Self {
            passes: false,
            trough_interval: None,
            failure: Some(failure),
        }
    }
}

pub fn verify_single_trough(curve: &[(f64, f64)]) -> TroughReport {
    if curve.len() < MIN_TROUGH_POINTS {
        return TroughReport::fail(TroughFailure::InsufficientPoints {
            points: curve.len(),
        });
    }
    if let Some(i) = curve.windows(2).position(|w| w[0].0 >= w[1].0) {
        return TroughReport::fail(TroughFailure::GridNotIncreasing { at: i + 1 });
    }

    let mut rising = false;
    for (i, w) in curve.windows(2).enumerate() {
        let d = w[1].1 - w[0].1;
        if d > FLAT_TOL {
            rising = true;
        } else if d < -FLAT_TOL && rising {
            return TroughReport::fail(TroughFailure::SecondDescent { at: i + 1 });
        }
    }

    let min = curve.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let first = curve.iter().position(|p| p.1 <= min + FLAT_TOL).unwrap();
    let last = curve.iter().rposition(|p| p.1 <= min + FLAT_TOL).unwrap();
    let lo = curve[first.saturating_sub(1)].0;
    let hi = curve[(last + 1).min(curve.len() - 1)].0;
    TroughReport {
        passes: true,
        trough_interval: Some((lo, hi)),
        failure: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (0..200).map(|i| {
            let x = -1.0 + 2.0 * i as f64 / 199.0;
            (x, f(x))
        }).collect()
    }

    #[test]
    fn parabola_passes() {
        let r = verify_single_trough(&sample(|x| (x - 0.1) * (x - 0.1)));
        assert!(r.passes);
        let (a, b) = r.trough_interval.unwrap();
        assert!(a <= 0.1 && 0.1 <= b);
    }

    #[test]
    fn w_shape_fails() {
        let r = verify_single_trough(&sample(|x| (x * x - 0.25).powi(2)));
        assert!(!r.passes);
        assert!(matches!(r.failure, Some(TroughFailure::SecondDescent { .. })));
    }

    #[test]
    fn flat_bottom_passes() {
        let r = verify_single_trough(&sample(|x| (x.abs() - 0.3).max(0.0)));
        assert!(r.passes);
        let (a, b) = r.trough_interval.unwrap();
        assert!(a <= -0.3 && b >= 0.3);
    }

    #[test]
    fn monotone_curves_pass() {
        assert!(verify_single_trough(&sample(|x| x)).passes);
        assert!(verify_single_trough(&sample(|x| -x)).passes);
    }

    #[test]
    fn too_few_points() {
        let r = verify_single_trough(&[(1.0, 0.0)]);
        assert_eq!(r.failure, Some(TroughFailure::InsufficientPoints { points: 1 }));
    }

    #[test]
    fn unordered_grid() {
        let mut c = sample(|x| x * x);
        c.swap(3, 4);
        assert!(matches!(
            verify_single_trough(&c).failure,
            Some(TroughFailure::GridNotIncreasing { .. })
        ));
    }
}
