use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::linalg::{cluster_vcov, ols, within_transform};
use super::{EconError, Table};

pub const CONS: &str = "_cons";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionSpec {
    pub outcome: String,
    /// The variability regressor; its powers `2..=degree` are added.
    pub variable: String,
    #[serde(default = "default_degree")]
    pub degree: u32,
    #[serde(default)]
    pub controls: Vec<String>,
    #[serde(default)]
    pub fixed_effect: Option<String>,
    pub cluster: String,
}

fn default_degree() -> u32 {
    2
}

impl RegressionSpec {
    pub fn quadratic(outcome: &str, variable: &str, cluster: &str) -> Self {
        Self {
            outcome: outcome.into(),
            variable: variable.into(),
            degree: 2,
            controls: Vec::new(),
            fixed_effect: None,
            cluster: cluster.into(),
        }
    }

    pub fn power_name(&self, k: u32) -> String {
        power_name(&self.variable, k)
    }

    /// Regressor names in design order, intercept excluded.
    pub fn regressors(&self) -> Vec<String> {
        (1..=self.degree)
            .map(|k| self.power_name(k))
            .chain(self.controls.iter().cloned())
            .collect()
    }

    pub fn validate(&self) -> Result<(), EconError> {
        if self.degree < 2 {
            return Err(EconError::Spec("degree must be at least 2".into()));
        }
        let mut seen = BTreeSet::new();
        for name in self.regressors().iter().chain([&self.outcome]) {
            if name == CONS || !seen.insert(name.clone()) {
                return Err(EconError::Spec(format!("duplicate or reserved name {name:?}")));
            }
        }
        Ok(())
    }
}

fn power_name(variable: &str, k: u32) -> String {
    match k {
        1 => variable.to_string(),
        2 => format!("{variable}_sq"),
        _ => format!("{variable}_pow{k}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: RegressionSpec,
    /// Coefficient names; `_cons` is last when no fixed effect is absorbed.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Row-major, aligned with `names`.
    pub vcov: Vec<Vec<f64>>,
    /// With absorbed effects this is the mean effect `ybar - b'xbar`.
    pub intercept: f64,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub n_fe_cells: usize,
    pub singleton_rows: usize,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub control_means: BTreeMap<String, f64>,
    /// Observed range of the variability regressor.
    pub support: (f64, f64),
}

impl FitResult {
    /// A quadratic fit known only through its reported coefficients and
    /// standard errors, such as estimates copied from another study.
    pub fn from_reported(
        beta1: (f64, f64),
        beta2: (f64, f64),
        intercept: f64,
        n_clusters: usize,
        support: (f64, f64),
    ) -> Self {
        let spec = RegressionSpec::quadratic("y", "avg_variability", "cluster");
        Self {
            names: spec.regressors(),
            coefficients: vec![beta1.0, beta2.0],
            vcov: vec![vec![beta1.1 * beta1.1, 0.0], vec![0.0, beta2.1 * beta2.1]],
            spec,
            intercept,
            n_obs: 0,
            n_clusters,
            n_fe_cells: 0,
            singleton_rows: 0,
            r_squared: f64::NAN,
            adj_r_squared: f64::NAN,
            control_means: BTreeMap::new(),
            support,
        }
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.coefficients[i])
    }

    pub fn std_err(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.vcov[i][i].max(0.0).sqrt())
    }

    pub fn beta1(&self) -> f64 {
        self.coef(&self.spec.power_name(1)).unwrap_or(0.0)
    }

    pub fn beta2(&self) -> f64 {
        self.coef(&self.spec.power_name(2)).unwrap_or(0.0)
    }

    pub fn degrees_of_freedom(&self) -> f64 {
        (self.n_clusters.max(2) - 1) as f64
    }

    /// Two-sided p-value against Student t on `G - 1` degrees of freedom.
    pub fn p_value(&self, name: &str) -> Option<f64> {
        let t = self.coef(name)? / self.std_err(name)?;
        Some(two_sided_p(t, self.degrees_of_freedom()))
    }

    /// `-b1 / (2 b2)` for a quadratic with `b2 > 0`.
    pub fn turning_point(&self) -> Option<f64> {
        let b2 = self.beta2();
        (self.spec.degree == 2 && b2 > 0.0).then(|| -self.beta1() / (2.0 * b2))
    }

    fn predict(&self, x: f64, held: &BTreeMap<String, f64>) -> f64 {
        let mut y = self.intercept;
        for k in 1..=self.spec.degree {
            y += self.coef(&self.spec.power_name(k)).unwrap_or(0.0) * x.powi(k as i32);
        }
        for c in &self.spec.controls {
            y += self.coef(c).unwrap_or(0.0) * held.get(c).copied().unwrap_or(0.0);
        }
        y
    }
}

fn two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Significance stars at the 0.01/0.05/0.1/0.15 thresholds.
pub fn stars(p: f64) -> &'static str {
    match p {
        p if p < 0.01 => "***",
        p if p < 0.05 => "**",
        p if p < 0.10 => "*",
        p if p < 0.15 => "+",
        _ => "",
    }
}

pub fn quadratic_fit(data: &Table, spec: &RegressionSpec) -> Result<FitResult, EconError> {
    spec.validate()?;
    let n = data.n_rows();
    if n == 0 {
        return Err(EconError::TooFewObservations { n: 0, k: 1 });
    }
    let x = data.numeric(&spec.variable)?.to_vec();
    let mut design = Table::new(n).with_numeric(&spec.outcome, data.numeric(&spec.outcome)?.to_vec())?;
    for k in 1..=spec.degree {
        design.insert_numeric(&spec.power_name(k), x.iter().map(|v| v.powi(k as i32)).collect())?;
    }
    for c in &spec.controls {
        design.insert_numeric(c, data.numeric(c)?.to_vec())?;
    }
    let clusters = data.key(&spec.cluster)?.to_vec();

    let mut names = spec.regressors();
    let (work, n_fe_cells, singleton_rows) = match &spec.fixed_effect {
        Some(fe) => {
            design.insert_key(fe, data.key(fe)?.to_vec())?;
            let w = within_transform(&design, fe)?;
            (w.table, w.n_cells, w.singleton_rows.len())
        }
        None => {
            design.insert_numeric(CONS, vec![1.0; n])?;
            names.push(CONS.to_string());
            (design.clone(), 0, 0)
        }
    };

    let k = names.len();
    let mut xm = DMatrix::<f64>::zeros(n, k);
    for (j, name) in names.iter().enumerate() {
        for (i, v) in work.numeric(name)?.iter().enumerate() {
            xm[(i, j)] = *v;
        }
    }
    let y = DVector::from_column_slice(work.numeric(&spec.outcome)?);
    let fit = ols(&xm, &y, &names)?;
    let vcov = cluster_vcov(&xm, &fit.residuals, &clusters)?;
    let n_clusters = super::encode_keys(&clusters).1;

    let y_raw = design.numeric(&spec.outcome)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let y_bar = mean(y_raw);
    let intercept = match &spec.fixed_effect {
        Some(_) => {
            let mut c = y_bar;
            for (j, name) in names.iter().enumerate() {
                c -= fit.beta[j] * mean(design.numeric(name)?);
            }
            c
        }
        None => fit.beta[k - 1],
    };

    // Residuals are identical to the dummy-variable regression, so R² is
    // measured against the raw outcome.
    let ssr = fit.residuals.norm_squared();
    let sst: f64 = y_raw.iter().map(|v| (v - y_bar).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { f64::NAN };
    let params = k + n_fe_cells;
    let adj_r_squared = if n > params {
        1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / (n - params) as f64
    } else {
        f64::NAN
    };

    let control_means = spec
        .controls
        .iter()
        .map(|c| Ok((c.clone(), mean(data.numeric(c)?))))
        .collect::<Result<_, EconError>>()?;
    let support = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));

    Ok(FitResult {
        spec: spec.clone(),
        names,
        coefficients: fit.beta.iter().copied().collect(),
        vcov: (0..k).map(|i| vcov.row(i).iter().copied().collect()).collect(),
        intercept,
        n_obs: n,
        n_clusters,
        n_fe_cells,
        singleton_rows,
        r_squared,
        adj_r_squared,
        control_means,
        support,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginsCurve {
    pub grid: Vec<f64>,
    pub predicted: Vec<f64>,
    pub held_at: BTreeMap<String, f64>,
    pub turning_point: Option<f64>,
}

impl MarginsCurve {
    /// Grid point with the lowest prediction.
    pub fn argmin(&self) -> Option<f64> {
        self.grid
            .iter()
            .zip(&self.predicted)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(x, _)| *x)
    }
}

/// Predictions over `grid` with controls at `held_at`; controls not listed
/// there are held at their sample means.
pub fn margins(
    fit: &FitResult,
    grid: &[f64],
    held_at: &BTreeMap<String, f64>,
) -> Result<MarginsCurve, EconError> {
    let (lo, hi) = fit.support;
    let slack = 1e-12 * (hi - lo).abs().max(1.0);
    if let Some(&x) = grid.iter().find(|&&x| !(x >= lo - slack && x <= hi + slack)) {
        return Err(EconError::OutsideSupport { x, lo, hi });
    }
    let mut held = fit.control_means.clone();
    for (k, v) in held_at {
        held.insert(k.clone(), *v);
    }
    let predicted = grid.iter().map(|&x| fit.predict(x, &held)).collect();
    Ok(MarginsCurve {
        grid: grid.to_vec(),
        predicted,
        held_at: held,
        turning_point: fit.turning_point(),
    })
}

/// Each curve shifted to a minimum of 0, then both divided by the larger
/// of the two maxima.
pub fn normalized_margins(
    fits: (&FitResult, &FitResult),
    grid: &[f64],
    held_at: &BTreeMap<String, f64>,
) -> Result<(MarginsCurve, MarginsCurve), EconError> {
    if fits.0.beta2() <= 0.0 || fits.1.beta2() <= 0.0 {
        return Err(EconError::NotConvex);
    }
    let mut a = margins(fits.0, grid, held_at)?;
    let mut b = margins(fits.1, grid, held_at)?;
    let shift = |c: &mut MarginsCurve| {
        let m = c.predicted.iter().copied().fold(f64::INFINITY, f64::min);
        c.predicted.iter_mut().for_each(|v| *v -= m);
        c.predicted.iter().copied().fold(0.0, f64::max)
    };
    let top = shift(&mut a).max(shift(&mut b));
    if !(top > 0.0) {
        return Err(EconError::FlatCurve);
    }
    for c in [&mut a, &mut b] {
        c.predicted.iter_mut().for_each(|v| *v /= top);
    }
    Ok((a, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UShapeVerdict {
    pub is_u: bool,
    pub turning_point: Option<f64>,
    pub turning_inside: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub t_values: [f64; 2],
    pub p_values: [f64; 2],
    pub df: f64,
    pub level: f64,
    pub data_range: (f64, f64),
}

pub fn u_shape_test(fit: &FitResult, data_range: (f64, f64), level: f64) -> UShapeVerdict {
    let n1 = fit.spec.power_name(1);
    let n2 = fit.spec.power_name(2);
    let (b1, b2) = (fit.beta1(), fit.beta2());
    let t = |name: &str, b: f64| b / fit.std_err(name).unwrap_or(f64::NAN);
    let t_values = [t(&n1, b1), t(&n2, b2)];
    let df = fit.degrees_of_freedom();
    let p_values = t_values.map(|t| two_sided_p(t, df));
    let turning_point = fit.turning_point();
    let turning_inside = turning_point.is_some_and(|tp| tp > data_range.0 && tp < data_range.1);
    let is_u = b1 < 0.0 && b2 > 0.0 && p_values.iter().all(|&p| p < level) && turning_inside;
    UShapeVerdict {
        is_u,
        turning_point,
        turning_inside,
        beta1: b1,
        beta2: b2,
        t_values,
        p_values,
        df,
        level,
        data_range,
    }
}
