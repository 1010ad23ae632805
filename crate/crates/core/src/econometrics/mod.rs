//! Quadratic regressions with absorbed fixed effects and cluster-robust
//! inference, plus margins and the U-shape test.

mod fit;
mod linalg;

pub use fit::{
    margins, normalized_margins, quadratic_fit, stars, u_shape_test, FitResult, MarginsCurve, CONS,
    RegressionSpec, UShapeVerdict,
};
pub use linalg::{cluster_vcov, ols, within_transform, OlsFit, Within};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EconError {
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("column {name:?} has {got} rows, expected {expected}")]
    RaggedColumn {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("design is rank deficient: column {0:?} is collinear with earlier columns")]
    Collinear(String),
    #[error("need more observations ({n}) than regressors ({k})")]
    TooFewObservations { n: usize, k: usize },
    #[error("cluster-robust covariance needs at least 2 clusters, got {0}")]
    TooFewClusters(usize),
    #[error("invalid regression spec: {0}")]
    Spec(String),
    #[error("grid point {x} outside the declared support [{lo}, {hi}]")]
    OutsideSupport { x: f64, lo: f64, hi: f64 },
    #[error("normalization undefined: margins curves are flat")]
    FlatCurve,
    #[error("fit is not a convex quadratic (avg_variability squared coefficient must be positive)")]
    NotConvex,
    #[error("non-finite value in column {0:?}")]
    NonFinite(String),
}

/// Column-oriented table: numeric columns plus string key columns.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    n_rows: usize,
    numeric: BTreeMap<String, Vec<f64>>,
    keys: BTreeMap<String, Vec<String>>,
}

impl Table {
    pub fn new(n_rows: usize) -> Self {
        Self {
            n_rows,
            ..Self::default()
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn with_numeric(mut self, name: &str, values: Vec<f64>) -> Result<Self, EconError> {
        self.insert_numeric(name, values)?;
        Ok(self)
    }

    pub fn with_key(mut self, name: &str, values: Vec<String>) -> Result<Self, EconError> {
        self.insert_key(name, values)?;
        Ok(self)
    }

    pub fn insert_numeric(&mut self, name: &str, values: Vec<f64>) -> Result<(), EconError> {
        self.check_len(name, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EconError::NonFinite(name.to_string()));
        }
        self.numeric.insert(name.to_string(), values);
        Ok(())
    }

    pub fn insert_key(&mut self, name: &str, values: Vec<String>) -> Result<(), EconError> {
        self.check_len(name, values.len())?;
        self.keys.insert(name.to_string(), values);
        Ok(())
    }

    fn check_len(&self, name: &str, got: usize) -> Result<(), EconError> {
        if got != self.n_rows {
            return Err(EconError::RaggedColumn {
                name: name.to_string(),
                got,
                expected: self.n_rows,
            });
        }
        Ok(())
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64], EconError> {
        self.numeric
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| EconError::MissingColumn(name.to_string()))
    }

    pub fn key(&self, name: &str) -> Result<&[String], EconError> {
        self.keys
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| EconError::MissingColumn(name.to_string()))
    }

    pub fn numeric_names(&self) -> impl Iterator<Item = &str> {
        self.numeric.keys().map(String::as_str)
    }

    pub fn key_names(&self) -> impl Iterator<Item = &str> {
        self.keys.keys().map(String::as_str)
    }

    /// Sub-table of the rows for which `keep` holds.
    pub fn filter_rows(&self, keep: impl Fn(usize) -> bool) -> Table {
        let rows: Vec<usize> = (0..self.n_rows).filter(|&i| keep(i)).collect();
        Table {
            n_rows: rows.len(),
            numeric: self
                .numeric
                .iter()
                .map(|(k, v)| (k.clone(), rows.iter().map(|&i| v[i]).collect()))
                .collect(),
            keys: self
                .keys
                .iter()
                .map(|(k, v)| (k.clone(), rows.iter().map(|&i| v[i].clone()).collect()))
                .collect(),
        }
    }
}

/// Dense integer codes for a key column, in order of first appearance.
pub(crate) fn encode_keys(values: &[String]) -> (Vec<usize>, usize) {
    let mut codes = BTreeMap::new();
    let mut next = 0usize;
    let out = values
        .iter()
        .map(|v| {
            *codes.entry(v.as_str()).or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect();
    (out, next)
}
