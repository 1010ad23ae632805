use nalgebra::{DMatrix, DVector};

use super::{encode_keys, EconError, Table};

/// Relative tolerance on the diagonal of R below which a column is treated
/// as collinear with the columns before it.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Within {
    pub table: Table,
    /// Rows that are alone in their cell; they demean to zero.
    pub singleton_rows: Vec<usize>,
    pub n_cells: usize,
}

/// Demeans every numeric column within the cells of `fe_key`.
pub fn within_transform(data: &Table, fe_key: &str) -> Result<Within, EconError> {
    let (codes, n_cells) = encode_keys(data.key(fe_key)?);
    let mut counts = vec![0usize; n_cells];
    for &c in &codes {
        counts[c] += 1;
    }
    let mut out = data.clone();
    let names: Vec<String> = data.numeric_names().map(str::to_string).collect();
    for name in names {
        let col = data.numeric(&name)?;
        let mut sums = vec![0.0; n_cells];
        for (&c, &v) in codes.iter().zip(col) {
            sums[c] += v;
        }
        let demeaned = codes
            .iter()
            .zip(col)
            .map(|(&c, &v)| {
                if counts[c] == 1 {
                    0.0
                } else {
                    v - sums[c] / counts[c] as f64
                }
            })
            .collect();
        out.insert_numeric(&name, demeaned)?;
    }
    let singleton_rows = codes
        .iter()
        .enumerate()
        .filter(|(_, &c)| counts[c] == 1)
        .map(|(i, _)| i)
        .collect();
    Ok(Within {
        table: out,
        singleton_rows,
        n_cells,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub beta: DVector<f64>,
    pub residuals: DVector<f64>,
}

/// Least squares through a QR decomposition of `x`. `names` label the
/// columns for the collinearity diagnostic.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<OlsFit, EconError> {
    let (n, k) = x.shape();
    if n < k || k == 0 {
        return Err(EconError::TooFewObservations { n, k });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..k).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    for j in 0..k {
        if r[(j, j)].abs() <= RANK_TOL * scale || scale == 0.0 {
            let name = names.get(j).cloned().unwrap_or_else(|| format!("column {j}"));
            return Err(EconError::Collinear(name));
        }
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| EconError::Collinear(names.first().cloned().unwrap_or_default()))?;
    let residuals = y - x * &beta;
    Ok(OlsFit { beta, residuals })
}

/// CR1 sandwich `(X'X)^-1 (sum_g X_g' u_g u_g' X_g) (X'X)^-1` scaled by
/// `G/(G-1) * (N-1)/(N-K)`.
pub fn cluster_vcov(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    clusters: &[String],
) -> Result<DMatrix<f64>, EconError> {
    let (n, k) = x.shape();
    if residuals.len() != n || clusters.len() != n {
        return Err(EconError::RaggedColumn {
            name: "clusters".into(),
            got: clusters.len().min(residuals.len()),
            expected: n,
        });
    }
    if n <= k {
        return Err(EconError::TooFewObservations { n, k });
    }
    let (codes, g) = encode_keys(clusters);
    if g < 2 {
        return Err(EconError::TooFewClusters(g));
    }
    let xtx = x.transpose() * x;
    let bread = xtx
        .cholesky()
        .ok_or_else(|| EconError::Collinear("design".into()))?
        .inverse();

    let mut scores = DMatrix::<f64>::zeros(g, k);
    for i in 0..n {
        let u = residuals[i];
        for j in 0..k {
            scores[(codes[i], j)] += x[(i, j)] * u;
        }
    }
    let meat = scores.transpose() * &scores;
    let factor = (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n as f64 - k as f64));
    let v = &bread * meat * &bread * factor;
    Ok((&v + v.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|j| format!("x{j}")).collect()
    }

    #[test]
    fn exact_line() {
        let x = DMatrix::from_row_slice(4, 2, &[1., 0., 1., 1., 1., 2., 1., 3.]);
        let y = DVector::from_vec(vec![1., 3., 5., 7.]);
        let f = ols(&x, &y, &names(2)).unwrap();
        assert!((f.beta[0] - 1.0).abs() < 1e-12 && (f.beta[1] - 2.0).abs() < 1e-12);
        assert!(f.residuals.amax() < 1e-12);
    }

    #[test]
    fn orthogonal_outcome() {
        let x = DMatrix::from_row_slice(4, 2, &[1., 1., 1., -1., -1., 1., -1., -1.]);
        let y = DVector::from_vec(vec![1., -1., -1., 1.]);
        let f = ols(&x, &y, &names(2)).unwrap();
        assert!(f.beta.amax() < 1e-14);
    }

    #[test]
    fn collinear_column_named() {
        let x = DMatrix::from_row_slice(3, 3, &[1., 1., 2., 1., 2., 3., 1., 3., 4.]);
        let y = DVector::from_vec(vec![1., 2., 3.]);
        let n = vec!["const".to_string(), "x".to_string(), "x_plus_1".to_string()];
        assert_eq!(ols(&x, &y, &n).unwrap_err(), EconError::Collinear("x_plus_1".into()));
    }

    #[test]
    fn zero_residuals_zero_vcov() {
        let x = DMatrix::from_row_slice(4, 2, &[1., 0., 1., 1., 1., 2., 1., 3.]);
        let u = DVector::zeros(4);
        let c: Vec<String> = ["a", "a", "b", "b"].iter().map(|s| s.to_string()).collect();
        assert_eq!(cluster_vcov(&x, &u, &c).unwrap(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn single_cluster_rejected() {
        let x = DMatrix::from_row_slice(3, 1, &[1., 1., 1.]);
        let u = DVector::from_vec(vec![0.1, -0.1, 0.0]);
        let c = vec!["a".to_string(); 3];
        assert_eq!(cluster_vcov(&x, &u, &c), Err(EconError::TooFewClusters(1)));
    }

    #[test]
    fn within_examples() {
        let t = Table::new(4)
            .with_numeric("y", vec![1., 2., 3., 6.])
            .unwrap()
            .with_key("c", vec!["a".into(); 4])
            .unwrap();
        let w = within_transform(&t, "c").unwrap();
        assert_eq!(w.table.numeric("y").unwrap(), &[-2., -1., 0., 3.]);

        let t = Table::new(5)
            .with_numeric("y", vec![1., 1., 7., 7., 9.])
            .unwrap()
            .with_key("c", ["a", "a", "b", "b", "s"].iter().map(|s| s.to_string()).collect())
            .unwrap();
        let w = within_transform(&t, "c").unwrap();
        assert_eq!(w.table.numeric("y").unwrap(), &[0.; 5]);
        assert_eq!(w.singleton_rows, vec![4]);
        assert_eq!(w.n_cells, 3);
        assert!(within_transform(&t, "nope").is_err());
    }
}
