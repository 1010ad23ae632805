//! Independent brute-force oracles shared by the integration tests. None of
//! these call into the library's numerical routines.

#![allow(dead_code)]

use ancestral_attention::variability::Measure;

/// Smallest sample value `v` with `#{x <= v} >= p n`, found by counting.
pub fn quantile_by_counting(values: &[f64], p: f64) -> f64 {
    let n = values.len() as f64;
    let mut candidates = values.to_vec();
    candidates.sort_by(|a, b| a.total_cmp(b));
    for &v in &candidates {
        let at_or_below = values.iter().filter(|&&x| x <= v).count() as f64;
        if at_or_below >= p * n - 1e-9 {
            return v;
        }
    }
    *candidates.last().unwrap()
}

pub fn window_eta(values: &[f64], alpha: f64, measure: Measure) -> f64 {
    if measure == Measure::StdDev {
        let n = values.len() as f64;
        let m = values.iter().sum::<f64>() / n;
        return (values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
    }
    let lo = quantile_by_counting(values, alpha);
    let hi = quantile_by_counting(values, 1.0 - alpha);
    let mut total = 0.0;
    let mut k = 0usize;
    for &x in values {
        let d = if x < lo {
            lo - x
        } else if x > hi {
            x - hi
        } else {
            continue;
        };
        k += 1;
        total += if measure == Measure::SquaredQuantileDeviation { d * d } else { d };
    }
    if k == 0 {
        0.0
    } else {
        total / k as f64
    }
}

/// Average of window intensities over consecutive full `span`-year windows
/// of a contiguous annual series starting at `first_year`.
pub fn average_variability_oracle(
    values: &[f64],
    first_year: i32,
    period: (i32, i32),
    span: usize,
    alpha: f64,
    measure: Measure,
) -> f64 {
    let start = (period.0 - first_year) as usize;
    let years = (period.1 - period.0) as usize;
    let windows = years / span;
    let mut sum = 0.0;
    for w in 0..windows {
        let slice = &values[start + w * span..start + (w + 1) * span];
        sum += window_eta(slice, alpha, measure);
    }
    sum / windows as f64
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        let d = m[c][c];
        for v in m[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                for j in 0..2 * n {
                    m[r][j] -= f * m[c][j];
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn xtx(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = x[0].len();
    let mut a = vec![vec![0.0; k]; k];
    for row in x {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    a
}

/// `(X'X)^-1 X'y`.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = x[0].len();
    let inv = invert(&xtx(x));
    let mut xty = vec![0.0; k];
    for (row, yi) in x.iter().zip(y) {
        for j in 0..k {
            xty[j] += row[j] * yi;
        }
    }
    (0..k).map(|i| (0..k).map(|j| inv[i][j] * xty[j]).sum()).collect()
}

/// Coefficients on `regressors` from OLS with one dummy per distinct cell.
pub fn dummy_variable_ols(regressors: &[Vec<f64>], cells: &[usize], y: &[f64]) -> Vec<f64> {
    let n_cells = cells.iter().max().unwrap() + 1;
    let rows: Vec<Vec<f64>> = regressors
        .iter()
        .zip(cells)
        .map(|(r, &c)| {
            let mut row = r.clone();
            row.extend((0..n_cells).map(|j| if j == c { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    let beta = normal_equations(&rows, y);
    beta[..regressors[0].len()].to_vec()
}

/// Long-form CR1 sandwich with explicit per-cluster loops.
pub fn cluster_sandwich(x: &[Vec<f64>], u: &[f64], clusters: &[usize]) -> Vec<Vec<f64>> {
    let n = x.len();
    let k = x[0].len();
    let g = clusters.iter().max().unwrap() + 1;
    let bread = invert(&xtx(x));
    let mut meat = vec![vec![0.0; k]; k];
    for c in 0..g {
        let mut s = vec![0.0; k];
        for i in (0..n).filter(|&i| clusters[i] == c) {
            for j in 0..k {
                s[j] += x[i][j] * u[i];
            }
        }
        for a in 0..k {
            for b in 0..k {
                meat[a][b] += s[a] * s[b];
            }
        }
    }
    let factor = (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n - k) as f64);
    let mut v = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            let mut acc = 0.0;
            for p in 0..k {
                for q in 0..k {
                    acc += bread[i][p] * meat[p][q] * bread[q][j];
                }
            }
            v[i][j] = factor * acc;
        }
    }
    v
}

/// HC1: `(X'X)^-1 X' diag(u^2) X (X'X)^-1 * n / (n - k)`.
pub fn hc1(x: &[Vec<f64>], u: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let k = x[0].len();
    let bread = invert(&xtx(x));
    let mut meat = vec![vec![0.0; k]; k];
    for (row, ui) in x.iter().zip(u) {
        for a in 0..k {
            for b in 0..k {
                meat[a][b] += ui * ui * row[a] * row[b];
            }
        }
    }
    let scale = n as f64 / (n - k) as f64;
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let mut acc = 0.0;
                    for p in 0..k {
                        for q in 0..k {
                            acc += bread[i][p] * meat[p][q] * bread[q][j];
                        }
                    }
                    scale * acc
                })
                .collect()
        })
        .collect()
}
