//! Quadratic fit with absorbed cell effects and clustered errors, then the
//! U-shape test and a margins curve over the observed range.

use std::collections::BTreeMap;

use ancestral_attention::attention::AttentionModel;
use ancestral_attention::econometrics::{margins, quadratic_fit, stars, u_shape_test};
use ancestral_attention::pipeline::{respondent_table, PipelineConfig};
use ancestral_attention::transmission::{build_dataset, CohortConfig, GroupLayout};

fn main() {
    let model = AttentionModel::simulation_default();
    let cfg = CohortConfig::default();
    let data = build_dataset(&GroupLayout::default().generate(cfg.seed), &cfg, &model).unwrap();
    let table = respondent_table(&data);

    let spec = PipelineConfig::default().regression;
    let fit = quadratic_fit(&table, &spec).unwrap();
    for name in &fit.names {
        let p = fit.p_value(name).unwrap();
        println!("{name:>18} {:10.4} ({:.4}){}", fit.coef(name).unwrap(), fit.std_err(name).unwrap(), stars(p));
    }
    println!("N = {}, clusters = {}, cells = {}", fit.n_obs, fit.n_clusters, fit.n_fe_cells);

    let verdict = u_shape_test(&fit, fit.support, 0.01);
    println!(
        "U-shaped: {} (turning point {:.4}, model trough {:.4})",
        verdict.is_u,
        verdict.turning_point.unwrap_or(f64::NAN),
        model.trough_midpoint().unwrap()
    );

    let (lo, hi) = fit.support;
    let grid: Vec<f64> = (0..=10).map(|i| lo + (hi - lo) * i as f64 / 10.0).collect();
    let curve = margins(&fit, &grid, &BTreeMap::new()).unwrap();
    for (x, y) in curve.grid.iter().zip(&curve.predicted) {
        println!("  {x:.4} -> {y:.4}");
    }
}
