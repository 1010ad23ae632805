//! Optimal attention across prior scales for the illustration model, with
//! the two stake components that drive it.

use ancestral_attention::attention::{log_grid, verify_single_trough, AttentionModel};

fn main() {
    let model = AttentionModel::illustration();
    let grid = log_grid(0.01, 10.0, 500);
    let curve = model.curve(&grid).unwrap();

    println!("{:>9} {:>9} {:>10} {:>10}", "theta", "xi*", "W", "L");
    for p in curve.iter().step_by(25) {
        println!("{:9.4} {:9.4} {:10.4} {:10.4}", p.theta, p.xi_star, p.w_bar, p.l_bar);
    }

    let pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.theta, p.xi_star)).collect();
    let report = verify_single_trough(&pts);
    println!("single trough: {} (zero stretch {:?})", report.passes, report.trough_interval);
}
