//! How the zero-attention band moves with the cost of information.
//!
//! For cheap information the band is empty and the three thresholds
//! coincide at the minimizer of expected stakes; as the cost rises the
//! band opens around it.

use ancestral_attention::attention::AttentionModel;

fn main() {
    let mut model = AttentionModel::simulation_default();
    println!("{:>8} {:>10} {:>10} {:>10}  empty", "kappa", "low", "tilde", "high");
    for kappa in [0.5, 5.0, 10.0, 12.5, 15.0, 25.0] {
        model.cost.kappa = kappa;
        let t = model.thresholds().unwrap();
        println!(
            "{kappa:8.2} {:10.5} {:10.5} {:10.5}  {}",
            t.theta_low, t.theta_tilde, t.theta_high, t.level_set_empty
        );
    }

    model.cost.kappa = 12.5;
    let s = model.solve(0.12).unwrap();
    println!(
        "theta = 0.12: xi* = {:.4}, posterior variance = {:.4}, stakes = {:.3}",
        s.xi_star, s.posterior_variance, s.expected_stakes
    );
}
