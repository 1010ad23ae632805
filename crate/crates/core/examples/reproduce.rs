//! Full pipeline into a directory, as `ancestral reproduce` does.
//!
//! cargo run --release --example reproduce -- [out-dir]

use ancestral_attention::pipeline::{run_reproduce, PipelineConfig};

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out/reproduce".into());
    let outcome = run_reproduce(&PipelineConfig::default(), out.as_ref()).unwrap();
    println!("{}", outcome.summary);
    for f in &outcome.outputs {
        println!("  {}", f.display());
    }
    std::process::exit(outcome.exit_code);
}
