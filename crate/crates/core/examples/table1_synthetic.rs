//! Runs the full front-end by back-end grid on synthetic data and prints
//! the EER table and the code moments. Pass a seed as the first argument.

use spkreg::pipeline::{run_grid, GridConfig};

fn main() -> spkreg::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let r = run_grid(&GridConfig::default().with_seed(seed))?;
    println!("EER (%) over {} trials, seed {seed}", r.trials.len());
    print!("{}", r.eer_table());
    println!();
    print!("{}", r.moments_table());
    Ok(())
}
