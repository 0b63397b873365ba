//! Parameter tables for density, specific heat and conductivity at 1% and 5%
//! noise, as mean ± std over 20 split/noise seeds.
//!
//! cargo run --release --example reproduce_tables [n_seeds]

use perturbflow::experiment::{self, RunConfig, TABLE_LEVELS};

fn main() -> perturbflow::Result<()> {
    let n: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let seeds: Vec<u64> = (0..n).collect();
    let report = experiment::reproduce_tables(&RunConfig::default(), &seeds, &TABLE_LEVELS)?;
    print!("{}", report.render());
    Ok(())
}
