//! Residual of the first-order cost expansion against the full dynamics
//! driven by the frozen bang-bang control, and its log-log slope in epsilon.
//!
//! cargo run --release --example epsilon_sweep

use perturbflow::experiment::{self, RunConfig, DEFAULT_SWEEP};

fn main() -> perturbflow::Result<()> {
    let report = experiment::sweep(&RunConfig::default(), &DEFAULT_SWEEP)?;
    println!("{:>8} {:>14} {:>14} {:>12} {:>12} {:>10}", "eps", "cost", "predicted", "r(eps)", "gap", "gap/eps^2");
    for p in &report.sweep.points {
        println!(
            "{:>8.0e} {:>14.8e} {:>14.8e} {:>12.3e} {:>12.3e} {:>10.4}",
            p.epsilon,
            p.cost,
            p.predicted_cost,
            p.residual,
            p.expansion_gap,
            p.expansion_gap / (p.epsilon * p.epsilon)
        );
    }
    println!("{}", report.note);
    Ok(())
}
