//! Training and validation loss along the zeroth-order flow at noise levels
//! 0, 1% and 5%, sampled every 2.5 time units. Pass a directory to also write
//! the full `loss_curves.csv`.
//!
//! cargo run --release --example loss_curves [out_dir]

use perturbflow::experiment::{self, CurveSeries, RunConfig, CURVE_LEVELS};

fn main() -> perturbflow::Result<()> {
    let config = RunConfig::default();
    let rows = match std::env::args().nth(1) {
        Some(dir) => experiment::cmd_loss_curves(&config, dir.as_ref())?,
        None => experiment::loss_curves(&config, &CURVE_LEVELS)?,
    };

    println!("{:>6} {:>7} {:>14} {:>14}", "t", "level", "train_loss", "val_loss");
    for r in rows.iter().filter(|r| r.series == CurveSeries::Theta0 && r.level == 0.01) {
        if (r.t / 2.5).fract() == 0.0 {
            println!("{:>6.1} {:>7} {:>14.6e} {:>14.6e}", r.t, r.level, r.train_loss, r.val_loss);
        }
    }
    println!();
    // the theta0 curves do not depend on the noise level; the markers do
    for r in rows.iter().filter(|r| r.series != CurveSeries::Theta0) {
        println!("level {:<5} {:<16?} train {:.6e}  val {:.6e}", r.level, r.series, r.train_loss, r.val_loss);
    }
    Ok(())
}
