//! One run of the perturbation algorithm on the built-in water density table,
//! at the standard settings (degree 2, 18/6 split, 1% noise, eps = 1e-3).
//!
//! cargo run --release --example water_density

use perturbflow::experiment::{self, RunConfig};
use perturbflow::WaterProperty;

fn main() -> perturbflow::Result<()> {
    let config = RunConfig::builtin(WaterProperty::Density);
    let out = experiment::execute(&config)?;
    let r = &out.run.result;

    println!("config hash   {}", config.hash());
    println!("train rows    {:?}", out.prepared.split.train_indices);
    println!("validate rows {:?}", out.prepared.split.validate_indices);
    println!();
    println!("theta0(T)  {:?}", r.raw.theta0_t.as_slice());
    println!("theta1(T)  {:?}", r.raw.theta1_t.as_slice());
    println!("theta*     {:?}", r.raw.theta_star.as_slice());
    println!("residual std over all 22 rows: {:.4}", out.report.residual_std);
    println!();

    let scale = out.prepared.problem.loss_scale();
    println!("validation loss  theta0(T) {:.6e}   theta* {:.6e}", scale * r.j_val_0, scale * r.j_val_star);
    println!("first-order term <p0(T), theta1(T)> = {:.6e}", r.first_order_term);
    println!("expansion residual r(eps) = {:.3e}", r.expansion.residual);
    for note in &out.manifest.diagnostics.notes {
        println!("note: {note}");
    }
    Ok(())
}
