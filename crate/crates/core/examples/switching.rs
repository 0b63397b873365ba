//! The switching function s(t) = <p0(t), B(theta0(t))> and the bang-bang
//! control it selects, for the default density run and for an asymmetric
//! control set.
//!
//! cargo run --release --example switching

use perturbflow::experiment::{self, RunConfig};
use perturbflow::perturb;

fn show(config: &RunConfig) -> perturbflow::Result<()> {
    let prep = experiment::prepare(config)?;
    let settings = config.settings();
    let (_, switches) = perturb::decomposed_solution(&prep.problem, &settings, &prep.theta_init)?;

    println!("U = [{}, {}], tie tolerance {:e}", config.u_min, config.u_max, config.tie_tol);
    for r in switches.iter().step_by(200) {
        println!("  t = {:>5.1}  s = {:>11.3e}  u0 = {:>4}", r.t, r.switching, r.u);
    }
    for w in switches.windows(2).filter(|w| w[0].u != w[1].u) {
        println!("  u0 changes {} -> {} at t = {}", w[0].u, w[1].u, w[1].t);
    }
    let ties = perturbflow::control::tie_fraction(&switches, config.tie_tol);
    println!("  tie rule on {:.1}% of nodes\n", 100.0 * ties);
    Ok(())
}

fn main() -> perturbflow::Result<()> {
    show(&RunConfig::default())?;
    show(&RunConfig { u_min: -0.25, u_max: 1.0, ..RunConfig::default() })?;
    // with no tie band every node is bang-bang
    show(&RunConfig { tie_tol: 0.0, ..RunConfig::default() })
}
