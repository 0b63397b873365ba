//! Step-refinement check of the adjoint identity
//! <p0(T), theta1(T)> = int u0 <p0, B(theta0)> dt
//! under three quadratures, plus the printed (p-free) adjoint for contrast.
//!
//! cargo run --release --example adjoint_duality

use perturbflow::experiment::{self, RunConfig};
use perturbflow::AdjointMode;

fn main() -> perturbflow::Result<()> {
    println!("{:>6} {:>14} {:>12} {:>12} {:>12}", "n", "pairing", "simpson", "trapezoid", "left sum");
    for n in [250, 500, 1000, 2000, 4000] {
        let d = experiment::execute(&RunConfig { n_steps: n, ..RunConfig::default() })?.run.result.duality;
        let t = d.terminal_pairing;
        println!(
            "{n:>6} {t:>14.8e} {:>12.3e} {:>12.3e} {:>12.3e}",
            d.residual,
            (t - d.trapezoid).abs(),
            (t - d.left_riemann).abs()
        );
    }

    let literal = RunConfig { adjoint: AdjointMode::PaperLiteral, ..RunConfig::default() };
    let r = experiment::execute(&literal)?.run.result;
    println!(
        "\nprinted adjoint: pairing {:.6e}, quadrature {:.6e}, first-order term {:.6e}",
        r.duality.terminal_pairing, r.duality.quadrature, r.first_order_term
    );
    Ok(())
}
