//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any blocking check fails.
//!
//! Run alone with `cargo test -p perturbflow --test acceptance`.

mod common;

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use perturbflow::control::hamiltonian;
use perturbflow::dataset::{Label, WaterProperty};
use perturbflow::experiment::{self, RunConfig, DEFAULT_SWEEP, SLOPE_RANGE, TABLE_LEVELS};
use perturbflow::flow::{self, TimeGrid};
use perturbflow::model::{LossSurface, PointLoss};
use perturbflow::perturb;

struct Line {
    id: &'static str,
    pass: bool,
    /// A failing non-blocking line is a known, documented gap.
    blocking: bool,
    detail: String,
    notes: Vec<String>,
}

impl Line {
    fn new(id: &'static str, pass: bool, detail: String) -> Self {
        Line { id, pass, blocking: true, detail, notes: Vec::new() }
    }
}

fn density() -> RunConfig {
    RunConfig::builtin(WaterProperty::Density)
}

fn c1_oracle_equivalence() -> Line {
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    let mut notes = Vec::new();
    for property in WaterProperty::ALL {
        let config = RunConfig { noise_level: 0.0, epsilon: 0.0, ..RunConfig::builtin(property) };
        let start = Instant::now();
        let out = experiment::execute(&config).expect("run");
        let secs = start.elapsed().as_secs_f64();
        let train = out.prepared.original.select(&out.prepared.split.train_indices, Label::Train).unwrap();
        let ols = standardized_ols(&train, config.degree);
        let err = rel_err(&out.run.result.theta0_t, &ols);
        notes.push(format!("{}: rel err {err:.2e}, {secs:.2} s", property.symbol()));
        worst = worst.max(err);
        slowest = slowest.max(secs);
    }
    let mut line = Line::new(
        "C1 oracle equivalence",
        worst < 1e-5 && slowest < 5.0,
        format!("max rel err {worst:.2e} (< 1e-5), slowest {slowest:.2} s (< 5 s)"),
    );
    line.notes = notes;
    line
}

fn c2_table_reproduction() -> Line {
    let seeds: Vec<u64> = (0..20).collect();
    let start = Instant::now();
    let report = experiment::reproduce_tables(&RunConfig::default(), &seeds, &TABLE_LEVELS).expect("tables");
    let secs = start.elapsed().as_secs_f64();
    let temps = temperatures();

    let mut notes = Vec::new();
    let mut predictions_ok = true;
    let mut attainable_ok = true;
    let mut envelope_ok = true;
    for published in &PUBLISHED {
        let entry = report
            .entries
            .iter()
            .find(|e| e.property == published.property && e.level == published.level)
            .expect("entry present");
        let mut worst_pred: f64 = 0.0;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for row in &entry.rows {
            for &t in &temps {
                let ours = quadratic(&row.theta, t);
                let theirs = quadratic(&published.theta, t);
                worst_pred = worst_pred.max((ours - theirs).abs() / theirs.abs());
            }
            lo = lo.min(row.residual_std);
            hi = hi.max(row.residual_std);
        }
        let pred_ok = worst_pred <= 0.01;
        let env_ok = lo >= published.residual_std / 2.0 && hi <= published.residual_std * 2.0;
        predictions_ok &= pred_ok;
        envelope_ok &= env_ok;
        if published.property != WaterProperty::Conductivity {
            attainable_ok &= pred_ok;
        }
        notes.push(format!(
            "{:>3} {}%: worst prediction dev {:.3}% [{}], residual std {:.4e}..{:.4e} vs published {} [{}]",
            published.property.symbol(),
            published.level * 100.0,
            worst_pred * 100.0,
            if pred_ok { "ok" } else { "FAIL" },
            lo,
            hi,
            published.residual_std,
            if env_ok { "ok" } else { "FAIL" },
        ));
    }
    let time_ok = secs < 120.0;
    let pass = predictions_ok && envelope_ok && time_ok;
    let mut line = Line::new(
        "C2 table reproduction",
        pass,
        format!("20 seeds x 2 levels x 3 properties in {secs:.1} s (< 120 s)"),
    );
    // only the conductivity prediction check may fail without blocking
    line.blocking = !(attainable_ok && envelope_ok && time_ok);
    if !predictions_ok {
        notes.push("conductivity rows: published theta_2 (0.0056 / 0.0058) is rounded to 2 significant digits; \
                    its predictions miss the tabulated data itself by about 2%"
            .into());
    }
    line.notes = notes;
    line
}

fn c3_sweep_slope() -> Line {
    let start = Instant::now();
    let report = experiment::sweep(&density(), &DEFAULT_SWEEP).expect("sweep");
    let secs = start.elapsed().as_secs_f64();
    let slope = report.sweep.slope.unwrap_or(f64::NAN);
    let mut line = Line::new(
        "C3 convergence rate",
        report.within_range && secs < 60.0,
        format!("slope {slope:.4} in [{}, {}], {secs:.2} s (< 60 s)", SLOPE_RANGE.0, SLOPE_RANGE.1),
    );
    line.notes = report
        .sweep
        .points
        .iter()
        .map(|p| format!("eps {:e}: r = {:.3e}", p.epsilon, p.residual))
        .collect();
    line
}

fn c4_expansion_consistency() -> Line {
    let prepared = experiment::prepare(&density()).unwrap();
    let settings = density().settings();
    let (traj, _) = perturb::decomposed_solution(&prepared.problem, &settings, &prepared.theta_init).unwrap();
    let eps = [4e-3, 2e-3, 1e-3, 5e-4];
    let sweep = perturb::sweep_trajectory(&prepared.problem, &traj, &prepared.theta_init, &eps).unwrap();
    let gaps: Vec<f64> = sweep.points.iter().map(|p| p.expansion_gap).collect();
    let ratios: Vec<f64> = gaps.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = ratios.iter().all(|r| (3.0..=5.0).contains(r));
    Line::new("C4 expansion consistency", pass, format!("gap ratios per halving {ratios:.4?} (in [3, 5])"))
}

fn c5_pmp_maximality() -> Line {
    let config = density();
    let prepared = experiment::prepare(&config).unwrap();
    let problem = &prepared.problem;
    let (traj, _) = perturb::decomposed_solution(problem, &config.settings(), &prepared.theta_init).unwrap();
    let (p0, u0) = (traj.p0().unwrap(), traj.u0().unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..traj.grid.n_nodes() {
        let h = |u| hamiltonian(&traj.theta0[k], &p0[k], u, config.epsilon, &problem.train, &problem.dithered).unwrap();
        let chosen = h(u0[k]);
        for _ in 0..100 {
            worst = worst.max(h(rng.random_range(-1.0..=1.0)) - chosen);
        }
    }
    Line::new(
        "C5 PMP pointwise maximality",
        worst <= 1e-12,
        format!("max H(u) - H(u0) over {} nodes x 100 draws = {worst:.2e} (<= 1e-12)", traj.grid.n_nodes()),
    )
}

fn duality_series() -> Vec<(usize, perturb::PerturbationResult)> {
    [250, 500, 1000, 2000]
        .into_iter()
        .map(|n| {
            let config = RunConfig { n_steps: n, ..density() };
            (n, experiment::execute(&config).unwrap().run.result)
        })
        .collect()
}

fn ratios(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[0] / w[1]).collect()
}

fn c6_adjoint_duality(series: &[(usize, perturb::PerturbationResult)]) -> Line {
    let residuals: Vec<f64> = series.iter().map(|(_, r)| r.duality.residual).collect();
    let shrink = ratios(&residuals);
    let min_term = series.iter().map(|(_, r)| r.first_order_term).fold(f64::INFINITY, f64::min);
    let pass = shrink.iter().all(|&r| r >= 3.5) && min_term >= -1e-10;
    let mut line = Line::new(
        "C6 adjoint duality",
        pass,
        format!("Simpson residual shrink per halving {shrink:.2?} (>= 3.5), min first_order_term {min_term:.3e} (>= -1e-10)"),
    );
    line.notes = series
        .iter()
        .map(|(n, r)| format!("n = {n}: pairing {:.6e}, residual {:.3e}", r.duality.terminal_pairing, r.duality.residual))
        .collect();
    line
}

fn c6_left_sum(series: &[(usize, perturb::PerturbationResult)]) -> Line {
    let residuals: Vec<f64> =
        series.iter().map(|(_, r)| (r.duality.terminal_pairing - r.duality.left_riemann).abs()).collect();
    let shrink = ratios(&residuals);
    let mut line = Line::new(
        "C6 adjoint duality, left-endpoint sum",
        shrink.iter().all(|&r| r >= 3.5),
        format!("left-endpoint residual shrink per halving {shrink:.2?} (>= 3.5)"),
    );
    line.blocking = false;
    line.notes.push("a left-endpoint sum of a smooth integrand is first order; the trapezoid rule gives \
                     ~4x and the Simpson rule above ~16x"
        .into());
    line
}

fn c7_derivatives() -> Line {
    let prepared = experiment::prepare(&density()).unwrap();
    let problem = &prepared.problem;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = [0.0f64; 4];
    for _ in 0..20 {
        let theta = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
        let (train, dithered, validate) = (&problem.train, &problem.dithered, &problem.validate);
        let errs = [
            rel_err(&train.grad(&theta).unwrap(), &fd_gradient(|t| train.value(t).unwrap(), &theta)),
            rel_err_mat(&train.hessian(&theta).unwrap(), &fd_jacobian(|t| train.grad(t).unwrap(), &theta)),
            rel_err_mat(&dithered.b_jacobian(&theta).unwrap(), &fd_jacobian(|t| dithered.b_term(t).unwrap(), &theta)),
            rel_err(&validate.grad(&theta).unwrap(), &fd_gradient(|t| validate.value(t).unwrap(), &theta)),
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
    }
    Line::new(
        "C7 derivative correctness",
        worst.iter().all(|&e| e < 1e-4),
        format!(
            "max rel err grad {:.1e}, hessian {:.1e}, b_jacobian {:.1e}, phi_grad {:.1e} (< 1e-4)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

#[derive(Debug)]
struct HalfSquared;

impl PointLoss for HalfSquared {
    fn value(&self, pred: f64, target: f64) -> f64 {
        0.5 * (pred - target).powi(2)
    }
    fn d1(&self, pred: f64, target: f64) -> f64 {
        pred - target
    }
    fn d2(&self, _: f64, _: f64) -> f64 {
        1.0
    }
}

fn c8_integrator_order() -> Line {
    // J(theta) = theta^2 / 2, so dtheta/dt = -theta
    let data = perturbflow::Dataset::from_xy(&[0.0], &[0.0], Label::Train).unwrap();
    let surface = LossSurface::with_loss(perturbflow::PolynomialModel::new(0), &data, Arc::new(HalfSquared));
    let exact = (-1.0f64).exp();
    let steps = [10usize, 20, 40, 80];
    let errors: Vec<f64> = steps
        .iter()
        .map(|&n| {
            let traj = flow::integrate_theta0(&DVector::from_element(1, 1.0), &surface, &TimeGrid::new(1.0, n).unwrap())
                .unwrap();
            (traj.theta0_final()[0] - exact).abs()
        })
        .collect();
    let x: Vec<f64> = steps.iter().map(|&n| (1.0 / n as f64).ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let order = perturb::fit_slope(&x, &y).unwrap();
    Line::new(
        "C8 integrator order",
        (3.5..=4.5).contains(&order),
        format!(
            "fitted order {order:.4} (in [3.5, 4.5]), errors {}",
            errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn c9_determinism() -> Line {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    experiment::cmd_run(&density(), &a).unwrap();
    experiment::cmd_rerun(&a.join("manifest.json"), &b).unwrap();
    let files = ["manifest.json", "result.csv", "trajectory.csv"];
    let same: Vec<bool> =
        files.iter().map(|f| std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap()).collect();
    Line::new(
        "C9 determinism",
        same.iter().all(|&s| s),
        format!("rerun of manifest reproduces {} of {} files bitwise", same.iter().filter(|&&s| s).count(), files.len()),
    )
}

fn main() {
    let series = duality_series();
    let lines = vec![
        c1_oracle_equivalence(),
        c2_table_reproduction(),
        c3_sweep_slope(),
        c4_expansion_consistency(),
        c5_pmp_maximality(),
        c6_adjoint_duality(&series),
        c6_left_sum(&series),
        c7_derivatives(),
        c8_integrator_order(),
        c9_determinism(),
    ];
    println!();
    for line in &lines {
        let tag = match (line.pass, line.blocking) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "FAIL (known gap)",
        };
        println!("{tag:<16} {}: {}", line.id, line.detail);
        for note in &line.notes {
            println!("{:<16}   {note}", "");
        }
    }
    let blocking = lines.iter().filter(|l| !l.pass && l.blocking).count();
    let gaps = lines.iter().filter(|l| !l.pass && !l.blocking).count();
    println!(
        "\nacceptance: {} passed, {} known gaps, {} blocking failures",
        lines.iter().filter(|l| l.pass).count(),
        gaps,
        blocking
    );
    if blocking > 0 {
        std::process::exit(1);
    }
}
