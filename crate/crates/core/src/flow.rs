//! Fixed-step RK4 integration of the decomposed systems on a shared uniform
//! grid: the zeroth-order gradient flow (forward), its adjoint (backward) and
//! the first-order correction (forward).

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LossSurface, ParamVector};

/// Uniform nodes `t_k = k * T / n_steps`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub final_time: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(final_time: f64, n_steps: usize) -> Result<Self> {
        let g = TimeGrid { final_time, n_steps };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(Error::InvalidGrid(format!("final time must be positive, got {}", self.final_time)));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.final_time / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.final_time
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(|k| self.node(k))
    }

    pub fn refined(&self, factor: usize) -> Self {
        TimeGrid { final_time: self.final_time, n_steps: self.n_steps * factor }
    }
}

/// Right-hand side used for the zeroth-order adjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjointMode {
    /// `dp/dt = H(theta0(t)) p`, the linearisation of the full costate equation.
    #[default]
    Corrected,
    /// `dp/dt = H(theta0(t)) 1`: the printed zeroth-order equation, which has
    /// no `p` factor. The Hessian is applied to the all-ones vector so the
    /// right-hand side is a vector.
    PaperLiteral,
}

/// Samples of the zeroth- and first-order solutions on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub theta0: Vec<ParamVector>,
    pub p0: Option<Vec<ParamVector>>,
    pub u0: Option<Vec<f64>>,
    pub theta1: Option<Vec<ParamVector>>,
}

impl Trajectory {
    pub fn theta0_final(&self) -> &ParamVector {
        self.theta0.last().expect("trajectory has at least two nodes")
    }

    pub fn p0(&self) -> Result<&[ParamVector]> {
        self.p0.as_deref().ok_or(Error::Incomplete("p0"))
    }

    pub fn u0(&self) -> Result<&[f64]> {
        self.u0.as_deref().ok_or(Error::Incomplete("u0"))
    }

    pub fn theta1(&self) -> Result<&[ParamVector]> {
        self.theta1.as_deref().ok_or(Error::Incomplete("theta1"))
    }

    /// CSV text with columns `t, theta0_*, p0_*, u0, theta1_*`, one row per
    /// node. Parts not yet computed are left as empty cells.
    pub fn to_csv_string(&self) -> String {
        let p = self.theta0[0].len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=p).map(|i| format!("theta0_{i}")));
        header.extend((1..=p).map(|i| format!("p0_{i}")));
        header.push("u0".into());
        header.extend((1..=p).map(|i| format!("theta1_{i}")));
        let mut out = header.join(",");
        out.push('\n');

        let empty = || vec![String::new(); p];
        for (k, t) in self.grid.nodes().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(self.theta0[k].iter().map(f64::to_string));
            match &self.p0 {
                Some(p0) => row.extend(p0[k].iter().map(f64::to_string)),
                None => row.extend(empty()),
            }
            row.push(self.u0.as_ref().map(|u| u[k].to_string()).unwrap_or_default());
            match &self.theta1 {
                Some(t1) => row.extend(t1[k].iter().map(f64::to_string)),
                None => row.extend(empty()),
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

/// One classical RK4 step. `f(stage, y)` receives the stage index
/// (0 at `t`, 1 and 2 at `t + h/2`, 3 at `t + h`).
pub fn rk4_step<F>(y: &DVector<f64>, h: f64, mut f: F) -> Result<DVector<f64>>
where
    F: FnMut(usize, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = f(0, y)?;
    let k2 = f(1, &(y + &k1 * (0.5 * h)))?;
    let k3 = f(2, &(y + &k2 * (0.5 * h)))?;
    let k4 = f(3, &(y + &k3 * h))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

fn ensure_finite(v: &DVector<f64>, step: usize, t: f64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { step, t })
    }
}

/// Gradient flow `dtheta/dt = -grad J(theta)` from `theta_init`.
///
/// Fails if the state blows up or the training loss rises between nodes by
/// more than `1e-12 * max(1, J)`.
pub fn integrate_theta0(theta_init: &ParamVector, train: &LossSurface, grid: &TimeGrid) -> Result<Trajectory> {
    grid.validate()?;
    let h = grid.dt();
    let mut theta = theta_init.clone();
    ensure_finite(&theta, 0, 0.0)?;
    let mut loss = train.value(&theta)?;
    let mut theta0 = Vec::with_capacity(grid.n_nodes());
    theta0.push(theta.clone());
    for k in 0..grid.n_steps {
        theta = rk4_step(&theta, h, |_, th| Ok(-train.grad(th)?))?;
        ensure_finite(&theta, k + 1, grid.node(k + 1))?;
        let next = train.value(&theta)?;
        let increase = next - loss;
        if increase > 1e-12 * loss.abs().max(1.0) {
            return Err(Error::LossIncrease { step: k + 1, increase });
        }
        loss = next;
        theta0.push(theta.clone());
    }
    Ok(Trajectory { grid: *grid, theta0, p0: None, u0: None, theta1: None })
}

/// Backward adjoint from `p(T) = -grad Phi(theta0(T))`.
///
/// The time-reversed system is stepped with RK4; `theta0` at half steps is
/// the linear interpolation of the neighbouring nodes.
pub fn integrate_p0(
    traj: &Trajectory,
    train: &LossSurface,
    validate: &LossSurface,
    mode: AdjointMode,
) -> Result<Trajectory> {
    let grid = traj.grid;
    let n = grid.n_steps;
    let h = grid.dt();
    let terminal = -validate.grad(traj.theta0_final())?;
    let ones = DVector::from_element(terminal.len(), 1.0);

    let mut p0 = vec![DVector::zeros(terminal.len()); grid.n_nodes()];
    let mut p = terminal;
    p0[n] = p.clone();
    for k in (0..n).rev() {
        // reversed time: stage 0 sits at node k+1, stage 3 at node k
        let (hi, lo) = (&traj.theta0[k + 1], &traj.theta0[k]);
        let mid = (hi + lo) * 0.5;
        p = rk4_step(&p, h, |stage, q| {
            let th = match stage {
                0 => hi,
                3 => lo,
                _ => &mid,
            };
            let hess = train.hessian(th)?;
            Ok(match mode {
                AdjointMode::Corrected => -(hess * q),
                AdjointMode::PaperLiteral => -(hess * &ones),
            })
        })?;
        ensure_finite(&p, n - k, grid.node(k))?;
        p0[k] = p.clone();
    }
    Ok(Trajectory { p0: Some(p0), ..traj.clone() })
}

/// First-order response `dtheta1/dt = -H(theta0) theta1 + v(t) B(theta0)`,
/// `theta1(0) = 0`, for an arbitrary per-node control `v` (held at its left
/// node value over each step).
///
/// `theta0` inside each step is evaluated at the same RK4 stage states the
/// zeroth-order integration used, so the result is the exact derivative of
/// the discrete full flow with respect to the control amplitude.
pub fn first_order_response(
    traj: &Trajectory,
    train: &LossSurface,
    dithered: &LossSurface,
    control: &[f64],
) -> Result<Vec<ParamVector>> {
    let grid = traj.grid;
    if control.len() != grid.n_nodes() {
        return Err(Error::DimensionMismatch { expected: grid.n_nodes(), got: control.len() });
    }
    let h = grid.dt();
    let p = traj.theta0[0].len();
    let mut theta1 = Vec::with_capacity(grid.n_nodes());
    let mut state = DVector::zeros(p);
    theta1.push(state.clone());
    for k in 0..grid.n_steps {
        let u = control[k];
        let base = &traj.theta0[k];
        // zeroth-order stage states
        let g1 = -train.grad(base)?;
        let s2 = base + &g1 * (0.5 * h);
        let g2 = -train.grad(&s2)?;
        let s3 = base + &g2 * (0.5 * h);
        let g3 = -train.grad(&s3)?;
        let s4 = base + &g3 * h;
        let stages = [base, &s2, &s3, &s4];
        state = rk4_step(&state, h, |stage, y| {
            let th = stages[stage];
            let mut rhs = -(train.hessian(th)? * y);
            if u != 0.0 {
                rhs += dithered.b_term(th)? * u;
            }
            Ok(rhs)
        })?;
        ensure_finite(&state, k + 1, grid.node(k + 1))?;
        theta1.push(state.clone());
    }
    Ok(theta1)
}

/// Fill `theta1` using the trajectory's own `u0`.
pub fn integrate_theta1(traj: &Trajectory, train: &LossSurface, dithered: &LossSurface) -> Result<Trajectory> {
    traj.p0()?;
    let theta1 = first_order_response(traj, train, dithered, traj.u0()?)?;
    Ok(Trajectory { theta1: Some(theta1), ..traj.clone() })
}

/// Both sides of the adjoint identity
/// `<p0(T), theta1(T)> = int_0^T u0(t) <p0(t), B(theta0(t))> dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityCheck {
    pub terminal_pairing: f64,
    /// Per-step Simpson rule; `theta0` and `p0` at step midpoints come from
    /// cubic Hermite interpolation of the stored nodes.
    pub quadrature: f64,
    /// Per-step trapezoid rule, second-order accurate.
    pub trapezoid: f64,
    /// Left-endpoint Riemann sum, first-order accurate.
    pub left_riemann: f64,
    /// `|terminal_pairing - quadrature|`.
    pub residual: f64,
}

// Cubic Hermite value at the midpoint of a step of length `h`.
fn hermite_mid(y0: &DVector<f64>, y1: &DVector<f64>, d0: &DVector<f64>, d1: &DVector<f64>, h: f64) -> DVector<f64> {
    (y0 + y1) * 0.5 + (d0 - d1) * (h / 8.0)
}

/// Evaluate both sides of the adjoint identity on a completed trajectory.
/// `mode` must be the one `p0` was integrated with.
pub fn duality_check(
    traj: &Trajectory,
    train: &LossSurface,
    dithered: &LossSurface,
    mode: AdjointMode,
) -> Result<DualityCheck> {
    let p0 = traj.p0()?;
    let u0 = traj.u0()?;
    let theta1 = traj.theta1()?;
    let h = traj.grid.dt();
    let n = traj.grid.n_steps;
    let ones = DVector::from_element(traj.theta0[0].len(), 1.0);

    let theta_dot = traj.theta0.iter().map(|th| Ok(-train.grad(th)?)).collect::<Result<Vec<_>>>()?;
    let p_dot = traj
        .theta0
        .iter()
        .zip(p0)
        .map(|(th, p)| {
            let hess = train.hessian(th)?;
            Ok(match mode {
                AdjointMode::Corrected => hess * p,
                AdjointMode::PaperLiteral => hess * &ones,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let switching = traj
        .theta0
        .iter()
        .zip(p0)
        .map(|(th, p)| Ok(p.dot(&dithered.b_term(th)?)))
        .collect::<Result<Vec<f64>>>()?;

    let mut quadrature = 0.0;
    for k in 0..n {
        if u0[k] == 0.0 {
            continue;
        }
        let th = hermite_mid(&traj.theta0[k], &traj.theta0[k + 1], &theta_dot[k], &theta_dot[k + 1], h);
        let p = hermite_mid(&p0[k], &p0[k + 1], &p_dot[k], &p_dot[k + 1], h);
        let mid = p.dot(&dithered.b_term(&th)?);
        quadrature += h / 6.0 * u0[k] * (switching[k] + 4.0 * mid + switching[k + 1]);
    }
    let trapezoid: f64 = (0..n).map(|k| 0.5 * h * u0[k] * (switching[k] + switching[k + 1])).sum();
    let left_riemann: f64 = (0..n).map(|k| h * u0[k] * switching[k]).sum();
    let terminal_pairing = p0[n].dot(&theta1[n]);
    Ok(DualityCheck {
        terminal_pairing,
        quadrature,
        trapezoid,
        left_riemann,
        residual: (terminal_pairing - quadrature).abs(),
    })
}
