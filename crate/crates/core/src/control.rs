//! Hamiltonian evaluation and the pointwise maximisation that yields the
//! zeroth-order (bang-bang) control.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::model::{LossSurface, ParamVector};

/// Default threshold below which the switching value counts as zero.
pub const DEFAULT_TIE_TOL: f64 = 1e-12;

/// Admissible controls `[u_min, u_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSet {
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for ControlSet {
    fn default() -> Self {
        ControlSet { u_min: -1.0, u_max: 1.0 }
    }
}

impl ControlSet {
    pub fn new(u_min: f64, u_max: f64) -> Result<Self> {
        let set = ControlSet { u_min, u_max };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u_min.is_finite() && self.u_max.is_finite() && self.u_min <= self.u_max) {
            return Err(Error::InvalidControlSet { u_min: self.u_min, u_max: self.u_max });
        }
        Ok(())
    }

    pub fn contains(&self, u: f64) -> bool {
        self.u_min <= u && u <= self.u_max
    }

    pub fn project(&self, u: f64) -> f64 {
        u.clamp(self.u_min, self.u_max)
    }
}

/// Switching value and chosen control at one grid node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchRecord {
    pub node: usize,
    pub t: f64,
    pub switching: f64,
    pub u: f64,
}

/// `H(theta, p, u) = <p, -grad J(theta) + eps * u * B(theta)>`.
pub fn hamiltonian(
    theta: &ParamVector,
    p: &ParamVector,
    u: f64,
    epsilon: f64,
    train: &LossSurface,
    dithered: &LossSurface,
) -> Result<f64> {
    if p.len() != theta.len() {
        return Err(Error::DimensionMismatch { expected: theta.len(), got: p.len() });
    }
    let drift = -train.grad(theta)?;
    let b = dithered.b_term(theta)?;
    Ok(p.dot(&drift) + epsilon * u * p.dot(&b))
}

/// Maximiser of `u * <p, b>` over the control set.
///
/// Returns `(u, s)` with `s = <p, b>`. When `|s| <= tie_tol` every admissible
/// `u` is a maximiser; the one closest to zero is returned.
pub fn argmax_u(p: &ParamVector, b: &ParamVector, set: &ControlSet, tie_tol: f64) -> Result<(f64, f64)> {
    if p.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: b.len() });
    }
    let s = p.dot(b);
    let u = if s > tie_tol {
        set.u_max
    } else if s < -tie_tol {
        set.u_min
    } else {
        set.project(0.0)
    };
    Ok((u, s))
}

/// Apply [`argmax_u`] at every node of a trajectory with `theta0` and `p0`.
pub fn compute_u0(
    traj: &Trajectory,
    set: &ControlSet,
    dithered: &LossSurface,
    tie_tol: f64,
) -> Result<(Trajectory, Vec<SwitchRecord>)> {
    set.validate()?;
    let p0 = traj.p0()?;
    let mut records = Vec::with_capacity(traj.grid.n_nodes());
    for (node, (theta, p)) in traj.theta0.iter().zip(p0).enumerate() {
        let b = dithered.b_term(theta)?;
        let (u, switching) = argmax_u(p, &b, set, tie_tol)?;
        records.push(SwitchRecord { node, t: traj.grid.node(node), switching, u });
    }
    let u0 = records.iter().map(|r| r.u).collect();
    Ok((Trajectory { u0: Some(u0), ..traj.clone() }, records))
}

/// Fraction of nodes where the tie rule picked the control.
pub fn tie_fraction(records: &[SwitchRecord], tie_tol: f64) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().filter(|r| r.switching.abs() <= tie_tol).count() as f64 / records.len() as f64
}

/// Number of sign changes of the chosen control along the grid.
pub fn switch_count(records: &[SwitchRecord]) -> usize {
    records.windows(2).filter(|w| w[0].u != w[1].u).count()
}
