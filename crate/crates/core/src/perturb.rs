//! The decomposed solution end to end: zeroth-order flow and adjoint,
//! bang-bang control, first-order correction, aggregation
//! `theta* = theta0(T) + eps * theta1(T)`, plus the diagnostics that check
//! the expansion (cost residual, loss improvements, epsilon sweeps).

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::control::{self, ControlSet, SwitchRecord, DEFAULT_TIE_TOL};
use crate::dataset::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::flow::{self, AdjointMode, DualityCheck, TimeGrid, Trajectory};
use crate::model::{LossSurface, ParamVector, PolynomialModel};

pub const DEFAULT_EPSILON_MAX: f64 = 0.1;

/// Residuals below this are indistinguishable from rounding.
pub const NUMERICAL_FLOOR: f64 = 1e-14;

pub(crate) fn ser_vec<S: Serializer>(v: &ParamVector, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

/// Training, validation and dithered data for one model, in the coordinates
/// the flows run in.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: PolynomialModel,
    pub train_data: Dataset,
    pub validate_data: Dataset,
    pub dithered_data: Dataset,
    pub train: LossSurface,
    pub validate: LossSurface,
    pub dithered: LossSurface,
    /// Present when the data were z-scored; maps parameters back to raw
    /// polynomial coefficients.
    pub standardizer: Option<Standardizer>,
}

impl Problem {
    /// Use the data as given.
    pub fn new(model: PolynomialModel, train: Dataset, validate: Dataset, dithered: Dataset) -> Result<Self> {
        if dithered.len() != train.len() {
            return Err(Error::DimensionMismatch { expected: train.len(), got: dithered.len() });
        }
        Ok(Problem {
            model,
            train: LossSurface::new(model, &train),
            validate: LossSurface::new(model, &validate),
            dithered: LossSurface::new(model, &dithered),
            train_data: train,
            validate_data: validate,
            dithered_data: dithered,
            standardizer: None,
        })
    }

    /// Z-score all three sets with a standardiser fitted on the training set.
    pub fn standardized(model: PolynomialModel, train: &Dataset, validate: &Dataset, dithered: &Dataset) -> Result<Self> {
        let s = Standardizer::fit(train)?;
        let mut problem = Self::new(model, s.apply(train), s.apply(validate), s.apply(dithered))?;
        problem.standardizer = Some(s);
        Ok(problem)
    }

    pub fn to_raw(&self, theta: &ParamVector) -> ParamVector {
        match &self.standardizer {
            Some(s) => s.params_to_raw(theta),
            None => theta.clone(),
        }
    }

    pub fn direction_to_raw(&self, d: &ParamVector) -> ParamVector {
        match &self.standardizer {
            Some(s) => s.direction_to_raw(d),
            None => d.clone(),
        }
    }

    pub fn from_raw(&self, theta: &ParamVector) -> ParamVector {
        match &self.standardizer {
            Some(s) => s.params_from_raw(theta),
            None => theta.clone(),
        }
    }

    /// Multiplier taking working-coordinate squared losses to raw units.
    pub fn loss_scale(&self) -> f64 {
        self.standardizer.map_or(1.0, |s| s.loss_scale())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSettings {
    pub grid: TimeGrid,
    pub control_set: ControlSet,
    pub epsilon: f64,
    pub epsilon_max: f64,
    pub adjoint: AdjointMode,
    pub tie_tol: f64,
}

impl Default for AlgorithmSettings {
    fn default() -> Self {
        AlgorithmSettings {
            grid: TimeGrid { final_time: 50.0, n_steps: 2000 },
            control_set: ControlSet::default(),
            epsilon: 1e-3,
            epsilon_max: DEFAULT_EPSILON_MAX,
            adjoint: AdjointMode::Corrected,
            tie_tol: DEFAULT_TIE_TOL,
        }
    }
}

impl AlgorithmSettings {
    /// `epsilon = 0` is accepted as a degenerate case.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.control_set.validate()?;
        check_epsilon(self.epsilon, self.epsilon_max)
    }
}

fn check_epsilon(epsilon: f64, epsilon_max: f64) -> Result<()> {
    if !(epsilon >= 0.0 && epsilon < epsilon_max) {
        return Err(Error::EpsilonOutOfRange { epsilon, epsilon_max });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvements {
    /// `J0(theta*, train) - J0(theta0(T), train)`.
    pub delta_train: f64,
    /// `J0(theta*, validate) - J0(theta0(T), validate)`.
    pub delta_val: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostExpansion {
    /// `Phi(theta0(T)) - eps * <p0(T), theta1(T)>`.
    pub predicted: f64,
    /// `|Phi(theta*) - predicted|`.
    pub residual: f64,
}

/// Parameters in raw polynomial coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawEstimate {
    #[serde(serialize_with = "ser_vec")]
    pub theta0_t: ParamVector,
    #[serde(serialize_with = "ser_vec")]
    pub theta1_t: ParamVector,
    #[serde(serialize_with = "ser_vec")]
    pub theta_star: ParamVector,
}

/// Outcome of one run. Parameter fields are in working coordinates (where
/// aggregation happens); `raw` holds the same estimates as raw polynomial
/// coefficients. Losses are in working units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationResult {
    pub epsilon: f64,
    #[serde(serialize_with = "ser_vec")]
    pub theta0_t: ParamVector,
    #[serde(serialize_with = "ser_vec")]
    pub theta1_t: ParamVector,
    #[serde(serialize_with = "ser_vec")]
    pub theta_star: ParamVector,
    pub raw: RawEstimate,
    pub j_train_0: f64,
    pub j_train_star: f64,
    pub j_val_0: f64,
    pub j_val_star: f64,
    /// `<p0(T), theta1(T)>`.
    pub first_order_term: f64,
    pub improvements: Improvements,
    pub expansion: CostExpansion,
    pub duality: DualityCheck,
    pub adjoint: AdjointMode,
    pub switch_count: usize,
    pub tie_fraction: f64,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct AlgorithmRun {
    pub result: PerturbationResult,
    pub trajectory: Trajectory,
    pub switches: Vec<SwitchRecord>,
}

/// Steps 1-3 only: zeroth-order flow, adjoint, control and first-order
/// correction. None of these depend on `epsilon`.
pub fn decomposed_solution(
    problem: &Problem,
    settings: &AlgorithmSettings,
    theta_init: &ParamVector,
) -> Result<(Trajectory, Vec<SwitchRecord>)> {
    settings.grid.validate()?;
    settings.control_set.validate()?;
    let traj = flow::integrate_theta0(theta_init, &problem.train, &settings.grid)?;
    let traj = flow::integrate_p0(&traj, &problem.train, &problem.validate, settings.adjoint)?;
    let (traj, switches) = control::compute_u0(&traj, &settings.control_set, &problem.dithered, settings.tie_tol)?;
    let traj = flow::integrate_theta1(&traj, &problem.train, &problem.dithered)?;
    Ok((traj, switches))
}

/// Full algorithm: decomposed solution, then aggregation and diagnostics.
pub fn run_algorithm(problem: &Problem, settings: &AlgorithmSettings, theta_init: &ParamVector) -> Result<AlgorithmRun> {
    settings.validate()?;
    let (trajectory, switches) = decomposed_solution(problem, settings, theta_init)?;
    let result = aggregate(problem, settings, &trajectory, &switches)?;
    Ok(AlgorithmRun { result, trajectory, switches })
}

fn aggregate(
    problem: &Problem,
    settings: &AlgorithmSettings,
    traj: &Trajectory,
    switches: &[SwitchRecord],
) -> Result<PerturbationResult> {
    let eps = settings.epsilon;
    let n = traj.grid.n_steps;
    let theta0_t = traj.theta0_final().clone();
    let theta1_t = traj.theta1()?[n].clone();
    let theta_star = &theta0_t + &theta1_t * eps;
    if theta_star.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { step: n, t: traj.grid.final_time });
    }
    let first_order_term = traj.p0()?[n].dot(&theta1_t);

    let j_train_0 = problem.train.value(&theta0_t)?;
    let j_train_star = problem.train.value(&theta_star)?;
    let j_val_0 = problem.validate.value(&theta0_t)?;
    let j_val_star = problem.validate.value(&theta_star)?;
    let predicted = j_val_0 - eps * first_order_term;

    Ok(PerturbationResult {
        epsilon: eps,
        raw: RawEstimate {
            theta0_t: problem.to_raw(&theta0_t),
            theta1_t: problem.direction_to_raw(&theta1_t),
            theta_star: problem.to_raw(&theta_star),
        },
        theta0_t,
        theta1_t,
        theta_star,
        j_train_0,
        j_train_star,
        j_val_0,
        j_val_star,
        first_order_term,
        improvements: Improvements { delta_train: j_train_star - j_train_0, delta_val: j_val_star - j_val_0 },
        expansion: CostExpansion { predicted, residual: (j_val_star - predicted).abs() },
        duality: flow::duality_check(traj, &problem.train, &problem.dithered, settings.adjoint)?,
        adjoint: settings.adjoint,
        switch_count: control::switch_count(switches),
        tie_fraction: control::tie_fraction(switches, settings.tie_tol),
    })
}

/// Predicted validation cost and residual of the aggregated estimate.
pub fn cost_expansion(result: &PerturbationResult, problem: &Problem) -> Result<CostExpansion> {
    let phi0 = problem.validate.value(&result.theta0_t)?;
    let predicted = phi0 - result.epsilon * result.first_order_term;
    let residual = (problem.validate.value(&result.theta_star)? - predicted).abs();
    Ok(CostExpansion { predicted, residual })
}

/// Loss changes from `theta0(T)` to `theta*` by direct subtraction.
pub fn improvements(result: &PerturbationResult, problem: &Problem) -> Result<Improvements> {
    let d = |s: &LossSurface| -> Result<f64> { Ok(s.value(&result.theta_star)? - s.value(&result.theta0_t)?) };
    Ok(Improvements { delta_train: d(&problem.train)?, delta_val: d(&problem.validate)? })
}

/// Same quantities as [`improvements`], as the mean of per-sample loss
/// differences.
pub fn improvements_summed(result: &PerturbationResult, problem: &Problem) -> Result<Improvements> {
    let d = |s: &LossSurface| -> Result<f64> {
        let star = s.pointwise(&result.theta_star)?;
        let zero = s.pointwise(&result.theta0_t)?;
        Ok(star.iter().zip(&zero).map(|(a, b)| a - b).sum::<f64>() / star.len() as f64)
    };
    Ok(Improvements { delta_train: d(&problem.train)?, delta_val: d(&problem.validate)? })
}

/// RK4 on `dtheta/dt = -grad J(theta) + eps * u(t) * B(theta)`, the control
/// held at its left node value over each step. Returns every node.
pub fn integrate_full(
    theta_init: &ParamVector,
    train: &LossSurface,
    dithered: &LossSurface,
    control: &[f64],
    epsilon: f64,
    grid: &TimeGrid,
) -> Result<Vec<ParamVector>> {
    grid.validate()?;
    if control.len() != grid.n_nodes() {
        return Err(Error::DimensionMismatch { expected: grid.n_nodes(), got: control.len() });
    }
    let h = grid.dt();
    let mut theta = theta_init.clone();
    let mut path = Vec::with_capacity(grid.n_nodes());
    path.push(theta.clone());
    for k in 0..grid.n_steps {
        let gain = epsilon * control[k];
        theta = flow::rk4_step(&theta, h, |_, th| {
            let mut rhs = -train.grad(th)?;
            if gain != 0.0 {
                rhs += dithered.b_term(th)? * gain;
            }
            Ok(rhs)
        })?;
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: k + 1, t: grid.node(k + 1) });
        }
        path.push(theta.clone());
    }
    Ok(path)
}

/// `<p0(T), theta1_v(T)>` for an arbitrary per-node control `v`.
pub fn first_order_gain(problem: &Problem, traj: &Trajectory, control: &[f64]) -> Result<f64> {
    let theta1 = flow::first_order_response(traj, &problem.train, &problem.dithered, control)?;
    Ok(traj.p0()?[traj.grid.n_steps].dot(theta1.last().expect("non-empty grid")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub epsilon: f64,
    /// `J^eps[u0] = Phi(theta^eps(T))` from the full dynamics.
    pub cost: f64,
    /// `Phi(theta0(T)) - eps * <p0(T), theta1(T)>`.
    pub predicted_cost: f64,
    pub residual: f64,
    /// `|theta^eps(T) - theta0(T) - eps * theta1(T)|`.
    pub expansion_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStatus {
    Fitted,
    AtNumericalFloor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub status: SweepStatus,
    /// Least-squares slope of `log residual` against `log epsilon`.
    pub slope: Option<f64>,
}

/// Least-squares slope of `y` on `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn validate_sweep(eps_list: &[f64], epsilon_max: f64) -> Result<()> {
    if eps_list.len() < 4 {
        return Err(Error::InvalidSweep(format!("need at least 4 epsilon values, got {}", eps_list.len())));
    }
    if let Some(&bad) = eps_list.iter().find(|&&e| !(e > 0.0 && e < epsilon_max)) {
        return Err(Error::InvalidSweep(format!("epsilon {bad} outside (0, {epsilon_max})")));
    }
    let lo = eps_list.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eps_list.iter().copied().fold(0.0, f64::max);
    if hi / lo < 100.0 - 1e-9 {
        return Err(Error::InvalidSweep(format!("epsilon values span {lo}..{hi}, fewer than 2 decades")));
    }
    Ok(())
}

/// Residual of the first-order cost expansion across `eps_list`, measured
/// against the full dynamics driven by the frozen zeroth-order control.
/// Each epsilon is evaluated independently in parallel.
pub fn epsilon_sweep(
    problem: &Problem,
    settings: &AlgorithmSettings,
    theta_init: &ParamVector,
    eps_list: &[f64],
) -> Result<SweepResult> {
    validate_sweep(eps_list, settings.epsilon_max)?;
    let (traj, _) = decomposed_solution(problem, settings, theta_init)?;
    sweep_trajectory(problem, &traj, theta_init, eps_list)
}

/// [`epsilon_sweep`] on an already decomposed trajectory.
pub fn sweep_trajectory(
    problem: &Problem,
    traj: &Trajectory,
    theta_init: &ParamVector,
    eps_list: &[f64],
) -> Result<SweepResult> {
    let n = traj.grid.n_steps;
    let theta0_t = traj.theta0_final();
    let theta1_t = &traj.theta1()?[n];
    let first_order = traj.p0()?[n].dot(theta1_t);
    let phi0 = problem.validate.value(theta0_t)?;
    let u0 = traj.u0()?;

    let points = eps_list
        .par_iter()
        .map(|&epsilon| {
            let path = integrate_full(theta_init, &problem.train, &problem.dithered, u0, epsilon, &traj.grid)?;
            let theta_eps = &path[n];
            let cost = problem.validate.value(theta_eps)?;
            let predicted_cost = phi0 - epsilon * first_order;
            Ok(SweepPoint {
                epsilon,
                cost,
                predicted_cost,
                residual: (cost - predicted_cost).abs(),
                expansion_gap: (theta_eps - theta0_t - theta1_t * epsilon).norm(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let usable: Vec<&SweepPoint> = points.iter().filter(|p| p.residual >= NUMERICAL_FLOOR).collect();
    let (status, slope) = if usable.len() < 2 {
        (SweepStatus::AtNumericalFloor, None)
    } else {
        let x: Vec<f64> = usable.iter().map(|p| p.epsilon.ln()).collect();
        let y: Vec<f64> = usable.iter().map(|p| p.residual.ln()).collect();
        (SweepStatus::Fitted, fit_slope(&x, &y))
    };
    Ok(SweepResult { points, status, slope })
}

/// Default starting point: the zero vector.
pub fn default_theta_init(model: PolynomialModel) -> ParamVector {
    DVector::zeros(model.n_params())
}
