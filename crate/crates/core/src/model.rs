//! Polynomial hypothesis class, empirical loss and the derivative quantities
//! the flows consume.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dataset::{mean_var, Dataset, Standardizer};
use crate::error::{Error, Result};

pub type ParamVector = DVector<f64>;

/// `h(x) = sum_{j=0..=degree} theta_j x^j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolynomialModel {
    pub degree: usize,
}

impl PolynomialModel {
    pub fn new(degree: usize) -> Self {
        PolynomialModel { degree }
    }

    pub fn n_params(&self) -> usize {
        self.degree + 1
    }

    pub fn features(&self, x: f64) -> impl Iterator<Item = f64> {
        (0..=self.degree).scan(1.0, move |pow, _| {
            let v = *pow;
            *pow *= x;
            Some(v)
        })
    }

    pub fn predict(&self, theta: &ParamVector, x: f64) -> f64 {
        theta.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// Vandermonde matrix, one row per sample.
    pub fn design(&self, data: &Dataset) -> DMatrix<f64> {
        let p = self.n_params();
        let mut m = DMatrix::zeros(data.len(), p);
        for (i, x) in data.xs().enumerate() {
            for (j, f) in self.features(x).enumerate() {
                m[(i, j)] = f;
            }
        }
        m
    }

    fn check(&self, theta: &ParamVector) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::DimensionMismatch { expected: self.n_params(), got: theta.len() });
        }
        Ok(())
    }
}

/// Twice-differentiable pointwise loss `l(prediction, target)`.
pub trait PointLoss: fmt::Debug + Send + Sync {
    fn value(&self, pred: f64, target: f64) -> f64;
    /// Derivative w.r.t. the prediction.
    fn d1(&self, pred: f64, target: f64) -> f64;
    /// Second derivative w.r.t. the prediction.
    fn d2(&self, pred: f64, target: f64) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredError;

impl PointLoss for SquaredError {
    fn value(&self, pred: f64, target: f64) -> f64 {
        (pred - target).powi(2)
    }

    fn d1(&self, pred: f64, target: f64) -> f64 {
        2.0 * (pred - target)
    }

    fn d2(&self, _pred: f64, _target: f64) -> f64 {
        2.0
    }
}

/// Mean loss over one dataset, with its design matrix cached.
#[derive(Debug, Clone)]
pub struct LossSurface {
    model: PolynomialModel,
    design: DMatrix<f64>,
    targets: DVector<f64>,
    loss: Arc<dyn PointLoss>,
}

impl LossSurface {
    pub fn new(model: PolynomialModel, data: &Dataset) -> Self {
        Self::with_loss(model, data, Arc::new(SquaredError))
    }

    pub fn with_loss(model: PolynomialModel, data: &Dataset, loss: Arc<dyn PointLoss>) -> Self {
        LossSurface {
            model,
            design: model.design(data),
            targets: DVector::from_iterator(data.len(), data.ys()),
            loss,
        }
    }

    pub fn model(&self) -> PolynomialModel {
        self.model
    }

    pub fn n_samples(&self) -> usize {
        self.targets.len()
    }

    fn predictions(&self, theta: &ParamVector) -> DVector<f64> {
        &self.design * theta
    }

    pub fn value(&self, theta: &ParamVector) -> Result<f64> {
        self.model.check(theta)?;
        let preds = self.predictions(theta);
        let total: f64 = preds.iter().zip(self.targets.iter()).map(|(&p, &y)| self.loss.value(p, y)).sum();
        Ok(total / self.n_samples() as f64)
    }

    /// Per-sample loss values, summed in [`LossSurface::value`].
    pub fn pointwise(&self, theta: &ParamVector) -> Result<Vec<f64>> {
        self.model.check(theta)?;
        let preds = self.predictions(theta);
        Ok(preds.iter().zip(self.targets.iter()).map(|(&p, &y)| self.loss.value(p, y)).collect())
    }

    pub fn grad(&self, theta: &ParamVector) -> Result<ParamVector> {
        self.model.check(theta)?;
        let preds = self.predictions(theta);
        let w = DVector::from_iterator(
            preds.len(),
            preds.iter().zip(self.targets.iter()).map(|(&p, &y)| self.loss.d1(p, y)),
        );
        Ok(self.design.tr_mul(&w) / self.n_samples() as f64)
    }

    pub fn hessian(&self, theta: &ParamVector) -> Result<DMatrix<f64>> {
        self.model.check(theta)?;
        let preds = self.predictions(theta);
        let mut weighted = self.design.clone();
        for (i, (&p, &y)) in preds.iter().zip(self.targets.iter()).enumerate() {
            let c = self.loss.d2(p, y);
            weighted.row_mut(i).scale_mut(c);
        }
        let mut h = self.design.tr_mul(&weighted) / self.n_samples() as f64;
        // exact symmetry
        for i in 0..h.nrows() {
            for j in 0..i {
                let avg = 0.5 * (h[(i, j)] + h[(j, i)]);
                h[(i, j)] = avg;
                h[(j, i)] = avg;
            }
        }
        Ok(h)
    }

    /// `B_i = (dJ/dtheta_i)^2` on this (dithered) surface.
    pub fn b_term(&self, theta: &ParamVector) -> Result<ParamVector> {
        Ok(self.grad(theta)?.map(|g| g * g))
    }

    /// `dB_i/dtheta_j = 2 (dJ/dtheta_i) (d^2 J/dtheta_i dtheta_j)`.
    pub fn b_jacobian(&self, theta: &ParamVector) -> Result<DMatrix<f64>> {
        let g = self.grad(theta)?;
        let mut jac = self.hessian(theta)?;
        for (i, gi) in g.iter().enumerate() {
            jac.row_mut(i).scale_mut(2.0 * gi);
        }
        Ok(jac)
    }
}

pub fn loss(model: PolynomialModel, theta: &ParamVector, data: &Dataset) -> Result<f64> {
    LossSurface::new(model, data).value(theta)
}

pub fn grad(model: PolynomialModel, theta: &ParamVector, data: &Dataset) -> Result<ParamVector> {
    LossSurface::new(model, data).grad(theta)
}

pub fn hessian(model: PolynomialModel, theta: &ParamVector, data: &Dataset) -> Result<DMatrix<f64>> {
    LossSurface::new(model, data).hessian(theta)
}

pub fn b_term(model: PolynomialModel, theta: &ParamVector, dithered: &Dataset) -> Result<ParamVector> {
    LossSurface::new(model, dithered).b_term(theta)
}

pub fn b_jacobian(model: PolynomialModel, theta: &ParamVector, dithered: &Dataset) -> Result<DMatrix<f64>> {
    LossSurface::new(model, dithered).b_jacobian(theta)
}

/// Terminal cost: mean loss on the validation set.
pub fn phi(model: PolynomialModel, theta: &ParamVector, validate: &Dataset) -> Result<f64> {
    loss(model, theta, validate)
}

pub fn phi_grad(model: PolynomialModel, theta: &ParamVector, validate: &Dataset) -> Result<ParamVector> {
    grad(model, theta, validate)
}

/// Least-squares polynomial fit by Cholesky on the normal equations.
///
/// The Vandermonde basis is built on `x` rescaled to zero mean and unit
/// spread, then the coefficients are expanded back into powers of the raw
/// `x`, so raw temperature-scale inputs do not lose digits to conditioning.
pub fn least_squares_oracle(data: &Dataset, degree: usize) -> Result<ParamVector> {
    let model = PolynomialModel::new(degree);
    let p = model.n_params();
    let rank_error = || Error::RankDeficient { degree, samples: data.len() };

    let mut distinct: Vec<f64> = data.xs().collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < p {
        return Err(rank_error());
    }

    let (mean_x, var_x) = mean_var(data.xs());
    let std_x = if var_x > 0.0 { var_x.sqrt() } else { 1.0 };
    let scaler = Standardizer { mean_x, std_x, mean_y: 0.0, std_y: 1.0 };
    let scaled = scaler.apply(data);

    let x = model.design(&scaled);
    let y = DVector::from_iterator(scaled.len(), scaled.ys());
    let gram = x.tr_mul(&x);
    let rhs = x.tr_mul(&y);
    let chol = gram.cholesky().ok_or_else(rank_error)?;
    let d = chol.l().diagonal();
    let (dmax, dmin) = (d.max(), d.min());
    if !(dmin > dmax * 1e-7) {
        return Err(rank_error());
    }
    let phi = chol.solve(&rhs);
    Ok(scaler.direction_to_raw(&phi))
}
