#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use perturbflow::dataset::{load_builtin_water, Dataset, WaterProperty};

/// Published parameter rows `(theta_1, theta_2, theta_3)` and residual stds,
/// for the 1% and 5% noise tables.
pub struct PublishedRow {
    pub property: WaterProperty,
    pub level: f64,
    pub theta: [f64; 3],
    pub residual_std: f64,
}

pub const PUBLISHED: [PublishedRow; 6] = [
    PublishedRow { property: WaterProperty::Density, level: 0.01, theta: [763.1823, 1.8221, -3.4862e-3], residual_std: 0.5693 },
    PublishedRow { property: WaterProperty::SpecificHeat, level: 0.01, theta: [5.5944, -8.8978e-3, 1.3982e-5], residual_std: 0.0038 },
    PublishedRow { property: WaterProperty::Conductivity, level: 0.01, theta: [-0.4338, 0.0056, -6.9164e-6], residual_std: 0.0010 },
    PublishedRow { property: WaterProperty::Density, level: 0.05, theta: [759.7205, 1.8512, -3.5432e-3], residual_std: 0.6221 },
    PublishedRow { property: WaterProperty::SpecificHeat, level: 0.05, theta: [5.6124, -9.0082e-3, 1.4148e-5], residual_std: 0.0038 },
    PublishedRow { property: WaterProperty::Conductivity, level: 0.05, theta: [-0.4769, 0.0058, -7.3308e-6], residual_std: 0.0011 },
];

pub fn quadratic(theta: &[f64], x: f64) -> f64 {
    theta[0] + theta[1] * x + theta[2] * x * x
}

pub fn temperatures() -> Vec<f64> {
    load_builtin_water(WaterProperty::Density).xs().collect()
}

/// Sample mean and standard deviation with the `n - 1` divisor.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Least squares via SVD of the Vandermonde matrix of `x`.
pub fn svd_polyfit(x: &[f64], y: &[f64], degree: usize) -> DVector<f64> {
    let a = DMatrix::from_fn(x.len(), degree + 1, |i, j| x[i].powi(j as i32));
    let b = DVector::from_column_slice(y);
    a.svd(true, true).solve(&b, 1e-14).expect("svd solve")
}

/// Least-squares fit in z-scored coordinates (training-set mean and std).
pub fn standardized_ols(data: &Dataset, degree: usize) -> DVector<f64> {
    let xs: Vec<f64> = data.xs().collect();
    let ys: Vec<f64> = data.ys().collect();
    let (mx, sx) = mean_std(&xs);
    let (my, sy) = mean_std(&ys);
    let zx: Vec<f64> = xs.iter().map(|v| (v - mx) / sx).collect();
    let zy: Vec<f64> = ys.iter().map(|v| (v - my) / sy).collect();
    svd_polyfit(&zx, &zy, degree)
}

/// Raw-coordinate predictor of the least-squares fit, built without any
/// coefficient back-mapping: fit on `(x - c) / s` and evaluate there.
pub fn ols_predictor(data: &Dataset, degree: usize) -> impl Fn(f64) -> f64 {
    let xs: Vec<f64> = data.xs().collect();
    let ys: Vec<f64> = data.ys().collect();
    let c = xs.iter().sum::<f64>() / xs.len() as f64;
    let s = 50.0;
    let u: Vec<f64> = xs.iter().map(|v| (v - c) / s).collect();
    let coef = svd_polyfit(&u, &ys, degree);
    move |x| {
        let t = (x - c) / s;
        coef.iter().rev().fold(0.0, |acc, a| acc * t + a)
    }
}

pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

pub fn rel_err_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn step(theta: &DVector<f64>, i: usize) -> f64 {
    1e-5 * theta[i].abs().max(1.0)
}

/// Central differences of a scalar function.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, theta: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(theta.len(), |i, _| {
        let h = step(theta, i);
        let (mut up, mut dn) = (theta.clone(), theta.clone());
        up[i] += h;
        dn[i] -= h;
        (f(&up) - f(&dn)) / (2.0 * h)
    })
}

/// Central differences of a vector function; column `j` is `d f / d theta_j`.
pub fn fd_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, theta: &DVector<f64>) -> DMatrix<f64> {
    let p = theta.len();
    let mut jac = DMatrix::zeros(f(theta).len(), p);
    for j in 0..p {
        let h = step(theta, j);
        let (mut up, mut dn) = (theta.clone(), theta.clone());
        up[j] += h;
        dn[j] -= h;
        jac.set_column(j, &((f(&up) - f(&dn)) / (2.0 * h)));
    }
    jac
}
