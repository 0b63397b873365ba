mod common;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use perturbflow::dataset::{self, load_builtin_water, Dataset, Label, NoiseSpec, Standardizer, WaterProperty};
use perturbflow::model::{self, least_squares_oracle, LossSurface, PolynomialModel};
use perturbflow::Error;

fn quad() -> PolynomialModel {
    PolynomialModel::new(2)
}

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn standardized_density() -> Dataset {
    let raw = load_builtin_water(WaterProperty::Density);
    Standardizer::fit(&raw).unwrap().apply(&raw)
}

fn random_theta(rng: &mut ChaCha8Rng, p: usize) -> DVector<f64> {
    DVector::from_fn(p, |_, _| rng.random_range(-3.0..3.0))
}

#[test]
fn loss_of_zero_theta_on_two_points() {
    let d = Dataset::from_xy(&[1.0, 2.0], &[2.0, 2.0], Label::Train).unwrap();
    assert_eq!(model::loss(PolynomialModel::new(1), &v(&[0.0, 0.0]), &d).unwrap(), 4.0);
}

#[test]
fn loss_vanishes_on_generated_data() {
    let x: Vec<f64> = (0..9).map(|i| i as f64 * 0.3 - 1.0).collect();
    let theta = v(&[0.3, -1.2, 2.5]);
    let y: Vec<f64> = x.iter().map(|&x| quad().predict(&theta, x)).collect();
    let d = Dataset::from_xy(&x, &y, Label::Train).unwrap();
    assert!(model::loss(quad(), &theta, &d).unwrap() < 1e-12);
}

#[test]
fn raw_oracle_matches_svd_predictions_and_residual_mse() {
    let data = load_builtin_water(WaterProperty::Density);
    let theta = least_squares_oracle(&data, 2).unwrap();
    let reference = ols_predictor(&data, 2);
    let mut mse = 0.0;
    for s in data.samples() {
        let ours = quad().predict(&theta, s.x);
        let want = reference(s.x);
        assert!((ours - want).abs() <= 1e-8 * want.abs(), "{ours} vs {want}");
        mse += (s.y - want).powi(2);
    }
    mse /= data.len() as f64;
    let loss = model::loss(quad(), &theta, &data).unwrap();
    assert!((loss - mse).abs() <= 1e-8 * mse, "{loss} vs {mse}");
}

#[test]
fn standardized_fit_maps_back_to_raw_fit() {
    let raw = load_builtin_water(WaterProperty::Density);
    let s = Standardizer::fit(&raw).unwrap();
    let phi = least_squares_oracle(&s.apply(&raw), 2).unwrap();
    let theta = s.params_to_raw(&phi);
    let reference = ols_predictor(&raw, 2);
    for x in raw.xs() {
        let (ours, want) = (quad().predict(&theta, x), reference(x));
        assert!((ours - want).abs() <= 1e-8 * want.abs());
    }
}

#[test]
fn oracle_is_exact_on_a_line() {
    let x = [0.0, 1.0, 2.5, 4.0];
    let y: Vec<f64> = x.iter().map(|x| 3.0 - 0.5 * x).collect();
    let theta = least_squares_oracle(&Dataset::from_xy(&x, &y, Label::Train).unwrap(), 1).unwrap();
    assert!((theta[0] - 3.0).abs() < 1e-10 && (theta[1] + 0.5).abs() < 1e-10);
}

#[test]
fn oracle_gradient_vanishes_in_standardized_coordinates() {
    let d = standardized_density();
    let theta = least_squares_oracle(&d, 2).unwrap();
    assert!(model::grad(quad(), &theta, &d).unwrap().norm() < 1e-8);
    let ols = standardized_ols(&load_builtin_water(WaterProperty::Density), 2);
    assert!(rel_err(&theta, &ols) < 1e-10);
}

#[test]
fn oracle_rejects_rank_deficient_input() {
    let d = Dataset::from_xy(&[1.0, 1.0, 2.0, 2.0], &[0.0, 1.0, 2.0, 3.0], Label::Train).unwrap();
    assert!(matches!(least_squares_oracle(&d, 2), Err(Error::RankDeficient { .. })));
    assert!(least_squares_oracle(&d, 1).is_ok());
}

#[test]
fn oracle_beats_random_parameters() {
    let d = standardized_density();
    let best = least_squares_oracle(&d, 2).unwrap();
    let j = model::loss(quad(), &best, &d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let theta = &best + random_theta(&mut rng, 3) * 0.1;
        assert!(j <= model::loss(quad(), &theta, &d).unwrap());
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let d = standardized_density();
    let dithered = dataset::dither(&d, &NoiseSpec::new(0.05, 3)).unwrap();
    let train = LossSurface::new(quad(), &d);
    let b = LossSurface::new(quad(), &dithered);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let theta = random_theta(&mut rng, 3);
        let g = train.grad(&theta).unwrap();
        assert!(rel_err(&g, &fd_gradient(|t| train.value(t).unwrap(), &theta)) < 1e-5);
        let h = train.hessian(&theta).unwrap();
        assert!(rel_err_mat(&h, &fd_jacobian(|t| train.grad(t).unwrap(), &theta)) < 1e-4);
        assert_eq!(h, h.transpose());
        let jb = b.b_jacobian(&theta).unwrap();
        assert!(rel_err_mat(&jb, &fd_jacobian(|t| b.b_term(t).unwrap(), &theta)) < 1e-5);
        let pg = model::phi_grad(quad(), &theta, &d).unwrap();
        assert!(rel_err(&pg, &fd_gradient(|t| model::phi(quad(), t, &d).unwrap(), &theta)) < 1e-5);
    }
}

#[test]
fn hessian_is_psd_and_constant() {
    let d = standardized_density();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h0 = model::hessian(quad(), &DVector::zeros(3), &d).unwrap();
    for _ in 0..10 {
        let h = model::hessian(quad(), &random_theta(&mut rng, 3), &d).unwrap();
        assert_eq!(h, h0);
        assert!(h.clone().symmetric_eigenvalues().min() >= -1e-10);
    }
}

#[test]
fn b_term_is_squared_gradient() {
    let d = standardized_density();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let theta = random_theta(&mut rng, 3);
        let g = model::grad(quad(), &theta, &d).unwrap();
        let b = model::b_term(quad(), &theta, &d).unwrap();
        for (bi, gi) in b.iter().zip(g.iter()) {
            assert_eq!(*bi, gi * gi);
            assert!(*bi >= 0.0);
        }
    }
    let same = dataset::dither(&d, &NoiseSpec::new(0.0, 9)).unwrap();
    let theta = v(&[0.1, 0.2, 0.3]);
    assert_eq!(
        model::b_term(quad(), &theta, &same).unwrap(),
        model::grad(quad(), &theta, &d).unwrap().map(|g| g * g)
    );
}

#[test]
fn b_term_and_jacobian_vanish_at_dithered_optimum() {
    let d = standardized_density();
    let dithered = dataset::dither(&d, &NoiseSpec::new(0.01, 4)).unwrap();
    let opt = least_squares_oracle(&dithered, 2).unwrap();
    assert!(model::b_term(quad(), &opt, &dithered).unwrap().amax() < 1e-12);
    assert!(model::b_jacobian(quad(), &opt, &dithered).unwrap().amax() < 1e-10);
}

#[test]
fn scalar_b_term_by_hand() {
    // J(theta) = theta^2, B = 4 theta^2, dB/dtheta = 8 theta
    let d = Dataset::from_xy(&[0.0], &[0.0], Label::Dithered).unwrap();
    let m = PolynomialModel::new(0);
    for t in [-2.0, -0.3, 0.0, 1.7] {
        let theta = v(&[t]);
        assert!((model::b_term(m, &theta, &d).unwrap()[0] - 4.0 * t * t).abs() < 1e-14);
        assert!((model::b_jacobian(m, &theta, &d).unwrap()[(0, 0)] - 8.0 * t).abs() < 1e-14);
    }
}

#[test]
fn phi_is_loss_on_validation_data() {
    let d = standardized_density();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let theta = random_theta(&mut rng, 3);
        assert_eq!(model::phi(quad(), &theta, &d).unwrap(), model::loss(quad(), &theta, &d).unwrap());
    }
    let theta = v(&[1.0, -1.0, 0.5]);
    let x = [-1.0, 0.0, 2.0];
    let y: Vec<f64> = x.iter().map(|&x| quad().predict(&theta, x)).collect();
    let val = Dataset::from_xy(&x, &y, Label::Validate).unwrap();
    assert!(model::phi(quad(), &theta, &val).unwrap() < 1e-12);
    assert!(model::phi_grad(quad(), &theta, &val).unwrap().amax() < 1e-12);
}

#[test]
fn wrong_parameter_length_is_an_error() {
    let d = standardized_density();
    assert!(matches!(
        model::loss(quad(), &DVector::zeros(2), &d),
        Err(Error::DimensionMismatch { expected: 3, got: 2 })
    ));
}

#[test]
fn design_matrix_is_vandermonde() {
    let d = Dataset::from_xy(&[2.0, -1.0], &[0.0, 0.0], Label::Train).unwrap();
    let x = quad().design(&d);
    assert_eq!(x, DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 4.0, 1.0, -1.0, 1.0]));
}
