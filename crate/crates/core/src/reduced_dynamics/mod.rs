//! Reduced dynamics on the manifold: polynomial vector fields, their normal
//! forms, polar (backbone) representations and model-based prediction.

mod normal_form;
mod polar;
mod predict;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::ode;
use crate::poly::MultiIndexBasis;

pub use normal_form::{normal_form, NormalFormModel, NormalFormOptions};
pub use polar::{amplitude_map, backbone_curves, to_polar, BackboneCurve, Observable, PolarModel, PolarPair};
pub use predict::{predict_observable, Prediction};

/// Smallest eigenvalue modulus accepted for the linear part.
pub const HYPERBOLICITY_TOL: f64 = 1e-8;

/// Polynomial vector field `ξ̇ = R ξ^{1:r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedModel {
    pub d: usize,
    pub r: usize,
    pub basis: MultiIndexBasis,
    /// `d × d_{1:r}`.
    #[serde(with = "crate::serde_mat::real")]
    pub coefficients: DMatrix<f64>,
    pub residual_rms: f64,
}

impl ReducedModel {
    pub fn new(coefficients: DMatrix<f64>, r: usize) -> Result<Self> {
        let d = coefficients.nrows();
        let basis = MultiIndexBasis::new(d, 1, r)?;
        if coefficients.ncols() != basis.len() {
            return Err(Error::Shape(format!(
                "{} coefficient columns for {} monomials",
                coefficients.ncols(),
                basis.len()
            )));
        }
        let model = ReducedModel { d, r, basis, coefficients, residual_rms: 0.0 };
        model.check_hyperbolic()?;
        Ok(model)
    }

    /// The linear block `R_{1:1}`.
    pub fn linear(&self) -> DMatrix<f64> {
        self.coefficients.columns(0, self.d).into_owned()
    }

    pub fn field(&self, xi: &[f64]) -> DVector<f64> {
        &self.coefficients * DVector::from_vec(self.basis.eval(xi))
    }

    /// Field values for every column of `xi`.
    pub fn field_columns(&self, xi: &DMatrix<f64>) -> DMatrix<f64> {
        &self.coefficients * self.basis.eval_columns(xi)
    }

    fn check_hyperbolic(&self) -> Result<()> {
        let eig = self.linear().complex_eigenvalues();
        if let Some(l) = eig.iter().find(|l| l.norm() <= HYPERBOLICITY_TOL) {
            return Err(Error::Degenerate(format!("linear part has a near-zero eigenvalue {l}")));
        }
        Ok(())
    }

    /// RK4 trajectory from `xi0`, `steps` steps of `dt`.
    pub fn advect(&self, xi0: &[f64], dt: f64, steps: usize) -> Result<DMatrix<f64>> {
        ode::integrate(|x: &DVector<f64>| self.field(x.as_slice()), &DVector::from_column_slice(xi0), dt, steps, Some(ode::DIVERGENCE_BOUND))
    }
}

/// Least-squares fit of `ξ̇ ≈ R ξ^{1:r}` over paired samples (columns).
pub fn fit_reduced_dynamics(xi: &DMatrix<f64>, xi_dot: &DMatrix<f64>, r: usize) -> Result<ReducedModel> {
    if xi.shape() != xi_dot.shape() {
        return Err(Error::Shape(format!("states {:?} vs derivatives {:?}", xi.shape(), xi_dot.shape())));
    }
    let d = xi.nrows();
    if d == 0 || r == 0 {
        return Err(Error::Input(format!("invalid reduced dynamics d={d}, r={r}")));
    }
    let basis = MultiIndexBasis::new(d, 1, r)?;
    let needed = 10 * basis.len();
    if xi.ncols() < needed {
        return Err(Error::Input(format!(
            "reduced dynamics of order {r} needs at least {needed} samples, got {}",
            xi.ncols()
        )));
    }
    let phi = basis.eval_columns(xi);
    let rt = lstsq(&phi.transpose(), &xi_dot.transpose()).map_err(|cols| Error::Conditioning {
        monomials: cols.iter().map(|&c| basis.label(c)).collect(),
    })?;
    let coefficients = rt.transpose();
    let resid = xi_dot - &coefficients * phi;
    let mut model = ReducedModel::new(coefficients, r)?;
    model.residual_rms = (resid.norm_squared() / resid.len() as f64).sqrt();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn samples(seed: u64, count: usize) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(2, count, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn linear_field_is_recovered() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.1, -2.0, 2.0, -0.1]);
        let xi = samples(1, 300);
        let model = fit_reduced_dynamics(&xi, &(&a * &xi), 3).unwrap();
        assert!((model.linear() - &a).abs().max() < 1e-8);
        assert!(model.coefficients.columns(2, model.basis.len() - 2).abs().max() < 1e-8);
    }

    #[test]
    fn cubic_field_is_recovered() {
        let basis = MultiIndexBasis::new(2, 1, 3).unwrap();
        let mut c = DMatrix::zeros(2, basis.len());
        c[(0, 0)] = -0.2;
        c[(0, 1)] = 1.0;
        c[(1, 0)] = -1.0;
        c[(1, basis.index_of(&[3, 0]).unwrap())] = -0.5;
        c[(0, basis.index_of(&[1, 2]).unwrap())] = 0.25;
        c[(1, basis.index_of(&[1, 1]).unwrap())] = 0.1;
        let truth = ReducedModel::new(c.clone(), 3).unwrap();
        let xi = samples(2, 400);
        let model = fit_reduced_dynamics(&xi, &truth.field_columns(&xi), 3).unwrap();
        assert!((model.coefficients - c).abs().max() < 1e-6);
        assert!(model.residual_rms < 1e-10);
    }

    #[test]
    fn rank_deficiency_names_monomials() {
        // second coordinate identically zero: every monomial containing x2 vanishes
        let mut xi = samples(3, 200);
        xi.row_mut(1).fill(0.0);
        match fit_reduced_dynamics(&xi, &xi.clone(), 2) {
            Err(Error::Conditioning { monomials }) => {
                assert_eq!(monomials, vec!["x2", "x1*x2", "x2^2"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_eigenvalue_is_rejected() {
        let c = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(ReducedModel::new(c, 1), Err(Error::Degenerate(_))));
        assert!(fit_reduced_dynamics(&samples(4, 5), &samples(5, 5), 1).is_err());
    }

    #[test]
    fn linear_advection_matches_exponential() {
        let model = ReducedModel::new(DMatrix::from_row_slice(1, 1, &[-1.0]), 1).unwrap();
        let x = model.advect(&[2.0], 0.01, 100).unwrap();
        assert!((x[(0, 100)] - 2.0 * (-1.0f64).exp()).abs() < 1e-9);
    }
}
