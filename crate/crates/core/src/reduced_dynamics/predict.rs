use nalgebra::{Complex, DMatrix};

use super::NormalFormModel;
use crate::error::{Error, Result};
use crate::ssm_geometry::ManifoldModel;

/// Model trajectory started from a single observable vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Observable trajectory, `n × (steps + 1)`.
    pub y: DMatrix<f64>,
    /// Reduced coordinates, `d × (steps + 1)`.
    pub xi: DMatrix<f64>,
    /// Normal-form coordinates, `d × (steps + 1)`.
    pub z: DMatrix<Complex<f64>>,
    /// The initial condition lies outside the trained amplitude range.
    pub extrapolated: bool,
}

/// Predicts `y(t)` from `y0` by advecting the normal form:
/// `ξ₀ = Vᵀy₀`, `z₀ = t⁻¹(ξ₀)`, `y(t) = v(t(z(t)))`.
pub fn predict_observable(mm: &ManifoldModel, nf: &NormalFormModel, y0: &[f64], dt: f64, steps: usize) -> Result<Prediction> {
    if y0.len() != mm.n {
        return Err(Error::Shape(format!("initial vector has length {}, model expects {}", y0.len(), mm.n)));
    }
    if mm.d != nf.d {
        return Err(Error::Shape(format!("manifold dimension {} vs normal form {}", mm.d, nf.d)));
    }
    if !(dt > 0.0) {
        return Err(Error::Input(format!("time step must be positive, got {dt}")));
    }
    let xi0 = mm.project(y0);
    let z0 = nf.to_normal(&xi0);
    let amp = z0.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let extrapolated = nf.max_amplitude.is_some_and(|m| amp > m * (1.0 + 1e-9));
    if extrapolated {
        log::warn!("initial amplitude {amp:.4e} exceeds the trained range {:.4e}", nf.max_amplitude.unwrap_or(0.0));
    }
    let (z, xi) = nf.advect(&z0, dt, steps)?;
    let y = mm.lift(&xi);
    Ok(Prediction { y, xi, z, extrapolated })
}

#[cfg(test)]
mod tests {
    use super::super::{fit_reduced_dynamics, normal_form, NormalFormOptions, PolarPair, ReducedModel};
    use super::*;
    use crate::poly::MultiIndexBasis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn manifold() -> ManifoldModel {
        let v = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let basis = MultiIndexBasis::new(2, 1, 2).unwrap();
        let mut m2 = DMatrix::zeros(3, basis.len() - 2);
        m2[(2, 0)] = 0.5;
        m2[(2, 2)] = -0.25;
        ManifoldModel::from_parts(v, &m2, 2).unwrap()
    }

    #[test]
    fn zero_initial_state_stays_at_rest() {
        let nf = NormalFormModel::from_polar(&PolarPair::new(vec![-0.1, 0.3], vec![2.0, 0.1])).unwrap();
        let p = predict_observable(&manifold(), &nf, &[0.0; 3], 0.01, 50).unwrap();
        assert!(p.y.iter().all(|&v| v == 0.0));
        assert!(!p.extrapolated);
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let nf = NormalFormModel::from_polar(&PolarPair::new(vec![-0.1], vec![2.0])).unwrap();
        assert!(matches!(predict_observable(&manifold(), &nf, &[0.0; 2], 0.01, 5), Err(Error::Shape(_))));
        assert!(matches!(predict_observable(&manifold(), &nf, &[0.0; 3], 0.0, 5), Err(Error::Input(_))));
    }

    /// Advecting the reduced field and its normal form from equivalent initial
    /// conditions gives the same observable trajectory.
    #[test]
    fn normal_form_advection_matches_reduced_model() {
        let basis = MultiIndexBasis::new(2, 1, 3).unwrap();
        let mut c = DMatrix::zeros(2, basis.len());
        c[(0, 0)] = -0.05;
        c[(0, 1)] = 1.5;
        c[(1, 0)] = -1.5;
        c[(1, 1)] = -0.05;
        c[(1, basis.index_of(&[2, 0]).unwrap())] = 0.2;
        c[(0, basis.index_of(&[3, 0]).unwrap())] = -0.3;
        c[(1, basis.index_of(&[1, 2]).unwrap())] = 0.15;
        let truth = ReducedModel::new(c, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xi = DMatrix::from_fn(2, 2000, |_, _| rng.gen_range(-0.3..0.3));
        let model = fit_reduced_dynamics(&xi, &truth.field_columns(&xi), 3).unwrap();
        let nf = normal_form(&model, &xi, 5, &NormalFormOptions::default()).unwrap();
        assert!(nf.round_trip_error(&xi) < 1e-3, "{}", nf.round_trip_error(&xi));

        let mm = manifold();
        let y0 = mm.parameterize(&[0.15, -0.05]);
        let pred = predict_observable(&mm, &nf, &y0, 0.01, 1000).unwrap();
        let reference = mm.lift(&model.advect(&[0.15, -0.05], 0.01, 1000).unwrap());
        let scale = reference.abs().max();
        let err = (&pred.y - &reference).abs().max() / scale;
        assert!(err < 2e-2, "relative deviation {err}");
    }
}
