//! Fixed-step classical Runge-Kutta integration of autonomous fields.

use nalgebra::{ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};

/// Default state-norm bound past which an integration is declared divergent.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// One RK4 step of `ẋ = f(x)`.
pub fn rk4_step<T, F>(f: &F, x: &DVector<T>, dt: f64) -> DVector<T>
where
    T: ComplexField<RealField = f64> + Copy,
    F: Fn(&DVector<T>) -> DVector<T>,
{
    let h = T::from_real(dt);
    let half = T::from_real(0.5 * dt);
    let k1 = f(x);
    let k2 = f(&(x + &k1 * half));
    let k3 = f(&(x + &k2 * half));
    let k4 = f(&(x + &k3 * h));
    x + (k1 + (k2 + k3) * T::from_real(2.0) + k4) * T::from_real(dt / 6.0)
}

/// Integrates `steps` RK4 steps from `x0`; column `k` of the result is the
/// state at time `k·dt`.
///
/// Fails with a divergence error as soon as the state stops being finite or,
/// when `bound` is set, its norm exceeds `bound`.
pub fn integrate<T, F>(f: F, x0: &DVector<T>, dt: f64, steps: usize, bound: Option<f64>) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64> + Copy,
    F: Fn(&DVector<T>) -> DVector<T>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Input(format!("time step must be positive, got {dt}")));
    }
    let mut out = DMatrix::zeros(x0.len(), steps + 1);
    out.set_column(0, x0);
    let mut x = x0.clone();
    for k in 1..=steps {
        x = rk4_step(&f, &x, dt);
        let norm = x.norm();
        if !norm.is_finite() || bound.is_some_and(|b| norm > b) {
            return Err(Error::Divergence { time: k as f64 * dt });
        }
        out.set_column(k, &x);
    }
    Ok(out)
}
