//! Graph-style manifold fits `y ≈ Vξ + M₂ φ(ξ)`, `ξ = Vᵀy`, with orthonormal `V`
//! and `VᵀM₂ = 0`.
//!
//! For fixed `V` the best `M₂` is an ordinary least-squares fit of the
//! off-tangent part of the data, and it satisfies the orthogonality constraint
//! automatically. The fit therefore descends on the Stiefel manifold in `V`
//! alone, re-solving `M₂` at every trial point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddedSeries;
use crate::error::{Error, Result};
use crate::linalg::{lstsq, orthonormalize};
use crate::metrics;
use crate::par::Exec;
use crate::poly::MultiIndexBasis;

/// Fitted manifold parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldModel {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    /// Monomials of orders `1..=m`; the first `d` are the linear terms.
    pub basis: MultiIndexBasis,
    /// Tangent basis, `n × d`.
    #[serde(with = "crate::serde_mat::real")]
    pub v: DMatrix<f64>,
    /// Full coefficient matrix `[V | M₂]`, `n × d_{1:m}`.
    #[serde(with = "crate::serde_mat::real")]
    pub coefficients: DMatrix<f64>,
    pub training_ermse: f64,
}

impl ManifoldModel {
    /// Assembles a model from `V` and the nonlinear block `M₂`.
    pub fn from_parts(v: DMatrix<f64>, m2: &DMatrix<f64>, m: usize) -> Result<Self> {
        let (n, d) = v.shape();
        let basis = MultiIndexBasis::new(d, 1, m.max(1))?;
        if m2.nrows() != n || m2.ncols() != basis.len() - d {
            return Err(Error::Shape(format!(
                "nonlinear block is {:?}, expected {:?}",
                m2.shape(),
                (n, basis.len() - d)
            )));
        }
        let mut coefficients = DMatrix::zeros(n, basis.len());
        coefficients.columns_mut(0, d).copy_from(&v);
        coefficients.columns_mut(d, basis.len() - d).copy_from(m2);
        Ok(ManifoldModel { n, d, m, basis, v, coefficients, training_ermse: f64::NAN })
    }

    /// `M₂`, the coefficients of the monomials of order 2 and above.
    pub fn nonlinear(&self) -> DMatrix<f64> {
        self.coefficients.columns(self.d, self.coefficients.ncols() - self.d).into_owned()
    }

    /// Reduced coordinates `ξ = Vᵀy`.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        project(&self.v, y)
    }

    /// The manifold map `v(ξ)`.
    pub fn parameterize(&self, xi: &[f64]) -> Vec<f64> {
        let phi = nalgebra::DVector::from_vec(self.basis.eval(xi));
        (&self.coefficients * phi).as_slice().to_vec()
    }

    /// `v(Vᵀy)` for every column of `y`.
    pub fn reconstruct(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let xi = self.v.transpose() * y;
        &self.coefficients * self.basis.eval_columns(&xi)
    }

    /// `v(ξ)` for every column of `ξ`.
    pub fn lift(&self, xi: &DMatrix<f64>) -> DMatrix<f64> {
        &self.coefficients * self.basis.eval_columns(xi)
    }

    /// Largest entry of `|VᵀV − I|`.
    pub fn orthonormality_residual(&self) -> f64 {
        (self.v.transpose() * &self.v - DMatrix::identity(self.d, self.d)).abs().max()
    }

    /// Largest entry of `|VᵀM₂|`.
    pub fn constraint_residual(&self) -> f64 {
        if self.coefficients.ncols() == self.d {
            return 0.0;
        }
        (self.v.transpose() * self.nonlinear()).abs().max()
    }
}

/// `Vᵀy`.
pub fn project(v: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    assert_eq!(v.nrows(), y.len(), "projection dimension mismatch");
    (v.tr_mul(&nalgebra::DVector::from_column_slice(y))).as_slice().to_vec()
}

/// Solver settings for [`fit_manifold`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Stop once the relative cost decrease falls below this.
    pub rel_tol: f64,
    pub exec: Exec,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iter: 500, rel_tol: 1e-9, exec: Exec::default() }
    }
}

/// Per-iteration record of the fit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitTrace {
    /// Cost after initialization and after each accepted step.
    pub costs: Vec<f64>,
    pub iterations: usize,
}

struct Problem<'a> {
    y: &'a DMatrix<f64>,
    /// Monomials of order `2..=m`; `None` for a linear fit.
    basis: Option<MultiIndexBasis>,
    d: usize,
    exec: Exec,
}

impl Problem<'_> {
    /// Optimal `M₂` for `v` and the resulting cost.
    fn solve(&self, v: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
        let n = self.y.nrows();
        let xi = v.transpose() * self.y;
        let y_perp = self.y - v * &xi;
        let Some(basis) = &self.basis else {
            return Ok((DMatrix::zeros(n, 0), y_perp.norm_squared()));
        };
        let phi = basis.eval_columns(&xi);
        let m2t = lstsq(&phi.transpose(), &y_perp.transpose()).map_err(|cols| Error::Conditioning {
            monomials: cols.iter().map(|&c| basis.label(c)).collect(),
        })?;
        let mut m2 = m2t.transpose();
        // exact orthogonality to the tangent space
        m2 -= v * (v.transpose() * &m2);
        let resid = y_perp - &m2 * phi;
        Ok((m2, resid.norm_squared()))
    }

    /// Gauss–Newton normal equations in the tangent coordinates `K` of
    /// `V + V⊥K`, holding `M₂` fixed. Returns `(JᵀJ, Jᵀr)`.
    fn normal_equations(&self, v: &DMatrix<f64>, v_perp: &DMatrix<f64>, m2: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let (n, d) = (self.y.nrows(), self.d);
        let k = v_perp.ncols();
        let np = k * d;
        let vt = v.transpose();
        let pt = v_perp.transpose();
        self.exec
            .reduce_chunks(
                self.y.ncols(),
                |range| {
                    let mut jtj = DMatrix::<f64>::zeros(np, np);
                    let mut jtr = DVector::<f64>::zeros(np);
                    let mut jac = DMatrix::<f64>::zeros(n, np);
                    for j in range {
                        let y = self.y.column(j);
                        let xi = &vt * y;
                        let w = &pt * y;
                        let mut r = y - v * &xi;
                        let mut b = v.clone();
                        if let Some(basis) = &self.basis {
                            r -= m2 * DVector::from_vec(basis.eval(xi.as_slice()));
                            b += m2 * basis.jacobian(xi.as_slice());
                        }
                        // ∂r/∂K_ab = −V⊥_a ξ_b − B_b w_a
                        for a in 0..k {
                            for c in 0..d {
                                let mut col = jac.column_mut(a * d + c);
                                col.copy_from(&v_perp.column(a));
                                col *= -xi[c];
                                col.axpy(-w[a], &b.column(c), 1.0);
                            }
                        }
                        jtj += jac.tr_mul(&jac);
                        jtr += jac.tr_mul(&r);
                    }
                    (jtj, jtr)
                },
                |a, b| (a.0 + b.0, a.1 + b.1),
            )
            .unwrap_or_else(|| (DMatrix::zeros(np, np), DVector::zeros(np)))
    }
}

/// Orthonormal basis of the orthogonal complement of `range(v)`.
fn complement(v: &DMatrix<f64>) -> DMatrix<f64> {
    let n = v.nrows();
    let proj = DMatrix::identity(n, n) - v * v.transpose();
    let svd = proj.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    u.select_columns(&order[..n - v.ncols()])
}

/// Fits a `d`-dimensional manifold of polynomial order `m` to all samples of
/// `trajectories`, every sample weighted equally.
pub fn fit_manifold(
    trajectories: &[EmbeddedSeries],
    d: usize,
    m: usize,
    opts: &FitOptions,
) -> Result<(ManifoldModel, FitTrace)> {
    let n = trajectories.first().map(EmbeddedSeries::dim).ok_or_else(|| Error::Input("no training trajectories".into()))?;
    if trajectories.iter().any(|t| t.dim() != n) {
        return Err(Error::Shape("training trajectories have different dimensions".into()));
    }
    if d == 0 || d > n || m == 0 {
        return Err(Error::Input(format!("invalid manifold dimensions d={d}, m={m} for n={n}")));
    }
    let total: usize = trajectories.iter().map(EmbeddedSeries::len).sum();
    let needed = 10 * MultiIndexBasis::count(d, 1, m);
    if total < needed {
        return Err(Error::Input(format!(
            "manifold fit needs at least {needed} samples for d={d}, m={m}; got {total}"
        )));
    }
    let mut y = DMatrix::zeros(n, total);
    let mut at = 0;
    for t in trajectories {
        y.columns_mut(at, t.len()).copy_from(&t.vectors);
        at += t.len();
    }

    let svd = y.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    if sigma.len() < d || !(sigma[d - 1] > 1e-12 * sigma[0]) {
        return Err(Error::Degenerate(format!(
            "snapshot matrix has numerical rank below d={d} (singular values {:?})",
            &sigma[..sigma.len().min(d + 1)]
        )));
    }

    let basis = if m >= 2 { Some(MultiIndexBasis::new(d, 2, m)?) } else { None };
    let problem = Problem { y: &y, basis, d, exec: opts.exec };

    // Initialization: the best d-subset of the leading singular directions.
    // A strongly curved manifold can put more energy in a nonlinear direction
    // than in one of its tangent directions, so the top d alone is not enough.
    let pool = (d + 2).min(sigma.len());
    let mut best: Option<(DMatrix<f64>, DMatrix<f64>, f64)> = None;
    for combo in combinations(pool, d) {
        let cols: Vec<usize> = combo.iter().map(|&k| order[k]).collect();
        let v = u.select_columns(&cols);
        let (m2, cost) = match problem.solve(&v) {
            Ok(s) => s,
            Err(Error::Conditioning { .. }) => continue,
            Err(e) => return Err(e),
        };
        if best.as_ref().is_none_or(|b| cost < b.2) {
            best = Some((v, m2, cost));
        }
    }
    let (mut v, mut m2, mut cost) = best.ok_or_else(|| {
        Error::Degenerate("no tangent-space candidate gives a well-conditioned fit".into())
    })?;

    let mut trace = FitTrace { costs: vec![cost], iterations: 0 };
    // Levenberg–Marquardt on the tangent coordinates; `M₂` is re-solved
    // exactly at every trial point, so each accepted step lowers the cost.
    let mut mu = 1e-3;
    let mut fresh = true;
    let mut eq = None;
    let mut v_perp = complement(&v);
    while trace.iterations < opts.max_iter && v_perp.ncols() > 0 && cost > 0.0 {
        if fresh {
            eq = Some(problem.normal_equations(&v, &v_perp, &m2));
            fresh = false;
        }
        let (jtj, jtr) = eq.as_ref().expect("normal equations computed");
        let np = jtr.len();
        let dmax = (0..np).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
        if !(dmax > 0.0) {
            break;
        }
        let mut lhs = jtj.clone();
        for i in 0..np {
            lhs[(i, i)] += mu * jtj[(i, i)].max(1e-12 * dmax);
        }
        let Some(delta) = lhs.cholesky().map(|c| c.solve(&-jtr)) else {
            mu *= 10.0;
            continue;
        };
        let kmat = DMatrix::from_row_slice(v_perp.ncols(), d, delta.as_slice());
        let trial = orthonormalize(&(&v + &v_perp * kmat));
        match problem.solve(&trial) {
            Ok((tm2, tcost)) if tcost < cost => {
                let rel = (cost - tcost) / cost;
                v = trial;
                m2 = tm2;
                cost = tcost;
                v_perp = complement(&v);
                trace.costs.push(cost);
                trace.iterations += 1;
                mu = (mu / 3.0).max(1e-12);
                fresh = true;
                if rel < opts.rel_tol {
                    break;
                }
            }
            _ => {
                mu *= 4.0;
                if mu > 1e10 {
                    break;
                }
            }
        }
    }

    let mut model = ManifoldModel::from_parts(v, &m2, m)?;
    let pairs: Vec<(DMatrix<f64>, DMatrix<f64>)> =
        trajectories.iter().map(|t| (t.vectors.clone(), model.reconstruct(&t.vectors))).collect();
    model.training_ermse = metrics::mean_over(&pairs, metrics::ermse).unwrap_or(f64::NAN);
    log::info!(
        "manifold fit: n={n} d={d} m={m}, {} iterations, cost {cost:.3e}, ERMSE {:.3e}",
        trace.iterations,
        model.training_ermse
    );
    Ok((model, trace))
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_principal_angle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
        orthonormalize(&DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0)))
    }

    fn grid(k: usize) -> Vec<(f64, f64)> {
        let s = |i: usize| -1.0 + 2.0 * i as f64 / (k - 1) as f64;
        (0..k).flat_map(|i| (0..k).map(move |j| (s(i), s(j)))).collect()
    }

    fn series(cols: Vec<Vec<f64>>) -> EmbeddedSeries {
        let n = cols[0].len();
        EmbeddedSeries::from_snapshots(0.01, DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r]))
    }

    #[test]
    fn combinations_enumerate_subsets() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn projection_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = random_orthonormal(&mut rng, 5, 2);
        let y: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xi = project(&v, &y);
        for i in 0..2 {
            let want: f64 = (0..5).map(|r| v[(r, i)] * y[r]).sum();
            assert!((xi[i] - want).abs() < 1e-15);
        }
        // a vector orthogonal to span(V)
        let w = nalgebra::DVector::from_vec(y.clone());
        let perp = &w - &v * (v.transpose() * &w);
        assert!(project(&v, perp.as_slice()).iter().all(|x| x.abs() < 1e-15));

        let model = ManifoldModel::from_parts(v.clone(), &DMatrix::zeros(5, 0), 1).unwrap();
        assert!(model.parameterize(&[0.0, 0.0]).iter().all(|&x| x == 0.0));
        let inspan = &v * nalgebra::DVector::from_vec(vec![0.3, -0.7]);
        let back = model.parameterize(&model.project(inspan.as_slice()));
        assert!(back.iter().zip(inspan.iter()).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn linear_subspace_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v_true = random_orthonormal(&mut rng, 6, 2);
        let cols: Vec<Vec<f64>> = grid(15)
            .into_iter()
            .map(|(a, b)| (&v_true * nalgebra::DVector::from_vec(vec![a, b])).as_slice().to_vec())
            .collect();
        let (model, _) = fit_manifold(&[series(cols)], 2, 3, &FitOptions::default()).unwrap();
        assert!(max_principal_angle(&model.v, &v_true) < 1e-6);
        assert!(model.nonlinear().abs().max() < 1e-10);
    }

    #[test]
    fn quadratic_graph_is_fit_exactly() {
        let cols: Vec<Vec<f64>> = grid(21).into_iter().map(|(a, b)| vec![a, b, a * a - b * b]).collect();
        let (model, trace) = fit_manifold(&[series(cols.clone())], 2, 2, &FitOptions::default()).unwrap();
        assert!(model.training_ermse < 1e-8, "{}", model.training_ermse);
        let tangent = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(max_principal_angle(&model.v, &tangent) < 1e-6);
        assert!(model.orthonormality_residual() < 1e-10);
        assert!(model.constraint_residual() < 1e-8);
        assert!(trace.costs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn curved_manifold_beats_pca_initialization() {
        // strongly curved: the quadratic direction carries more energy than the second tangent
        let cols: Vec<Vec<f64>> = grid(25)
            .into_iter()
            .map(|(a, b)| vec![a, 0.2 * b, 1.5 * a * a + 0.1 * b * b])
            .collect();
        let (model, _) = fit_manifold(&[series(cols)], 2, 2, &FitOptions::default()).unwrap();
        assert!(model.training_ermse < 1e-8, "{}", model.training_ermse);
    }

    #[test]
    fn descent_is_monotone_on_noisy_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cols: Vec<Vec<f64>> = (0..600)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                vec![a + 0.3 * b, b, 0.4 * a * b + 0.2 * a.powi(3) + 0.01 * rng.gen_range(-1.0..1.0), 0.5 * b * b]
            })
            .collect();
        let (model, trace) = fit_manifold(&[series(cols)], 2, 3, &FitOptions::default()).unwrap();
        assert!(trace.costs.windows(2).all(|w| w[1] <= w[0]));
        assert!(trace.iterations > 0);
        assert!(model.orthonormality_residual() < 1e-10);
        assert!(model.constraint_residual() < 1e-8);
    }

    #[test]
    fn input_checks() {
        let cols: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 0.0, 1.0]).collect();
        assert!(matches!(fit_manifold(&[series(cols)], 2, 3, &FitOptions::default()), Err(Error::Input(_))));
        let flat: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64, 2.0 * i as f64, 0.0]).collect();
        assert!(matches!(fit_manifold(&[series(flat)], 2, 2, &FitOptions::default()), Err(Error::Degenerate(_))));
        assert!(fit_manifold(&[], 2, 2, &FitOptions::default()).is_err());
    }

    #[test]
    fn serialized_model_round_trips() {
        let cols: Vec<Vec<f64>> = grid(12).into_iter().map(|(a, b)| vec![a, b, a * b + 0.1 * a.powi(3)]).collect();
        let (model, _) = fit_manifold(&[series(cols)], 2, 3, &FitOptions::default()).unwrap();
        let text = serde_json::to_string(&model).unwrap();
        let back: ManifoldModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn strategies_agree() {
        let cols: Vec<Vec<f64>> = grid(30).into_iter().map(|(a, b)| vec![a, b, (a * b).sin(), a * a]).collect();
        let s = series(cols);
        let run = |exec| fit_manifold(std::slice::from_ref(&s), 2, 3, &FitOptions { exec, ..Default::default() }).unwrap().0;
        assert_eq!(run(Exec::Sequential), run(Exec::Parallel));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn error_invariant_under_rotation(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cols: Vec<Vec<f64>> = (0..300).map(|_| {
                let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                vec![a, b, 0.5 * a * a - 0.2 * b + 0.05 * rng.gen_range(-1.0..1.0), 0.3 * a * b]
            }).collect();
            let s = series(cols);
            let q = random_orthonormal(&mut rng, 4, 4);
            let rotated = EmbeddedSeries::from_snapshots(0.01, &q * &s.vectors);
            let cost = |e: &EmbeddedSeries| {
                let (m, _) = fit_manifold(std::slice::from_ref(e), 2, 2, &FitOptions::default()).unwrap();
                (&e.vectors - m.reconstruct(&e.vectors)).norm_squared()
            };
            let (c0, c1) = (cost(&s), cost(&rotated));
            prop_assert!((c0 - c1).abs() <= 1e-8 * c0.max(1e-12), "{} vs {}", c0, c1);
        }
    }
}
