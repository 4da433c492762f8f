use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ReducedModel;
use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::ode;
use crate::par::Exec;
use crate::poly::MultiIndexBasis;

type C = Complex<f64>;

const ZERO: C = C { re: 0.0, im: 0.0 };
const ONE: C = C { re: 1.0, im: 0.0 };

/// Solver settings for [`normal_form`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFormOptions {
    /// Relative tolerance of the near-resonance test.
    pub resonance_tol: f64,
    pub max_iter: usize,
    /// Converged once an accepted step lowers the cost by less than this fraction.
    pub rel_tol: f64,
    pub exec: Exec,
}

impl Default for NormalFormOptions {
    fn default() -> Self {
        NormalFormOptions { resonance_tol: 0.1, max_iter: 500, rel_tol: 1e-10, exec: Exec::default() }
    }
}

/// Normal form of a reduced model.
///
/// With `q = W⁻¹ξ`, the normal-form coordinates are `z = H q^{1:n}` (linear
/// block of `H` is the identity), they evolve as `ż = N z^{1:n}` (linear block
/// `diag(Λ)`), and `ξ = T z^{1:n}` (linear block `W`) maps back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormModel {
    pub d: usize,
    pub n_nf: usize,
    /// Monomials of orders `1..=n_nf`.
    pub basis: MultiIndexBasis,
    #[serde(with = "crate::serde_mat::complex")]
    pub w: DMatrix<C>,
    #[serde(with = "crate::serde_mat::complex_vec")]
    pub lambda: DVector<C>,
    #[serde(with = "crate::serde_mat::complex")]
    pub h: DMatrix<C>,
    #[serde(with = "crate::serde_mat::complex")]
    pub n: DMatrix<C>,
    #[serde(with = "crate::serde_mat::complex")]
    pub t: DMatrix<C>,
    pub resonance_tol: f64,
    /// `partner[i]` is the index of the conjugate of eigenvalue `i` (itself if real).
    pub partner: Vec<usize>,
    /// `(row, monomial)` entries of `N` allowed to be nonzero beyond the linear block.
    pub resonant: Vec<(usize, usize)>,
    /// Largest `|z_i|` seen on the training data.
    pub max_amplitude: Option<f64>,
    /// RMS of the invariance residual at the solution.
    pub residual_rms: f64,
}

impl NormalFormModel {
    /// A purely linear normal form from eigenvalues and eigenvectors.
    pub fn linear(lambda: DVector<C>, w: DMatrix<C>, partner: Vec<usize>, n_nf: usize, resonance_tol: f64) -> Result<Self> {
        let d = lambda.len();
        let basis = MultiIndexBasis::new(d, 1, n_nf.max(1))?;
        let l = basis.len();
        let mut h = DMatrix::from_element(d, l, ZERO);
        let mut n = DMatrix::from_element(d, l, ZERO);
        let mut t = DMatrix::from_element(d, l, ZERO);
        for i in 0..d {
            h[(i, i)] = ONE;
            n[(i, i)] = lambda[i];
        }
        t.columns_mut(0, d).copy_from(&w);
        let resonant = resonant_set(lambda.as_slice(), &basis, resonance_tol);
        Ok(NormalFormModel {
            d,
            n_nf: n_nf.max(1),
            basis,
            w,
            lambda,
            h,
            n,
            t,
            resonance_tol,
            partner,
            resonant,
            max_amplitude: None,
            residual_rms: 0.0,
        })
    }

    /// `W⁻¹`.
    pub fn w_inverse(&self) -> DMatrix<C> {
        self.w.clone().try_inverse().expect("eigenvector matrix is invertible")
    }

    /// `t⁻¹(ξ)`: reduced coordinates to normal-form coordinates.
    pub fn to_normal(&self, xi: &[f64]) -> DVector<C> {
        self.to_normal_with(&self.w_inverse(), xi)
    }

    fn to_normal_with(&self, w_inv: &DMatrix<C>, xi: &[f64]) -> DVector<C> {
        let q = w_inv * DVector::from_iterator(xi.len(), xi.iter().map(|&v| C::new(v, 0.0)));
        &self.h * DVector::from_vec(self.basis.eval(q.as_slice()))
    }

    /// `t⁻¹` for every column.
    pub fn to_normal_columns(&self, xi: &DMatrix<f64>) -> DMatrix<C> {
        let w_inv = self.w_inverse();
        let mut z = DMatrix::from_element(self.d, xi.ncols(), ZERO);
        for (j, col) in xi.column_iter().enumerate() {
            z.set_column(j, &self.to_normal_with(&w_inv, col.as_slice()));
        }
        z
    }

    /// `t(z)`, real part (the imaginary part vanishes for conjugate-symmetric `z`).
    pub fn from_normal(&self, z: &[C]) -> DVector<f64> {
        (&self.t * DVector::from_vec(self.basis.eval(z))).map(|c| c.re)
    }

    /// Normal-form vector field `ż = n(z)`.
    pub fn field(&self, z: &[C]) -> DVector<C> {
        &self.n * DVector::from_vec(self.basis.eval(z))
    }

    /// Integrates `ż = n(z)` and maps each state back to reduced coordinates.
    pub fn advect(&self, z0: &DVector<C>, dt: f64, steps: usize) -> Result<(DMatrix<C>, DMatrix<f64>)> {
        let z = ode::integrate(|z: &DVector<C>| self.field(z.as_slice()), z0, dt, steps, Some(ode::DIVERGENCE_BOUND))?;
        let mut xi = DMatrix::zeros(self.d, z.ncols());
        for (j, col) in z.column_iter().enumerate() {
            xi.set_column(j, &self.from_normal(col.as_slice()));
        }
        Ok((z, xi))
    }

    /// Maximum relative error of `t(t⁻¹(ξ))` over the columns of `xi`.
    pub fn round_trip_error(&self, xi: &DMatrix<f64>) -> f64 {
        let z = self.to_normal_columns(xi);
        let scale = xi.column_iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        z.column_iter()
            .zip(xi.column_iter())
            .map(|(zc, x)| (self.from_normal(zc.as_slice()) - x).norm() / scale)
            .fold(0.0, f64::max)
    }
}

/// Entries `(i, k)` with `|k| ≥ 2` and `|λ_i − k·λ| < tol·|λ_i|`.
pub(super) fn resonant_set(lambda: &[C], basis: &MultiIndexBasis, tol: f64) -> Vec<(usize, usize)> {
    let d = lambda.len();
    let mut out = Vec::new();
    for i in 0..d {
        for (k, e) in basis.exponents().iter().enumerate() {
            if e.iter().sum::<u32>() < 2 {
                continue;
            }
            let kl: C = e.iter().zip(lambda).map(|(&p, &l)| l * p as f64).sum();
            if (lambda[i] - kl).norm() < tol * lambda[i].norm() {
                out.push((i, k));
            }
        }
    }
    out
}

/// Index of the monomial obtained by conjugating every variable.
fn conjugate_monomials(basis: &MultiIndexBasis, partner: &[usize]) -> Vec<usize> {
    basis
        .exponents()
        .iter()
        .map(|e| {
            let mut c = vec![0u32; e.len()];
            for (l, &p) in e.iter().enumerate() {
                c[partner[l]] = p;
            }
            basis.index_of(&c).expect("conjugate monomial present")
        })
        .collect()
}

/// Unit null vector of the square complex matrix `a`.
fn null_vector(a: &DMatrix<C>) -> DVector<C> {
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let k = (0..svd.singular_values.len())
        .min_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]))
        .expect("nonempty matrix");
    vt.row(k).transpose().map(|c| c.conj())
}

/// Scales to unit norm with the first non-negligible component real-positive.
fn normalize(v: DVector<C>) -> DVector<C> {
    let v = &v / C::new(v.norm(), 0.0);
    let lead = v.iter().find(|c| c.norm() > 1e-8).copied().unwrap_or(ONE);
    let phase = lead.conj() / lead.norm();
    v * phase
}

/// Eigenvalues (conjugate pairs adjacent, positive imaginary part first,
/// slowest oscillation first, then real eigenvalues in descending order),
/// the matching eigenvector matrix and the conjugate-partner map.
pub(super) fn eigen_decomposition(a: &DMatrix<f64>) -> Result<(DVector<C>, DMatrix<C>, Vec<usize>)> {
    let d = a.nrows();
    let eig = a.complex_eigenvalues();
    let scale = eig.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let im_tol = 1e-10 * scale.max(1e-300);
    let mut pairs: Vec<C> = eig.iter().copied().filter(|l| l.im > im_tol).collect();
    let mut reals: Vec<f64> = eig.iter().filter(|l| l.im.abs() <= im_tol).map(|l| l.re).collect();
    pairs.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    reals.sort_by(|a, b| b.total_cmp(a));
    if 2 * pairs.len() + reals.len() != d {
        return Err(Error::NotDiagonalizable(format!("unpaired complex eigenvalues {eig:?}")));
    }
    let ac = a.map(|v| C::new(v, 0.0));
    let mut lambda = Vec::with_capacity(d);
    let mut cols: Vec<DVector<C>> = Vec::with_capacity(d);
    let mut partner = Vec::with_capacity(d);
    for l in pairs {
        let w = normalize(null_vector(&(&ac - DMatrix::from_diagonal_element(d, d, l))));
        let i = lambda.len();
        lambda.push(l);
        lambda.push(l.conj());
        cols.push(w.map(|c| c.conj()));
        cols.insert(i, w);
        partner.push(i + 1);
        partner.push(i);
    }
    for l in reals {
        let lc = C::new(l, 0.0);
        let w = null_vector(&(&ac - DMatrix::from_diagonal_element(d, d, lc)));
        // real eigenvector: drop the arbitrary phase
        let w = normalize(w).map(|c| C::new(c.re, 0.0));
        partner.push(lambda.len());
        lambda.push(lc);
        cols.push(normalize(w));
    }
    let w = DMatrix::from_columns(&cols);
    let sv = w.clone().svd(false, false).singular_values;
    let (smax, smin) = sv.iter().fold((0.0f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
    if !(smin > 1e-10 * smax) {
        return Err(Error::NotDiagonalizable(format!(
            "eigenvector matrix is singular (condition {:.3e})",
            smax / smin
        )));
    }
    Ok((DVector::from_vec(lambda), w, partner))
}

/// Unknown coefficient of the nonlinear normal-form problem.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Param {
    H(usize, usize),
    N(usize, usize),
}

struct Problem<'a> {
    d: usize,
    basis: &'a MultiIndexBasis,
    lambda: &'a [C],
    q: DMatrix<C>,
    q_dot: DMatrix<C>,
    params: Vec<Param>,
    exec: Exec,
}

struct Normal {
    a: DMatrix<C>,
    g: DVector<C>,
    cost: f64,
}

impl Problem<'_> {
    fn unpack(&self, p: &[C]) -> (DMatrix<C>, DMatrix<C>) {
        let l = self.basis.len();
        let mut h = DMatrix::from_element(self.d, l, ZERO);
        let mut n = DMatrix::from_element(self.d, l, ZERO);
        for (&param, &v) in self.params.iter().zip(p) {
            match param {
                Param::H(i, k) => h[(i, k)] = v,
                Param::N(i, k) => n[(i, k)] = v,
            }
        }
        (h, n)
    }

    /// Residual of sample `j`; optionally fills the `d × P` Jacobian block.
    fn sample(&self, j: usize, h: &DMatrix<C>, n: &DMatrix<C>, jac: Option<&mut [C]>) -> DVector<C> {
        let d = self.d;
        let q = self.q.column(j);
        let qd = self.q_dot.column(j);
        let phq = DVector::from_vec(self.basis.eval(q.as_slice()));
        let dq = self.basis.jacobian(q.as_slice());
        let dphi = &dq * qd;
        let z = q + h * &phq;
        let phz = DVector::from_vec(self.basis.eval(z.as_slice()));
        let mut res = qd + h * &dphi - n * &phz;
        for i in 0..d {
            res[i] -= self.lambda[i] * z[i];
        }
        if let Some(jac) = jac {
            let nd = n * self.basis.jacobian(z.as_slice());
            let np = self.params.len();
            for (p, &param) in self.params.iter().enumerate() {
                match param {
                    Param::H(jj, k) => {
                        for i in 0..d {
                            let mut v = -phq[k] * nd[(i, jj)];
                            if i == jj {
                                v += dphi[k] - self.lambda[jj] * phq[k];
                            }
                            jac[i * np + p] = v;
                        }
                    }
                    Param::N(jj, k) => {
                        for i in 0..d {
                            jac[i * np + p] = if i == jj { -phz[k] } else { ZERO };
                        }
                    }
                }
            }
        }
        res
    }

    fn cost(&self, p: &[C]) -> f64 {
        let (h, n) = self.unpack(p);
        self.exec
            .reduce_chunks(
                self.q.ncols(),
                |range| range.map(|j| self.sample(j, &h, &n, None).norm_squared()).sum::<f64>(),
                |a, b| a + b,
            )
            .unwrap_or(0.0)
    }

    fn normal_equations(&self, p: &[C]) -> Normal {
        let (h, n) = self.unpack(p);
        let np = self.params.len();
        let d = self.d;
        let zero = || Normal { a: DMatrix::from_element(np, np, ZERO), g: DVector::from_element(np, ZERO), cost: 0.0 };
        self.exec
            .reduce_chunks(
                self.q.ncols(),
                |range| {
                    let rows = range.len() * d;
                    let mut jac = vec![ZERO; rows * np];
                    let mut res = DVector::from_element(rows, ZERO);
                    for (s, j) in range.enumerate() {
                        let block = &mut jac[s * d * np..(s + 1) * d * np];
                        let r = self.sample(j, &h, &n, Some(block));
                        res.rows_mut(s * d, d).copy_from(&r);
                    }
                    let jm = DMatrix::from_row_slice(rows, np, &jac);
                    let jh = jm.adjoint();
                    Normal { a: &jh * &jm, g: &jh * &res, cost: res.norm_squared() }
                },
                |mut x, y| {
                    x.a += y.a;
                    x.g += y.g;
                    x.cost += y.cost;
                    x
                },
            )
            .unwrap_or_else(zero)
    }
}

/// Averages every coefficient with the conjugate of its mirror entry so that
/// the map commutes with conjugation of real data.
fn symmetrize(c: &mut DMatrix<C>, row_partner: Option<&[usize]>, col_partner: &[usize]) {
    let orig = c.clone();
    for i in 0..c.nrows() {
        let pi = row_partner.map_or(i, |p| p[i]);
        for k in 0..c.ncols() {
            c[(i, k)] = (orig[(i, k)] + orig[(pi, col_partner[k])].conj()) * 0.5;
        }
    }
}

/// Computes the normal form of `model` from reduced-coordinate samples `xi`
/// (`d × N`), up to order `n_nf`.
pub fn normal_form(model: &ReducedModel, xi: &DMatrix<f64>, n_nf: usize, opts: &NormalFormOptions) -> Result<NormalFormModel> {
    let d = model.d;
    if xi.nrows() != d {
        return Err(Error::Shape(format!("samples have {} rows for d={d}", xi.nrows())));
    }
    if n_nf == 0 {
        return Err(Error::Input("normal-form order must be at least 1".into()));
    }
    let (lambda, w, partner) = eigen_decomposition(&model.linear())?;
    let mut nf = NormalFormModel::linear(lambda.clone(), w, partner.clone(), n_nf, opts.resonance_tol)?;
    let basis = nf.basis.clone();
    let conj_mono = conjugate_monomials(&basis, &partner);
    let w_inv = nf.w_inverse();
    let to_c = |m: &DMatrix<f64>| m.map(|v| C::new(v, 0.0));
    let q = &w_inv * to_c(xi);
    let q_dot = &w_inv * to_c(&model.field_columns(xi));

    let nonlinear: Vec<usize> = (0..basis.len()).filter(|&k| basis.exponents()[k].iter().sum::<u32>() >= 2).collect();
    let mut params = Vec::new();
    for i in 0..d {
        for &k in &nonlinear {
            if nf.resonant.contains(&(i, k)) {
                params.push(Param::N(i, k));
            } else {
                params.push(Param::H(i, k));
            }
        }
    }
    let problem = Problem { d, basis: &basis, lambda: lambda.as_slice(), q, q_dot, params, exec: opts.exec };

    // Start from H = 0 with N fitted linearly on the eigencoordinates.
    let mut p = vec![ZERO; problem.params.len()];
    for i in 0..d {
        let cols: Vec<usize> = nf.resonant.iter().filter(|(r, _)| *r == i).map(|&(_, k)| k).collect();
        if cols.is_empty() {
            continue;
        }
        let n_s = problem.q.ncols();
        let mut a = DMatrix::from_element(n_s, cols.len(), ZERO);
        let mut b = DMatrix::from_element(n_s, 1, ZERO);
        for j in 0..n_s {
            let phq = basis.eval(problem.q.column(j).as_slice());
            for (c, &k) in cols.iter().enumerate() {
                a[(j, c)] = phq[k];
            }
            b[(j, 0)] = problem.q_dot[(i, j)] - lambda[i] * problem.q[(i, j)];
        }
        let x = lstsq(&a, &b).map_err(|bad| Error::Conditioning {
            monomials: bad.iter().map(|&c| basis.label(cols[c])).collect(),
        })?;
        for (c, &k) in cols.iter().enumerate() {
            let idx = problem.params.iter().position(|&pp| pp == Param::N(i, k)).expect("resonant parameter");
            p[idx] = x[(c, 0)];
        }
    }

    let samples = problem.q.ncols().max(1) as f64;
    let mut converged = problem.params.is_empty();
    let mut eq = problem.normal_equations(&p);
    let scale = problem.q_dot.norm_squared().max(f64::MIN_POSITIVE);
    let mut mu = 1e-3;
    let mut iterations = 0;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        if eq.cost <= 1e-28 * scale {
            converged = true;
            break;
        }
        let np = p.len();
        let dmax = (0..np).map(|i| eq.a[(i, i)].re).fold(0.0, f64::max);
        let mut lhs = eq.a.clone();
        for i in 0..np {
            lhs[(i, i)] += C::new(mu * eq.a[(i, i)].re.max(1e-12 * dmax), 0.0);
        }
        let rhs = -&eq.g;
        let step = match lhs.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => match lhs.lu().solve(&rhs) {
                Some(s) => s,
                None => {
                    mu *= 10.0;
                    continue;
                }
            },
        };
        let trial: Vec<C> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let tc = problem.cost(&trial);
        if tc < eq.cost {
            let rel = (eq.cost - tc) / eq.cost;
            p = trial;
            eq = problem.normal_equations(&p);
            mu = (mu / 3.0).max(1e-12);
            if rel < opts.rel_tol {
                converged = true;
            }
        } else {
            mu *= 4.0;
            if mu > 1e10 {
                // no descent direction left at this precision
                converged = true;
            }
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations, residual: (eq.cost / samples).sqrt() });
    }
    log::debug!("normal form: {iterations} iterations, residual {:.3e}", (eq.cost / samples).sqrt());

    let (mut h_nl, mut n_nl) = problem.unpack(&p);
    symmetrize(&mut h_nl, Some(&partner), &conj_mono);
    symmetrize(&mut n_nl, Some(&partner), &conj_mono);
    for &k in &nonlinear {
        nf.h.set_column(k, &h_nl.column(k));
        nf.n.set_column(k, &n_nl.column(k));
    }
    let (hs, ns) = (nf.h.clone(), nf.n.clone());
    let p_sym: Vec<C> = problem
        .params
        .iter()
        .map(|&pp| match pp {
            Param::H(i, k) => hs[(i, k)],
            Param::N(i, k) => ns[(i, k)],
        })
        .collect();
    nf.residual_rms = (problem.cost(&p_sym) / samples).sqrt();

    // Forward map: ξ − W z fitted on the nonlinear monomials of z.
    let z = nf.to_normal_columns(xi);
    nf.max_amplitude = Some(z.iter().map(|c| c.norm()).fold(0.0, f64::max));
    if !nonlinear.is_empty() {
        let n_s = z.ncols();
        let mut a = DMatrix::from_element(n_s, nonlinear.len(), ZERO);
        for j in 0..n_s {
            let ph = basis.eval(z.column(j).as_slice());
            for (c, &k) in nonlinear.iter().enumerate() {
                a[(j, c)] = ph[k];
            }
        }
        let b = (to_c(xi) - &nf.w * &z).transpose();
        let t2 = lstsq(&a, &b).map_err(|bad| Error::Conditioning {
            monomials: bad.iter().map(|&c| basis.label(nonlinear[c])).collect(),
        })?;
        for (c, &k) in nonlinear.iter().enumerate() {
            nf.t.set_column(k, &t2.row(c).transpose());
        }
        let mut t = nf.t.clone();
        symmetrize(&mut t, None, &conj_mono);
        nf.t = t;
    }
    Ok(nf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn samples(seed: u64, count: usize, amp: f64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(2, count, |_, _| rng.gen_range(-amp..amp))
    }

    #[test]
    fn eigenvectors_follow_conventions() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.1, -3.0, 2.0, 0.2]);
        let (l, w, partner) = eigen_decomposition(&a).unwrap();
        assert!(l[0].im > 0.0 && l[1] == l[0].conj());
        assert_eq!(partner, vec![1, 0]);
        let ac = a.map(|v| C::new(v, 0.0));
        for i in 0..2 {
            let col = w.column(i);
            assert!((&ac * col - col * l[i]).norm() < 1e-12);
            assert!((col.norm() - 1.0).abs() < 1e-14);
        }
        assert!(w[(0, 0)].im == 0.0 && w[(0, 0)].re > 0.0);
        assert_eq!(w[(1, 1)], w[(1, 0)].conj());

        let saddle = DMatrix::from_row_slice(2, 2, &[0.09106, -2.325, -2.741, -0.2462]);
        let (l, w, partner) = eigen_decomposition(&saddle).unwrap();
        assert!(l[0].re > 0.0 && l[1].re < 0.0 && l.iter().all(|c| c.im == 0.0));
        assert_eq!(partner, vec![0, 1]);
        assert!(w.iter().all(|c| c.im == 0.0));

        let jordan = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
        assert!(matches!(eigen_decomposition(&jordan), Err(Error::NotDiagonalizable(_))));
    }

    #[test]
    fn resonance_selection_for_light_damping() {
        let l = [C::new(-0.05, 2.0), C::new(-0.05, -2.0)];
        let b = MultiIndexBasis::new(2, 1, 5).unwrap();
        let set = resonant_set(&l, &b, 0.1);
        let names: Vec<(usize, Vec<u32>)> = set.iter().map(|&(i, k)| (i, b.exponents()[k].clone())).collect();
        assert_eq!(
            names,
            vec![(0, vec![2, 1]), (0, vec![3, 2]), (1, vec![1, 2]), (1, vec![2, 3])]
        );
    }

    #[test]
    fn linear_data_gives_identity_maps() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.1, -2.0, 2.0, -0.1]);
        let xi = samples(1, 400, 1.0);
        let model = super::super::fit_reduced_dynamics(&xi, &(&a * &xi), 3).unwrap();
        let nf = normal_form(&model, &xi, 3, &NormalFormOptions::default()).unwrap();
        let l = nf.lambda[0];
        assert!((l - C::new(-0.1, 2.0)).norm() < 1e-8);
        for k in 2..nf.basis.len() {
            for i in 0..2 {
                assert!(nf.h[(i, k)].norm() < 1e-8);
                assert!(nf.n[(i, k)].norm() < 1e-8);
                assert!(nf.t[(i, k)].norm() < 1e-8);
            }
        }
        assert!(nf.round_trip_error(&xi) < 1e-8);
    }

    #[test]
    fn conjugate_structure_is_exact() {
        // cubic field with a non-resonant quadratic term
        let basis = MultiIndexBasis::new(2, 1, 3).unwrap();
        let mut c = DMatrix::zeros(2, basis.len());
        c[(0, 0)] = -0.05;
        c[(0, 1)] = -2.0;
        c[(1, 0)] = 2.0;
        c[(1, 1)] = -0.05;
        c[(0, basis.index_of(&[2, 0]).unwrap())] = 0.3;
        c[(1, basis.index_of(&[2, 1]).unwrap())] = -0.4;
        c[(0, basis.index_of(&[0, 3]).unwrap())] = -0.2;
        let model = ReducedModel::new(c, 3).unwrap();
        let xi = samples(2, 600, 0.3);
        let nf = normal_form(&model, &xi, 3, &NormalFormOptions::default()).unwrap();
        let cm = conjugate_monomials(&nf.basis, &nf.partner);
        for (k, &ck) in cm.iter().enumerate().take(nf.basis.len()) {
            assert_eq!(nf.h[(0, k)], nf.h[(1, ck)].conj());
            assert_eq!(nf.n[(0, k)], nf.n[(1, ck)].conj());
            for i in 0..2 {
                assert_eq!(nf.t[(i, k)], nf.t[(i, ck)].conj());
            }
        }
        // N nonzero only on the resonant set
        for i in 0..2 {
            for k in 2..nf.basis.len() {
                if !nf.resonant.contains(&(i, k)) {
                    assert_eq!(nf.n[(i, k)], ZERO);
                }
            }
        }
        assert!(nf.round_trip_error(&xi) < 1e-2);
    }

    #[test]
    fn strategies_agree() {
        let basis = MultiIndexBasis::new(2, 1, 3).unwrap();
        let mut c = DMatrix::zeros(2, basis.len());
        c[(0, 1)] = 1.0;
        c[(1, 0)] = -1.0;
        c[(1, 1)] = -0.1;
        c[(1, basis.index_of(&[3, 0]).unwrap())] = -0.3;
        let model = ReducedModel::new(c, 3).unwrap();
        let xi = samples(3, 1500, 0.5);
        let run = |exec| normal_form(&model, &xi, 3, &NormalFormOptions { exec, ..Default::default() }).unwrap();
        assert_eq!(run(Exec::Sequential), run(Exec::Parallel));
    }
}
