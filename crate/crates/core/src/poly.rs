//! Multivariate monomial bases in graded-lexicographic order.

use nalgebra::{ComplexField, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All monomials in `d` variables with total degree in `lo..=hi`.
///
/// Degrees ascend; within a degree, exponent tuples run in descending
/// lexicographic order, so for `d = 2` and degrees `2..=3` the basis is
/// `x1², x1x2, x2², x1³, x1²x2, x1x2², x2³`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiIndexBasis {
    d: usize,
    lo: usize,
    hi: usize,
    exponents: Vec<Vec<u32>>,
}

/// `C(n, k)` without overflow for the small sizes used here.
fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Exponent tuples of total degree `k`, descending lexicographic.
fn degree_tuples(d: usize, k: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() + 1 == d {
        prefix.push(k as u32);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for e in (0..=k).rev() {
        prefix.push(e as u32);
        degree_tuples(d, k - e, prefix, out);
        prefix.pop();
    }
}

impl MultiIndexBasis {
    pub fn new(d: usize, lo: usize, hi: usize) -> Result<Self> {
        if d == 0 || lo > hi {
            return Err(Error::Input(format!("invalid monomial basis d={d}, orders {lo}..={hi}")));
        }
        let mut exponents = Vec::with_capacity(Self::count(d, lo, hi));
        for k in lo..=hi {
            degree_tuples(d, k, &mut Vec::with_capacity(d), &mut exponents);
        }
        Ok(MultiIndexBasis { d, lo, hi, exponents })
    }

    /// Number of monomials in `d` variables of degree `lo..=hi`.
    pub fn count(d: usize, lo: usize, hi: usize) -> usize {
        (lo..=hi).map(|k| binomial(d + k - 1, k)).sum()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn min_order(&self) -> usize {
        self.lo
    }

    pub fn max_order(&self) -> usize {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn index_of(&self, exp: &[u32]) -> Option<usize> {
        self.exponents.iter().position(|e| e.as_slice() == exp)
    }

    /// Human-readable name such as `x1^2*x3`.
    pub fn label(&self, k: usize) -> String {
        let parts: Vec<String> = self.exponents[k]
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| if e == 1 { format!("x{}", i + 1) } else { format!("x{}^{}", i + 1, e) })
            .collect();
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join("*")
        }
    }

    fn powers<T: ComplexField + Copy>(&self, x: &[T]) -> Vec<Vec<T>> {
        assert_eq!(x.len(), self.d, "monomial argument has wrong dimension");
        x.iter()
            .map(|&xi| {
                let mut p = Vec::with_capacity(self.hi + 1);
                p.push(T::one());
                for e in 1..=self.hi {
                    p.push(p[e - 1] * xi);
                }
                p
            })
            .collect()
    }

    /// Writes the monomials of `x` into `out` (length `len()`).
    pub fn eval_into<T: ComplexField + Copy>(&self, x: &[T], out: &mut [T]) {
        let pw = self.powers(x);
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            *o = e.iter().enumerate().fold(T::one(), |acc, (i, &k)| acc * pw[i][k as usize]);
        }
    }

    pub fn eval<T: ComplexField + Copy>(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.len()];
        self.eval_into(x, &mut out);
        out
    }

    /// Partial derivatives, `len() × d`: entry `(k, i)` is the derivative of monomial `k` in `x_i`.
    pub fn jacobian<T: ComplexField + Copy>(&self, x: &[T]) -> DMatrix<T> {
        let pw = self.powers(x);
        let mut j = DMatrix::zeros(self.len(), self.d);
        for (k, e) in self.exponents.iter().enumerate() {
            for i in 0..self.d {
                if e[i] == 0 {
                    continue;
                }
                let mut v = T::from_subset(&(e[i] as f64)) * pw[i][e[i] as usize - 1];
                for (l, &el) in e.iter().enumerate() {
                    if l != i {
                        v *= pw[l][el as usize];
                    }
                }
                j[(k, i)] = v;
            }
        }
        j
    }

    /// Monomials of every column of `x` (`d × N`), as a `len() × N` matrix.
    pub fn eval_columns(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.len(), x.ncols());
        for (c, col) in x.column_iter().enumerate() {
            let v = self.eval(col.as_slice());
            out.column_mut(c).copy_from_slice(&v);
        }
        out
    }
}

/// Monomial vector of `x` in the order of `basis`.
pub fn monomials<T: ComplexField + Copy>(x: &[T], basis: &MultiIndexBasis) -> Vec<T> {
    basis.eval(x)
}
