use std::io::Write;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::NormalFormModel;
use crate::error::{Error, Result};
use crate::ssm_geometry::ManifoldModel;

type C = Complex<f64>;

/// Number of phase samples used to maximize the observable over a cycle.
pub const PHASE_SAMPLES: usize = 256;

/// Damping and frequency of one oscillatory pair as polynomials in `ρ²`:
/// `ρ̇/ρ = γ(ρ) = Σ γ_a ρ^{2a}`, `θ̇ = ω(ρ) = Σ ω_a ρ^{2a}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarPair {
    /// Index of the eigenvalue with positive imaginary part.
    pub index: usize,
    pub gamma: Vec<f64>,
    pub omega: Vec<f64>,
}

fn horner(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * s + a)
}

impl PolarPair {
    pub fn new(gamma: Vec<f64>, omega: Vec<f64>) -> Self {
        PolarPair { index: 0, gamma, omega }
    }

    pub fn gamma_at(&self, rho: f64) -> f64 {
        horner(&self.gamma, rho * rho)
    }

    pub fn omega_at(&self, rho: f64) -> f64 {
        horner(&self.omega, rho * rho)
    }

    /// Positive zeros of `γ` in `(0, rho_max]`, in increasing order.
    pub fn gamma_zeros(&self, rho_max: f64) -> Vec<f64> {
        const GRID: usize = 4096;
        let mut zeros = Vec::new();
        let f = |r: f64| self.gamma_at(r);
        let mut a = 0.0;
        let mut fa = f(a);
        for i in 1..=GRID {
            let b = rho_max * i as f64 / GRID as f64;
            let fb = f(b);
            if fb == 0.0 {
                zeros.push(b);
            } else if fa != 0.0 && fa.signum() != fb.signum() {
                let (mut lo, mut hi, mut flo) = (a, b, fa);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let fm = f(mid);
                    if fm.signum() == flo.signum() {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= f64::EPSILON * hi {
                        break;
                    }
                }
                zeros.push(0.5 * (lo + hi));
            }
            a = b;
            fa = fb;
        }
        zeros
    }
}

/// Polar normal form of every oscillatory pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarModel {
    pub pairs: Vec<PolarPair>,
}

/// Exponent `e` contributes to the polar reduction of row `i` iff it has the
/// form `z_i Π |z_l|^{2 a_l}`.
fn is_polar_term(e: &[u32], i: usize, partner: &[usize]) -> bool {
    (0..e.len()).all(|l| {
        let shift = if l == i { 1 } else if partner[l] == i && l != i { -1 } else { 0 };
        e[l] as i64 - e[partner[l]] as i64 == shift
    })
}

/// Reduces the normal form to `(γ, ω)` polynomials for each conjugate pair.
///
/// Coupling to other modes is dropped (other amplitudes set to zero).
pub fn to_polar(nf: &NormalFormModel) -> Result<PolarModel> {
    let exps = nf.basis.exponents();
    let pair_rows: Vec<usize> = (0..nf.d).filter(|&i| nf.partner[i] != i && nf.lambda[i].im > 0.0).collect();
    for (a, &i) in pair_rows.iter().enumerate() {
        for &j in &pair_rows[a + 1..] {
            let (wi, wj) = (nf.lambda[i].im, nf.lambda[j].im);
            for ratio in 1..=nf.n_nf as u32 {
                let r = ratio as f64;
                if (wj - r * wi).abs() < nf.resonance_tol * wj || (wi - r * wj).abs() < nf.resonance_tol * wi {
                    return Err(Error::InternalResonance(format!(
                        "frequencies {wi:.6} and {wj:.6} are in {ratio}:1 resonance; model the coupled pairs jointly"
                    )));
                }
            }
        }
    }
    for &(i, k) in &nf.resonant {
        if nf.partner[i] != i && !is_polar_term(&exps[k], i, &nf.partner) {
            return Err(Error::InternalResonance(format!(
                "resonant term {} in row {} couples modes; model the coupled pairs jointly",
                nf.basis.label(k),
                i + 1
            )));
        }
    }
    let mut pairs = Vec::with_capacity(pair_rows.len());
    for &i in &pair_rows {
        let p = nf.partner[i];
        let terms = nf.n_nf.saturating_sub(1) / 2 + 1;
        let mut gamma = vec![0.0; terms];
        let mut omega = vec![0.0; terms];
        for (a, (g, w)) in gamma.iter_mut().zip(omega.iter_mut()).enumerate() {
            let mut e = vec![0u32; nf.d];
            e[i] = a as u32 + 1;
            e[p] = a as u32;
            if let Some(k) = nf.basis.index_of(&e) {
                *g = nf.n[(i, k)].re;
                *w = nf.n[(i, k)].im;
            }
        }
        pairs.push(PolarPair { index: i, gamma, omega });
    }
    Ok(PolarModel { pairs })
}

impl NormalFormModel {
    /// Two-dimensional normal form realizing a polar pair, with identity
    /// near-identity maps and `W = [[1, 1], [−i, i]]/√2`.
    pub fn from_polar(pair: &PolarPair) -> Result<Self> {
        let g0 = pair.gamma.first().copied().unwrap_or(0.0);
        let w0 = pair.omega.first().copied().unwrap_or(0.0);
        let lambda = C::new(g0, w0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let w = DMatrix::from_row_slice(2, 2, &[C::new(s, 0.0), C::new(s, 0.0), C::new(0.0, -s), C::new(0.0, s)]);
        let terms = pair.gamma.len().max(pair.omega.len()).max(1);
        let mut nf = NormalFormModel::linear(DVector::from_vec(vec![lambda, lambda.conj()]), w, vec![1, 0], 2 * terms - 1, 0.1)?;
        for a in 1..terms {
            let c = C::new(pair.gamma.get(a).copied().unwrap_or(0.0), pair.omega.get(a).copied().unwrap_or(0.0));
            let k0 = nf.basis.index_of(&[a as u32 + 1, a as u32]).expect("pair monomial");
            let k1 = nf.basis.index_of(&[a as u32, a as u32 + 1]).expect("pair monomial");
            nf.n[(0, k0)] = c;
            nf.n[(1, k1)] = c.conj();
        }
        Ok(nf)
    }
}

/// Selects a scalar from an observable vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Observable {
    Coordinate(usize),
    Linear(Vec<f64>),
}

impl Observable {
    pub fn apply(&self, y: &[f64]) -> Result<f64> {
        match self {
            Observable::Coordinate(i) => y
                .get(*i)
                .copied()
                .ok_or_else(|| Error::Input(format!("observable coordinate {i} out of range {}", y.len()))),
            Observable::Linear(w) if w.len() == y.len() => Ok(w.iter().zip(y).map(|(a, b)| a * b).sum()),
            Observable::Linear(w) => Err(Error::Shape(format!("functional of length {} for {} observables", w.len(), y.len()))),
        }
    }
}

/// `max_θ |g(v(t(z)))|` with pair `pair` at `z = ρe^{iθ}` and the remaining
/// normal-form coordinates at zero.
pub fn amplitude_map(mm: &ManifoldModel, nf: &NormalFormModel, pair: usize, g: &Observable, rho: f64) -> Result<f64> {
    if pair >= nf.d || nf.partner[pair] == pair {
        return Err(Error::Input(format!("coordinate {pair} is not part of an oscillatory pair")));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    let p = nf.partner[pair];
    let mut best = 0.0f64;
    for s in 0..PHASE_SAMPLES {
        let th = std::f64::consts::TAU * s as f64 / PHASE_SAMPLES as f64;
        let mut z = vec![C::new(0.0, 0.0); nf.d];
        z[pair] = C::from_polar(rho, th);
        z[p] = z[pair].conj();
        let xi = nf.from_normal(&z);
        let y = mm.parameterize(xi.as_slice());
        best = best.max(g.apply(&y)?.abs());
    }
    Ok(best)
}

/// Backbone and damping curves on a uniform `ρ` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneCurve {
    pub rho: Vec<f64>,
    pub gamma: Vec<f64>,
    pub omega: Vec<f64>,
    pub amplitude: Vec<f64>,
    /// Set when the grid extends beyond the trained amplitude range.
    pub extrapolated: bool,
}

impl BackboneCurve {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "rho,gamma,omega,amplitude")?;
        for i in 0..self.rho.len() {
            writeln!(out, "{},{},{},{}", self.rho[i], self.gamma[i], self.omega[i], self.amplitude[i])?;
        }
        Ok(())
    }
}

/// Tabulates `γ`, `ω` and the amplitude `amp(ρ)` on `samples` points of
/// `[0, rho_max]`; `rho_max = 0` yields the single row at the origin.
pub fn backbone_curves<F>(pair: &PolarPair, amp: F, rho_max: f64, samples: usize, trained_max: Option<f64>) -> Result<BackboneCurve>
where
    F: Fn(f64) -> Result<f64>,
{
    let rho: Vec<f64> = if rho_max == 0.0 {
        vec![0.0]
    } else if rho_max > 0.0 && rho_max.is_finite() && samples >= 2 {
        (0..samples).map(|i| rho_max * i as f64 / (samples - 1) as f64).collect()
    } else {
        return Err(Error::Input(format!("invalid backbone grid: rho_max={rho_max}, samples={samples}")));
    };
    let amplitude = rho.iter().map(|&r| amp(r)).collect::<Result<Vec<_>>>()?;
    let extrapolated = trained_max.is_some_and(|m| rho_max > m);
    if extrapolated {
        log::warn!("backbone grid up to rho={rho_max} extends beyond the trained amplitude {:?}", trained_max);
    }
    Ok(BackboneCurve {
        gamma: rho.iter().map(|&r| pair.gamma_at(r)).collect(),
        omega: rho.iter().map(|&r| pair.omega_at(r)).collect(),
        rho,
        amplitude,
        extrapolated,
    })
}
