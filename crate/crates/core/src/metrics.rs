//! Trajectory and parameterization error measures.
//!
//! Inputs are snapshot matrices (`channels × samples`). Range normalizers are
//! always taken from the truth series.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A metric value together with the normalizers that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub metric: String,
    pub value: f64,
    pub ranges: Vec<f64>,
}

fn check_shapes(truth: &DMatrix<f64>, estimate: &DMatrix<f64>) -> Result<()> {
    if truth.shape() != estimate.shape() || truth.ncols() == 0 {
        return Err(Error::Shape(format!(
            "truth is {:?}, estimate is {:?}",
            truth.shape(),
            estimate.shape()
        )));
    }
    Ok(())
}

/// `max − min` of every truth channel; a zero range is an error.
pub fn channel_ranges(truth: &DMatrix<f64>) -> Result<Vec<f64>> {
    truth
        .row_iter()
        .enumerate()
        .map(|(c, row)| {
            let range = row.max() - row.min();
            if range > 0.0 {
                Ok(range)
            } else {
                Err(Error::Normalization { channel: c })
            }
        })
        .collect()
}

fn normalized_errors(truth: &DMatrix<f64>, estimate: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    check_shapes(truth, estimate)?;
    let ranges = channel_ranges(truth)?;
    let e = DMatrix::from_fn(truth.nrows(), truth.ncols(), |r, c| {
        (estimate[(r, c)] - truth[(r, c)]) / ranges[r]
    });
    Ok((e, ranges))
}

/// Root of the mean squared range-normalized error over samples and channels.
pub fn ermse_report(truth: &DMatrix<f64>, estimate: &DMatrix<f64>) -> Result<ErrorReport> {
    let (e, ranges) = normalized_errors(truth, estimate)?;
    let value = (e.norm_squared() / e.len() as f64).sqrt();
    Ok(ErrorReport { metric: "ermse".into(), value, ranges })
}

pub fn ermse(truth: &DMatrix<f64>, estimate: &DMatrix<f64>) -> Result<f64> {
    ermse_report(truth, estimate).map(|r| r.value)
}

/// Mean over samples of the Euclidean norm of the range-normalized error vector.
pub fn cnmte_report(truth: &DMatrix<f64>, estimate: &DMatrix<f64>) -> Result<ErrorReport> {
    let (e, ranges) = normalized_errors(truth, estimate)?;
    let value = e.column_iter().map(|c| c.norm()).sum::<f64>() / e.ncols() as f64;
    Ok(ErrorReport { metric: "cnmte".into(), value, ranges })
}

pub fn cnmte(truth: &DMatrix<f64>, estimate: &DMatrix<f64>) -> Result<f64> {
    cnmte_report(truth, estimate).map(|r| r.value)
}

/// Mean error norm divided by the largest sample norm of the truth.
pub fn nmte(truth: &DMatrix<f64>, estimate: &DMatrix<f64>) -> Result<f64> {
    check_shapes(truth, estimate)?;
    let scale = truth.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::Input("nmte normalizer is zero: truth has no nonzero sample".into()));
    }
    let total: f64 = (estimate - truth).column_iter().map(|c| c.norm()).sum();
    Ok(total / truth.ncols() as f64 / scale)
}

/// Applies `metric` to each trajectory pair and averages the values.
pub fn mean_over<F>(pairs: &[(DMatrix<f64>, DMatrix<f64>)], metric: F) -> Result<f64>
where
    F: Fn(&DMatrix<f64>, &DMatrix<f64>) -> Result<f64>,
{
    if pairs.is_empty() {
        return Err(Error::Input("no trajectories to score".into()));
    }
    let mut sum = 0.0;
    for (t, e) in pairs {
        sum += metric(t, e)?;
    }
    Ok(sum / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn hand_cases() {
        let truth = DMatrix::from_row_slice(1, 5, &[0.0, 1.0, 2.0, 1.0, 0.5]);
        assert_eq!(ermse(&truth, &truth).unwrap(), 0.0);
        let est = truth.add_scalar(0.2);
        assert!((ermse(&truth, &est).unwrap() - 0.1).abs() < 1e-12);
        assert!((cnmte(&truth, &est).unwrap() - 0.1).abs() < 1e-12);

        let flat = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 2.0, 5.0, 5.0, 5.0]);
        assert!(matches!(ermse(&flat, &flat), Err(Error::Normalization { channel: 1 })));
        assert!(matches!(cnmte(&flat, &flat), Err(Error::Normalization { channel: 1 })));

        // ranges 1 and 2, errors 0.3 and 0.8 -> normalized (0.3, 0.4)
        let truth = DMatrix::from_row_slice(2, 4, &[0.0, 1.0, 0.5, 0.2, 0.0, 2.0, 1.0, 1.5]);
        let mut est = truth.clone();
        est.row_mut(0).add_scalar_mut(0.3);
        est.row_mut(1).add_scalar_mut(-0.8);
        assert!((cnmte(&truth, &est).unwrap() - 0.5).abs() < 1e-12);
        let r = cnmte_report(&truth, &est).unwrap();
        assert_eq!(r.ranges, vec![1.0, 2.0]);

        // nmte with a constant offset c = (3, 4)
        let est = DMatrix::from_fn(2, 4, |r, c| truth[(r, c)] + [3.0, 4.0][r]);
        let max_norm = truth.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!((nmte(&truth, &est).unwrap() - 5.0 / max_norm).abs() < 1e-12);
        assert_eq!(nmte(&truth, &truth).unwrap(), 0.0);
        assert!(nmte(&DMatrix::zeros(2, 3), &DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn single_channel_cnmte_is_mean_abs_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random(&mut rng, 1, 50);
        let e = random(&mut rng, 1, 50);
        let range = t.max() - t.min();
        let want = (&e - &t).iter().map(|v| v.abs() / range).sum::<f64>() / 50.0;
        assert!((cnmte(&t, &e).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn trajectory_average() {
        let a = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 2.0]);
        let pairs = vec![(a.clone(), a.clone()), (a.clone(), a.add_scalar(0.4))];
        assert!((mean_over(&pairs, cnmte).unwrap() - 0.1).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn affine_rescaling_invariance(seed in any::<u64>(), scales in prop::collection::vec(0.1f64..10.0, 3), shifts in prop::collection::vec(-5.0f64..5.0, 3)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random(&mut rng, 3, 40);
            let e = &t + random(&mut rng, 3, 40) * 0.1;
            let map = |m: &DMatrix<f64>| DMatrix::from_fn(3, 40, |r, c| scales[r] * m[(r, c)] + shifts[r]);
            let (t2, e2) = (map(&t), map(&e));
            prop_assert!((ermse(&t, &e).unwrap() - ermse(&t2, &e2).unwrap()).abs() < 1e-12);
            prop_assert!((cnmte(&t, &e).unwrap() - cnmte(&t2, &e2).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn channel_permutation_symmetry(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random(&mut rng, 3, 20);
            let e = random(&mut rng, 3, 20);
            let perm = [2usize, 0, 1];
            let (tp, ep) = (t.select_rows(&perm), e.select_rows(&perm));
            prop_assert!((ermse(&t, &e).unwrap() - ermse(&tp, &ep).unwrap()).abs() < 1e-12);
            prop_assert!((cnmte(&t, &e).unwrap() - cnmte(&tp, &ep).unwrap()).abs() < 1e-12);
            prop_assert!((nmte(&t, &e).unwrap() - nmte(&tp, &ep).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn zero_iff_equal(seed in any::<u64>(), k in 0usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random(&mut rng, 3, 20);
            let mut e = t.clone();
            prop_assert_eq!(ermse(&t, &e).unwrap(), 0.0);
            e[k % 60] += 1e-9;
            prop_assert!(ermse(&t, &e).unwrap() > 0.0);
            prop_assert!(cnmte(&t, &e).unwrap() > 0.0);
            prop_assert!(nmte(&t, &e).unwrap() > 0.0);
        }
    }
}
