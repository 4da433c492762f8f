//! Synthetic data sets shared by the CLI integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vidssm_core::embedding::TimeSeries;
use vidssm_core::synthetic_oracle::{dp_derivatives, dp_tip_position, hopf_derivatives, integrate, DoublePendulumParams, HopfParams};

pub const HOPF: HopfParams = HopfParams { gamma0: -0.03, omega0: 2.0, a: -0.4, b: 0.6 };
pub const HOPF_DT: f64 = 0.01;
pub const HOPF_CHANNELS: [&str; 3] = ["a", "b", "c"];

/// Near-identity cubic distortion of the oscillator plane, lifted into R³ as
/// a graph and rotated by a random orthogonal matrix (fixed seed).
pub fn observe_hopf(traj: &DMatrix<f64>, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..8).map(|_| rng.gen_range(-0.1..0.1)).collect();
    let h: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let q = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
    let mut out = DMatrix::zeros(3, traj.ncols());
    for k in 0..traj.ncols() {
        let (x1, x2) = (traj[(0, k)], traj[(1, k)]);
        let cubic = [x1 * x1 * x1, x1 * x1 * x2, x1 * x2 * x2, x2 * x2 * x2];
        let u1 = x1 + (0..4).map(|i| c[i] * cubic[i]).sum::<f64>();
        let u2 = x2 + (0..4).map(|i| c[4 + i] * cubic[i]).sum::<f64>();
        let w = h[0] * u1 * u1 + h[1] * u1 * u2 + h[2] * u2 * u2 + h[3] * u1.powi(3) + h[4] * u1 * u2 * u2 + h[5] * u2.powi(3);
        out.set_column(k, &(&q * nalgebra::Vector3::new(u1, u2, w)));
    }
    out
}

/// Observed Hopf trajectory from polar initial condition `(r0, phase)`.
pub fn hopf_series(r0: f64, phase: f64, steps: usize) -> TimeSeries {
    let x0 = [r0 * phase.cos(), r0 * phase.sin()];
    let t = integrate(|x| hopf_derivatives(x, &HOPF).to_vec(), &x0, HOPF_DT, steps).unwrap();
    TimeSeries::new(HOPF_DT, observe_hopf(&t, 7)).unwrap()
}

pub fn hopf_training() -> Vec<TimeSeries> {
    vec![hopf_series(0.9, 0.0, 6000), hopf_series(0.8, 1.0, 6000), hopf_series(0.85, 2.5, 6000)]
}

pub fn hopf_test() -> TimeSeries {
    hopf_series(0.75, 4.0, 6000)
}

pub const PENDULUM_FPS: f64 = 240.0;
/// Pixels per meter of the simulated camera.
pub const PENDULUM_SCALE: f64 = 1000.0;

/// Eigenvalue of the slower oscillatory mode of the linearized pendulum and
/// its eigenvector scaled so the first component is real and equal to one.
pub fn pendulum_slow_mode(p: &DoublePendulumParams) -> (Complex<f64>, Vec<Complex<f64>>) {
    let j = p.linearization();
    let lambda = j
        .complex_eigenvalues()
        .iter()
        .filter(|l| l.im > 0.0)
        .min_by(|a, b| a.im.total_cmp(&b.im))
        .copied()
        .unwrap();
    let shifted = j.map(|v| Complex::new(v, 0.0)) - DMatrix::from_diagonal_element(4, 4, lambda);
    let svd = shifted.svd(false, true);
    let vt = svd.v_t.unwrap();
    let k = (0..4).min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b])).unwrap();
    let v: Vec<Complex<f64>> = vt.row(k).iter().map(|c| c.conj()).collect();
    let v0 = v[0];
    (lambda, v.iter().map(|c| c / v0).collect())
}

/// Horizontal tip position in whole pixels, released on the slow mode with
/// upper-rod amplitude `amp` (radians).
pub fn pendulum_pixels(amp: f64, steps: usize) -> TimeSeries {
    let p = DoublePendulumParams::default();
    let (_, mode) = pendulum_slow_mode(&p);
    let x0: Vec<f64> = mode.iter().map(|c| amp * c.re).collect();
    let t = integrate(|s| dp_derivatives(s, &p).to_vec(), &x0, 1.0 / PENDULUM_FPS, steps).unwrap();
    let xs: Vec<f64> = t.column_iter().map(|c| (dp_tip_position(c.as_slice(), &p).0 * PENDULUM_SCALE).round()).collect();
    TimeSeries::from_channels(1.0 / PENDULUM_FPS, &[xs]).unwrap()
}

/// Writes `t` plus the rows of `series` under `names`.
pub fn write_series(path: &Path, series: &TimeSeries, names: &[&str]) {
    let times: Vec<f64> = (0..series.len()).map(|k| k as f64 * series.dt()).collect();
    let columns: Vec<(String, Vec<f64>)> =
        vidssm_cli::io::named_rows(series.values(), names.iter().map(|s| s.to_string()));
    vidssm_cli::io::write_columns(path, &times, &columns).unwrap();
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_vidssm"))
}

/// Runs the CLI with `args` and returns its output.
pub fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn vidssm")
}

/// Parses stdout of a successful run as JSON.
pub fn run_json(args: &[&str]) -> serde_json::Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "vidssm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON summary on stdout")
}

/// Columns of a CSV file by header name.
pub fn read_csv(path: &Path) -> Vec<(String, Vec<f64>)> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let mut cols: Vec<(String, Vec<f64>)> = headers.into_iter().map(|h| (h, Vec::new())).collect();
    for rec in rdr.records() {
        for (c, v) in cols.iter_mut().zip(rec.unwrap().iter()) {
            c.1.push(v.parse().unwrap());
        }
    }
    cols
}

pub fn column<'a>(cols: &'a [(String, Vec<f64>)], name: &str) -> &'a [f64] {
    &cols.iter().find(|(n, _)| n == name).unwrap_or_else(|| panic!("no column {name}")).1
}

/// Position RMSE (pixels) and largest angle error (degrees) of a tracked CSV
/// against a ground-truth CSV.
pub fn track_errors(tracked: &Path, truth: &Path) -> (f64, f64) {
    let (a, b) = (read_csv(tracked), read_csv(truth));
    let (ax, ay, at) = (column(&a, "x"), column(&a, "y"), column(&a, "theta"));
    let (bx, by, bt) = (column(&b, "x"), column(&b, "y"), column(&b, "theta"));
    assert_eq!(ax.len(), bx.len());
    let sq: f64 = (0..ax.len()).map(|i| (ax[i] - bx[i]).powi(2) + (ay[i] - by[i]).powi(2)).sum();
    let angle = (0..at.len()).map(|i| (at[i] - bt[i]).abs()).fold(0.0, f64::max);
    ((sq / ax.len() as f64).sqrt(), angle)
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
