//! Ground-truth generators for tests and demos: a damped double pendulum, a
//! cubic Hopf oscillator, reported normal-form fixtures and a marker-video
//! renderer sharing the tracker's rotation convention.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::media_io::{Frame, FrameSequence};
use crate::ode;
use crate::par::Exec;
use crate::reduced_dynamics::{PolarPair, ReducedModel};
use crate::tracker::{rotate_template, Template, TrackSeries};

/// Two rigid rods with rounded ends, joined by damped revolute joints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublePendulumParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub w1: f64,
    pub w2: f64,
    /// Joint damping coefficients (N·m·s).
    pub beta1: f64,
    pub beta2: f64,
    pub g: f64,
}

impl Default for DoublePendulumParams {
    fn default() -> Self {
        DoublePendulumParams {
            m1: 0.253,
            m2: 0.114,
            l1: 0.200,
            l2: 0.180,
            w1: 0.025,
            w2: 0.025,
            beta1: 0.0023,
            beta2: 0.0023,
            g: 9.81,
        }
    }
}

/// Lagrangian constants: `T = Aθ̇₁² + Bθ̇₂² + Cθ̇₁θ̇₂cos(θ₁−θ₂)`,
/// `V = −D cos θ₁ − E cos θ₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

/// Moment of inertia of a stadium-shaped rod (rectangle `l × w` capped by two
/// semicircles of diameter `w`) of total mass `m` about its center.
pub fn rod_inertia(m: f64, l: f64, w: f64) -> f64 {
    let rect_area = l * w;
    let semi_area = PI * w * w / 8.0;
    let total = rect_area + 2.0 * semi_area;
    let m_rect = m * rect_area / total;
    let m_semi = m * semi_area / total;
    let rect = m_rect * (l * l + w * w) / 12.0;
    let semi_own = (1.0 / 16.0 - 4.0 / (9.0 * PI * PI)) * w * w;
    let offset = l / 2.0 + 2.0 * w / (3.0 * PI);
    rect + 2.0 * m_semi * (semi_own + offset * offset)
}

impl DoublePendulumParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.m1, self.m2, self.l1, self.l2, self.w1, self.w2, self.g];
        if positive.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Input(format!("masses, lengths, widths and gravity must be positive: {self:?}")));
        }
        if !(self.beta1 >= 0.0 && self.beta2 >= 0.0) {
            return Err(Error::Input(format!("damping must be non-negative: {self:?}")));
        }
        let k = self.constants();
        if !(4.0 * k.a * k.b > k.c * k.c) {
            return Err(Error::Input("mass matrix is not positive definite".into()));
        }
        Ok(())
    }

    pub fn inertia1(&self) -> f64 {
        rod_inertia(self.m1, self.l1, self.w1)
    }

    pub fn inertia2(&self) -> f64 {
        rod_inertia(self.m2, self.l2, self.w2)
    }

    pub fn constants(&self) -> PendulumConstants {
        let (m1, m2, l1, l2, g) = (self.m1, self.m2, self.l1, self.l2, self.g);
        PendulumConstants {
            a: 0.5 * m1 * (l1 / 2.0).powi(2) + 0.5 * self.inertia1() + 0.5 * m2 * l1 * l1,
            b: 0.5 * m2 * (l2 / 2.0).powi(2) + 0.5 * self.inertia2(),
            c: 0.5 * m2 * l1 * l2,
            d: (0.5 * m1 + m2) * g * l1,
            e: 0.5 * m2 * g * l2,
        }
    }

    /// Jacobian of [`dp_derivatives`] at the hanging equilibrium, assembled
    /// from the mass, damping and stiffness matrices.
    pub fn linearization(&self) -> DMatrix<f64> {
        let k = self.constants();
        let mass = DMatrix::from_row_slice(2, 2, &[2.0 * k.a, k.c, k.c, 2.0 * k.b]);
        let stiff = DMatrix::from_row_slice(2, 2, &[k.d, 0.0, 0.0, k.e]);
        let damp = DMatrix::from_row_slice(
            2,
            2,
            &[self.beta1 + self.beta2, -self.beta2, -self.beta2, self.beta2],
        );
        let minv = mass.try_inverse().expect("positive definite mass matrix");
        let mut j = DMatrix::zeros(4, 4);
        j[(0, 2)] = 1.0;
        j[(1, 3)] = 1.0;
        j.view_mut((2, 0), (2, 2)).copy_from(&(-&minv * stiff));
        j.view_mut((2, 2), (2, 2)).copy_from(&(-&minv * damp));
        j
    }
}

/// `(θ̇₁, θ̇₂, θ̈₁, θ̈₂)` for the state `(θ₁, θ₂, θ̇₁, θ̇₂)`.
pub fn dp_derivatives(s: &[f64], p: &DoublePendulumParams) -> [f64; 4] {
    let PendulumConstants { a, b, c, d, e } = p.constants();
    let (t1, t2, w1, w2) = (s[0], s[1], s[2], s[3]);
    let (sd, cd) = (t1 - t2).sin_cos();
    let f1 = -(p.beta1 + p.beta2) * w1 + p.beta2 * w2;
    let f2 = p.beta2 * w1 - p.beta2 * w2;
    let k = c * c * cd * cd - 4.0 * a * b;
    let acc1 = (c * c * sd * cd * w1 * w1 + 2.0 * b * c * sd * w2 * w2 + 2.0 * b * d * t1.sin()
        - c * e * cd * t2.sin()
        + c * cd * f2
        - 2.0 * b * f1)
        / k;
    let acc2 = (-2.0 * a * c * sd * w1 * w1 - c * c * sd * cd * w2 * w2 - c * d * cd * t1.sin()
        + 2.0 * a * e * t2.sin()
        + c * cd * f1
        - 2.0 * a * f2)
        / k;
    [w1, w2, acc1, acc2]
}

/// Total mechanical energy `T + V`.
pub fn dp_energy(s: &[f64], p: &DoublePendulumParams) -> f64 {
    let k = p.constants();
    let (t1, t2, w1, w2) = (s[0], s[1], s[2], s[3]);
    k.a * w1 * w1 + k.b * w2 * w2 + k.c * w1 * w2 * (t1 - t2).cos() - k.d * t1.cos() - k.e * t2.cos()
}

/// End point of the lower rod in meters (x right, y up, pivot at the origin).
pub fn dp_tip_position(s: &[f64], p: &DoublePendulumParams) -> (f64, f64) {
    (p.l1 * s[0].sin() + p.l2 * s[1].sin(), -p.l1 * s[0].cos() - p.l2 * s[1].cos())
}

/// `ż = z(γ₀ + iω₀ + (a + ib)|z|²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfParams {
    pub gamma0: f64,
    pub omega0: f64,
    pub a: f64,
    pub b: f64,
}

impl HopfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0) {
            return Err(Error::Input(format!("omega0 must be positive, got {}", self.omega0)));
        }
        Ok(())
    }

    /// Radius of the limit cycle, if one exists.
    pub fn limit_cycle_radius(&self) -> Option<f64> {
        let r2 = -self.gamma0 / self.a;
        (r2 > 0.0 && r2.is_finite()).then(|| r2.sqrt())
    }
}

/// Realified Hopf field at `(Re z, Im z)`.
pub fn hopf_derivatives(x: &[f64], p: &HopfParams) -> [f64; 2] {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let re = p.gamma0 + p.a * r2;
    let im = p.omega0 + p.b * r2;
    [re * x[0] - im * x[1], im * x[0] + re * x[1]]
}

/// Fixed-step RK4 of `ẋ = field(x)`; columns are states. Non-finite states
/// raise a divergence error.
pub fn integrate<F>(field: F, x0: &[f64], dt: f64, steps: usize) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    ode::integrate(|x: &DVector<f64>| DVector::from_vec(field(x.as_slice())), &DVector::from_column_slice(x0), dt, steps, None)
}

/// Normal-form coefficient sets reported for physical experiments, in the
/// polar form `ρ̇/ρ = γ(ρ)`, `θ̇ = ω(ρ)` (coefficients by powers of `ρ²`).
pub mod fixtures {
    use super::*;

    pub fn double_pendulum() -> PolarPair {
        PolarPair::new(vec![-0.09352, 0.8130, -2.256], vec![6.366, -0.4733, -1.953])
    }

    pub fn sloshing() -> PolarPair {
        PolarPair::new(vec![-0.062, -0.029], vec![7.80, -0.60])
    }

    pub fn flutter() -> PolarPair {
        PolarPair::new(vec![0.4844, -1.679, -8.516, 27.28], vec![15.90, -34.64, 377.1, -1213.0])
    }

    pub fn shimmy() -> PolarPair {
        PolarPair::new(vec![-0.8583, 12.11, -37.71], vec![15.17, -9.155, 7.398])
    }

    /// `(row, exponent of ξ₁, exponent of ξ₂, coefficient)`.
    const FLAG_TERMS: &[(usize, u32, u32, f64)] = &[
        (0, 0, 1, -2.325),
        (0, 0, 2, 0.3512),
        (0, 0, 3, 1.132),
        (0, 0, 4, -1.479),
        (0, 0, 5, -1.806),
        (0, 0, 6, 1.806),
        (0, 0, 7, 1.742),
        (0, 0, 8, -0.6762),
        (0, 0, 9, -0.5968),
        (0, 1, 0, 0.09106),
        (0, 1, 1, 0.128),
        (0, 1, 2, -0.8056),
        (0, 1, 3, -0.5981),
        (0, 1, 4, 5.407),
        (0, 1, 5, 0.3837),
        (0, 1, 6, -8.837),
        (0, 1, 7, 0.1211),
        (0, 1, 8, 4.119),
        (0, 2, 0, 0.2219),
        (0, 2, 1, -0.502),
        (0, 2, 2, -1.619),
        (0, 2, 3, 0.5419),
        (0, 2, 4, 3.104),
        (0, 2, 5, 0.7389),
        (0, 2, 6, -1.701),
        (0, 2, 7, -0.608),
        (0, 3, 0, 0.6853),
        (0, 3, 1, 0.3954),
        (0, 3, 2, -3.645),
        (0, 3, 3, 0.1459),
        (0, 3, 4, 2.215),
        (0, 3, 5, -0.3787),
        (0, 3, 6, 0.6783),
        (0, 4, 0, -0.539),
        (0, 4, 1, 3.49),
        (0, 4, 2, 1.664),
        (0, 4, 3, -5.234),
        (0, 4, 4, -1.183),
        (0, 4, 5, 1.699),
        (0, 5, 0, -1.499),
        (0, 5, 1, -0.8057),
        (0, 5, 2, 5.23),
        (0, 5, 3, 0.4301),
        (0, 5, 4, -2.93),
        (0, 6, 0, 0.4203),
        (0, 6, 1, -3.089),
        (0, 6, 2, -0.5586),
        (0, 6, 3, 2.61),
        (0, 7, 0, 0.9821),
        (0, 7, 1, 0.2868),
        (0, 7, 2, -1.658),
        (0, 8, 0, -0.1005),
        (0, 8, 1, 0.7641),
        (0, 9, 0, -0.2007),
        (1, 0, 1, -0.2462),
        (1, 0, 2, 0.6229),
        (1, 0, 3, 5.107),
        (1, 0, 4, -1.724),
        (1, 0, 5, -16.8),
        (1, 0, 6, 1.803),
        (1, 0, 7, 19.39),
        (1, 0, 8, -0.6994),
        (1, 0, 9, -7.426),
        (1, 1, 0, -2.741),
        (1, 1, 1, 1.084),
        (1, 1, 2, 11.86),
        (1, 1, 3, -5.412),
        (1, 1, 4, -10.74),
        (1, 1, 5, 6.211),
        (1, 1, 6, -1.404),
        (1, 1, 7, -1.81),
        (1, 1, 8, 3.985),
        (1, 2, 0, 0.1505),
        (1, 2, 1, 0.3348),
        (1, 2, 2, -4.276),
        (1, 2, 3, -8.45),
        (1, 2, 4, 8.499),
        (1, 2, 5, 16.54),
        (1, 2, 6, -4.433),
        (1, 2, 7, -8.455),
        (1, 3, 0, 8.555),
        (1, 3, 1, -0.09146),
        (1, 3, 2, -43.53),
        (1, 3, 3, 4.224),
        (1, 3, 4, 58.71),
        (1, 3, 5, -3.911),
        (1, 3, 6, -23.09),
        (1, 4, 0, -0.639),
        (1, 4, 1, 7.441),
        (1, 4, 2, 4.639),
        (1, 4, 3, -10.29),
        (1, 4, 4, -4.067),
        (1, 4, 5, 2.415),
        (1, 5, 0, -10.49),
        (1, 5, 1, -1.479),
        (1, 5, 2, 39.89),
        (1, 5, 3, 0.04915),
        (1, 5, 4, -28.55),
        (1, 6, 0, 0.6601),
        (1, 6, 1, -8.282),
        (1, 6, 2, -1.522),
        (1, 6, 3, 7.384),
        (1, 7, 0, 5.691),
        (1, 7, 1, 0.61),
        (1, 7, 2, -10.51),
        (1, 8, 0, -0.1828),
        (1, 8, 1, 2.22),
        (1, 9, 0, -1.073),
    ];

    /// Ninth-order reduced field identified for an inverted flag (a saddle at
    /// the origin between two stable flapping states).
    pub fn flag_field() -> ReducedModel {
        let basis = crate::poly::MultiIndexBasis::new(2, 1, 9).expect("valid basis");
        let mut c = DMatrix::zeros(2, basis.len());
        for &(row, e1, e2, v) in FLAG_TERMS {
            c[(row, basis.index_of(&[e1, e2]).expect("monomial in basis"))] = v;
        }
        ReducedModel::new(c, 9).expect("hyperbolic linear part")
    }
}

/// Marker pose in canvas pixels; `theta` in degrees (+x toward +y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Canvas fill behind the marker.
#[derive(Debug, Clone, PartialEq)]
pub enum Background {
    Constant(f64),
    Image(Frame),
}

/// Round marker of odd diameter `size` with a smooth, rotationally
/// asymmetric intensity pattern; the anchor is the center pixel.
pub fn default_marker(size: usize, channels: usize) -> Result<Template> {
    if size < 5 || size.is_multiple_of(2) {
        return Err(Error::Input(format!("marker size must be odd and at least 5, got {size}")));
    }
    let c = (size as f64 - 1.0) / 2.0;
    let r = c;
    let sigma = 0.3 * r;
    let blob = |x: f64, y: f64, cx: f64, cy: f64, s: f64| (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp();
    let frame = Frame::from_fn(size, size, channels, |x, y, ch| {
        let (fx, fy) = (x as f64, y as f64);
        let v = 0.2 + 0.7 * blob(fx, fy, c + 0.45 * r, c, sigma) + 0.35 * blob(fx, fy, c - 0.3 * r, c - 0.45 * r, 0.6 * sigma);
        (v + 0.05 * ch as f64).min(1.0)
    })?;
    let mask = (0..size * size)
        .map(|i| {
            let (x, y) = ((i % size) as f64, (i / size) as f64);
            (x - c).powi(2) + (y - c).powi(2) <= r * r
        })
        .collect();
    Template::new(frame.with_mask(mask)?)
}

/// Renders one frame per pose: the marker rotated by `theta` (same sampling
/// as the tracker) is composited over the background with its anchor at the
/// rounded pose. Returns the frames and the rounded ground-truth poses.
pub fn render_marker_video(
    poses: &[Pose],
    marker: &Template,
    canvas: (usize, usize),
    background: &Background,
    frame_rate: f64,
    exec: Exec,
) -> Result<(FrameSequence, Vec<Pose>)> {
    let (cw, ch) = canvas;
    let channels = marker.pixels().channels();
    let base = match background {
        Background::Constant(v) => Frame::filled(cw, ch, channels, *v)?,
        Background::Image(f) => {
            if (f.width(), f.height(), f.channels()) != (cw, ch, channels) {
                return Err(Error::Shape(format!(
                    "background is {}x{}x{}, canvas is {cw}x{ch}x{channels}",
                    f.width(),
                    f.height(),
                    f.channels()
                )));
            }
            f.clone().without_mask()
        }
    };
    let rendered = exec.map(poses.len(), |i| -> Result<(Frame, Pose)> {
        let pose = poses[i];
        let rot = rotate_template(marker, pose.theta)?;
        let (ax, ay) = rot.anchor();
        let x0 = (pose.x - ax).round();
        let y0 = (pose.y - ay).round();
        let (mw, mh) = (rot.width() as f64, rot.height() as f64);
        if !(x0 >= 0.0 && y0 >= 0.0 && x0 + mw <= cw as f64 && y0 + mh <= ch as f64) {
            return Err(Error::Bounds(format!(
                "frame {i}: marker at ({}, {}) does not fit the {cw}x{ch} canvas",
                pose.x, pose.y
            )));
        }
        let (x0, y0) = (x0 as usize, y0 as usize);
        let mut data = base.data().to_vec();
        let px = rot.pixels();
        for y in 0..rot.height() {
            for x in 0..rot.width() {
                if px.is_valid(x, y) {
                    let o = ((y0 + y) * cw + x0 + x) * channels;
                    data[o..o + channels].copy_from_slice(px.pixel(x, y));
                }
            }
        }
        let truth = Pose { x: x0 as f64 + ax, y: y0 as f64 + ay, theta: pose.theta };
        Ok((Frame::new(cw, ch, channels, data)?, truth))
    });
    let mut frames = Vec::with_capacity(poses.len());
    let mut truth = Vec::with_capacity(poses.len());
    for r in rendered {
        let (f, t) = r?;
        frames.push(f);
        truth.push(t);
    }
    Ok((FrameSequence::new(frames, frame_rate)?, truth))
}

/// Ground-truth poses in the tracker's CSV schema (score 0).
pub fn poses_to_series(poses: &[Pose], frame_rate: f64) -> TrackSeries {
    let mut s = TrackSeries::default();
    for (i, p) in poses.iter().enumerate() {
        s.push(i as f64 / frame_rate, p.x, p.y, p.theta, 0.0);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduced_dynamics::{to_polar, NormalFormModel};
    use crate::tracker::{nssd_map, track, SearchConfig};
    use approx::assert_relative_eq;

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let p = DoublePendulumParams::default();
        p.validate().unwrap();
        assert_eq!(dp_derivatives(&[0.0; 4], &p), [0.0; 4]);
    }

    #[test]
    fn inertia_reduces_to_thin_rod() {
        // vanishing width: l²/12 per unit mass
        assert_relative_eq!(rod_inertia(2.0, 1.0, 1e-9), 2.0 / 12.0, max_relative = 1e-6);
        // l = 0 leaves only the end caps: m w²/16
        assert_relative_eq!(rod_inertia(1.0, 0.0, 0.2), 0.2 * 0.2 / 16.0, max_relative = 1e-12);
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let p = DoublePendulumParams::default();
        let j = p.linearization();
        let h = 1e-6;
        for k in 0..4 {
            let mut sp = [0.0; 4];
            let mut sm = [0.0; 4];
            sp[k] = h;
            sm[k] = -h;
            let (fp, fm) = (dp_derivatives(&sp, &p), dp_derivatives(&sm, &p));
            for i in 0..4 {
                assert!(((fp[i] - fm[i]) / (2.0 * h) - j[(i, k)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn undamped_frequencies_solve_generalized_eigenproblem() {
        let p = DoublePendulumParams { beta1: 0.0, beta2: 0.0, ..Default::default() };
        let k = p.constants();
        // det(K − ω² M) = 0 with M = [[2A, C], [C, 2B]], K = diag(D, E)
        let qa = 4.0 * k.a * k.b - k.c * k.c;
        let qb = -(2.0 * k.a * k.e + 2.0 * k.b * k.d);
        let qc = k.d * k.e;
        let disc = (qb * qb - 4.0 * qa * qc).sqrt();
        let mut w2 = [(-qb - disc) / (2.0 * qa), (-qb + disc) / (2.0 * qa)];
        w2.sort_by(f64::total_cmp);
        let mut im: Vec<f64> = p.linearization().complex_eigenvalues().iter().map(|l| l.im).filter(|&v| v > 0.0).collect();
        im.sort_by(f64::total_cmp);
        assert_relative_eq!(im[0], w2[0].sqrt(), max_relative = 1e-10);
        assert_relative_eq!(im[1], w2[1].sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn damped_energy_never_increases() {
        let p = DoublePendulumParams::default();
        let traj = integrate(|s| dp_derivatives(s, &p).to_vec(), &[0.6, -0.3, 0.0, 0.0], 1e-4, 20_000).unwrap();
        let e: Vec<f64> = traj.column_iter().map(|c| dp_energy(c.as_slice(), &p)).collect();
        assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-13));
        assert!(e[e.len() - 1] < e[0]);
    }

    #[test]
    fn undamped_energy_is_conserved() {
        let p = DoublePendulumParams { beta1: 0.0, beta2: 0.0, ..Default::default() };
        // ten periods of the slow mode
        let steps = (10.0 * 2.0 * PI / 6.3 / 1e-4) as usize;
        let traj = integrate(|s| dp_derivatives(s, &p).to_vec(), &[0.4, 0.2, 0.0, 0.0], 1e-4, steps).unwrap();
        let e0 = dp_energy(traj.column(0).as_slice(), &p);
        let drift = traj.column_iter().map(|c| (dp_energy(c.as_slice(), &p) - e0).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-8, "{drift}");
    }

    #[test]
    fn tip_positions() {
        let p = DoublePendulumParams::default();
        let (x, y) = dp_tip_position(&[0.0, 0.0, 0.0, 0.0], &p);
        assert_eq!((x, y), (0.0, -(p.l1 + p.l2)));
        let (x, y) = dp_tip_position(&[PI / 2.0, PI / 2.0, 0.0, 0.0], &p);
        assert_relative_eq!(x, p.l1 + p.l2);
        assert!(y.abs() < 1e-16);
        let (x, y) = dp_tip_position(&[PI / 6.0, PI / 3.0, 0.0, 0.0], &p);
        assert_relative_eq!(x, 0.2 * 0.5 + 0.18 * 3f64.sqrt() / 2.0, max_relative = 1e-15);
        assert_relative_eq!(y, -0.2 * 3f64.sqrt() / 2.0 - 0.18 * 0.5, max_relative = 1e-15);
    }

    #[test]
    fn hopf_limit_cycle() {
        let p = HopfParams { gamma0: 1.0, omega0: 2.0, a: -1.0, b: 0.0 };
        assert_eq!(hopf_derivatives(&[0.0, 0.0], &p), [0.0, 0.0]);
        let f = hopf_derivatives(&[1.0, 0.0], &p);
        assert!(f[0].abs() < 1e-15);
        assert_eq!(p.limit_cycle_radius(), Some(1.0));
        let traj = integrate(|x| hopf_derivatives(x, &p).to_vec(), &[0.1, 0.0], 1e-3, 20_000).unwrap();
        let end = traj.column(20_000).norm();
        assert!((end - 1.0).abs() < 1e-6);
    }

    #[test]
    fn integration_is_deterministic_and_reports_blow_up() {
        let f = |x: &[f64]| vec![x[0] * x[0]];
        assert!(matches!(integrate(f, &[1.0], 1e-3, 2000), Err(Error::Divergence { .. })));
        let g = |x: &[f64]| vec![-x[0]];
        assert_eq!(integrate(g, &[1.0], 0.01, 0).unwrap().ncols(), 1);
        assert_eq!(integrate(g, &[1.0], 0.01, 50).unwrap(), integrate(g, &[1.0], 0.01, 50).unwrap());
    }

    #[test]
    fn fixtures_have_reported_structure() {
        let z = fixtures::shimmy().gamma_zeros(1.0);
        assert_eq!(z.len(), 2);
        assert!((z[0] - 0.325).abs() < 2e-3 && (z[1] - 0.464).abs() < 2e-3);
        let flag = fixtures::flag_field();
        assert_eq!(flag.basis.len(), 54);
        let lin = flag.linear();
        assert_relative_eq!(lin[(0, 0)], 0.09106);
        assert_relative_eq!(lin[(1, 0)], -2.741);
        assert!(lin.determinant() < 0.0);
        let eig = lin.complex_eigenvalues();
        assert!(eig.iter().all(|l| l.im == 0.0) && eig[0].re * eig[1].re < 0.0);
        let slosh = fixtures::sloshing();
        let nf = NormalFormModel::from_polar(&slosh).unwrap();
        assert_eq!(to_polar(&nf).unwrap().pairs[0], PolarPair { index: 0, ..slosh });
    }

    #[test]
    fn constant_track_renders_identical_frames() {
        let marker = default_marker(11, 1).unwrap();
        let poses = vec![Pose { x: 20.0, y: 15.0, theta: 0.0 }; 3];
        let (seq, truth) = render_marker_video(&poses, &marker, (40, 30), &Background::Constant(0.05), 30.0, Exec::Sequential).unwrap();
        assert!(seq.frames().windows(2).all(|w| w[0] == w[1]));
        assert_eq!(truth[0], poses[0]);
    }

    #[test]
    fn translation_changes_only_the_two_footprints() {
        let marker = default_marker(9, 3).unwrap();
        let poses = [Pose { x: 10.0, y: 10.0, theta: 0.0 }, Pose { x: 15.0, y: 10.0, theta: 0.0 }];
        let (seq, _) = render_marker_video(&poses, &marker, (32, 24), &Background::Constant(0.0), 30.0, Exec::Parallel).unwrap();
        let (a, b) = (&seq.frames()[0], &seq.frames()[1]);
        let inside = |x: usize, y: usize, cx: usize| {
            x + 4 >= cx && x <= cx + 4 && y + 4 >= 10 && y <= 14 && marker.pixels().is_valid(x + 4 - cx, y + 4 - 10)
        };
        let mut changed = 0;
        for y in 0..24 {
            for x in 0..32 {
                if a.pixel(x, y) != b.pixel(x, y) {
                    changed += 1;
                    assert!(inside(x, y, 10) || inside(x, y, 15), "pixel ({x}, {y})");
                }
            }
        }
        assert!(changed > 0);
    }

    #[test]
    fn out_of_canvas_names_the_frame() {
        let marker = default_marker(9, 1).unwrap();
        let poses = [Pose { x: 10.0, y: 10.0, theta: 0.0 }, Pose { x: 29.0, y: 10.0, theta: 0.0 }];
        match render_marker_video(&poses, &marker, (32, 24), &Background::Constant(0.0), 30.0, Exec::Sequential) {
            Err(Error::Bounds(m)) => assert!(m.starts_with("frame 1:"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rotated_renders_match_rotated_templates() {
        let marker = default_marker(15, 1).unwrap();
        let poses: Vec<Pose> = (0..10).map(|k| Pose { x: 30.0, y: 30.0, theta: 5.0 * k as f64 }).collect();
        let (seq, _) = render_marker_video(&poses, &marker, (60, 60), &Background::Constant(0.05), 30.0, Exec::Parallel).unwrap();
        for (f, pose) in seq.frames().iter().zip(&poses) {
            let t = rotate_template(&marker, pose.theta).unwrap();
            let map = nssd_map(&t, f, Exec::Sequential).unwrap();
            let (x, y, s) = map.argmin().unwrap();
            assert_eq!((x, y), (23, 23));
            assert!(s < 0.05, "{s}");
        }
    }

    #[test]
    fn tracker_recovers_rendered_track() {
        let marker = default_marker(15, 1).unwrap();
        let poses: Vec<Pose> = (0..30)
            .map(|k| {
                let t = k as f64 / 10.0;
                Pose { x: 40.0 + 12.0 * (2.0 * t).sin(), y: 35.0 + 4.0 * t, theta: 20.0 * (1.5 * t).sin() }
            })
            .collect();
        let (seq, truth) = render_marker_video(&poses, &marker, (80, 70), &Background::Constant(0.05), 10.0, Exec::Parallel).unwrap();
        let region = crate::media_io::Region::new(truth[0].x as usize - 7, truth[0].y as usize - 7, 15, 15);
        let tpl = Template::from_region(&seq.frames()[0], &region).unwrap();
        let out = track(&seq, &tpl, &region, &SearchConfig::default(), Exec::Parallel).unwrap();
        let sq: f64 = truth.iter().enumerate().map(|(i, p)| (out.xs[i] - p.x).powi(2) + (out.ys[i] - p.y).powi(2)).sum();
        assert!((sq / truth.len() as f64).sqrt() <= 1.0);
        for (i, p) in truth.iter().enumerate() {
            assert!((out.thetas[i] - p.theta).abs() <= 5.0, "frame {i}: {} vs {}", out.thetas[i], p.theta);
        }
    }
}
