//! Grand tour path: random target planes joined by geodesic interpolation.
//!
//! Between a start basis `a` and a target basis `b` the cross product
//! `aᵀb = Va Λ Vbᵀ` gives the principal angles `θᵢ = acos λᵢ`. In the
//! rotated start basis `a Va` each column turns toward the matching column of
//! `b Vb` inside its own 2-plane, and these planes are mutually orthogonal,
//! so consecutive frames differ by principal angles `θᵢ δt` exactly.
//! Interpolated frames are rotated back by `Vaᵀ`, which keeps the displayed
//! basis continuous from one segment to the next.

use nalgebra::{DMatrix, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Orthonormal p×2 projection basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    basis: DMatrix<f64>,
}

impl Frame {
    /// Wraps `basis` after checking it is p×2 (p ≥ 2) with orthonormal
    /// columns to within `1e-9`.
    pub fn new(basis: DMatrix<f64>) -> Option<Self> {
        let f = Frame { basis };
        (f.basis.ncols() == 2 && f.basis.nrows() >= 2 && f.orthonormality_error() < 1e-9).then_some(f)
    }

    /// Frame spanned by coordinate axes `i` and `j`.
    pub fn axes(p: usize, i: usize, j: usize) -> Self {
        assert!(i != j && i < p && j < p);
        let mut basis = DMatrix::zeros(p, 2);
        basis[(i, 0)] = 1.0;
        basis[(j, 1)] = 1.0;
        Frame { basis }
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn p(&self) -> usize {
        self.basis.nrows()
    }

    /// `max |AᵀA − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.basis.transpose() * &self.basis;
        (g - DMatrix::<f64>::identity(2, 2)).amax()
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// `max |P_self − P_other|` over the orthogonal projectors.
    pub fn projector_distance(&self, other: &Frame) -> f64 {
        (self.projector() - other.projector()).amax()
    }

    /// Principal angles between the two planes, ascending.
    pub fn principal_angles(&self, other: &Frame) -> [f64; 2] {
        let m = cross(self, other);
        let sv = m.singular_values();
        let mut a = [clamped_acos(sv[0]), clamped_acos(sv[1])];
        a.sort_by(f64::total_cmp);
        a
    }

    /// Largest principal angle to `other`.
    pub fn plane_angle(&self, other: &Frame) -> f64 {
        self.principal_angles(other)[1]
    }

    pub fn into_basis(self) -> DMatrix<f64> {
        self.basis
    }
}

fn cross(a: &Frame, b: &Frame) -> Matrix2<f64> {
    let m = a.basis.transpose() * &b.basis;
    Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

fn clamped_acos(x: f64) -> f64 {
    x.clamp(-1.0, 1.0).acos()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Two-pass Gram–Schmidt of two vectors; `None` when they are (numerically)
/// collinear or zero.
fn orthonormalize_pair(u: &[f64], v: &[f64]) -> Option<DMatrix<f64>> {
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return None;
    }
    if (dot(u, v) / (nu * nv)).abs() > 1.0 - 1e-12 {
        return None;
    }
    let e1: Vec<f64> = u.iter().map(|x| x / nu).collect();
    let mut e2: Vec<f64> = v.to_vec();
    for _ in 0..2 {
        let c = dot(&e1, &e2);
        e2.iter_mut().zip(&e1).for_each(|(y, x)| *y -= c * x);
    }
    let n2 = norm(&e2);
    e2.iter_mut().for_each(|y| *y /= n2);
    let p = u.len();
    Some(DMatrix::from_fn(p, 2, |i, j| if j == 0 { e1[i] } else { e2[i] }))
}

/// Uniformly distributed 2-plane in p-space, drawn from `rng`.
pub fn random_frame_from<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Frame {
    assert!(p >= 2, "frames need p >= 2");
    loop {
        let u: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let v: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(basis) = orthonormalize_pair(&u, &v) {
            return Frame { basis };
        }
    }
}

pub fn random_frame(p: usize, seed: u64) -> Frame {
    random_frame_from(p, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Precomputed geodesic between two planes.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    start: Frame,
    end: Frame,
    angles: [f64; 2],
    /// `a · Va`
    from: DMatrix<f64>,
    /// Unit directions orthogonal to `from`, or zero where `θᵢ = 0`.
    toward: DMatrix<f64>,
    /// `Vaᵀ`, maps interpolated columns back to the start parameterisation.
    align: Matrix2<f64>,
}

/// Plans the geodesic from `a` to the plane of `b`.
pub fn plan_geodesic(a: &Frame, b: &Frame) -> GeodesicPath {
    assert_eq!(a.p(), b.p(), "frames live in different dimensions");
    let svd = cross(a, b).svd(true, true);
    let va = svd.u.expect("svd computes u");
    let vb = svd.v_t.expect("svd computes v_t").transpose();
    let from = &a.basis * dynamic(&va);
    let target = &b.basis * dynamic(&vb);
    let mut toward = DMatrix::zeros(a.p(), 2);
    let mut angles = [0.0; 2];
    for i in 0..2 {
        angles[i] = clamped_acos(svd.singular_values[i]);
        let mut w = target.column(i).into_owned();
        // two passes against both start columns
        for _ in 0..2 {
            for k in 0..2 {
                let c = from.column(k).dot(&w);
                w.axpy(-c, &from.column(k), 1.0);
            }
        }
        let len = w.norm();
        if len > 1e-12 {
            toward.set_column(i, &(w / len));
        }
    }
    GeodesicPath {
        start: a.clone(),
        end: b.clone(),
        angles,
        from,
        toward,
        align: va.transpose(),
    }
}

fn dynamic(m: &Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_iterator(2, 2, m.iter().copied())
}

impl GeodesicPath {
    pub fn start(&self) -> &Frame {
        &self.start
    }

    pub fn end(&self) -> &Frame {
        &self.end
    }

    pub fn principal_angles(&self) -> [f64; 2] {
        self.angles
    }

    /// `sqrt(θ₁² + θ₂²)`.
    pub fn length(&self) -> f64 {
        self.angles[0].hypot(self.angles[1])
    }

    /// In-plane rotation `Vaᵀ` applied to every interpolated frame.
    pub fn within_plane_rotation(&self) -> Matrix2<f64> {
        self.align
    }

    pub fn interpolate(&self, t: f64) -> Frame {
        assert!((0.0..=1.0).contains(&t), "t = {t} outside [0, 1]");
        let mut moving = DMatrix::zeros(self.from.nrows(), 2);
        for i in 0..2 {
            let (s, c) = (t * self.angles[i]).sin_cos();
            let col = self.from.column(i) * c + self.toward.column(i) * s;
            moving.set_column(i, &col);
        }
        Frame { basis: moving * dynamic(&self.align) }
    }
}

pub fn interpolate(path: &GeodesicPath, t: f64) -> Frame {
    path.interpolate(t)
}

pub const DEFAULT_STEP_ANGLE: f64 = 0.05;

/// Planes closer than this in every principal angle are redrawn.
const MIN_TARGET_ANGLE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
    pub step_angle: f64,
    pub seed: u64,
    /// Number of targets to visit; unbounded when `None`.
    pub max_targets: Option<usize>,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig { step_angle: DEFAULT_STEP_ANGLE, seed: 0, max_targets: None }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.step_angle > 0.0 && self.step_angle < std::f64::consts::FRAC_PI_2 {
            Ok(())
        } else {
            Err(format!("step angle {} must lie in (0, pi/2)", self.step_angle))
        }
    }
}

/// Lazy, deterministic stream of tour frames. The first frame is a random
/// start; each segment then contributes `ceil(length / step_angle)` frames
/// ending on (a basis of) the target plane.
#[derive(Debug, Clone)]
pub struct FrameStream {
    rng: ChaCha8Rng,
    step_angle: f64,
    targets_left: Option<usize>,
    current: Frame,
    segment: Option<(GeodesicPath, usize, usize)>,
    emitted_start: bool,
    arrived: Option<Frame>,
}

pub fn frame_stream(p: usize, cfg: PathConfig) -> FrameStream {
    cfg.validate().expect("invalid path config");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let current = random_frame_from(p, &mut rng);
    FrameStream {
        rng,
        step_angle: cfg.step_angle,
        targets_left: cfg.max_targets,
        current,
        segment: None,
        emitted_start: false,
        arrived: None,
    }
}

impl FrameStream {
    /// Target plane reached by the most recently emitted frame, if that
    /// frame closed a segment.
    pub fn arrived_at(&self) -> Option<&Frame> {
        self.arrived.as_ref()
    }

    /// Replaces the step size for segments planned from now on and for the
    /// remainder of the current one.
    pub fn set_step_angle(&mut self, step_angle: f64) {
        assert!(step_angle > 0.0 && step_angle < std::f64::consts::FRAC_PI_2);
        self.step_angle = step_angle;
        if let Some((path, _, _)) = self.segment.take() {
            // re-plan from the current frame toward the same target plane
            let path = plan_geodesic(&self.current, path.end());
            let steps = self.segment_steps(&path);
            self.segment = Some((path, 0, steps));
        }
    }

    fn segment_steps(&self, path: &GeodesicPath) -> usize {
        ((path.length() / self.step_angle).ceil() as usize).max(1)
    }

    fn next_segment(&mut self) -> Option<(GeodesicPath, usize, usize)> {
        if self.targets_left == Some(0) {
            return None;
        }
        let p = self.current.p();
        let path = loop {
            let target = random_frame_from(p, &mut self.rng);
            let path = plan_geodesic(&self.current, &target);
            if path.angles.iter().any(|&a| a >= MIN_TARGET_ANGLE) {
                break path;
            }
        };
        if let Some(left) = self.targets_left.as_mut() {
            *left -= 1;
        }
        let steps = self.segment_steps(&path);
        Some((path, 0, steps))
    }
}

impl Iterator for FrameStream {
    type Item = Frame;

    fn next(&mut self) -> Option<Frame> {
        self.arrived = None;
        if !self.emitted_start {
            self.emitted_start = true;
            return Some(self.current.clone());
        }
        let (path, done, steps) = match self.segment.take() {
            Some(seg) => seg,
            None => self.next_segment()?,
        };
        let done = done + 1;
        let frame = path.interpolate(done as f64 / steps as f64);
        self.current = frame.clone();
        if done < steps {
            self.segment = Some((path, done, steps));
        } else {
            self.arrived = Some(path.end().clone());
        }
        Some(frame)
    }
}
