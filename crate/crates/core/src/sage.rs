//! Radial "burning sage" transformation.
//!
//! For data spread uniformly inside a p-ball of radius `R`, the radius of a
//! 2-D projection follows the CDF
//!
//! ```text
//! v2(r; p, R) = 1 - (1 - (r/R)^2)^(p/2)
//! ```
//!
//! Feeding projected radii through `v2` and then through the inverse of the
//! planar CDF `R * sqrt(x)` redistributes points so that equal p-dimensional
//! volume lands on equal display area:
//!
//! ```text
//! r' = R * sqrt(1 - (1 - (r/R)^2)^(p_eff/2))
//! ```
//!
//! `p_eff = gamma * p` is a continuous tuning knob; `R` doubles as a trim
//! radius. Canvas placement divides by the half-range `s` and multiplies by
//! [`CANVAS_FILL`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;

/// Fraction of the `[-1, 1]` canvas used when `half_range == R`.
pub const CANVAS_FILL: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SageError {
    #[error("radius {r} outside [0, {max}]")]
    RadiusOutOfRange { r: f64, max: f64 },
    #[error("fraction {0} outside [0, 1]")]
    FractionOutOfRange(f64),
    #[error("{field} must be positive and finite, got {value}")]
    NonPositive { field: &'static str, value: f64 },
}

fn check_positive(field: &'static str, value: f64) -> Result<f64, SageError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(SageError::NonPositive { field, value })
    }
}

fn check_radius(r: f64, radius: f64) -> Result<(), SageError> {
    check_positive("R", radius)?;
    if (0.0..=radius).contains(&r) {
        Ok(())
    } else {
        Err(SageError::RadiusOutOfRange { r, max: radius })
    }
}

/// `1 - (1 - u^2)^(p/2)` evaluated as `-expm1((p/2) * ln_1p(-u^2))`.
fn projected_cdf_unit(u: f64, p: f64) -> f64 {
    -((p / 2.0) * (-(u * u)).ln_1p()).exp_m1()
}

/// Fraction of a p-ball's volume whose 2-D projection falls inside a centred
/// disc of radius `r`. This is the radial CDF of projected uniform-ball data.
pub fn relative_projected_volume(r: f64, p: f64, radius: f64) -> Result<f64, SageError> {
    check_positive("p", p)?;
    check_radius(r, radius)?;
    Ok(projected_cdf_unit(r / radius, p))
}

/// Fraction of a p-ball's volume inside radius `r`: `(r/R)^p`.
pub fn relative_p_volume(r: f64, p: f64, radius: f64) -> Result<f64, SageError> {
    check_positive("p", p)?;
    check_radius(r, radius)?;
    Ok((r / radius).powf(p))
}

/// Inverse of the planar radial CDF `(r/R)^2`.
pub fn inverse_v2_2d(x: f64, radius: f64) -> Result<f64, SageError> {
    check_positive("R", radius)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(SageError::FractionOutOfRange(x));
    }
    Ok(radius * x.sqrt())
}

/// Maps a projected radius in `[0, R]` to its area-uniformised radius.
pub fn radial_transform(r: f64, p_eff: f64, radius: f64) -> Result<f64, SageError> {
    check_positive("p_eff", p_eff)?;
    check_radius(r, radius)?;
    Ok(unchecked_transform(r, p_eff, radius))
}

#[inline]
fn unchecked_transform(r: f64, p_eff: f64, radius: f64) -> f64 {
    radius * projected_cdf_unit(r / radius, p_eff).sqrt()
}

pub fn trim_radius(r: f64, radius: f64) -> f64 {
    r.min(radius)
}

/// How the canvas half-range is determined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfRange {
    /// Track the trim radius.
    FollowRadius,
    Explicit(f64),
}

/// Tuning state of the transformation. Immutable; patch with
/// [`SageParams::patched`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SageParams {
    gamma: f64,
    radius: f64,
    half_range: HalfRange,
    p_input: usize,
}

impl SageParams {
    /// Defaults: `gamma = 1`, `half_range` follows `radius`.
    pub fn new(p_input: usize, radius: f64) -> Result<Self, SageError> {
        Self::with(p_input, 1.0, radius, HalfRange::FollowRadius)
    }

    /// Defaults derived from a (centred) dataset: `R` is its maximum row norm.
    pub fn for_dataset(d: &Dataset) -> Result<Self, SageError> {
        Self::new(d.p(), default_radius(d))
    }

    pub fn with(
        p_input: usize,
        gamma: f64,
        radius: f64,
        half_range: HalfRange,
    ) -> Result<Self, SageError> {
        if p_input == 0 {
            return Err(SageError::NonPositive { field: "p", value: 0.0 });
        }
        check_positive("gamma", gamma)?;
        check_positive("R", radius)?;
        if let HalfRange::Explicit(s) = half_range {
            check_positive("half_range", s)?;
        }
        Ok(SageParams { gamma, radius, half_range, p_input })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn half_range(&self) -> f64 {
        match self.half_range {
            HalfRange::FollowRadius => self.radius,
            HalfRange::Explicit(s) => s,
        }
    }

    pub fn half_range_mode(&self) -> HalfRange {
        self.half_range
    }

    pub fn p_input(&self) -> usize {
        self.p_input
    }

    pub fn effective_dim(&self) -> f64 {
        self.gamma * self.p_input as f64
    }

    /// True when `p_eff < 2`: the transform then pulls points toward the
    /// centre instead of pushing them out.
    pub fn is_inverted(&self) -> bool {
        self.effective_dim() < 2.0
    }

    /// Applies a partial update. A half-range that follows `R` keeps
    /// following it; an explicit one is only replaced by an explicit patch.
    pub fn patched(&self, patch: &ParamPatch) -> Result<Self, SageError> {
        let gamma = match patch.gamma {
            Some(g) => check_positive("gamma", g)?,
            None => self.gamma,
        };
        let radius = match patch.radius {
            Some(r) => check_positive("R", r)?,
            None => self.radius,
        };
        let half_range = match patch.half_range {
            Some(s) => HalfRange::Explicit(check_positive("half_range", s)?),
            None => self.half_range,
        };
        Ok(SageParams { gamma, radius, half_range, p_input: self.p_input })
    }
}

/// Partial parameter update as received from an interactive client.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamPatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_range: Option<f64>,
}

pub fn effective_dim(params: &SageParams) -> f64 {
    let p_eff = params.effective_dim();
    if p_eff < 2.0 {
        log::warn!("effective dimension {p_eff} < 2: the transformation is inverted");
    }
    p_eff
}

/// Validated live update, see [`SageParams::patched`].
pub fn apply_params_live(current: &SageParams, patch: &ParamPatch) -> Result<SageParams, SageError> {
    current.patched(patch)
}

/// Maximum Euclidean row norm.
pub fn default_radius(d: &Dataset) -> f64 {
    d.values()
        .row_iter()
        .map(|row| row.norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    pub r: f64,
    pub theta: f64,
}

impl PolarPoint {
    pub fn from_cartesian(x: f64, y: f64) -> Self {
        PolarPoint { r: x.hypot(y), theta: y.atan2(x) }
    }

    pub fn to_cartesian(self) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [self.r * c, self.r * s]
    }
}

fn column_means(y: &DMatrix<f64>) -> [f64; 2] {
    let n = y.nrows().max(1) as f64;
    [y.column(0).sum() / n, y.column(1).sum() / n]
}

/// Centres `y` (n×2), trims and transforms each radius, and returns the
/// transformed radius as a fraction of `R` together with the original angle.
/// Points at the centroid come back as `r = 0, theta = 0`.
fn normalized_polar(y: &DMatrix<f64>, params: &SageParams) -> Vec<PolarPoint> {
    assert_eq!(y.ncols(), 2, "projected matrix must have two columns");
    let [mx, my] = column_means(y);
    let p_eff = params.effective_dim();
    let radius = params.radius;
    y.row_iter()
        .map(|row| {
            let polar = PolarPoint::from_cartesian(row[0] - mx, row[1] - my);
            if polar.r == 0.0 {
                return PolarPoint { r: 0.0, theta: 0.0 };
            }
            let u = trim_radius(polar.r, radius) / radius;
            let unit = projected_cdf_unit(u, p_eff).sqrt();
            PolarPoint { r: unit.min(1.0), theta: polar.theta }
        })
        .collect()
}

/// Centres `y` (n×2) and applies trim + radial transform, without canvas
/// scaling. Returned radii lie in `[0, R]`.
pub fn sage_transform(y: &DMatrix<f64>, params: &SageParams) -> Vec<[f64; 2]> {
    let radius = params.radius;
    normalized_polar(y, params)
        .into_iter()
        .map(|p| PolarPoint { r: radius * p.r, theta: p.theta }.to_cartesian())
        .collect()
}

/// Full display transform: centre, trim, transform, scale by `0.9 / s`.
pub fn apply_sage(y: &DMatrix<f64>, params: &SageParams) -> Vec<[f64; 2]> {
    let ratio = params.radius / params.half_range();
    normalized_polar(y, params)
        .into_iter()
        .map(|p| PolarPoint { r: CANVAS_FILL * p.r * ratio, theta: p.theta }.to_cartesian())
        .collect()
}
