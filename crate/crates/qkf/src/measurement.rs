//! Generative measurement model and the centered/quadratic
//! pseudo-measurements consumed by the shape updates.

use nalgebra::{Matrix2, Matrix3x4, Vector2, Vector3, Vector4};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::FilterError;
use crate::metrics::matrix_sqrt_2x2;
use crate::state::{rot, KinematicState};

/// The point cloud observed at one time step. May be empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasurementSet {
    pub points: Vec<Vector2<f64>>,
}

impl MeasurementSet {
    pub fn new(points: Vec<Vector2<f64>>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean(&self) -> Option<Vector2<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum: Vector2<f64> = self.points.iter().sum();
        Some(sum / self.points.len() as f64)
    }
}

impl From<Vec<[f64; 2]>> for MeasurementSet {
    fn from(points: Vec<[f64; 2]>) -> Self {
        Self::new(points.into_iter().map(Vector2::from).collect())
    }
}

/// Where on the object measurement sources fall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceDistribution {
    UniformEllipse,
    UniformRectangle,
}

impl SourceDistribution {
    /// Variance of the multiplicative error term matching this source
    /// distribution's second moment.
    pub fn scaling_factor(self) -> f64 {
        match self {
            SourceDistribution::UniformEllipse => 0.25,
            SourceDistribution::UniformRectangle => 1.0 / 3.0,
        }
    }

    /// A point of the unit disc or unit square `[-1, 1]²`.
    fn sample_unit<R: Rng + ?Sized>(self, rng: &mut R) -> Vector2<f64> {
        match self {
            SourceDistribution::UniformEllipse => {
                let radius = rng.random::<f64>().sqrt();
                let phi = std::f64::consts::TAU * rng.random::<f64>();
                Vector2::new(radius * phi.cos(), radius * phi.sin())
            }
            SourceDistribution::UniformRectangle => Vector2::new(
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
            ),
        }
    }
}

/// True object state at one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub center: Vector2<f64>,
    pub velocity: Vector2<f64>,
    pub theta: f64,
    pub axes: Vector2<f64>,
}

impl GroundTruth {
    pub fn kinematics(&self) -> Vector4<f64> {
        Vector4::new(self.center.x, self.center.y, self.velocity.x, self.velocity.y)
    }
}

/// Draw a Poisson(`lambda`) number of noisy points from the object surface.
pub fn sample_measurements<R: Rng + ?Sized>(
    truth: &GroundTruth,
    lambda: f64,
    noise: &Matrix2<f64>,
    dist: SourceDistribution,
    rng: &mut R,
) -> MeasurementSet {
    let count: f64 = Poisson::new(lambda)
        .expect("Poisson rate must be positive and finite")
        .sample(rng);
    sample_fixed(truth, count as usize, noise, dist, rng)
}

/// Draw exactly `count` noisy points from the object surface.
pub fn sample_fixed<R: Rng + ?Sized>(
    truth: &GroundTruth,
    count: usize,
    noise: &Matrix2<f64>,
    dist: SourceDistribution,
    rng: &mut R,
) -> MeasurementSet {
    let extent = rot(truth.theta) * Matrix2::from_diagonal(&truth.axes);
    let noise_sqrt = matrix_sqrt_2x2(noise).unwrap_or_else(|_| Matrix2::zeros());
    let points = (0..count)
        .map(|_| {
            let source = truth.center + extent * dist.sample_unit(rng);
            let w = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            source + noise_sqrt * w
        })
        .collect();
    MeasurementSet { points }
}

/// Which centering rule produced a [`CenteredMeasurements`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenteringMode {
    /// Centered on the measurement mean.
    Batch,
    /// A single point centered on the predicted object center.
    Stream,
}

/// Zero-centered measurements `s` and the covariance `W` of one of them.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredMeasurements {
    pub points: Vec<Vector2<f64>>,
    pub cov: Matrix2<f64>,
    pub mode: CenteringMode,
}

/// Center measurements on their mean (more than one point) or on the
/// predicted center (exactly one point, with the center uncertainty folded
/// into `W`).
pub fn center_measurements(
    z: &MeasurementSet,
    predicted: &KinematicState,
    meas_noise: &Matrix2<f64>,
) -> Result<CenteredMeasurements, FilterError> {
    match z.points.as_slice() {
        [] => Err(FilterError::EmptyMeasurementSet),
        [single] => Ok(CenteredMeasurements {
            points: vec![single - predicted.center()],
            cov: meas_noise + predicted.center_cov(),
            mode: CenteringMode::Stream,
        }),
        points => {
            let mean = z.mean().unwrap_or_else(Vector2::zeros);
            Ok(CenteredMeasurements {
                points: points.iter().map(|p| p - mean).collect(),
                cov: *meas_noise,
                mode: CenteringMode::Batch,
            })
        }
    }
}

/// Quadratic pseudo-measurements of centered points.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoMeasurements {
    /// `(s₁², s₂²)`
    pub a: Vec<Vector2<f64>>,
    /// `(s₁², s₂², s₁s₂)`
    pub b: Vec<Vector3<f64>>,
}

pub fn build_pseudo(s: &CenteredMeasurements) -> PseudoMeasurements {
    let a = s.points.iter().map(|p| p.component_mul(p)).collect();
    let b = s.points.iter().map(orientation_pseudo).collect();
    PseudoMeasurements { a, b }
}

/// `(s₁², s₂², s₁s₂)` for one centered point.
pub fn orientation_pseudo(s: &Vector2<f64>) -> Vector3<f64> {
    Vector3::new(s.x * s.x, s.y * s.y, s.x * s.y)
}

/// Squared coordinates of `s` after rotating it into the object frame of
/// orientation `theta`. The axis moments are expressed in that frame.
pub fn axis_pseudo(s: &Vector2<f64>, theta: f64) -> Vector2<f64> {
    let local = rot(-theta) * s;
    local.component_mul(&local)
}

/// Selection matrix `V` picking `(C₁₁, C₂₂, C₂₁)` out of a column-stacked
/// 2×2 matrix.
#[rustfmt::skip]
pub fn vec_selection() -> Matrix3x4<f64> {
    Matrix3x4::new(
        1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        0.0, 1.0, 0.0, 0.0,
    )
}

/// Companion selection `Ṽ`, identical to `V` except that the last row picks
/// `C₁₂`.
#[rustfmt::skip]
pub fn vec_selection_transposed() -> Matrix3x4<f64> {
    Matrix3x4::new(
        1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, 1.0, 0.0,
    )
}
