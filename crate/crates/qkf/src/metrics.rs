//! Error metrics between estimated and true ellipses.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix2, SymmetricEigen, Vector2};

use crate::error::FilterError;
use crate::state::{shape_matrix, DecoupledEstimate};

/// An ellipse viewed as a Gaussian: center as mean, shape matrix as covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseParams {
    pub center: Vector2<f64>,
    pub theta: f64,
    pub semi_axes: Vector2<f64>,
}

impl EllipseParams {
    pub fn new(center: Vector2<f64>, theta: f64, semi_axes: Vector2<f64>) -> Self {
        Self { center, theta, semi_axes }
    }

    pub fn shape_matrix(&self) -> Matrix2<f64> {
        shape_matrix(self.theta, &self.semi_axes)
    }
}

impl From<&DecoupledEstimate> for EllipseParams {
    fn from(est: &DecoupledEstimate) -> Self {
        Self::new(est.kin.center(), est.orient.mean, est.axis.mean)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    /// Squared Gaussian Wasserstein distance (m²).
    pub gwd_sq: f64,
    /// Orientation error modulo π, in `[0, π/2]`.
    pub orient_err: f64,
}

impl ErrorRecord {
    pub fn between(estimate: &EllipseParams, truth: &EllipseParams) -> Self {
        Self {
            gwd_sq: gwd_squared(estimate, truth),
            orient_err: orientation_error(estimate.theta, truth.theta),
        }
    }
}

/// Squared Gaussian Wasserstein distance between two ellipses.
pub fn gwd_squared(a: &EllipseParams, b: &EllipseParams) -> f64 {
    let xa = a.shape_matrix();
    let xb = b.shape_matrix();
    let ra = sqrt_floored(&xa);
    let mixed = ra * xb * ra;
    let cross = sqrt_floored(&((mixed + mixed.transpose()) * 0.5));
    let shape = (xa + xb - cross * 2.0).trace();
    ((a.center - b.center).norm_squared() + shape).max(0.0)
}

/// Absolute orientation difference modulo π, in `[0, π/2]`.
pub fn orientation_error(theta_est: f64, theta_true: f64) -> f64 {
    let d = (theta_est - theta_true).rem_euclid(PI);
    if d > FRAC_PI_2 {
        PI - d
    } else {
        d
    }
}

/// Symmetric PSD square root of a 2×2 symmetric PSD matrix.
///
/// Uses the trace/determinant closed form and falls back to an
/// eigendecomposition when the determinant is slightly negative.
pub fn matrix_sqrt_2x2(m: &Matrix2<f64>) -> Result<Matrix2<f64>, FilterError> {
    let m = (m + m.transpose()) * 0.5;
    let (a, b, c) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
    let half_gap = ((a - c) * 0.5).hypot(b);
    let min_eig = (a + c) * 0.5 - half_gap;
    if min_eig < -1e-9 || !min_eig.is_finite() {
        return Err(FilterError::NotPsd(min_eig));
    }
    let det = a * c - b * b;
    if det >= 0.0 {
        let s = det.sqrt();
        let t = (a + c + 2.0 * s).sqrt();
        if t == 0.0 {
            return Ok(Matrix2::zeros());
        }
        return Ok((m + Matrix2::identity() * s) / t);
    }
    Ok(sqrt_floored(&m))
}

fn sqrt_floored(m: &Matrix2<f64>) -> Matrix2<f64> {
    if !m.iter().all(|v| v.is_finite()) {
        return Matrix2::from_element(f64::NAN);
    }
    let eig = SymmetricEigen::new(*m);
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    eig.eigenvectors * Matrix2::from_diagonal(&roots) * eig.eigenvectors.transpose()
}
