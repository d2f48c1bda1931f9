//! Decoupled state representation and the ellipse geometry shared by both
//! filter variants.
//!
//! The object state is split into three independent Gaussians: kinematics
//! (center position and velocity), semi-axis lengths, and orientation. No
//! cross-covariance between them is ever stored.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};

use crate::error::ConfigError;
use crate::linalg::{is_symmetric_psd, symmetrize_psd};

/// Semi-axis means are never allowed below this length (meters).
pub const AXIS_FLOOR: f64 = 1e-3;

/// Position and velocity `(m₁, m₂, ṁ₁, ṁ₂)` with covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl KinematicState {
    pub fn new(mean: Vector4<f64>, cov: Matrix4<f64>) -> Self {
        Self { mean, cov }
    }

    pub fn center(&self) -> Vector2<f64> {
        Vector2::new(self.mean[0], self.mean[1])
    }

    pub fn velocity(&self) -> Vector2<f64> {
        Vector2::new(self.mean[2], self.mean[3])
    }

    /// Covariance of the center position.
    pub fn center_cov(&self) -> Matrix2<f64> {
        self.cov.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn is_valid(&self) -> bool {
        self.mean.iter().all(|v| v.is_finite()) && is_symmetric_psd(&self.cov, 1e-12, 1e-10)
    }
}

/// Semi-axis lengths `(l₁, l₂)` with covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisState {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

impl AxisState {
    pub fn new(mean: Vector2<f64>, cov: Matrix2<f64>) -> Self {
        Self { mean, cov }
    }

    pub fn is_valid(&self) -> bool {
        self.mean.iter().all(|&v| v > 0.0 && v.is_finite())
            && is_symmetric_psd(&self.cov, 1e-12, 1e-10)
    }

    /// Floor both means at [`AXIS_FLOOR`].
    pub(crate) fn floored(mut self) -> Self {
        self.mean = self.mean.map(|v| v.max(AXIS_FLOOR));
        self
    }
}

/// Orientation angle (radians, wrapped to `(-π, π]`) with its variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationState {
    pub mean: f64,
    pub var: f64,
}

impl OrientationState {
    pub fn new(mean: f64, var: f64) -> Self {
        Self { mean, var }
    }

    pub fn is_valid(&self) -> bool {
        self.var >= 0.0 && self.mean > -PI && self.mean <= PI
    }
}

/// The three independent components of an elliptical extended object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoupledEstimate {
    pub kin: KinematicState,
    pub axis: AxisState,
    pub orient: OrientationState,
}

impl DecoupledEstimate {
    pub fn new(kin: KinematicState, axis: AxisState, orient: OrientationState) -> Self {
        Self { kin, axis, orient }
    }

    pub fn is_valid(&self) -> bool {
        self.kin.is_valid() && self.axis.is_valid() && self.orient.is_valid()
    }

    /// Estimated shape matrix `R(θ̂) diag(l̂₁², l̂₂²) R(θ̂)ᵀ`.
    pub fn shape_matrix(&self) -> Matrix2<f64> {
        shape_matrix(self.orient.mean, &self.axis.mean)
    }
}

/// Linear motion of all three components. The axis transition is the
/// identity and is not stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionModel {
    pub transition: Matrix4<f64>,
    pub kin_noise: Matrix4<f64>,
    pub axis_noise: Matrix2<f64>,
    pub orient_noise: f64,
}

impl MotionModel {
    /// Constant-velocity kinematics with sampling period `dt`.
    pub fn constant_velocity(
        dt: f64,
        kin_noise: Matrix4<f64>,
        axis_noise: Matrix2<f64>,
        orient_noise: f64,
    ) -> Self {
        Self {
            transition: constant_velocity_transition(dt),
            kin_noise,
            axis_noise,
            orient_noise,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.transition.iter().all(|v| v.is_finite()) {
            return Err(ConfigError::invalid("transition matrix must be finite"));
        }
        if !is_symmetric_psd(&self.kin_noise, 1e-12, 1e-10) {
            return Err(ConfigError::invalid("kinematic process noise must be symmetric PSD"));
        }
        if !is_symmetric_psd(&self.axis_noise, 1e-12, 1e-10) {
            return Err(ConfigError::invalid("axis process noise must be symmetric PSD"));
        }
        if !(self.orient_noise >= 0.0 && self.orient_noise.is_finite()) {
            return Err(ConfigError::invalid("orientation process noise must be >= 0"));
        }
        Ok(())
    }
}

#[rustfmt::skip]
pub fn constant_velocity_transition(dt: f64) -> Matrix4<f64> {
    Matrix4::new(
        1.0, 0.0, dt, 0.0,
        0.0, 1.0, 0.0, dt,
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
    )
}

/// Measurement-side filter parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    /// Additive measurement noise covariance `R`.
    pub meas_noise: Matrix2<f64>,
    /// Variance `c` of the multiplicative error term.
    pub scaling: f64,
    /// Optional semi-axis variance clamp `ψ`, used by the batch variant only.
    pub psi: Option<f64>,
}

impl FilterConfig {
    pub fn new(meas_noise: Matrix2<f64>, scaling: f64, psi: Option<f64>) -> Self {
        Self { meas_noise, scaling, psi }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !is_symmetric_psd(&self.meas_noise, 1e-12, 1e-10) {
            return Err(ConfigError::invalid("measurement noise R must be symmetric PSD"));
        }
        if !(self.scaling > 0.0 && self.scaling.is_finite()) {
            return Err(ConfigError::invalid("scaling factor c must be > 0"));
        }
        if let Some(psi) = self.psi {
            if !(psi > 0.0 && psi <= 1.0) {
                return Err(ConfigError::invalid("psi must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

/// The 2×4 matrix selecting the center from the kinematic state.
#[rustfmt::skip]
pub fn center_selection() -> Matrix2x4<f64> {
    Matrix2x4::new(
        1.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
    )
}

/// Counter-clockwise rotation by `theta`.
pub fn rot(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// `R(θ) diag(l₁², l₂²) R(θ)ᵀ`.
pub fn shape_matrix(theta: f64, axes: &Vector2<f64>) -> Matrix2<f64> {
    let r = rot(theta);
    let d = Matrix2::from_diagonal(&axes.component_mul(axes));
    let x = r * d * r.transpose();
    (x + x.transpose()) * 0.5
}

/// Cap each semi-axis variance at `(ψ·l)²`, rescaling the off-diagonal so
/// the correlation coefficient is unchanged.
pub fn clamp_axis_variance(axis: &AxisState, psi: f64) -> AxisState {
    let mut cov = axis.cov;
    let mut scale = [1.0; 2];
    for (j, s) in scale.iter_mut().enumerate() {
        let limit = (psi * axis.mean[j]).powi(2);
        let var = axis.cov[(j, j)];
        if var > limit {
            cov[(j, j)] = limit;
            *s = (limit / var).sqrt();
        }
    }
    let off = axis.cov[(0, 1)] * scale[0] * scale[1];
    cov[(0, 1)] = off;
    cov[(1, 0)] = off;
    AxisState { mean: axis.mean, cov }
}

/// Wrap an angle to `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Kinematic state with its covariance passed through PSD repair.
pub(crate) fn repaired_kin(mean: Vector4<f64>, cov: Matrix4<f64>) -> KinematicState {
    KinematicState { mean, cov: symmetrize_psd(&cov) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: &Matrix2<f64>, b: &Matrix2<f64>, tol: f64) -> bool {
        (a - b).abs().max() <= tol
    }

    #[test]
    fn rot_examples() {
        assert_eq!(rot(0.0), Matrix2::identity());
        assert!(close(&rot(FRAC_PI_2), &Matrix2::new(0.0, -1.0, 1.0, 0.0), 1e-16));
        assert!((rot(0.3).determinant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn shape_matrix_examples() {
        let l = Vector2::new(2.0, 1.0);
        assert!(close(&shape_matrix(0.0, &l), &Matrix2::new(4.0, 0.0, 0.0, 1.0), 0.0));
        assert!(close(&shape_matrix(FRAC_PI_2, &l), &Matrix2::new(1.0, 0.0, 0.0, 4.0), 1e-15));
        assert!(close(
            &shape_matrix(PI / 4.0, &l),
            &Matrix2::new(2.5, 1.5, 1.5, 2.5),
            1e-14
        ));
    }

    #[test]
    fn clamp_examples() {
        let a = AxisState::new(Vector2::new(5.0, 2.0), Matrix2::identity());
        let c = clamp_axis_variance(&a, 0.4);
        assert!(close(&c.cov, &Matrix2::new(1.0, 0.0, 0.0, 0.64), 1e-15));
        assert_eq!(c.mean, a.mean);

        let z = AxisState::new(Vector2::new(5.0, 2.0), Matrix2::zeros());
        assert_eq!(clamp_axis_variance(&z, 0.4), z);

        let b = AxisState::new(Vector2::new(4.0, 2.0), Matrix2::new(4.0, 0.0, 0.0, 2.0));
        let c = clamp_axis_variance(&b, 0.15);
        assert!(close(&c.cov, &Matrix2::new(0.36, 0.0, 0.0, 0.09), 1e-15));
    }

    #[test]
    fn clamp_preserves_correlation() {
        let a = AxisState::new(Vector2::new(2.0, 2.0), Matrix2::new(4.0, 1.0, 1.0, 1.0));
        let c = clamp_axis_variance(&a, 0.5);
        let rho = |m: &Matrix2<f64>| m[(0, 1)] / (m[(0, 0)] * m[(1, 1)]).sqrt();
        assert!((rho(&a.cov) - rho(&c.cov)).abs() < 1e-15);
        assert_eq!(c.cov[(0, 0)], 1.0);
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-15);
        assert_eq!(wrap_angle(-PI), PI);
        assert_eq!(wrap_angle(PI), PI);
    }

    #[test]
    fn cv_transition_propagates() {
        let f = constant_velocity_transition(1.0);
        let x = f * Vector4::new(0.0, 0.0, 1.0, 2.0);
        assert_eq!(x, Vector4::new(1.0, 2.0, 1.0, 2.0));
    }

    proptest! {
        #[test]
        fn shape_matrix_pi_symmetric(theta in -10.0f64..10.0, l1 in 0.01f64..20.0, l2 in 0.01f64..20.0) {
            let l = Vector2::new(l1, l2);
            let a = shape_matrix(theta, &l);
            let b = shape_matrix(theta + PI, &l);
            prop_assert!((a - b).abs().max() <= 1e-12 * (1.0 + l1 * l1 + l2 * l2));
        }

        #[test]
        fn rot_inverse(theta in -100.0f64..100.0) {
            prop_assert!(close(&(rot(theta) * rot(-theta)), &Matrix2::identity(), 1e-13));
        }

        #[test]
        fn clamp_never_increases(m1 in 0.01f64..10.0, m2 in 0.01f64..10.0,
                                 v1 in 0.0f64..5.0, v2 in 0.0f64..5.0, rho in -0.99f64..0.99,
                                 psi in 0.01f64..1.0) {
            let off = rho * (v1 * v2).sqrt();
            let a = AxisState::new(Vector2::new(m1, m2), Matrix2::new(v1, off, off, v2));
            let c = clamp_axis_variance(&a, psi);
            prop_assert_eq!(c.mean, a.mean);
            prop_assert!(c.cov[(0, 0)] <= a.cov[(0, 0)]);
            prop_assert!(c.cov[(1, 1)] <= a.cov[(1, 1)]);
        }

        #[test]
        fn wrap_range(theta in -1e4f64..1e4) {
            let w = wrap_angle(theta);
            prop_assert!(w > -PI && w <= PI);
            let k = (theta - w) / (2.0 * PI);
            prop_assert!((k - k.round()).abs() < 1e-9);
        }

        #[test]
        fn symmetrize_output_is_psd(a in prop::array::uniform4(-5.0f64..5.0)) {
            let m = Matrix2::new(a[0], a[1], a[2], a[3]);
            let r = symmetrize_psd(&m);
            prop_assert!(is_symmetric_psd(&r, 1e-12, 1e-10));
        }
    }
}
