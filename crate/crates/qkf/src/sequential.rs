//! Sequential filter: measurements are processed one at a time, and for
//! each one the kinematic, axis and orientation updates all read the
//! estimate left by the previous measurement.

use nalgebra::{Matrix2, Matrix3, RowVector3, Vector2, Vector3};

use crate::error::FilterError;
use crate::linalg::{symmetrize_psd, SquareMatrix};
use crate::measurement::{
    axis_pseudo, center_measurements, orientation_pseudo, vec_selection, vec_selection_transposed,
    CenteredMeasurements, MeasurementSet,
};
use crate::state::{
    center_selection, repaired_kin, rot, wrap_angle, AxisState, DecoupledEstimate, FilterConfig,
    KinematicState, MotionModel, OrientationState,
};

/// Counts of skipped or degenerate updates over a track or campaign.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub singular_innovation: u64,
    pub singular_pseudo_cov: u64,
    pub degenerate_information: u64,
    pub predict_only_steps: u64,
}

impl Diagnostics {
    pub fn record(&mut self, err: &FilterError) {
        match err {
            FilterError::SingularInnovation(_) => self.singular_innovation += 1,
            FilterError::SingularPseudoCov(_) => self.singular_pseudo_cov += 1,
            FilterError::DegenerateInformation => self.degenerate_information += 1,
            FilterError::EmptyMeasurementSet | FilterError::NotPsd(_) => {}
        }
    }

    pub fn merge(&mut self, other: &Diagnostics) {
        self.singular_innovation += other.singular_innovation;
        self.singular_pseudo_cov += other.singular_pseudo_cov;
        self.degenerate_information += other.degenerate_information;
        self.predict_only_steps += other.predict_only_steps;
    }

    pub fn total_skipped(&self) -> u64 {
        self.singular_innovation + self.singular_pseudo_cov + self.degenerate_information
    }
}

/// One of the three decoupled state components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Kinematics,
    Axis,
    Orientation,
}

/// Update order used by [`step_sequential`].
pub const DEFAULT_ORDER: [Component; 3] =
    [Component::Kinematics, Component::Axis, Component::Orientation];

/// Kalman prediction of all three components.
pub fn predict(est: &DecoupledEstimate, motion: &MotionModel) -> DecoupledEstimate {
    let f = motion.transition;
    let kin = repaired_kin(f * est.kin.mean, f * est.kin.cov * f.transpose() + motion.kin_noise);
    let axis = AxisState::new(est.axis.mean, symmetrize_psd(&(est.axis.cov + motion.axis_noise)));
    let orient = OrientationState::new(
        wrap_angle(est.orient.mean),
        (est.orient.var + motion.orient_noise).max(0.0),
    );
    DecoupledEstimate::new(kin, axis, orient)
}

/// Kalman update of the kinematics with a center pseudo-measurement `z`
/// of covariance `noise`.
pub(crate) fn center_update(
    kin: &KinematicState,
    z: &Vector2<f64>,
    noise: &Matrix2<f64>,
) -> Result<KinematicState, FilterError> {
    let h = center_selection();
    let ph = kin.cov * h.transpose();
    let innovation_cov = h * ph + noise;
    let inv = innovation_cov.guarded_inverse().map_err(FilterError::SingularInnovation)?;
    let gain = ph * inv;
    let mean = kin.mean + gain * (z - h * kin.mean);
    let cov = kin.cov - gain * h * kin.cov;
    Ok(repaired_kin(mean, cov))
}

/// Kalman update of the kinematics with one measurement, treating the
/// object extent as extra noise `R + c·X̂`.
pub fn update_kinematics(
    kin: &KinematicState,
    z: &Vector2<f64>,
    shape_est: &Matrix2<f64>,
    cfg: &FilterConfig,
) -> Result<KinematicState, FilterError> {
    center_update(kin, z, &effective_noise(shape_est, cfg))
}

/// `R + c·X̂`
pub fn effective_noise(shape_est: &Matrix2<f64>, cfg: &FilterConfig) -> Matrix2<f64> {
    cfg.meas_noise + shape_est * cfg.scaling
}

/// Moments of the axis pseudo-measurement given a snapshot estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisMoments {
    pub expected_a: Vector2<f64>,
    pub cov_aa: Matrix2<f64>,
    /// Diagonal cross-covariance between pseudo-measurement and semi-axes.
    pub cross_ap: Matrix2<f64>,
    /// Centered-measurement covariance rotated into the object frame.
    pub w_theta: Matrix2<f64>,
}

pub fn axis_moments(snapshot: &DecoupledEstimate, w: &Matrix2<f64>, cfg: &FilterConfig) -> AxisMoments {
    axis_moments_at(&snapshot.axis, snapshot.orient.mean, w, cfg.scaling)
}

pub(crate) fn axis_moments_at(axis: &AxisState, theta: f64, w: &Matrix2<f64>, c: f64) -> AxisMoments {
    let r = rot(-theta);
    let w_theta = r * w * r.transpose();
    let p = axis.mean;
    let cp = axis.cov;
    let expected_a = Vector2::new(
        w_theta[(0, 0)] + c * (cp[(0, 0)] + p[0] * p[0]),
        w_theta[(1, 1)] + c * (cp[(1, 1)] + p[1] * p[1]),
    );
    let off = 2.0 * w_theta[(0, 1)].powi(2);
    let cov_aa = Matrix2::new(
        2.0 * expected_a[0].powi(2),
        off,
        off,
        2.0 * expected_a[1].powi(2),
    );
    let cross_ap = Matrix2::new(2.0 * c * p[0] * cp[(0, 0)], 0.0, 0.0, 2.0 * c * p[1] * cp[(1, 1)]);
    AxisMoments { expected_a, cov_aa, cross_ap, w_theta }
}

/// Quadratic Kalman update of the semi-axes with pseudo-measurement `a`.
pub fn update_axis(
    axis: &AxisState,
    a: &Vector2<f64>,
    mom: &AxisMoments,
) -> Result<AxisState, FilterError> {
    let inv = mom.cov_aa.guarded_inverse().map_err(FilterError::SingularPseudoCov)?;
    let gain = mom.cross_ap * inv;
    let mean = axis.mean + gain * (a - mom.expected_a);
    let cov = axis.cov - gain * mom.cross_ap.transpose();
    Ok(AxisState::new(mean, symmetrize_psd(&cov)).floored())
}

/// Moments of the orientation pseudo-measurement given a snapshot, from a
/// first-order expansion of the shape in the orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationMoments {
    pub expected_b: Vector3<f64>,
    pub cov_bb: Matrix3<f64>,
    pub cross_btheta: RowVector3<f64>,
    /// `R(θ̂) diag(l̂₁, l̂₂)`
    pub s: Matrix2<f64>,
    /// Derivatives of the rows of `s` with respect to θ.
    pub j1: Vector2<f64>,
    pub j2: Vector2<f64>,
    /// Spread from the multiplicative error.
    pub c_one: Matrix2<f64>,
    /// Spread from the orientation uncertainty.
    pub c_two: Matrix2<f64>,
    /// Total covariance of a centered measurement.
    pub c_s: Matrix2<f64>,
    /// Sensitivity of the expected pseudo-measurement to θ.
    pub m: Vector3<f64>,
}

pub fn orientation_moments(
    snapshot: &DecoupledEstimate,
    w: &Matrix2<f64>,
    cfg: &FilterConfig,
) -> OrientationMoments {
    let c = cfg.scaling;
    let theta = snapshot.orient.mean;
    let var = snapshot.orient.var;
    let l = snapshot.axis.mean;
    let (sin, cos) = theta.sin_cos();

    let s = rot(theta) * Matrix2::from_diagonal(&l);
    let j1 = Vector2::new(-l[0] * sin, -l[1] * cos);
    let j2 = Vector2::new(l[0] * cos, -l[1] * sin);
    let j = [j1, j2];

    // C_h = c·I throughout.
    let c_one = s * s.transpose() * c;
    let c_two = Matrix2::from_fn(|m, n| var * c * j[n].dot(&j[m]));
    let c_s = w + c_one + c_two;

    let s1 = s.row(0).transpose();
    let s2 = s.row(1).transpose();
    let m = Vector3::new(
        2.0 * c * s1.dot(&j1),
        2.0 * c * s2.dot(&j2),
        c * (s1.dot(&j2) + s2.dot(&j1)),
    );

    let v = vec_selection();
    let v_sum = v + vec_selection_transposed();
    let vec_cs = nalgebra::Vector4::new(c_s[(0, 0)], c_s[(1, 0)], c_s[(0, 1)], c_s[(1, 1)]);
    let expected_b = v * vec_cs;
    let cov_bb = v * c_s.kronecker(&c_s) * v_sum.transpose();
    let cov_bb = (cov_bb + cov_bb.transpose()) * 0.5;
    let cross_btheta = m.transpose() * var;

    OrientationMoments { expected_b, cov_bb, cross_btheta, s, j1, j2, c_one, c_two, c_s, m }
}

/// Quadratic Kalman update of the orientation with pseudo-measurement `b`.
pub fn update_orientation(
    orient: &OrientationState,
    b: &Vector3<f64>,
    mom: &OrientationMoments,
) -> Result<OrientationState, FilterError> {
    let inv = mom.cov_bb.guarded_inverse().map_err(FilterError::SingularPseudoCov)?;
    let gain = mom.cross_btheta * inv;
    let mean = orient.mean + (gain * (b - mom.expected_b))[0];
    let reduction = (gain * mom.cross_btheta.transpose())[0];
    Ok(OrientationState::new(wrap_angle(mean), (orient.var - reduction).max(0.0)))
}

/// One predict/update cycle of the sequential filter.
///
/// Skipped component updates (ill-conditioned covariances) are counted in
/// `diag`. The ψ clamp in `cfg` is not used by this variant.
pub fn step_sequential(
    est: &DecoupledEstimate,
    z: &MeasurementSet,
    motion: &MotionModel,
    cfg: &FilterConfig,
    diag: &mut Diagnostics,
) -> DecoupledEstimate {
    step_sequential_ordered(est, z, motion, cfg, diag, DEFAULT_ORDER)
}

/// [`step_sequential`] with an explicit order of the three component updates.
/// Every order yields the same result.
pub fn step_sequential_ordered(
    est: &DecoupledEstimate,
    z: &MeasurementSet,
    motion: &MotionModel,
    cfg: &FilterConfig,
    diag: &mut Diagnostics,
    order: [Component; 3],
) -> DecoupledEstimate {
    let prediction = predict(est, motion);
    if z.is_empty() {
        diag.predict_only_steps += 1;
        return prediction;
    }
    sequential_update(&prediction, z, cfg, diag, order)
}

/// Measurement update of Algorithm-1 style on an already predicted estimate.
pub(crate) fn sequential_update(
    prediction: &DecoupledEstimate,
    z: &MeasurementSet,
    cfg: &FilterConfig,
    diag: &mut Diagnostics,
    order: [Component; 3],
) -> DecoupledEstimate {
    let centered: CenteredMeasurements = match center_measurements(z, &prediction.kin, &cfg.meas_noise) {
        Ok(c) => c,
        Err(_) => return *prediction,
    };
    let w = centered.cov;
    let mut current = *prediction;
    for (zi, si) in z.points.iter().zip(&centered.points) {
        let snapshot = current;
        for component in order {
            match component {
                Component::Kinematics => {
                    match update_kinematics(&snapshot.kin, zi, &snapshot.shape_matrix(), cfg) {
                        Ok(kin) => current.kin = kin,
                        Err(e) => diag.record(&e),
                    }
                }
                Component::Axis => {
                    let mom = axis_moments(&snapshot, &w, cfg);
                    let a = axis_pseudo(si, snapshot.orient.mean);
                    match update_axis(&snapshot.axis, &a, &mom) {
                        Ok(axis) => current.axis = axis,
                        Err(e) => diag.record(&e),
                    }
                }
                Component::Orientation => {
                    let mom = orientation_moments(&snapshot, &w, cfg);
                    match update_orientation(&snapshot.orient, &orientation_pseudo(si), &mom) {
                        Ok(orient) => current.orient = orient,
                        Err(e) => diag.record(&e),
                    }
                }
            }
        }
    }
    current
}
