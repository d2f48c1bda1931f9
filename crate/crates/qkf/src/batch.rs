//! Batch filter: one update per component and time step using all
//! measurements at once. Every update reads only the prediction.

use nalgebra::{DVector, Matrix2, Matrix3, Vector2, Vector3};

use crate::error::FilterError;
use crate::linalg::{symmetrize_psd, SquareMatrix};
use crate::measurement::{
    axis_pseudo, vec_selection, CenteredMeasurements, CenteringMode, MeasurementSet,
};
use crate::sequential::{
    axis_moments_at, center_update, effective_noise, orientation_moments, predict,
    sequential_update, Component, Diagnostics, DEFAULT_ORDER,
};
use crate::state::{
    clamp_axis_variance, wrap_angle, AxisState, DecoupledEstimate, FilterConfig, KinematicState,
    MotionModel, OrientationState,
};

/// Axis pseudo-measurements of all points stacked as
/// `(a¹₁, a¹₂, a²₁, a²₂, …)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedAxisPseudo {
    pub a_tilde: Vec<f64>,
}

impl StackedAxisPseudo {
    pub fn new(s: &CenteredMeasurements, theta: f64) -> Self {
        let a_tilde = s
            .points
            .iter()
            .flat_map(|p| {
                let a = axis_pseudo(p, theta);
                [a[0], a[1]]
            })
            .collect();
        Self { a_tilde }
    }

    pub fn count(&self) -> usize {
        self.a_tilde.len() / 2
    }

    pub fn point(&self, i: usize) -> Vector2<f64> {
        Vector2::new(self.a_tilde[2 * i], self.a_tilde[2 * i + 1])
    }
}

/// Moments of the stacked axis pseudo-measurement, all evaluated at the
/// prediction so every 2×2 block is identical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchAxisMoments {
    /// Expected pseudo-measurement of each block.
    pub rho: Vector2<f64>,
    /// Diagonal of each block of the cross-covariance.
    pub zeta: Vector2<f64>,
    pub per_block_cov: Matrix2<f64>,
    pub per_block_inv: Matrix2<f64>,
}

impl BatchAxisMoments {
    pub fn new(
        axis: &AxisState,
        theta: f64,
        w: &Matrix2<f64>,
        cfg: &FilterConfig,
    ) -> Result<Self, FilterError> {
        let mom = axis_moments_at(axis, theta, w, cfg.scaling);
        let per_block_inv = mom.cov_aa.guarded_inverse().map_err(FilterError::SingularPseudoCov)?;
        Ok(Self {
            rho: mom.expected_a,
            zeta: mom.cross_ap.diagonal(),
            per_block_cov: mom.cov_aa,
            per_block_inv,
        })
    }

    /// `(ρ¹, ρ², ρ¹, ρ², …)` for `count` points.
    pub fn expected_stacked(&self, count: usize) -> DVector<f64> {
        DVector::from_fn(2 * count, |i, _| self.rho[i % 2])
    }
}

/// Kalman update of the kinematics with the measurement mean, whose noise
/// is `(R + c·X̂) / M`.
pub fn batch_update_kinematics(
    kin: &KinematicState,
    z: &MeasurementSet,
    shape_est: &Matrix2<f64>,
    cfg: &FilterConfig,
) -> Result<KinematicState, FilterError> {
    let mean = z.mean().ok_or(FilterError::EmptyMeasurementSet)?;
    let noise = effective_noise(shape_est, cfg) / z.len() as f64;
    center_update(kin, &mean, &noise)
}

/// Stacked quadratic update of the semi-axes, followed by the ψ clamp when
/// configured.
///
/// Uses the block structure directly: the gain applied to the stacked
/// innovation reduces to `diag(ζ)·C⁻¹·Σᵢ(aⁱ − ρ)`.
pub fn batch_update_axis(
    axis: &AxisState,
    s: &CenteredMeasurements,
    orient: &OrientationState,
    cfg: &FilterConfig,
) -> Result<AxisState, FilterError> {
    let mom = BatchAxisMoments::new(axis, orient.mean, &s.cov, cfg)?;
    let stacked = StackedAxisPseudo::new(s, orient.mean);
    let count = stacked.count();
    let innovation: Vector2<f64> = (0..count).map(|i| stacked.point(i) - mom.rho).sum();
    let zeta = Matrix2::from_diagonal(&mom.zeta);
    let gain = zeta * mom.per_block_inv;
    let mean = axis.mean + gain * innovation;
    let cov = axis.cov - gain * zeta * count as f64;
    let mut post = AxisState::new(mean, symmetrize_psd(&cov)).floored();
    if let Some(psi) = cfg.psi {
        post = clamp_axis_variance(&post, psi);
    }
    Ok(post)
}

/// Intermediate quantities of the information-form orientation update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchOrientationInfo {
    /// Prior information vector `θ̂ / Cᶿ`.
    pub xi_prior: f64,
    /// Pseudo-measurement covariance with the orientation part removed.
    pub gamma_t: Matrix3<f64>,
    /// `Σᵢ (bⁱ − E(b) + M·θ̂)`
    pub xi_sum: Vector3<f64>,
    pub m: Vector3<f64>,
    pub posterior_mean: f64,
    pub posterior_var: f64,
}

pub fn batch_orientation_info(
    orient: &OrientationState,
    s: &CenteredMeasurements,
    snapshot: &DecoupledEstimate,
    cfg: &FilterConfig,
) -> Result<BatchOrientationInfo, FilterError> {
    if orient.var <= 0.0 {
        return Err(FilterError::DegenerateInformation);
    }
    let mom = orientation_moments(snapshot, &s.cov, cfg);
    let m = mom.m;
    let gamma_t = mom.cov_bb - m * m.transpose() * orient.var;
    let gamma_t = (gamma_t + gamma_t.transpose()) * 0.5;
    let gamma_inv = gamma_t.guarded_inverse().map_err(FilterError::SingularPseudoCov)?;

    let v = vec_selection();
    let offset = m * orient.mean - mom.expected_b;
    let xi_sum: Vector3<f64> = s.points.iter().map(|p| v * p.kronecker(p) + offset).sum();

    let weighted = m.transpose() * gamma_inv;
    let xi_prior = orient.mean / orient.var;
    let information = 1.0 / orient.var + s.points.len() as f64 * (weighted * m)[0];
    let posterior_var = 1.0 / information;
    let xi = xi_prior + (weighted * xi_sum)[0];
    Ok(BatchOrientationInfo {
        xi_prior,
        gamma_t,
        xi_sum,
        m,
        posterior_mean: wrap_angle(posterior_var * xi),
        posterior_var,
    })
}

/// Information-form orientation update with all measurements.
pub fn batch_update_orientation(
    orient: &OrientationState,
    s: &CenteredMeasurements,
    snapshot: &DecoupledEstimate,
    cfg: &FilterConfig,
) -> Result<OrientationState, FilterError> {
    let info = batch_orientation_info(orient, s, snapshot, cfg)?;
    Ok(OrientationState::new(info.posterior_mean, info.posterior_var.min(orient.var)))
}

/// One predict/update cycle of the batch filter.
///
/// With exactly one measurement the sequential update is used unchanged.
pub fn step_batch(
    est: &DecoupledEstimate,
    z: &MeasurementSet,
    motion: &MotionModel,
    cfg: &FilterConfig,
    diag: &mut Diagnostics,
) -> DecoupledEstimate {
    step_batch_ordered(est, z, motion, cfg, diag, DEFAULT_ORDER)
}

/// [`step_batch`] with an explicit order of the three component updates.
pub fn step_batch_ordered(
    est: &DecoupledEstimate,
    z: &MeasurementSet,
    motion: &MotionModel,
    cfg: &FilterConfig,
    diag: &mut Diagnostics,
    order: [Component; 3],
) -> DecoupledEstimate {
    let prediction = predict(est, motion);
    match z.len() {
        0 => {
            diag.predict_only_steps += 1;
            prediction
        }
        1 => sequential_update(&prediction, z, cfg, diag, order),
        _ => batch_update(&prediction, z, cfg, diag, order),
    }
}

fn batch_update(
    prediction: &DecoupledEstimate,
    z: &MeasurementSet,
    cfg: &FilterConfig,
    diag: &mut Diagnostics,
    order: [Component; 3],
) -> DecoupledEstimate {
    let mean = z.mean().unwrap_or_else(Vector2::zeros);
    let centered = CenteredMeasurements {
        points: z.points.iter().map(|p| p - mean).collect(),
        cov: cfg.meas_noise,
        mode: CenteringMode::Batch,
    };
    let mut post = *prediction;
    for component in order {
        let outcome = match component {
            Component::Kinematics => {
                batch_update_kinematics(&prediction.kin, z, &prediction.shape_matrix(), cfg)
                    .map(|kin| post.kin = kin)
            }
            Component::Axis => {
                batch_update_axis(&prediction.axis, &centered, &prediction.orient, cfg)
                    .map(|axis| post.axis = axis)
            }
            Component::Orientation => {
                batch_update_orientation(&prediction.orient, &centered, prediction, cfg)
                    .map(|orient| post.orient = orient)
            }
        };
        if let Err(e) = outcome {
            diag.record(&e);
        }
    }
    post
}
