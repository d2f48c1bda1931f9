//! Decoupled quadratic Kalman filtering for elliptical extended objects.
//!
//! An extended object is described by its kinematics (center and velocity),
//! the lengths of its two semi-axes, and its orientation. Each of the three
//! is tracked as an independent Gaussian. Two filter variants are provided:
//!
//! - [`step_sequential`] processes the measurements of a time step one at a
//!   time, updating all components from the previous iterate;
//! - [`step_batch`] performs a single update per component with all
//!   measurements of the step.
//!
//! The [`sim`] module generates ground truth and point-cloud measurements and
//! runs seeded Monte-Carlo campaigns; [`metrics`] scores estimates with the
//! squared Gaussian Wasserstein distance.

pub mod batch;
pub mod error;
pub mod io;
pub mod linalg;
pub mod measurement;
pub mod metrics;
pub mod sequential;
pub mod sim;
pub mod state;

pub use batch::{step_batch, step_batch_ordered};
pub use error::{ConfigError, FilterError};
pub use linalg::symmetrize_psd;
pub use measurement::{GroundTruth, MeasurementSet, SourceDistribution};
pub use metrics::{gwd_squared, orientation_error, EllipseParams, ErrorRecord};
pub use sequential::{predict, step_sequential, step_sequential_ordered, Component, Diagnostics};
pub use state::{
    AxisState, DecoupledEstimate, FilterConfig, KinematicState, MotionModel, OrientationState,
};

/// Which filter variant to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Sequential,
    Batch,
}

impl FilterKind {
    /// Advance `est` by one time step with measurements `z`.
    pub fn step(
        self,
        est: &DecoupledEstimate,
        z: &MeasurementSet,
        motion: &MotionModel,
        cfg: &FilterConfig,
        diag: &mut Diagnostics,
    ) -> DecoupledEstimate {
        match self {
            FilterKind::Sequential => step_sequential(est, z, motion, cfg, diag),
            FilterKind::Batch => step_batch(est, z, motion, cfg, diag),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FilterKind::Sequential => "sequential",
            FilterKind::Batch => "batch",
        }
    }
}

impl std::str::FromStr for FilterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequential" => Ok(FilterKind::Sequential),
            "batch" => Ok(FilterKind::Batch),
            other => Err(format!("unknown filter `{other}` (expected sequential or batch)")),
        }
    }
}
