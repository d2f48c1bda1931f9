//! Ground-truth generation, built-in scenarios and the seeded Monte-Carlo
//! campaign runner.
//!
//! Run `r` of a campaign with seed `s` draws everything from a ChaCha8
//! stream seeded with `s ^ r`, so serial and parallel execution produce
//! identical results.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, PI};
use std::time::Instant;

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::ConfigError;
use crate::linalg::{is_symmetric_psd, psd_sqrt4};
use crate::measurement::{sample_fixed, sample_measurements, GroundTruth, MeasurementSet, SourceDistribution};
use crate::metrics::{EllipseParams, ErrorRecord};
use crate::sequential::Diagnostics;
use crate::state::{
    rot, wrap_angle, AxisState, DecoupledEstimate, FilterConfig, KinematicState, MotionModel,
    OrientationState,
};
use crate::FilterKind;

/// Upper bound on the measurement rate or fixed count per step.
pub const MAX_MEASUREMENTS: usize = 100_000;

/// Sampled true semi-axes are redrawn until both exceed this (meters).
pub const MIN_TRUE_AXIS: f64 = 0.1;

/// A run of `steps` time steps during which the heading changes by
/// `turn_rate` radians per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub steps: usize,
    pub turn_rate: f64,
}

/// Nominal path of the object and the noise that perturbs it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub segments: Vec<Segment>,
    /// Meters per second along the heading; zero for a stationary object.
    pub nominal_speed: f64,
    pub start_position: Vector2<f64>,
    pub start_heading: f64,
    pub true_axes: Vector2<f64>,
    /// Zero-mean Gaussian noise added to position and velocity each step.
    pub process_noise: Matrix4<f64>,
    pub dt: f64,
}

impl TrajectorySpec {
    pub fn total_steps(&self) -> usize {
        self.segments.iter().map(|s| s.steps).sum()
    }

    /// Per step (starting at step 1), whether the heading is changing.
    pub fn turning_steps(&self) -> Vec<bool> {
        self.segments
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.turn_rate != 0.0, s.steps))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.segments.is_empty() || self.segments.iter().any(|s| s.steps == 0) {
            return Err(ConfigError::invalid("every trajectory segment needs at least one step"));
        }
        if self.segments.iter().any(|s| !s.turn_rate.is_finite()) {
            return Err(ConfigError::invalid("turn rates must be finite"));
        }
        if !(self.nominal_speed >= 0.0 && self.nominal_speed.is_finite()) {
            return Err(ConfigError::invalid("nominal speed must be >= 0"));
        }
        if !self.true_axes.iter().all(|&l| l > 0.0 && l.is_finite()) {
            return Err(ConfigError::invalid("true axes must be > 0"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ConfigError::invalid("dt must be > 0"));
        }
        if !self.start_position.iter().all(|v| v.is_finite()) || !self.start_heading.is_finite() {
            return Err(ConfigError::invalid("start pose must be finite"));
        }
        if !is_symmetric_psd(&self.process_noise, 1e-12, 1e-10) {
            return Err(ConfigError::invalid("trajectory process noise must be symmetric PSD"));
        }
        Ok(())
    }
}

/// True states for steps `1..=total_steps`.
///
/// Each step first turns the heading, then moves the center by the nominal
/// velocity. The orientation follows the velocity; a stationary object keeps
/// its start heading.
pub fn generate_truth<R: Rng + ?Sized>(traj: &TrajectorySpec, rng: &mut R) -> Vec<GroundTruth> {
    let noise_sqrt = psd_sqrt4(&traj.process_noise);
    let mut position = traj.start_position;
    let mut heading = traj.start_heading;
    let mut out = Vec::with_capacity(traj.total_steps());
    for segment in &traj.segments {
        for _ in 0..segment.steps {
            heading += segment.turn_rate;
            let nominal = Vector2::new(heading.cos(), heading.sin()) * traj.nominal_speed;
            let w = noise_sqrt * standard_normal4(rng);
            position += nominal * traj.dt + Vector2::new(w[0], w[1]);
            let velocity = nominal + Vector2::new(w[2], w[3]);
            let theta = if traj.nominal_speed > 0.0 {
                velocity.y.atan2(velocity.x)
            } else {
                heading
            };
            out.push(GroundTruth {
                center: position,
                velocity,
                theta: wrap_angle(theta),
                axes: traj.true_axes,
            });
        }
    }
    out
}

fn standard_normal4<R: Rng + ?Sized>(rng: &mut R) -> Vector4<f64> {
    Vector4::from_fn(|_, _| rng.sample(StandardNormal))
}

/// Everything that determines a Monte-Carlo campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    /// Poisson rate of measurements per step.
    pub lambda: f64,
    /// When set, every step has exactly this many measurements instead.
    pub fixed_count: Option<usize>,
    pub meas_noise: Matrix2<f64>,
    /// Prior handed to the filter; the true initial state is drawn from it.
    pub prior: DecoupledEstimate,
    pub motion: MotionModel,
    pub trajectory: TrajectorySpec,
    pub runs: usize,
    pub seed: u64,
    pub source_dist: SourceDistribution,
    pub psi: Option<f64>,
}

impl ScenarioConfig {
    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig::new(self.meas_noise, self.source_dist.scaling_factor(), self.psi)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.runs == 0 {
            return Err(ConfigError::invalid("runs must be >= 1"));
        }
        if self.fixed_count.is_none() && !(self.lambda > 0.0 && self.lambda <= MAX_MEASUREMENTS as f64) {
            return Err(ConfigError::invalid(format!("lambda must lie in (0, {MAX_MEASUREMENTS}]")));
        }
        if self.fixed_count.is_some_and(|n| n > MAX_MEASUREMENTS) {
            return Err(ConfigError::invalid(format!("fixed_count must be <= {MAX_MEASUREMENTS}")));
        }
        if !self.prior.is_valid() {
            return Err(ConfigError::invalid(
                "prior must have finite means, positive axes and symmetric PSD covariances",
            ));
        }
        self.motion.validate()?;
        self.trajectory.validate()?;
        self.filter_config().validate()
    }

    fn draw_measurements<R: Rng + ?Sized>(&self, truth: &GroundTruth, rng: &mut R) -> MeasurementSet {
        match self.fixed_count {
            Some(n) => sample_fixed(truth, n, &self.meas_noise, self.source_dist, rng),
            None => sample_measurements(truth, self.lambda, &self.meas_noise, self.source_dist, rng),
        }
    }
}

/// Truth and measurements of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunData {
    pub truth: Vec<GroundTruth>,
    pub measurements: Vec<MeasurementSet>,
}

/// Seed of run `run` in a campaign seeded with `seed`.
pub fn run_seed(seed: u64, run: usize) -> u64 {
    seed ^ run as u64
}

/// Sample the true initial state from the prior, then generate the
/// trajectory and the measurements of every step.
pub fn simulate_run(cfg: &ScenarioConfig, run: usize) -> RunData {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed(cfg.seed, run));
    let kin0 = cfg.prior.kin.mean + psd_sqrt4(&cfg.prior.kin.cov) * standard_normal4(&mut rng);
    let axes = sample_axes(&cfg.prior.axis, &mut rng);
    let z: f64 = rng.sample(StandardNormal);
    let theta0 = cfg.prior.orient.mean + cfg.prior.orient.var.sqrt() * z;

    let mut traj = cfg.trajectory.clone();
    traj.start_position = Vector2::new(kin0[0], kin0[1]);
    traj.true_axes = axes;
    if traj.nominal_speed > 0.0 {
        let v = Vector2::new(kin0[2], kin0[3]);
        traj.nominal_speed = v.norm();
        traj.start_heading = v.y.atan2(v.x);
    } else {
        traj.start_heading = theta0;
    }

    let truth = generate_truth(&traj, &mut rng);
    let measurements = truth.iter().map(|t| cfg.draw_measurements(t, &mut rng)).collect();
    RunData { truth, measurements }
}

fn sample_axes<R: Rng + ?Sized>(prior: &AxisState, rng: &mut R) -> Vector2<f64> {
    let sqrt = crate::metrics::matrix_sqrt_2x2(&prior.cov).unwrap_or_else(|_| Matrix2::zeros());
    let mut draw = prior.mean;
    for _ in 0..1000 {
        let n = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        draw = prior.mean + sqrt * n;
        if draw.iter().all(|&l| l > MIN_TRUE_AXIS) {
            return draw;
        }
    }
    draw.map(|l| l.max(MIN_TRUE_AXIS))
}

/// One time step of a tracked run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub truth: GroundTruth,
    pub measurements: MeasurementSet,
    pub estimate: DecoupledEstimate,
    pub errors: ErrorRecord,
    /// Seconds spent in the filter step.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub records: Vec<StepRecord>,
    pub diagnostics: Diagnostics,
}

impl RunResult {
    pub fn mean_gwd_sq(&self) -> f64 {
        mean(self.records.iter().map(|r| r.errors.gwd_sq))
    }

    pub fn mean_orient_err(&self) -> f64 {
        mean(self.records.iter().map(|r| r.errors.orient_err))
    }
}

/// Run a filter over pre-generated data, starting from `prior`.
pub fn track(
    data: &RunData,
    prior: &DecoupledEstimate,
    motion: &MotionModel,
    cfg: &FilterConfig,
    kind: FilterKind,
) -> RunResult {
    let mut diagnostics = Diagnostics::default();
    let mut est = *prior;
    let records = data
        .truth
        .iter()
        .zip(&data.measurements)
        .enumerate()
        .map(|(i, (truth, z))| {
            let start = Instant::now();
            est = kind.step(&est, z, motion, cfg, &mut diagnostics);
            let wall_time = start.elapsed().as_secs_f64();
            let truth_ellipse = EllipseParams::new(truth.center, truth.theta, truth.axes);
            StepRecord {
                t: i + 1,
                truth: *truth,
                measurements: z.clone(),
                estimate: est,
                errors: ErrorRecord::between(&EllipseParams::from(&est), &truth_ellipse),
                wall_time,
            }
        })
        .collect();
    RunResult { records, diagnostics }
}

/// Aggregated campaign errors and timings.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSummary {
    pub scenario: String,
    pub filter: FilterKind,
    pub runs: usize,
    pub seed: u64,
    pub per_step_mean_gwd_sq: Vec<f64>,
    pub per_step_mean_orient_err: Vec<f64>,
    pub overall_mean_gwd_sq: f64,
    pub overall_mean_orient_err: f64,
    /// Seconds per filter step, averaged over all steps of all runs.
    pub mean_step_runtime: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub summary: CampaignSummary,
    pub runs: Vec<RunResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

/// Run every Monte-Carlo run of `cfg` with the chosen filter.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    kind: FilterKind,
    execution: Execution,
) -> Result<Campaign, ConfigError> {
    cfg.validate()?;
    let filter_cfg = cfg.filter_config();
    let one = |run: usize| {
        let data = simulate_run(cfg, run);
        track(&data, &cfg.prior, &cfg.motion, &filter_cfg, kind)
    };
    let runs: Vec<RunResult> = match execution {
        Execution::Serial => (0..cfg.runs).map(one).collect(),
        Execution::Parallel => (0..cfg.runs).into_par_iter().map(one).collect(),
    };
    let summary = summarize(cfg, kind, &runs);
    Ok(Campaign { summary, runs })
}

fn summarize(cfg: &ScenarioConfig, kind: FilterKind, runs: &[RunResult]) -> CampaignSummary {
    let steps = cfg.trajectory.total_steps();
    let n = runs.len() as f64;
    let mut gwd = vec![0.0; steps];
    let mut orient = vec![0.0; steps];
    let mut diagnostics = Diagnostics::default();
    let mut runtime = 0.0;
    for run in runs {
        for (k, rec) in run.records.iter().enumerate() {
            gwd[k] += rec.errors.gwd_sq;
            orient[k] += rec.errors.orient_err;
            runtime += rec.wall_time;
        }
        diagnostics.merge(&run.diagnostics);
    }
    gwd.iter_mut().for_each(|v| *v /= n);
    orient.iter_mut().for_each(|v| *v /= n);
    CampaignSummary {
        scenario: cfg.name.clone(),
        filter: kind,
        runs: runs.len(),
        seed: cfg.seed,
        per_step_mean_gwd_sq: gwd,
        per_step_mean_orient_err: orient,
        overall_mean_gwd_sq: mean(runs.iter().map(RunResult::mean_gwd_sq)),
        overall_mean_orient_err: mean(runs.iter().map(RunResult::mean_orient_err)),
        mean_step_runtime: runtime / (n * steps as f64),
        diagnostics,
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Mean seconds per filter step when every step has exactly `count`
/// measurements. Runs serially so timings are not disturbed by other runs.
pub fn mean_step_runtime(cfg: &ScenarioConfig, kind: FilterKind, count: usize, runs: usize) -> f64 {
    let mut fixed = cfg.clone();
    fixed.fixed_count = Some(count);
    let filter_cfg = fixed.filter_config();
    let mut total = 0.0;
    let mut steps = 0usize;
    for run in 0..runs {
        let data = simulate_run(&fixed, run);
        let result = track(&data, &fixed.prior, &fixed.motion, &filter_cfg, kind);
        total += result.records.iter().map(|r| r.wall_time).sum::<f64>();
        steps += result.records.len();
    }
    total / steps as f64
}

/// Default evaluation path: 80 steps at 3 m/s with three 90° turns, each
/// spread over 6 steps starting at steps 19, 39 and 59.
pub fn reference_trajectory() -> TrajectorySpec {
    let turn = PI / 2.0 / 6.0;
    let straight = |steps| Segment { steps, turn_rate: 0.0 };
    let turning = |rate| Segment { steps: 6, turn_rate: rate };
    TrajectorySpec {
        segments: vec![
            straight(18),
            turning(turn),
            straight(14),
            turning(turn),
            straight(14),
            turning(-turn),
            straight(16),
        ],
        nominal_speed: 3.0,
        start_position: Vector2::zeros(),
        start_heading: 0.0,
        true_axes: Vector2::new(5.0, 2.0),
        process_noise: Matrix4::from_diagonal(&Vector4::new(0.01, 0.01, 0.01, 0.01)),
        dt: 1.0,
    }
}

fn moving_scenario(name: &str, lambda: f64, noise_eigs: (f64, f64)) -> ScenarioConfig {
    let r = rot(FRAC_PI_4);
    let meas_noise = r * Matrix2::new(noise_eigs.0, 0.0, 0.0, noise_eigs.1) * r.transpose();
    let trajectory = reference_trajectory();
    let speed = trajectory.nominal_speed;
    let heading = trajectory.start_heading;
    let prior = DecoupledEstimate::new(
        KinematicState::new(
            Vector4::new(0.0, 0.0, speed * heading.cos(), speed * heading.sin()),
            Matrix4::from_diagonal(&Vector4::new(2.0, 2.0, 0.5, 0.5)),
        ),
        AxisState::new(Vector2::new(5.0, 2.0), Matrix2::identity()),
        OrientationState::new(heading, 0.1),
    );
    let motion = MotionModel::constant_velocity(
        trajectory.dt,
        Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 2.0, 2.0)),
        Matrix2::identity() * 0.01,
        0.1,
    );
    ScenarioConfig {
        name: name.to_string(),
        lambda,
        fixed_count: None,
        meas_noise,
        prior,
        motion,
        trajectory,
        runs: 500,
        seed: 42,
        source_dist: SourceDistribution::UniformEllipse,
        psi: Some(0.4),
    }
}

/// Stationary 8 m × 4 m object observed through one measurement per step.
pub fn stationary_scenario() -> ScenarioConfig {
    let trajectory = TrajectorySpec {
        segments: vec![Segment { steps: 200, turn_rate: 0.0 }],
        nominal_speed: 0.0,
        start_position: Vector2::zeros(),
        start_heading: 0.0,
        true_axes: Vector2::new(4.0, 2.0),
        process_noise: Matrix4::zeros(),
        dt: 1.0,
    };
    let prior = DecoupledEstimate::new(
        KinematicState::new(
            Vector4::zeros(),
            Matrix4::from_diagonal(&Vector4::new(0.1, 0.1, 0.0, 0.0)),
        ),
        AxisState::new(Vector2::new(4.0, 2.0), Matrix2::new(4.0, 0.0, 0.0, 2.0)),
        OrientationState::new(0.0, PI),
    );
    ScenarioConfig {
        name: "stationary".to_string(),
        lambda: 1.0,
        fixed_count: Some(1),
        meas_noise: Matrix2::identity(),
        prior,
        motion: MotionModel::constant_velocity(1.0, Matrix4::zeros(), Matrix2::zeros(), 0.0),
        trajectory,
        runs: 500,
        seed: 42,
        source_dist: SourceDistribution::UniformEllipse,
        psi: Some(0.4),
    }
}

/// The named scenarios: `moderate`, `noisy`, `sparse` and `stationary`.
pub fn builtin_scenarios() -> BTreeMap<String, ScenarioConfig> {
    [
        moving_scenario("moderate", 12.0, (1.5, 2.0 / 3.0)),
        moving_scenario("noisy", 12.0, (3.0, 1.0)),
        moving_scenario("sparse", 6.0, (1.5, 2.0 / 3.0)),
        stationary_scenario(),
    ]
    .into_iter()
    .map(|s| (s.name.clone(), s))
    .collect()
}

pub fn builtin_scenario(name: &str) -> Result<ScenarioConfig, ConfigError> {
    builtin_scenarios()
        .remove(name)
        .ok_or_else(|| ConfigError::UnknownScenario(name.to_string()))
}
