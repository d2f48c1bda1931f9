//! File formats: scenario config JSON, JSON Lines for per-step records, CSV
//! for error curves, and the campaign summary/manifest JSON.
//!
//! Config matrices are nested row arrays. Estimate covariances are written
//! row-major with explicit `rows`/`cols` fields.

use nalgebra::{SMatrix, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, LineError};
use crate::measurement::{GroundTruth, MeasurementSet, SourceDistribution};
use crate::metrics::ErrorRecord;
use crate::sequential::Diagnostics;
use crate::sim::{CampaignSummary, ScenarioConfig, Segment, TrajectorySpec};
use crate::state::{AxisState, DecoupledEstimate, KinematicState, MotionModel, OrientationState};
use crate::FilterKind;

/// Version tag for every record format written by this module.
pub const SCHEMA_VERSION: &str = "qkf-records/1";

type Rows = Vec<Vec<f64>>;

fn to_rows<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> Rows {
    (0..R).map(|i| (0..C).map(|j| m[(i, j)]).collect()).collect()
}

fn from_rows<const R: usize, const C: usize>(rows: &[Vec<f64>], what: &str) -> Result<SMatrix<f64, R, C>, String> {
    if rows.len() != R || rows.iter().any(|r| r.len() != C) {
        return Err(format!("`{what}` must be a {R}x{C} matrix"));
    }
    let m = SMatrix::<f64, R, C>::from_fn(|i, j| rows[i][j]);
    finite(m.iter().copied(), what)?;
    Ok(m)
}

fn finite(values: impl IntoIterator<Item = f64>, what: &str) -> Result<(), String> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(format!("`{what}` contains a non-finite value"))
    }
}

fn vec2(v: [f64; 2], what: &str) -> Result<Vector2<f64>, String> {
    finite(v, what)?;
    Ok(Vector2::from(v))
}

fn vec4(v: [f64; 4], what: &str) -> Result<Vector4<f64>, String> {
    finite(v, what)?;
    Ok(Vector4::from(v))
}

// ---------------------------------------------------------------------------
// Scenario config

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KinematicPriorJson {
    mean: [f64; 4],
    cov: Rows,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisPriorJson {
    mean: [f64; 2],
    cov: Rows,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OrientationJson {
    mean: f64,
    var: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorJson {
    kinematics: KinematicPriorJson,
    axes: AxisPriorJson,
    orientation: OrientationJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MotionJson {
    transition: Rows,
    kin_noise: Rows,
    axis_noise: Rows,
    orient_noise: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentJson {
    steps: usize,
    turn_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StartPoseJson {
    position: [f64; 2],
    heading: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryJson {
    segments: Vec<SegmentJson>,
    nominal_speed: f64,
    start_pose: StartPoseJson,
    true_axes: [f64; 2],
    process_noise: Rows,
    dt: f64,
}

/// On-disk form of [`ScenarioConfig`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioJson {
    name: String,
    lambda: f64,
    #[serde(default)]
    fixed_count: Option<usize>,
    #[serde(rename = "R")]
    meas_noise: Rows,
    prior: PriorJson,
    motion: MotionJson,
    trajectory: TrajectoryJson,
    runs: usize,
    seed: u64,
    source_dist: SourceDistribution,
    #[serde(default)]
    psi: Option<f64>,
}

impl From<&ScenarioConfig> for ScenarioJson {
    fn from(cfg: &ScenarioConfig) -> Self {
        let t = &cfg.trajectory;
        Self {
            name: cfg.name.clone(),
            lambda: cfg.lambda,
            fixed_count: cfg.fixed_count,
            meas_noise: to_rows(&cfg.meas_noise),
            prior: PriorJson {
                kinematics: KinematicPriorJson {
                    mean: cfg.prior.kin.mean.into(),
                    cov: to_rows(&cfg.prior.kin.cov),
                },
                axes: AxisPriorJson {
                    mean: cfg.prior.axis.mean.into(),
                    cov: to_rows(&cfg.prior.axis.cov),
                },
                orientation: OrientationJson {
                    mean: cfg.prior.orient.mean,
                    var: cfg.prior.orient.var,
                },
            },
            motion: MotionJson {
                transition: to_rows(&cfg.motion.transition),
                kin_noise: to_rows(&cfg.motion.kin_noise),
                axis_noise: to_rows(&cfg.motion.axis_noise),
                orient_noise: cfg.motion.orient_noise,
            },
            trajectory: TrajectoryJson {
                segments: t
                    .segments
                    .iter()
                    .map(|s| SegmentJson { steps: s.steps, turn_rate: s.turn_rate })
                    .collect(),
                nominal_speed: t.nominal_speed,
                start_pose: StartPoseJson {
                    position: t.start_position.into(),
                    heading: t.start_heading,
                },
                true_axes: t.true_axes.into(),
                process_noise: to_rows(&t.process_noise),
                dt: t.dt,
            },
            runs: cfg.runs,
            seed: cfg.seed,
            source_dist: cfg.source_dist,
            psi: cfg.psi,
        }
    }
}

impl TryFrom<ScenarioJson> for ScenarioConfig {
    type Error = ConfigError;

    fn try_from(j: ScenarioJson) -> Result<Self, ConfigError> {
        let build = || -> Result<ScenarioConfig, String> {
            let scalars = [
                j.lambda,
                j.prior.orientation.mean,
                j.prior.orientation.var,
                j.motion.orient_noise,
                j.trajectory.nominal_speed,
                j.trajectory.start_pose.heading,
                j.trajectory.dt,
            ];
            finite(scalars, "scalar field")?;
            finite(j.psi, "psi")?;
            let prior = DecoupledEstimate::new(
                KinematicState::new(
                    vec4(j.prior.kinematics.mean, "prior.kinematics.mean")?,
                    from_rows(&j.prior.kinematics.cov, "prior.kinematics.cov")?,
                ),
                AxisState::new(
                    vec2(j.prior.axes.mean, "prior.axes.mean")?,
                    from_rows(&j.prior.axes.cov, "prior.axes.cov")?,
                ),
                OrientationState::new(j.prior.orientation.mean, j.prior.orientation.var),
            );
            let motion = MotionModel {
                transition: from_rows(&j.motion.transition, "motion.transition")?,
                kin_noise: from_rows(&j.motion.kin_noise, "motion.kin_noise")?,
                axis_noise: from_rows(&j.motion.axis_noise, "motion.axis_noise")?,
                orient_noise: j.motion.orient_noise,
            };
            let segments = j
                .trajectory
                .segments
                .iter()
                .map(|s| {
                    finite([s.turn_rate], "trajectory.segments.turn_rate")?;
                    Ok(Segment { steps: s.steps, turn_rate: s.turn_rate })
                })
                .collect::<Result<Vec<_>, String>>()?;
            let trajectory = TrajectorySpec {
                segments,
                nominal_speed: j.trajectory.nominal_speed,
                start_position: vec2(j.trajectory.start_pose.position, "trajectory.start_pose.position")?,
                start_heading: j.trajectory.start_pose.heading,
                true_axes: vec2(j.trajectory.true_axes, "trajectory.true_axes")?,
                process_noise: from_rows(&j.trajectory.process_noise, "trajectory.process_noise")?,
                dt: j.trajectory.dt,
            };
            Ok(ScenarioConfig {
                name: j.name.clone(),
                lambda: j.lambda,
                fixed_count: j.fixed_count,
                meas_noise: from_rows::<2, 2>(&j.meas_noise, "R")?,
                prior,
                motion,
                trajectory,
                runs: j.runs,
                seed: j.seed,
                source_dist: j.source_dist,
                psi: j.psi,
            })
        };
        let cfg = build().map_err(ConfigError::Invalid)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parse and validate a scenario config.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw: ScenarioJson = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    ScenarioConfig::try_from(raw)
}

/// Pretty-printed config JSON; [`parse_scenario`] reads it back unchanged.
pub fn scenario_to_json(cfg: &ScenarioConfig) -> String {
    to_pretty(&ScenarioJson::from(cfg))
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("record types always serialize");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// Measurement lines

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthJson {
    center: [f64; 2],
    theta: f64,
    axes: [f64; 2],
    velocity: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasurementLineJson {
    t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth: Option<TruthJson>,
    measurements: Vec<[f64; 2]>,
}

/// One step of a measurement file. Truth is optional so recorded data
/// without ground truth can be tracked.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub t: usize,
    pub truth: Option<GroundTruth>,
    pub measurements: MeasurementSet,
}

pub fn measurement_line(rec: &MeasurementRecord) -> String {
    let json = MeasurementLineJson {
        t: rec.t,
        truth: rec.truth.map(|g| TruthJson {
            center: g.center.into(),
            theta: g.theta,
            axes: g.axes.into(),
            velocity: g.velocity.into(),
        }),
        measurements: rec.measurements.points.iter().map(|&p| p.into()).collect(),
    };
    serde_json::to_string(&json).expect("record types always serialize")
}

pub fn parse_measurement_line(line: &str) -> Result<MeasurementRecord, String> {
    let j: MeasurementLineJson = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let truth = match j.truth {
        Some(g) => Some(GroundTruth {
            center: vec2(g.center, "truth.center")?,
            velocity: vec2(g.velocity, "truth.velocity")?,
            theta: {
                finite([g.theta], "truth.theta")?;
                g.theta
            },
            axes: vec2(g.axes, "truth.axes")?,
        }),
        None => None,
    };
    let points = j
        .measurements
        .into_iter()
        .map(|p| vec2(p, "measurements"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MeasurementRecord { t: j.t, truth, measurements: MeasurementSet::new(points) })
}

pub fn parse_measurement_lines(text: &str) -> Result<Vec<MeasurementRecord>, LineError> {
    parse_lines(text, parse_measurement_line)
}

fn parse_lines<T>(text: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, LineError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse(l).map_err(|message| LineError { line: i + 1, message }))
        .collect()
}

// ---------------------------------------------------------------------------
// Estimate lines

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixJson {
    fn from_matrix<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> Self {
        let data = (0..R).flat_map(|i| (0..C).map(move |j| m[(i, j)])).collect();
        Self { rows: R, cols: C, data }
    }

    fn to_matrix<const R: usize, const C: usize>(&self, what: &str) -> Result<SMatrix<f64, R, C>, String> {
        if self.rows != R || self.cols != C || self.data.len() != R * C {
            return Err(format!("`{what}` must be {R}x{C} with {} entries", R * C));
        }
        finite(self.data.iter().copied(), what)?;
        Ok(SMatrix::from_row_slice(&self.data))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianJson {
    mean: Vec<f64>,
    cov: MatrixJson,
}

impl GaussianJson {
    fn new<const N: usize>(mean: &SMatrix<f64, N, 1>, cov: &SMatrix<f64, N, N>) -> Self {
        Self { mean: mean.iter().copied().collect(), cov: MatrixJson::from_matrix(cov) }
    }

    fn parts<const N: usize>(&self, what: &str) -> Result<(SMatrix<f64, N, 1>, SMatrix<f64, N, N>), String> {
        if self.mean.len() != N {
            return Err(format!("`{what}.mean` must have {N} entries"));
        }
        finite(self.mean.iter().copied(), what)?;
        let cov = self.cov.to_matrix::<N, N>(&format!("{what}.cov"))?;
        Ok((SMatrix::from_column_slice(&self.mean), cov))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimateLineJson {
    t: usize,
    kinematics: GaussianJson,
    axes: GaussianJson,
    orientation: OrientationJson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRecord {
    pub t: usize,
    pub estimate: DecoupledEstimate,
}

pub fn estimate_line(rec: &EstimateRecord) -> String {
    let e = &rec.estimate;
    let json = EstimateLineJson {
        t: rec.t,
        kinematics: GaussianJson::new(&e.kin.mean, &e.kin.cov),
        axes: GaussianJson::new(&e.axis.mean, &e.axis.cov),
        orientation: OrientationJson { mean: e.orient.mean, var: e.orient.var },
    };
    serde_json::to_string(&json).expect("record types always serialize")
}

pub fn parse_estimate_line(line: &str) -> Result<EstimateRecord, String> {
    let j: EstimateLineJson = serde_json::from_str(line).map_err(|e| e.to_string())?;
    finite([j.orientation.mean, j.orientation.var], "orientation")?;
    let (kin_mean, kin_cov) = j.kinematics.parts::<4>("kinematics")?;
    let (axis_mean, axis_cov) = j.axes.parts::<2>("axes")?;
    let estimate = DecoupledEstimate::new(
        KinematicState::new(kin_mean, kin_cov),
        AxisState::new(axis_mean, axis_cov),
        OrientationState::new(j.orientation.mean, j.orientation.var),
    );
    Ok(EstimateRecord { t: j.t, estimate })
}

pub fn parse_estimate_lines(text: &str) -> Result<Vec<EstimateRecord>, LineError> {
    parse_lines(text, parse_estimate_line)
}

// ---------------------------------------------------------------------------
// Error curves and summaries

/// CSV with header `t,gwd_sq,orient_err`.
pub fn errors_csv(rows: impl IntoIterator<Item = (usize, ErrorRecord)>) -> String {
    let mut out = String::from("t,gwd_sq,orient_err\n");
    for (t, e) in rows {
        out.push_str(&format!("{t},{},{}\n", e.gwd_sq, e.orient_err));
    }
    out
}

/// Means over the rows of an error CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub steps: usize,
    pub mean_gwd_sq: f64,
    pub mean_orient_err: f64,
}

impl EvalSummary {
    pub fn from_errors(errors: &[ErrorRecord]) -> Self {
        let n = errors.len().max(1) as f64;
        Self {
            steps: errors.len(),
            mean_gwd_sq: errors.iter().map(|e| e.gwd_sq).sum::<f64>() / n,
            mean_orient_err: errors.iter().map(|e| e.orient_err).sum::<f64>() / n,
        }
    }

    pub fn to_json(&self) -> String {
        to_pretty(self)
    }
}

/// Per-step campaign means in the same layout as [`errors_csv`].
pub fn per_step_csv(summary: &CampaignSummary) -> String {
    errors_csv(
        summary
            .per_step_mean_gwd_sq
            .iter()
            .zip(&summary.per_step_mean_orient_err)
            .enumerate()
            .map(|(k, (&gwd_sq, &orient_err))| (k + 1, ErrorRecord { gwd_sq, orient_err })),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DiagnosticsJson {
    singular_innovation: u64,
    singular_pseudo_cov: u64,
    degenerate_information: u64,
    predict_only_steps: u64,
}

impl From<&Diagnostics> for DiagnosticsJson {
    fn from(d: &Diagnostics) -> Self {
        Self {
            singular_innovation: d.singular_innovation,
            singular_pseudo_cov: d.singular_pseudo_cov,
            degenerate_information: d.degenerate_information,
            predict_only_steps: d.predict_only_steps,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct SummaryJson<'a> {
    schema: &'static str,
    scenario: &'a str,
    filter: FilterKind,
    runs: usize,
    seed: u64,
    steps: usize,
    overall_mean_gwd_sq: f64,
    overall_mean_orient_err: f64,
    diagnostics: DiagnosticsJson,
}

/// The deterministic part of a campaign summary. Timings live in
/// [`runtime_json`] so this file is reproducible byte-for-byte.
pub fn summary_json(summary: &CampaignSummary) -> String {
    to_pretty(&SummaryJson {
        schema: SCHEMA_VERSION,
        scenario: &summary.scenario,
        filter: summary.filter,
        runs: summary.runs,
        seed: summary.seed,
        steps: summary.per_step_mean_gwd_sq.len(),
        overall_mean_gwd_sq: summary.overall_mean_gwd_sq,
        overall_mean_orient_err: summary.overall_mean_orient_err,
        diagnostics: (&summary.diagnostics).into(),
    })
}

#[derive(Debug, Clone, Serialize)]
struct RuntimeJson<'a> {
    scenario: &'a str,
    filter: FilterKind,
    mean_step_runtime_s: f64,
    wall_clock_s: f64,
}

/// Measured timings of a campaign.
pub fn runtime_json(summary: &CampaignSummary, wall_clock_s: f64) -> String {
    to_pretty(&RuntimeJson {
        scenario: &summary.scenario,
        filter: summary.filter,
        mean_step_runtime_s: summary.mean_step_runtime,
        wall_clock_s,
    })
}

/// Everything needed to reproduce a campaign's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema: String,
    pub tool_version: String,
    pub filter: FilterKind,
    pub seed: u64,
    pub runs: usize,
    pub outputs: Vec<String>,
    pub wall_clock_s: f64,
    pub config: ScenarioJson,
}

impl RunManifest {
    pub fn new(
        cfg: &ScenarioConfig,
        filter: FilterKind,
        tool_version: &str,
        outputs: Vec<String>,
        wall_clock_s: f64,
    ) -> Self {
        Self {
            schema: SCHEMA_VERSION.to_string(),
            tool_version: tool_version.to_string(),
            filter,
            seed: cfg.seed,
            runs: cfg.runs,
            outputs,
            wall_clock_s,
            config: cfg.into(),
        }
    }

    pub fn to_json(&self) -> String {
        to_pretty(self)
    }

    /// The embedded config, with the manifest's seed and run count applied.
    pub fn scenario(&self) -> Result<ScenarioConfig, ConfigError> {
        let mut cfg = ScenarioConfig::try_from(self.config.clone())?;
        cfg.seed = self.seed;
        cfg.runs = self.runs;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_manifest(text: &str) -> Result<RunManifest, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
}
