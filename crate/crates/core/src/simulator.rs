//! Synthetic heated-leg measurement campaigns with known ground truth.
//!
//! Physics of one measurement at time `t`:
//!
//! * the platform is commanded to a pose; its cold leg lengths come from the
//!   inverse model,
//! * every leg grows by `(alpha_al*l_al + alpha_st*(q - l_al)) * dT(t)`,
//!   where `dT(t)` is the leg's temperature rise since the origin was
//!   measured (temperature frozen for the duration of one measurement),
//! * the real platform pose follows from the forward model on the grown legs,
//! * three balls on the platform are probed by a virtual CMM with isotropic
//!   Gaussian noise, sphere-fitted, and turned into a platform frame.
//!
//! The CMM-to-platform relation is bootstrapped at the origin measurement
//! from probed ball centres and the (exactly known) origin frame.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{pose_to_transform, GeometryError, Point3, Pose6, Transform3D};
use crate::kinematics::{fgm, igm, HexapodGeometry, KinematicsError, LegLengths};
use crate::metrology::{
    establish_relation, fit_sphere, frame_from_balls_with_tolerance, sphere_probe_pattern, BallPlateRelation,
    MetrologyError, ProbePointSet, DEFAULT_CONGRUENCE_TOL, DEFAULT_POINTS_PER_BALL,
};
use crate::par::{self, Execution};
use crate::pipeline::{
    estimate_all, DecoupledOptions, MeasurementSession, PipelineError, RecordRole, SessionRecord,
};
use crate::rng;
use crate::stats::{self, linear_fit, pearson};
use crate::thermal::{thermal_expansion, LegThermalModel, ThermalError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("heating schedule of leg {leg} does not cover t = {time} s")]
    ScheduleGap { leg: usize, time: f64 },
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Thermal(#[from] ThermalError),
    #[error(transparent)]
    Metrology(#[from] MetrologyError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Per-leg temperature rise (K) as piecewise-linear series over time (s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatingSchedule {
    legs: [Vec<(f64, f64)>; 6],
}

impl HeatingSchedule {
    pub fn new(legs: [Vec<(f64, f64)>; 6]) -> Result<Self, SimulationError> {
        for (leg, series) in legs.iter().enumerate() {
            if series.is_empty() {
                return Err(SimulationError::InvalidConfig(format!("leg {} has an empty schedule", leg + 1)));
            }
            if series.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                return Err(SimulationError::InvalidConfig(format!(
                    "leg {} schedule has non-finite values",
                    leg + 1
                )));
            }
            if series.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(SimulationError::InvalidConfig(format!(
                    "leg {} schedule times must increase strictly",
                    leg + 1
                )));
            }
        }
        Ok(Self { legs })
    }

    /// Same constant rise on every leg over `[start, end]`.
    pub fn constant(dt: f64, start: f64, end: f64) -> Self {
        Self::per_leg_constant([dt; 6], start, end)
    }

    pub fn per_leg_constant(dt: [f64; 6], start: f64, end: f64) -> Self {
        Self {
            legs: dt.map(|v| vec![(start, v), (end, v)]),
        }
    }

    /// Zero until `at`, then `dt` (a near-instant step of width 1 µs).
    pub fn step(dt: [f64; 6], at: f64, start: f64, end: f64) -> Self {
        Self {
            legs: dt.map(|v| vec![(start, 0.0), (at, 0.0), (at + 1e-6, v), (end, v)]),
        }
    }

    /// Zero until `ramp_start`, then linear to `final_dt` at `end`.
    pub fn ramp(final_dt: [f64; 6], start: f64, ramp_start: f64, end: f64) -> Self {
        Self {
            legs: final_dt.map(|v| vec![(start, 0.0), (ramp_start, 0.0), (end, v)]),
        }
    }

    pub fn legs(&self) -> &[Vec<(f64, f64)>; 6] {
        &self.legs
    }

    /// Temperature rise of every leg at `t`.
    pub fn at(&self, t: f64) -> Result<[f64; 6], SimulationError> {
        let mut out = [0.0; 6];
        for (leg, series) in self.legs.iter().enumerate() {
            out[leg] = interpolate(series, t).ok_or(SimulationError::ScheduleGap { leg, time: t })?;
        }
        Ok(out)
    }
}

fn interpolate(series: &[(f64, f64)], t: f64) -> Option<f64> {
    let (t0, v0) = *series.first()?;
    let (tn, vn) = *series.last()?;
    if t < t0 || t > tn {
        return None;
    }
    if t == tn {
        return Some(vn);
    }
    if series.len() == 1 {
        return Some(v0);
    }
    let k = series.partition_point(|(ts, _)| *ts <= t);
    let (ta, va) = series[k - 1];
    let (tb, vb) = series[k];
    Some(va + (vb - va) * (t - ta) / (tb - ta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialStep {
    pub role: RecordRole,
    pub pose: Pose6,
    pub time: f64,
}

/// Origin measurement time plus the ordered list of measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub origin_time: f64,
    pub steps: Vec<TrialStep>,
}

impl TrialPlan {
    /// `R` right after the origin, then per trial the target followed by
    /// another `R` after `reference_lag` seconds.
    pub fn reference_bracketed(
        reference: Pose6,
        target: Pose6,
        trials: usize,
        first_reference_time: f64,
        trial_period: f64,
        reference_lag: f64,
    ) -> Self {
        let mut steps = vec![TrialStep {
            role: RecordRole::RefBefore,
            pose: reference,
            time: first_reference_time,
        }];
        for k in 1..=trials {
            let t = first_reference_time + k as f64 * trial_period;
            steps.push(TrialStep {
                role: RecordRole::Target,
                pose: target,
                time: t,
            });
            steps.push(TrialStep {
                role: RecordRole::RefAfter,
                pose: reference,
                time: t + reference_lag,
            });
        }
        Self { origin_time: 0.0, steps }
    }

    pub fn end_time(&self) -> f64 {
        self.steps.iter().map(|s| s.time).fold(self.origin_time, f64::max)
    }

    pub fn trial_count(&self) -> usize {
        self.steps.iter().filter(|s| s.role == RecordRole::Target).count()
    }
}

/// Independent per-measurement pose scatter of the hexapod (1σ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Repeatability {
    pub translation: f64,
    pub rotation: f64,
}

impl Repeatability {
    /// ±0.5 µm and ±2.5 µrad treated as 1σ.
    pub fn high_precision_hexapod() -> Self {
        Self {
            translation: 0.5e-3,
            rotation: 2.5e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub geometry: HexapodGeometry,
    pub thermal: LegThermalModel,
    /// True ball centres in the platform frame.
    pub ball_layout: BallPlateRelation,
    pub ball_radius: f64,
    pub points_per_ball: usize,
    /// Probe points cover polar angles `[0, max_polar]` from the CMM +Z axis.
    pub probe_max_polar: f64,
    pub probe_noise_sigma: f64,
    pub congruence_tolerance: f64,
    pub heating_schedule: HeatingSchedule,
    pub trial_plan: TrialPlan,
    pub rng_seed: u64,
    /// Placement of frame O in the CMM frame.
    pub cmm_placement: Transform3D,
    /// Air temperature (°C); leg temperatures are this plus the schedule.
    pub ambient_temperature: f64,
    pub repeatability: Option<Repeatability>,
}

/// Default reference pose, 40 mm below the zero pose.
pub const DEFAULT_REFERENCE_POSE: Pose6 = Pose6::new(0.0, 0.0, -40.0, 0.0, 0.0, 0.0);

/// Leg temperature rise (K) reached at the end of the ten-trial ramp.
pub const TEN_TRIAL_FINAL_DT: [f64; 6] = [2.0, 4.0, 1.5, 2.0, 5.0, 4.5];

/// Frame O as seen from the CMM in the ten-trial scenario.
pub fn ten_trial_placement() -> Pose6 {
    Pose6::from_mm_deg(450.0, 380.0, 210.0, 0.0, 0.0, 30.0)
}

impl ScenarioConfig {
    /// Ten reference-bracketed trials at the zero pose, reference pose
    /// 40 mm lower, legs 2 and 5 heated most and legs 3 and 4 least,
    /// leg 5 heated more than leg 3.
    pub fn ten_trial(rng_seed: u64) -> Self {
        let plan = TrialPlan::reference_bracketed(DEFAULT_REFERENCE_POSE, Pose6::zero(), 10, 30.0, 600.0, 30.0);
        let end = plan.end_time();
        Self {
            geometry: HexapodGeometry::default_synthetic(),
            thermal: LegThermalModel::default_synthetic(),
            ball_layout: BallPlateRelation::equilateral(150.0, 25.0).expect("valid layout"),
            ball_radius: 12.7,
            points_per_ball: DEFAULT_POINTS_PER_BALL,
            probe_max_polar: 110f64.to_radians(),
            probe_noise_sigma: 1e-3,
            congruence_tolerance: DEFAULT_CONGRUENCE_TOL,
            heating_schedule: HeatingSchedule::ramp(TEN_TRIAL_FINAL_DT, 0.0, 60.0, end),
            trial_plan: plan,
            rng_seed,
            cmm_placement: pose_to_transform(&ten_trial_placement()),
            ambient_temperature: 20.0,
            repeatability: None,
        }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |m: String| Err(SimulationError::InvalidConfig(m));
        if !(self.probe_noise_sigma >= 0.0) || !self.probe_noise_sigma.is_finite() {
            return bad(format!("probe noise sigma {} must be >= 0", self.probe_noise_sigma));
        }
        if self.points_per_ball < 4 {
            return bad(format!("{} points per ball; at least 4 needed", self.points_per_ball));
        }
        if !(self.ball_radius > 0.0) {
            return bad(format!("ball radius {} must be positive", self.ball_radius));
        }
        if !(self.probe_max_polar > 0.0 && self.probe_max_polar <= PI) {
            return bad("probe polar coverage must be in (0, π]".into());
        }
        if !(self.congruence_tolerance > 0.0) {
            return bad("congruence tolerance must be positive".into());
        }
        if self.trial_plan.steps.is_empty() {
            return bad("trial plan has no measurements".into());
        }
        if let Some(r) = self.repeatability {
            if !(r.translation >= 0.0 && r.rotation >= 0.0) {
                return bad("repeatability must be non-negative".into());
            }
        }
        // schedule must cover the whole plan
        self.heating_schedule.at(self.trial_plan.origin_time)?;
        for s in &self.trial_plan.steps {
            self.heating_schedule.at(s.time)?;
            s.pose.validate()?;
        }
        Ok(())
    }
}

/// What actually happened during one measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordTruth {
    pub role: RecordRole,
    pub time: f64,
    pub commanded: Pose6,
    /// Pose the platform would have with the legs at the origin temperatures.
    pub pose_t1: Pose6,
    /// Pose the platform actually had when measured.
    pub pose_actual: Pose6,
    /// Leg temperature rise since the origin measurement (K).
    pub leg_dt: [f64; 6],
    pub q_cold: [f64; 6],
    pub q_actual: [f64; 6],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub cmm_placement: Transform3D,
    pub ball_layout: BallPlateRelation,
    /// Relation actually established from the probed origin balls.
    pub measured_relation: BallPlateRelation,
    /// One entry per session record, in time order.
    pub records: Vec<RecordTruth>,
}

fn probe_centres(
    cfg: &ScenarioConfig,
    frame: &Transform3D,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<[Point3; 3], SimulationError> {
    let mut out = [Point3::origin(); 3];
    for (k, ball) in cfg.ball_layout.balls().iter().enumerate() {
        let centre = frame.apply(ball);
        let pts = sphere_probe_pattern(&centre, cfg.ball_radius, cfg.points_per_ball, cfg.probe_max_polar)
            .into_iter()
            .map(|p| p + rng::gaussian_vector(rng, cfg.probe_noise_sigma))
            .collect();
        out[k] = fit_sphere(&ProbePointSet::new(pts, Some(cfg.ball_radius))?)?.center;
    }
    Ok(out)
}

fn perturb(pose: &Pose6, rep: &Repeatability, rng: &mut rand_chacha::ChaCha8Rng) -> Pose6 {
    let dt = rng::gaussian_vector(rng, rep.translation);
    let dr = rng::gaussian_vector(rng, rep.rotation);
    Pose6::new(
        pose.tx + dt.x,
        pose.ty + dt.y,
        pose.tz + dt.z,
        pose.rx + dr.x,
        pose.ry + dr.y,
        pose.rz + dr.z,
    )
}

const REPEATABILITY_STREAM_OFFSET: u64 = 1 << 32;

/// Simulates the whole plan of `cfg`.
pub fn simulate_session(cfg: &ScenarioConfig) -> Result<(MeasurementSession, GroundTruth), SimulationError> {
    simulate_session_with(cfg, Execution::Parallel)
}

pub fn simulate_session_with(
    cfg: &ScenarioConfig,
    exec: Execution,
) -> Result<(MeasurementSession, GroundTruth), SimulationError> {
    cfg.validate()?;
    let plan = &cfg.trial_plan;
    let dt_origin = cfg.heating_schedule.at(plan.origin_time)?;
    let origin_temps = dt_origin.map(|v| cfg.ambient_temperature + v);

    // bootstrap: origin frame known exactly, balls probed once
    let origin_frame = cfg.cmm_placement;
    let origin_centres = probe_centres(cfg, &origin_frame, &mut rng::stream(cfg.rng_seed, 0))?;
    let relation = establish_relation(&origin_centres, &origin_frame)?;

    let mut steps = plan.steps.clone();
    steps.sort_by(|a, b| a.time.total_cmp(&b.time));

    let results = par::try_map_indexed(exec, steps.len(), |k| -> Result<_, SimulationError> {
        let step = &steps[k];
        let dt_abs = cfg.heating_schedule.at(step.time)?;
        let leg_dt: [f64; 6] = std::array::from_fn(|i| dt_abs[i] - dt_origin[i]);

        let pose_t1 = match &cfg.repeatability {
            Some(rep) => perturb(
                &step.pose,
                rep,
                &mut rng::stream(cfg.rng_seed, REPEATABILITY_STREAM_OFFSET + k as u64),
            ),
            None => step.pose,
        };
        let q_cold = igm(&cfg.geometry, &pose_t1)?;
        let growth = thermal_expansion(&cfg.thermal, &q_cold, &leg_dt)?;
        let q_actual = LegLengths::new(std::array::from_fn(|i| q_cold[i] + growth[i]))?;
        let pose_actual = fgm(&cfg.geometry, &q_actual, &pose_t1)?;

        let true_frame = cfg.cmm_placement.compose(&pose_to_transform(&pose_actual));
        let centres = probe_centres(cfg, &true_frame, &mut rng::stream(cfg.rng_seed, 1 + k as u64))?;
        let frame_in_m = frame_from_balls_with_tolerance(&relation, &centres, cfg.congruence_tolerance)?;

        let record = SessionRecord {
            role: step.role,
            frame_in_m,
            timestamp: step.time,
            commanded: step.pose,
            leg_temperatures: Some(dt_abs.map(|v| cfg.ambient_temperature + v)),
        };
        let truth = RecordTruth {
            role: step.role,
            time: step.time,
            commanded: step.pose,
            pose_t1,
            pose_actual,
            leg_dt,
            q_cold: q_cold.0,
            q_actual: q_actual.0,
        };
        Ok((record, truth))
    })?;

    let (records, truths): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let session = MeasurementSession::new(origin_frame, plan.origin_time, Some(origin_temps), records)?;
    Ok((
        session,
        GroundTruth {
            cmm_placement: cfg.cmm_placement,
            ball_layout: cfg.ball_layout,
            measured_relation: relation,
            records: truths,
        },
    ))
}

/// One target measurement of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// 1-based trial number.
    pub trial: usize,
    pub time: f64,
    /// Mean leg temperature change since t1 (K).
    pub mean_leg_dt: f64,
    /// Leg temperatures at the measurement (°C).
    pub leg_temperatures: Option<[f64; 6]>,
    pub air_temperature: Option<f64>,
    pub commanded: Pose6,
    pub conventional: Pose6,
    pub decoupled: Pose6,
    pub ground_truth: Option<Pose6>,
}

impl ComparisonRow {
    fn reference_pose(&self) -> Pose6 {
        self.ground_truth.unwrap_or(self.commanded)
    }

    /// Conventional estimate minus ground truth (or commanded pose).
    pub fn conventional_drift(&self) -> Pose6 {
        self.conventional.delta(&self.reference_pose())
    }

    pub fn decoupled_drift(&self) -> Pose6 {
        self.decoupled.delta(&self.reference_pose())
    }
}

/// Drift statistics of one pose component over the trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    /// max - min of the drift.
    pub range: f64,
    /// Drift per trial.
    pub slope: f64,
    pub slope_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub conventional: [ComponentStats; 6],
    pub decoupled: [ComponentStats; 6],
    /// Correlation of conventional Tz drift with mean leg temperature change.
    pub tz_temperature_correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub summary: ComparisonSummary,
}

fn component_stats(trials: &[f64], drift: &[f64]) -> ComponentStats {
    let lo = drift.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = drift.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let fit = linear_fit(trials, drift);
    ComponentStats {
        range: hi - lo,
        slope: fit.map_or(f64::NAN, |f| f.slope),
        slope_stderr: fit.map_or(f64::NAN, |f| f.slope_stderr),
    }
}

impl ComparisonReport {
    /// Builds the summary block from the rows.
    pub fn from_rows(rows: Vec<ComparisonRow>) -> Self {
        let trials: Vec<f64> = rows.iter().map(|r| r.trial as f64).collect();
        let conv: Vec<[f64; 6]> = rows.iter().map(|r| r.conventional_drift().to_array()).collect();
        let dec: Vec<[f64; 6]> = rows.iter().map(|r| r.decoupled_drift().to_array()).collect();
        let col = |m: &[[f64; 6]], c: usize| m.iter().map(|v| v[c]).collect::<Vec<_>>();
        let conventional = std::array::from_fn(|c| component_stats(&trials, &col(&conv, c)));
        let decoupled = std::array::from_fn(|c| component_stats(&trials, &col(&dec, c)));
        let dts: Vec<f64> = rows.iter().map(|r| r.mean_leg_dt).collect();
        let tz_temperature_correlation = pearson(&dts, &col(&conv, 2));
        Self {
            rows,
            summary: ComparisonSummary {
                conventional,
                decoupled,
                tz_temperature_correlation,
            },
        }
    }

    pub fn conventional_drift(&self, component: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.conventional_drift().to_array()[component]).collect()
    }

    pub fn decoupled_drift(&self, component: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.decoupled_drift().to_array()[component]).collect()
    }
}

/// Simulates the scenario and evaluates both estimates for every target.
pub fn run_comparison(cfg: &ScenarioConfig) -> Result<ComparisonReport, SimulationError> {
    run_comparison_with(cfg, &DecoupledOptions::default(), Execution::Parallel)
}

pub fn run_comparison_with(
    cfg: &ScenarioConfig,
    opts: &DecoupledOptions,
    exec: Execution,
) -> Result<ComparisonReport, SimulationError> {
    let (session, truth) = simulate_session_with(cfg, exec)?;
    comparison_from_session(&cfg.geometry, &cfg.thermal, &session, Some(&truth), Some(cfg.ambient_temperature), opts, exec)
}

/// Comparison rows for an existing session; ground truth is optional.
pub fn comparison_from_session(
    geom: &HexapodGeometry,
    model: &LegThermalModel,
    session: &MeasurementSession,
    truth: Option<&GroundTruth>,
    air_temperature: Option<f64>,
    opts: &DecoupledOptions,
    exec: Execution,
) -> Result<ComparisonReport, SimulationError> {
    let estimates = estimate_all(geom, model, session, opts, exec)?;
    let rows = estimates
        .into_iter()
        .enumerate()
        .map(|(k, e)| {
            let rec = &session.records()[e.record];
            let gt = truth.map(|t| &t.records[e.record]);
            ComparisonRow {
                trial: k + 1,
                time: e.timestamp,
                mean_leg_dt: e
                    .mean_leg_dt
                    .or_else(|| gt.map(|g| g.leg_dt.iter().sum::<f64>() / 6.0))
                    .unwrap_or(f64::NAN),
                leg_temperatures: rec.leg_temperatures,
                air_temperature,
                commanded: e.commanded,
                conventional: e.conventional.pose,
                decoupled: e.decoupled.pose,
                ground_truth: gt.map(|g| g.pose_t1),
            }
        })
        .collect();
    Ok(ComparisonReport::from_rows(rows))
}

/// Runs the same scenario under several seeds.
pub fn run_campaign(cfg: &ScenarioConfig, seeds: &[u64], exec: Execution) -> Result<Vec<ComparisonReport>, SimulationError> {
    par::try_map_indexed(exec, seeds.len(), |k| {
        let mut c = cfg.clone();
        c.rng_seed = seeds[k];
        // parallelism is across seeds; each run stays sequential
        run_comparison_with(&c, &DecoupledOptions::default(), Execution::Sequential)
    })
}

/// Per-seed trial-regression slopes of one drift component, pooled into a
/// zero-mean test.
pub fn pooled_slope_test(reports: &[ComparisonReport], component: usize, decoupled: bool, level: f64) -> stats::ZeroMeanTest {
    let slopes: Vec<f64> = reports
        .iter()
        .map(|r| {
            let s = if decoupled {
                &r.summary.decoupled[component]
            } else {
                &r.summary.conventional[component]
            };
            s.slope
        })
        .collect();
    stats::ZeroMeanTest::new(&slopes, level)
}

/// Mean drift per trial over several reports.
pub fn mean_drift_per_trial(reports: &[ComparisonReport], component: usize, decoupled: bool) -> Vec<f64> {
    let n = reports[0].rows.len();
    (0..n)
        .map(|k| {
            reports
                .iter()
                .map(|r| {
                    let row = &r.rows[k];
                    let d = if decoupled { row.decoupled_drift() } else { row.conventional_drift() };
                    d.to_array()[component]
                })
                .sum::<f64>()
                / reports.len() as f64
        })
        .collect()
}

/// Translation offset helper for invariance checks.
pub fn shifted(cfg: &ScenarioConfig, offset: Vector3<f64>) -> ScenarioConfig {
    let mut c = cfg.clone();
    c.cmm_placement = Transform3D::from_translation(offset).compose(&cfg.cmm_placement);
    c
}
