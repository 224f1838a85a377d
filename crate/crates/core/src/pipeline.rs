//! Pose estimates from a measurement session.
//!
//! The conventional estimate is the measured target frame relative to the
//! origin frame. The decoupled estimate removes the leg growth that happened
//! since the origin was measured:
//!
//! 1. poses of R(t1), R(t2) and S(t2) relative to O(t1),
//! 2. leg lengths of all three through the inverse model,
//! 3. `dq_ref = q_R(t2) - q_R(t1)`,
//! 4. `dq_ref` rescaled to the target's leg lengths,
//! 5. `q_S(t1) = q_S(t2) - dq_target`,
//! 6. forward model on `q_S(t1)`, starting from the measured S(t2) pose.
//!
//! R(t1) is the earliest `RefBefore` record of the session (measured right
//! after the origin); R(t2) is the reference record nearest in time to the
//! target, the later one on ties. A session with a single reference therefore
//! pairs it with itself, which yields `dq_ref = 0` and the conventional pose.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{transform_to_pose, GeometryError, Pose6, Transform3D};
use crate::kinematics::{fgm_with, igm, FgmOptions, HexapodGeometry, KinematicsError, LegLengths};
use crate::par::{self, Execution};
use crate::thermal::{
    implied_leg_temperature_rise, reference_deflection, scale_deflection, scale_deflection_to_hot_lengths,
    LegDeflections, LegThermalModel, ThermalError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("session has no target record")]
    MissingTarget,
    #[error("session has {0} target records; use the per-target functions")]
    MultipleTargets(usize),
    #[error("missing reference: {0}")]
    MissingReference(String),
    #[error("invalid session: {0}")]
    InvalidSession(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Thermal(#[from] ThermalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordRole {
    RefBefore,
    Target,
    RefAfter,
}

impl RecordRole {
    pub fn is_reference(self) -> bool {
        matches!(self, RecordRole::RefBefore | RecordRole::RefAfter)
    }
}

/// One measured platform frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub role: RecordRole,
    /// Platform frame in the CMM frame.
    pub frame_in_m: Transform3D,
    /// Seconds since an arbitrary session epoch.
    pub timestamp: f64,
    /// Pose the hexapod was commanded to, relative to O.
    pub commanded: Pose6,
    /// Leg temperatures (°C), diagnostic only.
    pub leg_temperatures: Option<[f64; 6]>,
}

/// Origin frame plus time-ordered measured frames.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSession {
    origin_frame: Transform3D,
    origin_timestamp: f64,
    origin_temperatures: Option<[f64; 6]>,
    records: Vec<SessionRecord>,
}

impl MeasurementSession {
    /// Sorts records by timestamp; timestamps must be finite, distinct and
    /// not earlier than the origin measurement.
    pub fn new(
        origin_frame: Transform3D,
        origin_timestamp: f64,
        origin_temperatures: Option<[f64; 6]>,
        mut records: Vec<SessionRecord>,
    ) -> Result<Self, PipelineError> {
        if !origin_timestamp.is_finite() {
            return Err(PipelineError::InvalidSession("origin timestamp is not finite".into()));
        }
        if let Some(r) = records.iter().find(|r| !r.timestamp.is_finite()) {
            return Err(PipelineError::InvalidSession(format!("timestamp {} is not finite", r.timestamp)));
        }
        records.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        for w in records.windows(2) {
            if w[1].timestamp <= w[0].timestamp {
                return Err(PipelineError::InvalidSession(format!(
                    "duplicate timestamp {} s",
                    w[0].timestamp
                )));
            }
        }
        if let Some(first) = records.first() {
            if first.timestamp < origin_timestamp {
                return Err(PipelineError::InvalidSession(format!(
                    "record at {} s precedes the origin measurement at {} s",
                    first.timestamp, origin_timestamp
                )));
            }
        }
        for r in &records {
            r.commanded.validate()?;
        }
        Ok(Self {
            origin_frame,
            origin_timestamp,
            origin_temperatures,
            records,
        })
    }

    pub fn origin_frame(&self) -> &Transform3D {
        &self.origin_frame
    }

    pub fn origin_timestamp(&self) -> f64 {
        self.origin_timestamp
    }

    pub fn origin_temperatures(&self) -> Option<&[f64; 6]> {
        self.origin_temperatures.as_ref()
    }

    /// Records in time order.
    pub fn records(&self) -> &[SessionRecord] {
        &self.records
    }

    pub fn target_indices(&self) -> Vec<usize> {
        self.indices_where(|r| r.role == RecordRole::Target)
    }

    pub fn reference_indices(&self) -> Vec<usize> {
        self.indices_where(|r| r.role.is_reference())
    }

    fn indices_where(&self, pred: impl Fn(&SessionRecord) -> bool) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| pred(r))
            .map(|(i, _)| i)
            .collect()
    }

    /// Commanded pose of the t1 reference, if any.
    pub fn reference_pose_commanded(&self) -> Option<Pose6> {
        self.records
            .iter()
            .find(|r| r.role == RecordRole::RefBefore)
            .map(|r| r.commanded)
    }

    /// Measured pose of record `index` relative to the origin frame.
    pub fn measured_pose(&self, index: usize) -> Result<Pose6, PipelineError> {
        let rec = &self.records[index];
        Ok(transform_to_pose(&self.origin_frame.inverse().compose(&rec.frame_in_m))?)
    }

    fn single_target(&self) -> Result<usize, PipelineError> {
        match self.target_indices().as_slice() {
            [] => Err(PipelineError::MissingTarget),
            [one] => Ok(*one),
            many => Err(PipelineError::MultipleTargets(many.len())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    Conventional,
    Decoupled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledDiagnostics {
    pub reference_t1: usize,
    pub reference_t2: usize,
    pub dq_ref: LegDeflections,
    pub dq_target: LegDeflections,
    /// Leg temperature rise implied by `dq_ref` (K).
    pub implied_dt: [f64; 6],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseEstimate {
    pub pose: Pose6,
    pub method: EstimateMethod,
    pub diagnostics: Option<DecoupledDiagnostics>,
}

/// Which steel length the target deflection is scaled to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteelLengthBasis {
    /// Solve for the cold (t1) target leg length self-consistently.
    #[default]
    Cold,
    /// Use the hot target leg lengths `q_S(t2)` as measured.
    MeasuredHot,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecoupledOptions {
    pub basis: SteelLengthBasis,
    pub fgm: FgmOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferencePair {
    pub target: usize,
    pub t1: usize,
    pub t2: usize,
}

/// Chooses R(t1) and R(t2) for every target of the session.
pub fn reference_pair_strategy(session: &MeasurementSession) -> Result<Vec<ReferencePair>, PipelineError> {
    let records = session.records();
    let t1 = records
        .iter()
        .position(|r| r.role == RecordRole::RefBefore)
        .ok_or_else(|| PipelineError::MissingReference("no RefBefore record to anchor t1".into()))?;
    let refs = session.reference_indices();
    Ok(session
        .target_indices()
        .into_iter()
        .map(|target| {
            let ts = records[target].timestamp;
            let mut best = refs[0];
            for &r in &refs[1..] {
                let d_best = (records[best].timestamp - ts).abs();
                let d = (records[r].timestamp - ts).abs();
                // refs are time ordered, so `<=` lets the later one win ties
                if d <= d_best {
                    best = r;
                }
            }
            ReferencePair { target, t1, t2: best }
        })
        .collect())
}

/// Conventional estimate for the session's single target.
pub fn conventional_pose(session: &MeasurementSession) -> Result<PoseEstimate, PipelineError> {
    conventional_pose_for(session, session.single_target()?)
}

pub fn conventional_pose_for(session: &MeasurementSession, target: usize) -> Result<PoseEstimate, PipelineError> {
    if session.records().get(target).map(|r| r.role) != Some(RecordRole::Target) {
        return Err(PipelineError::MissingTarget);
    }
    Ok(PoseEstimate {
        pose: session.measured_pose(target)?,
        method: EstimateMethod::Conventional,
        diagnostics: None,
    })
}

/// Decoupled estimate for the session's single target.
pub fn decoupled_pose(
    geom: &HexapodGeometry,
    model: &LegThermalModel,
    session: &MeasurementSession,
) -> Result<PoseEstimate, PipelineError> {
    decoupled_pose_with(geom, model, session, &DecoupledOptions::default())
}

pub fn decoupled_pose_with(
    geom: &HexapodGeometry,
    model: &LegThermalModel,
    session: &MeasurementSession,
    opts: &DecoupledOptions,
) -> Result<PoseEstimate, PipelineError> {
    let target = session.single_target()?;
    let pair = reference_pair_strategy(session)?
        .into_iter()
        .find(|p| p.target == target)
        .ok_or(PipelineError::MissingTarget)?;
    decoupled_for_pair(geom, model, session, &pair, opts)
}

/// Runs the decoupled correction for one target and its chosen references.
pub fn decoupled_for_pair(
    geom: &HexapodGeometry,
    model: &LegThermalModel,
    session: &MeasurementSession,
    pair: &ReferencePair,
    opts: &DecoupledOptions,
) -> Result<PoseEstimate, PipelineError> {
    let x_r_t1 = session.measured_pose(pair.t1)?;
    let x_r_t2 = session.measured_pose(pair.t2)?;
    let x_s_t2 = session.measured_pose(pair.target)?;

    let q_r_t1 = igm(geom, &x_r_t1)?;
    let q_r_t2 = igm(geom, &x_r_t2)?;
    let q_s_t2 = igm(geom, &x_s_t2)?;

    let dq_ref = reference_deflection(&q_r_t1, &q_r_t2)?;
    let dq_target = match opts.basis {
        SteelLengthBasis::Cold => scale_deflection_to_hot_lengths(model, &dq_ref, &q_r_t1, &q_s_t2)?,
        SteelLengthBasis::MeasuredHot => scale_deflection(model, &dq_ref, &q_r_t1, &q_s_t2)?,
    };
    let q_s_t1 = LegLengths::new(std::array::from_fn(|i| q_s_t2[i] - dq_target.0[i]))?;
    let pose = fgm_with(geom, &q_s_t1, &x_s_t2, &opts.fgm)?;
    let implied_dt = implied_leg_temperature_rise(model, &dq_ref, &q_r_t1)?;

    Ok(PoseEstimate {
        pose,
        method: EstimateMethod::Decoupled,
        diagnostics: Some(DecoupledDiagnostics {
            reference_t1: pair.t1,
            reference_t2: pair.t2,
            dq_ref,
            dq_target,
            implied_dt,
        }),
    })
}

/// Both estimates for one target record.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetEstimates {
    pub record: usize,
    pub timestamp: f64,
    pub commanded: Pose6,
    pub conventional: PoseEstimate,
    pub decoupled: PoseEstimate,
    /// Mean leg temperature change since t1 (K), when temperatures were logged.
    pub mean_leg_dt: Option<f64>,
}

/// Conventional and decoupled estimates for every target of the session.
pub fn estimate_all(
    geom: &HexapodGeometry,
    model: &LegThermalModel,
    session: &MeasurementSession,
    opts: &DecoupledOptions,
    exec: Execution,
) -> Result<Vec<TargetEstimates>, PipelineError> {
    let pairs = reference_pair_strategy(session)?;
    if pairs.is_empty() {
        return Err(PipelineError::MissingTarget);
    }
    par::try_map_indexed(exec, pairs.len(), |k| {
        let pair = &pairs[k];
        let rec = &session.records()[pair.target];
        Ok(TargetEstimates {
            record: pair.target,
            timestamp: rec.timestamp,
            commanded: rec.commanded,
            conventional: conventional_pose_for(session, pair.target)?,
            decoupled: decoupled_for_pair(geom, model, session, pair, opts)?,
            mean_leg_dt: mean_leg_temperature_change(session, pair),
        })
    })
}

fn mean(v: &[f64; 6]) -> f64 {
    v.iter().sum::<f64>() / 6.0
}

/// Mean leg temperature at the target minus the mean at t1 (origin
/// temperatures if logged, else those of R(t1)).
pub fn mean_leg_temperature_change(session: &MeasurementSession, pair: &ReferencePair) -> Option<f64> {
    let at_target = session.records()[pair.target].leg_temperatures?;
    let at_t1 = session
        .origin_temperatures()
        .copied()
        .or(session.records()[pair.t1].leg_temperatures)?;
    Some(mean(&at_target) - mean(&at_t1))
}

/// Limits on how far apart paired measurements may be.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceBudget {
    /// Maximum time between a measurement and its paired reference (s).
    pub max_gap_s: Option<f64>,
    /// Maximum change of any leg temperature between them (K).
    pub max_leg_temperature_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetViolation {
    /// Record index of the measurement (None for the origin).
    pub record: Option<usize>,
    pub reference: usize,
    pub message: String,
}

/// Checks every pairing against the budget. Violations are reported, not
/// enforced.
pub fn check_reference_budget(
    session: &MeasurementSession,
    budget: &ReferenceBudget,
) -> Result<Vec<BudgetViolation>, PipelineError> {
    let pairs = reference_pair_strategy(session)?;
    let records = session.records();
    let mut out = Vec::new();
    let mut check = |record: Option<usize>, t: f64, temps: Option<[f64; 6]>, reference: usize| {
        let r = &records[reference];
        let gap = (r.timestamp - t).abs();
        if let Some(max) = budget.max_gap_s {
            if gap > max {
                out.push(BudgetViolation {
                    record,
                    reference,
                    message: format!("{gap} s between measurement and reference exceeds {max} s"),
                });
            }
        }
        if let (Some(max), Some(a), Some(b)) = (budget.max_leg_temperature_change, temps, r.leg_temperatures) {
            let change = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            if change > max {
                out.push(BudgetViolation {
                    record,
                    reference,
                    message: format!("leg temperature changed by {change} K, budget {max} K"),
                });
            }
        }
    };
    if let Some(first) = pairs.first() {
        check(None, session.origin_timestamp(), session.origin_temperatures, first.t1);
    }
    for p in &pairs {
        let rec = &records[p.target];
        check(Some(p.target), rec.timestamp, rec.leg_temperatures, p.t2);
    }
    Ok(out)
}
