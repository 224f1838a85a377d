use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_units, AngleUnit, FrameEntry, IoError, PoseEntry, FORMAT_VERSION, LENGTH_UNIT};
use crate::geometry::EULER_CONVENTION;
use crate::pipeline::{BudgetViolation, MeasurementSession, RecordRole, SessionRecord, TargetEstimates};
use crate::simulator::GroundTruth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginSection {
    pub timestamp_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leg_temperatures_c: Option<[f64; 6]>,
    pub frame: FrameEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub role: RecordRole,
    pub timestamp_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leg_temperatures_c: Option<[f64; 6]>,
    pub commanded: PoseEntry,
    pub frame: FrameEntry,
}

/// Measured frames of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionFile {
    pub format_version: u32,
    pub euler_convention: String,
    pub length_unit: String,
    pub angle_unit: AngleUnit,
    pub origin: OriginSection,
    pub records: Vec<RecordEntry>,
}

impl SessionFile {
    pub fn from_session(s: &MeasurementSession, unit: AngleUnit) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            euler_convention: EULER_CONVENTION.into(),
            length_unit: LENGTH_UNIT.into(),
            angle_unit: unit,
            origin: OriginSection {
                timestamp_s: s.origin_timestamp(),
                leg_temperatures_c: s.origin_temperatures().copied(),
                frame: FrameEntry::from_transform(s.origin_frame()),
            },
            records: s
                .records()
                .iter()
                .map(|r| RecordEntry {
                    role: r.role,
                    timestamp_s: r.timestamp,
                    leg_temperatures_c: r.leg_temperatures,
                    commanded: PoseEntry::from_pose(&r.commanded, unit),
                    frame: FrameEntry::from_transform(&r.frame_in_m),
                })
                .collect(),
        }
    }

    pub fn to_session(&self, path: &Path) -> Result<MeasurementSession, IoError> {
        check_units(path, &self.length_unit, Some(&self.euler_convention))?;
        let bad = |what: String, e: &dyn std::fmt::Display| IoError::schema(path, format!("{what}: {e}"));
        let origin = self.origin.frame.to_transform().map_err(|e| bad("origin frame".into(), &e))?;
        let records = self
            .records
            .iter()
            .enumerate()
            .map(|(k, r)| {
                Ok(SessionRecord {
                    role: r.role,
                    frame_in_m: r.frame.to_transform().map_err(|e| bad(format!("record {k} frame"), &e))?,
                    timestamp: r.timestamp_s,
                    commanded: r.commanded.to_pose(self.angle_unit),
                    leg_temperatures: r.leg_temperatures_c,
                })
            })
            .collect::<Result<Vec<_>, IoError>>()?;
        MeasurementSession::new(origin, self.origin.timestamp_s, self.origin.leg_temperatures_c, records)
            .map_err(|e| IoError::schema(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecordEntry {
    pub role: RecordRole,
    pub timestamp_s: f64,
    pub commanded: PoseEntry,
    /// Pose at the origin leg temperatures.
    pub pose_t1: PoseEntry,
    /// Pose when measured.
    pub pose_actual: PoseEntry,
    pub leg_dt_k: [f64; 6],
    pub q_cold_mm: [f64; 6],
    pub q_actual_mm: [f64; 6],
}

/// Simulator ground truth, kept apart from the session it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub format_version: u32,
    pub euler_convention: String,
    pub length_unit: String,
    pub angle_unit: AngleUnit,
    pub cmm_placement: FrameEntry,
    /// Ball centres in the platform frame, as designed.
    pub ball_layout_mm: [[f64; 3]; 3],
    /// Ball centres as established from the origin measurement.
    pub measured_relation_mm: [[f64; 3]; 3],
    pub records: Vec<GroundTruthRecordEntry>,
}

impl GroundTruthFile {
    pub fn from_truth(t: &GroundTruth, unit: AngleUnit) -> Self {
        let balls = |r: &crate::metrology::BallPlateRelation| r.balls().map(|p| [p.x, p.y, p.z]);
        Self {
            format_version: FORMAT_VERSION,
            euler_convention: EULER_CONVENTION.into(),
            length_unit: LENGTH_UNIT.into(),
            angle_unit: unit,
            cmm_placement: FrameEntry::from_transform(&t.cmm_placement),
            ball_layout_mm: balls(&t.ball_layout),
            measured_relation_mm: balls(&t.measured_relation),
            records: t
                .records
                .iter()
                .map(|r| GroundTruthRecordEntry {
                    role: r.role,
                    timestamp_s: r.time,
                    commanded: PoseEntry::from_pose(&r.commanded, unit),
                    pose_t1: PoseEntry::from_pose(&r.pose_t1, unit),
                    pose_actual: PoseEntry::from_pose(&r.pose_actual, unit),
                    leg_dt_k: r.leg_dt,
                    q_cold_mm: r.q_cold,
                    q_actual_mm: r.q_actual,
                })
                .collect(),
        }
    }

    pub fn validate(&self, path: &Path) -> Result<(), IoError> {
        check_units(path, &self.length_unit, Some(&self.euler_convention))
    }

    /// Ground-truth t1 poses (rad) of the given record.
    pub fn pose_t1(&self, record: usize) -> Option<crate::geometry::Pose6> {
        self.records.get(record).map(|r| r.pose_t1.to_pose(self.angle_unit))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateEntry {
    /// Index into the session's time-ordered records.
    pub record: usize,
    pub timestamp_s: f64,
    pub reference_t1_record: usize,
    pub reference_t2_record: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_leg_dt_k: Option<f64>,
    pub commanded: PoseEntry,
    pub conventional: PoseEntry,
    pub decoupled: PoseEntry,
    pub dq_ref_mm: [f64; 6],
    pub dq_target_mm: [f64; 6],
    pub implied_dt_k: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetWarningEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<usize>,
    pub reference: usize,
    pub message: String,
}

/// Output of the correction command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatesFile {
    pub format_version: u32,
    pub euler_convention: String,
    pub length_unit: String,
    pub angle_unit: AngleUnit,
    pub estimates: Vec<EstimateEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<BudgetWarningEntry>,
}

impl EstimatesFile {
    pub fn new(estimates: &[TargetEstimates], warnings: &[BudgetViolation], unit: AngleUnit) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            euler_convention: EULER_CONVENTION.into(),
            length_unit: LENGTH_UNIT.into(),
            angle_unit: unit,
            estimates: estimates
                .iter()
                .map(|e| {
                    let d = e.decoupled.diagnostics.as_ref().expect("decoupled estimates carry diagnostics");
                    EstimateEntry {
                        record: e.record,
                        timestamp_s: e.timestamp,
                        reference_t1_record: d.reference_t1,
                        reference_t2_record: d.reference_t2,
                        mean_leg_dt_k: e.mean_leg_dt,
                        commanded: PoseEntry::from_pose(&e.commanded, unit),
                        conventional: PoseEntry::from_pose(&e.conventional.pose, unit),
                        decoupled: PoseEntry::from_pose(&e.decoupled.pose, unit),
                        dq_ref_mm: d.dq_ref.0,
                        dq_target_mm: d.dq_target.0,
                        implied_dt_k: d.implied_dt,
                    }
                })
                .collect(),
            warnings: warnings
                .iter()
                .map(|w| BudgetWarningEntry {
                    record: w.record,
                    reference: w.reference,
                    message: w.message.clone(),
                })
                .collect(),
        }
    }

    pub fn validate(&self, path: &Path) -> Result<(), IoError> {
        check_units(path, &self.length_unit, Some(&self.euler_convention))
    }
}
