use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_units, AngleUnit, IoError, PoseEntry, FORMAT_VERSION, LENGTH_UNIT};
use crate::geometry::{Pose6, EULER_CONVENTION};
use crate::simulator::{ComparisonReport, ComponentStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub trial: usize,
    pub time_s: f64,
    pub mean_leg_dt_k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub air_temperature_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leg_temperatures_c: Option<[f64; 6]>,
    pub commanded: PoseEntry,
    pub conventional: PoseEntry,
    pub decoupled: PoseEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PoseEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentStatsEntry {
    pub component: String,
    /// `mm` or the file's angle unit; slopes are per trial.
    pub unit: String,
    pub range: f64,
    pub slope_per_trial: f64,
    pub slope_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarySection {
    /// Drift is the estimate minus ground truth, or minus the commanded
    /// pose when no ground truth exists.
    pub drift_reference: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tz_temperature_correlation: Option<f64>,
    pub conventional: Vec<ComponentStatsEntry>,
    pub decoupled: Vec<ComponentStatsEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub format_version: u32,
    pub euler_convention: String,
    pub length_unit: String,
    pub angle_unit: AngleUnit,
    pub trial_count: usize,
    pub rows: Vec<ReportRow>,
    pub summary: SummarySection,
}

fn component_unit(c: usize, unit: AngleUnit) -> &'static str {
    if c < 3 {
        LENGTH_UNIT
    } else {
        unit.as_str()
    }
}

fn stats_entries(stats: &[ComponentStats; 6], unit: AngleUnit) -> Vec<ComponentStatsEntry> {
    stats
        .iter()
        .enumerate()
        .map(|(c, s)| {
            let conv = |v: f64| if c < 3 { v } else { unit.from_rad(v) };
            ComponentStatsEntry {
                component: Pose6::COMPONENTS[c].into(),
                unit: component_unit(c, unit).into(),
                range: conv(s.range),
                slope_per_trial: conv(s.slope),
                slope_stderr: conv(s.slope_stderr),
            }
        })
        .collect()
}

impl ReportFile {
    pub fn from_report(r: &ComparisonReport, unit: AngleUnit) -> Self {
        let pose = |p: &Pose6| PoseEntry::from_pose(p, unit);
        let has_truth = r.rows.iter().all(|row| row.ground_truth.is_some());
        Self {
            format_version: FORMAT_VERSION,
            euler_convention: EULER_CONVENTION.into(),
            length_unit: LENGTH_UNIT.into(),
            angle_unit: unit,
            trial_count: r.rows.len(),
            rows: r
                .rows
                .iter()
                .map(|row| ReportRow {
                    trial: row.trial,
                    time_s: row.time,
                    mean_leg_dt_k: row.mean_leg_dt,
                    air_temperature_c: row.air_temperature,
                    leg_temperatures_c: row.leg_temperatures,
                    commanded: pose(&row.commanded),
                    conventional: pose(&row.conventional),
                    decoupled: pose(&row.decoupled),
                    ground_truth: row.ground_truth.as_ref().map(pose),
                })
                .collect(),
            summary: SummarySection {
                drift_reference: if has_truth { "ground_truth" } else { "commanded" }.into(),
                tz_temperature_correlation: r.summary.tz_temperature_correlation,
                conventional: stats_entries(&r.summary.conventional, unit),
                decoupled: stats_entries(&r.summary.decoupled, unit),
            },
        }
    }

    pub fn validate(&self, path: &Path) -> Result<(), IoError> {
        check_units(path, &self.length_unit, Some(&self.euler_convention))?;
        if self.rows.len() != self.trial_count {
            return Err(IoError::schema(
                path,
                format!("trial_count {} but {} rows", self.trial_count, self.rows.len()),
            ));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct LongRow<'a> {
    trial: usize,
    series: &'a str,
    component: &'a str,
    value: f64,
    unit: &'a str,
}

fn pose_values(p: &PoseEntry) -> [f64; 6] {
    [p.tx, p.ty, p.tz, p.rx, p.ry, p.rz]
}

/// Plot-ready table: one line per trial, series and component.
pub fn report_long_csv(report: &ReportFile) -> String {
    let unit = report.angle_unit;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut put = |trial, series, component, value, unit| {
        w.serialize(LongRow {
            trial,
            series,
            component,
            value,
            unit,
        })
        .expect("in-memory csv write");
    };
    for row in &report.rows {
        let reference = row.ground_truth.as_ref().unwrap_or(&row.commanded);
        let mut series: Vec<(&str, [f64; 6])> = vec![
            ("commanded", pose_values(&row.commanded)),
            ("conventional", pose_values(&row.conventional)),
            ("decoupled", pose_values(&row.decoupled)),
        ];
        if let Some(gt) = &row.ground_truth {
            series.push(("ground_truth", pose_values(gt)));
        }
        let r = pose_values(reference);
        let diff = |p: &PoseEntry| -> [f64; 6] {
            let v = pose_values(p);
            std::array::from_fn(|i| v[i] - r[i])
        };
        series.push(("conventional_drift", diff(&row.conventional)));
        series.push(("decoupled_drift", diff(&row.decoupled)));
        for (name, values) in series {
            for (c, v) in values.iter().enumerate() {
                put(row.trial, name, Pose6::COMPONENTS[c], *v, component_unit(c, unit));
            }
        }
        put(row.trial, "mean_leg_dt", "mean", row.mean_leg_dt_k, "K");
        if let Some(t) = row.leg_temperatures_c {
            const LEGS: [&str; 6] = ["leg1", "leg2", "leg3", "leg4", "leg5", "leg6"];
            for (l, v) in t.iter().enumerate() {
                put(row.trial, "leg_temperature", LEGS[l], *v, "degC");
            }
        }
        if let Some(a) = row.air_temperature_c {
            put(row.trial, "air_temperature", "air", a, "degC");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8 csv")
}
