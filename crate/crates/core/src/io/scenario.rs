use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_units, AngleUnit, IoError, PoseEntry, ProjectConfig, FORMAT_VERSION, LENGTH_UNIT};
use crate::geometry::{pose_to_transform, Point3, EULER_CONVENTION};
use crate::metrology::BallPlateRelation;
use crate::pipeline::RecordRole;
use crate::simulator::{HeatingSchedule, Repeatability, ScenarioConfig, TrialPlan, TrialStep};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BallLayoutSection {
    /// Equilateral triangle in the plane `z = height_mm`.
    Equilateral { side_mm: f64, height_mm: f64 },
    Explicit { centres_mm: [[f64; 3]; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeatingSection {
    Constant {
        dt_k: [f64; 6],
    },
    Step {
        dt_k: [f64; 6],
        at_s: f64,
    },
    Ramp {
        final_dt_k: [f64; 6],
        ramp_start_s: f64,
    },
    /// Piecewise-linear `[time_s, dt_k]` pairs per leg.
    Table {
        legs: [Vec<[f64; 2]>; 6],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStepEntry {
    pub role: RecordRole,
    pub time_s: f64,
    pub pose: PoseEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanSection {
    ReferenceBracketed {
        reference: PoseEntry,
        target: PoseEntry,
        trials: usize,
        first_reference_s: f64,
        period_s: f64,
        reference_lag_s: f64,
    },
    Explicit {
        origin_time_s: f64,
        steps: Vec<PlanStepEntry>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepeatabilitySection {
    pub translation_mm: f64,
    /// In the file's angle unit.
    pub rotation: f64,
}

/// Simulation scenario. Geometry, thermal model and metrology defaults
/// come from the project config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub format_version: u32,
    pub euler_convention: String,
    pub length_unit: String,
    pub angle_unit: AngleUnit,
    pub seed: u64,
    pub probe_noise_sigma_mm: f64,
    pub ball_radius_mm: f64,
    /// Polar coverage of the probe pattern, in the file's angle unit.
    pub probe_max_polar: f64,
    pub ambient_temperature_c: f64,
    /// Pose of frame O in the CMM frame.
    pub cmm_placement: PoseEntry,
    pub ball_layout: BallLayoutSection,
    pub heating: HeatingSection,
    pub plan: PlanSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeatability: Option<RepeatabilitySection>,
}

impl ScenarioFile {
    /// Ten-trial reference-bracketed scenario with differential ramp heating.
    pub fn ten_trial(seed: u64, unit: AngleUnit) -> Self {
        let cfg = ScenarioConfig::ten_trial(seed);
        let pose = |p: &crate::geometry::Pose6| PoseEntry::from_pose(p, unit);
        let steps = &cfg.trial_plan.steps;
        Self {
            format_version: FORMAT_VERSION,
            euler_convention: EULER_CONVENTION.into(),
            length_unit: LENGTH_UNIT.into(),
            angle_unit: unit,
            seed,
            probe_noise_sigma_mm: cfg.probe_noise_sigma,
            ball_radius_mm: cfg.ball_radius,
            probe_max_polar: unit.from_rad(cfg.probe_max_polar),
            ambient_temperature_c: cfg.ambient_temperature,
            cmm_placement: pose(&crate::simulator::ten_trial_placement()),
            ball_layout: BallLayoutSection::Equilateral {
                side_mm: 150.0,
                height_mm: 25.0,
            },
            heating: HeatingSection::Ramp {
                final_dt_k: crate::simulator::TEN_TRIAL_FINAL_DT,
                ramp_start_s: 60.0,
            },
            plan: PlanSection::ReferenceBracketed {
                reference: pose(&steps[0].pose),
                target: pose(&steps[1].pose),
                trials: cfg.trial_plan.trial_count(),
                first_reference_s: steps[0].time,
                period_s: steps[1].time - steps[0].time,
                reference_lag_s: steps[2].time - steps[1].time,
            },
            repeatability: None,
        }
    }

    /// Builds the simulator configuration. The schedule spans from the
    /// origin to the last planned measurement.
    pub fn to_config(&self, project: &ProjectConfig, path: &Path) -> Result<ScenarioConfig, IoError> {
        check_units(path, &self.length_unit, Some(&self.euler_convention))?;
        let unit = self.angle_unit;
        let err = |e: &dyn std::fmt::Display| IoError::schema(path, e);

        let ball_layout = match &self.ball_layout {
            BallLayoutSection::Equilateral { side_mm, height_mm } => BallPlateRelation::equilateral(*side_mm, *height_mm),
            BallLayoutSection::Explicit { centres_mm } => {
                BallPlateRelation::new(centres_mm.map(|c| Point3::new(c[0], c[1], c[2])))
            }
        }
        .map_err(|e| err(&e))?;

        let trial_plan = match &self.plan {
            PlanSection::ReferenceBracketed {
                reference,
                target,
                trials,
                first_reference_s,
                period_s,
                reference_lag_s,
            } => {
                if *trials == 0 || !(*period_s > *reference_lag_s && *reference_lag_s > 0.0) {
                    return Err(err(&"plan needs trials > 0 and 0 < reference_lag_s < period_s"));
                }
                TrialPlan::reference_bracketed(
                    reference.to_pose(unit),
                    target.to_pose(unit),
                    *trials,
                    *first_reference_s,
                    *period_s,
                    *reference_lag_s,
                )
            }
            PlanSection::Explicit { origin_time_s, steps } => TrialPlan {
                origin_time: *origin_time_s,
                steps: steps
                    .iter()
                    .map(|s| TrialStep {
                        role: s.role,
                        pose: s.pose.to_pose(unit),
                        time: s.time_s,
                    })
                    .collect(),
            },
        };
        let start = trial_plan.origin_time;
        let end = trial_plan.end_time();
        let heating_schedule = match &self.heating {
            HeatingSection::Constant { dt_k } => HeatingSchedule::per_leg_constant(*dt_k, start, end),
            HeatingSection::Step { dt_k, at_s } => {
                if !(*at_s > start && *at_s < end) {
                    return Err(err(&"heating step must lie inside the plan"));
                }
                HeatingSchedule::step(*dt_k, *at_s, start, end)
            }
            HeatingSection::Ramp { final_dt_k, ramp_start_s } => {
                if !(*ramp_start_s > start && *ramp_start_s < end) {
                    return Err(err(&"ramp start must lie inside the plan"));
                }
                HeatingSchedule::ramp(*final_dt_k, start, *ramp_start_s, end)
            }
            HeatingSection::Table { legs } => {
                HeatingSchedule::new(legs.clone().map(|l| l.into_iter().map(|p| (p[0], p[1])).collect()))
                    .map_err(|e| err(&e))?
            }
        };
        let placement = self.cmm_placement.to_pose(unit);
        placement.validate().map_err(|e| err(&e))?;

        let cfg = ScenarioConfig {
            geometry: project.geometry.clone(),
            thermal: project.thermal.clone(),
            ball_layout,
            ball_radius: self.ball_radius_mm,
            points_per_ball: project.metrology.points_per_ball,
            probe_max_polar: unit.to_rad(self.probe_max_polar),
            probe_noise_sigma: self.probe_noise_sigma_mm,
            congruence_tolerance: project.metrology.congruence_tolerance_mm,
            heating_schedule,
            trial_plan,
            rng_seed: self.seed,
            cmm_placement: pose_to_transform(&placement),
            ambient_temperature: self.ambient_temperature_c,
            repeatability: self.repeatability.map(|r| Repeatability {
                translation: r.translation_mm,
                rotation: unit.to_rad(r.rotation),
            }),
        };
        cfg.validate().map_err(|e| err(&e))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{parse_toml, to_toml, MetrologyDefaults};
    use crate::kinematics::HexapodGeometry;
    use crate::pipeline::DecoupledOptions;
    use crate::thermal::LegThermalModel;

    fn project() -> ProjectConfig {
        ProjectConfig {
            geometry: HexapodGeometry::default_synthetic(),
            thermal: LegThermalModel::default_synthetic(),
            metrology: MetrologyDefaults::default(),
            angle_unit: AngleUnit::Deg,
            decoupled: DecoupledOptions::default(),
            budget: Default::default(),
        }
    }

    #[test]
    fn ten_trial_file_matches_builtin() {
        let p = Path::new("s.toml");
        let f = ScenarioFile::ten_trial(7, AngleUnit::Rad);
        let back: ScenarioFile = parse_toml(&to_toml(&f), p).unwrap();
        assert_eq!(back, f);
        let cfg = back.to_config(&project(), p).unwrap();
        let builtin = ScenarioConfig::ten_trial(7);
        assert_eq!(cfg.trial_plan, builtin.trial_plan);
        assert_eq!(cfg.heating_schedule, builtin.heating_schedule);
        assert_eq!(cfg.ball_layout, builtin.ball_layout);
        assert!(cfg.cmm_placement.rotation_angle_to(&builtin.cmm_placement) < 1e-15);
    }

    #[test]
    fn degree_file_roundtrips() {
        let p = Path::new("s.toml");
        let f = ScenarioFile::ten_trial(1, AngleUnit::Deg);
        let text = to_toml(&f);
        assert!(text.contains("kind = \"ramp\""));
        let back: ScenarioFile = parse_toml(&text, p).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn table_heating_and_explicit_plan() {
        let text = r#"
format_version = 1
euler_convention = "fixed-XYZ"
length_unit = "mm"
angle_unit = "deg"
seed = 3
probe_noise_sigma_mm = 0.0
ball_radius_mm = 12.7
probe_max_polar = 110.0
ambient_temperature_c = 20.0
cmm_placement = { tx = 0.0, ty = 0.0, tz = 0.0, rx = 0.0, ry = 0.0, rz = 0.0 }
ball_layout = { kind = "equilateral", side_mm = 150.0, height_mm = 25.0 }

[heating]
kind = "table"
legs = [[[0.0, 0.0], [100.0, 1.0]], [[0.0, 0.0], [100.0, 1.0]], [[0.0, 0.0], [100.0, 1.0]],
        [[0.0, 0.0], [100.0, 1.0]], [[0.0, 0.0], [100.0, 1.0]], [[0.0, 0.0], [100.0, 2.0]]]

[plan]
kind = "explicit"
origin_time_s = 0.0
steps = [
  { role = "ref_before", time_s = 1.0, pose = { tx = 0.0, ty = 0.0, tz = -40.0, rx = 0.0, ry = 0.0, rz = 0.0 } },
  { role = "target", time_s = 50.0, pose = { tx = 1.0, ty = 0.0, tz = 0.0, rx = 0.5, ry = 0.0, rz = 0.0 } },
  { role = "ref_after", time_s = 60.0, pose = { tx = 0.0, ty = 0.0, tz = -40.0, rx = 0.0, ry = 0.0, rz = 0.0 } },
]
"#;
        let p = Path::new("s.toml");
        let f: ScenarioFile = parse_toml(text, p).unwrap();
        let cfg = f.to_config(&project(), p).unwrap();
        assert_eq!(cfg.heating_schedule.at(50.0).unwrap()[5], 1.0);
        assert!((cfg.trial_plan.steps[1].pose.rx - 0.5f64.to_radians()).abs() < 1e-16);
        let back: ScenarioFile = parse_toml(&to_toml(&f), p).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn schedule_outside_plan_rejected() {
        let mut f = ScenarioFile::ten_trial(1, AngleUnit::Deg);
        f.heating = HeatingSection::Step {
            dt_k: [1.0; 6],
            at_s: 1e9,
        };
        assert!(matches!(f.to_config(&project(), Path::new("s")), Err(IoError::Schema { .. })));
    }
}
