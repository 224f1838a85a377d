//! File formats.
//!
//! Structured files are TOML. Every file starts with `format_version`, a
//! `length_unit` (always `"mm"`) and, where angles appear, an `angle_unit`
//! (`"deg"` or `"rad"`) plus the Euler convention tag. Probe points are a
//! flat CSV table; reports are also emitted as long-format CSV.

mod config;
mod points;
mod report;
mod scenario;
mod session;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose6, Transform3D, EULER_CONVENTION};

pub use config::{GeometryFile, MetrologyDefaults, PerLeg, ProjectConfig, ProjectConfigFile, ThermalSection};
pub use points::{read_probe_points, write_probe_points, ProbePoints, SphereFitEntry, SphereFitFile};
pub use report::{report_long_csv, ComponentStatsEntry, ReportFile, ReportRow, SummarySection};
pub use scenario::{BallLayoutSection, HeatingSection, PlanSection, PlanStepEntry, ScenarioFile};
pub use session::{
    BudgetWarningEntry, EstimateEntry, EstimatesFile, GroundTruthFile, GroundTruthRecordEntry, OriginSection,
    RecordEntry, SessionFile,
};

pub const FORMAT_VERSION: u32 = 1;
pub const LENGTH_UNIT: &str = "mm";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: unsupported format_version {found} (supported: {supported})")]
    UnsupportedVersion { path: PathBuf, found: String, supported: u32 },
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
}

impl IoError {
    pub(crate) fn schema(path: &Path, message: impl fmt::Display) -> Self {
        IoError::Schema {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    /// True for errors caused by file content rather than the file system.
    pub fn is_content_error(&self) -> bool {
        !matches!(self, IoError::Io { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    #[default]
    Deg,
    Rad,
}

impl AngleUnit {
    pub fn from_rad(self, v: f64) -> f64 {
        match self {
            AngleUnit::Deg => v.to_degrees(),
            AngleUnit::Rad => v,
        }
    }

    pub fn to_rad(self, v: f64) -> f64 {
        match self {
            AngleUnit::Deg => v.to_radians(),
            AngleUnit::Rad => v,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AngleUnit::Deg => "deg",
            AngleUnit::Rad => "rad",
        }
    }
}

impl fmt::Display for AngleUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AngleUnit {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "deg" => Ok(AngleUnit::Deg),
            "rad" => Ok(AngleUnit::Rad),
            other => Err(format!("unknown angle unit '{other}' (expected deg or rad)")),
        }
    }
}

/// Pose as written to files: mm and the file's angle unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseEntry {
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

impl PoseEntry {
    pub fn from_pose(p: &Pose6, unit: AngleUnit) -> Self {
        Self {
            tx: p.tx,
            ty: p.ty,
            tz: p.tz,
            rx: unit.from_rad(p.rx),
            ry: unit.from_rad(p.ry),
            rz: unit.from_rad(p.rz),
        }
    }

    pub fn to_pose(&self, unit: AngleUnit) -> Pose6 {
        Pose6::new(
            self.tx,
            self.ty,
            self.tz,
            unit.to_rad(self.rx),
            unit.to_rad(self.ry),
            unit.to_rad(self.rz),
        )
    }
}

/// Rigid frame as a row-major rotation matrix plus translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub rotation: [[f64; 3]; 3],
    pub translation_mm: [f64; 3],
}

impl FrameEntry {
    pub fn from_transform(t: &Transform3D) -> Self {
        let r = t.rotation();
        let v = t.translation();
        Self {
            rotation: std::array::from_fn(|i| std::array::from_fn(|j| r[(i, j)])),
            translation_mm: [v.x, v.y, v.z],
        }
    }

    pub fn to_transform(&self) -> Result<Transform3D, crate::geometry::GeometryError> {
        let r = Matrix3::from_fn(|i, j| self.rotation[i][j]);
        Transform3D::new(r, Vector3::from(self.translation_mm))
    }
}

/// Common header checks.
pub(crate) fn check_units(path: &Path, length_unit: &str, convention: Option<&str>) -> Result<(), IoError> {
    if length_unit != LENGTH_UNIT {
        return Err(IoError::schema(
            path,
            format!("length_unit '{length_unit}' not supported (expected '{LENGTH_UNIT}')"),
        ));
    }
    if let Some(c) = convention {
        if c != EULER_CONVENTION {
            return Err(IoError::schema(
                path,
                format!("euler_convention '{c}' not supported (expected '{EULER_CONVENTION}')"),
            ));
        }
    }
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a TOML document after checking its `format_version`. `path` is
/// only used in error messages.
pub fn parse_toml<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T, IoError> {
    let parse_err = |message: String| IoError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
    match table.get("format_version") {
        None => return Err(IoError::schema(path, "missing format_version")),
        Some(toml::Value::Integer(v)) if *v == FORMAT_VERSION as i64 => {}
        Some(other) => {
            return Err(IoError::UnsupportedVersion {
                path: path.to_path_buf(),
                found: other.to_string(),
                supported: FORMAT_VERSION,
            })
        }
    }
    table.try_into().map_err(|e: toml::de::Error| parse_err(e.to_string()))
}

pub fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("file schemas serialize to TOML")
}

pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    parse_toml(&read_text(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pose_to_transform;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct Tiny {
        format_version: u32,
        x_mm: f64,
    }

    #[test]
    fn version_checked_before_fields() {
        let p = Path::new("t.toml");
        assert!(parse_toml::<Tiny>("format_version = 1\nx_mm = 2.5\n", p).is_ok());
        assert!(matches!(
            parse_toml::<Tiny>("format_version = 2\nx_mm = 2.5\n", p),
            Err(IoError::UnsupportedVersion { .. })
        ));
        assert!(matches!(
            parse_toml::<Tiny>("format_version = \"1\"\nx_mm = 2.5\n", p),
            Err(IoError::UnsupportedVersion { .. })
        ));
        assert!(matches!(parse_toml::<Tiny>("x_mm = 2.5\n", p), Err(IoError::Schema { .. })));
        assert!(matches!(parse_toml::<Tiny>("format_version = 1\n", p), Err(IoError::Parse { .. })));
        assert!(matches!(parse_toml::<Tiny>("= =", p), Err(IoError::Parse { .. })));
    }

    #[test]
    fn angle_units() {
        assert_eq!("deg".parse::<AngleUnit>().unwrap(), AngleUnit::Deg);
        assert!("grad".parse::<AngleUnit>().is_err());
        assert_eq!(AngleUnit::Rad.from_rad(0.25), 0.25);
        assert!((AngleUnit::Deg.from_rad(std::f64::consts::PI) - 180.0).abs() < 1e-12);
    }

    #[test]
    fn frame_entry_roundtrip_is_exact() {
        let t = pose_to_transform(&Pose6::from_mm_deg(1.5, -2.0, 3.25, 10.0, -20.0, 30.0));
        let e = FrameEntry::from_transform(&t);
        let text = toml::to_string(&e).unwrap();
        let back: FrameEntry = toml::from_str(&text).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.to_transform().unwrap(), t);
    }
}
