use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{check_units, load_toml, AngleUnit, IoError, FORMAT_VERSION, LENGTH_UNIT};
use crate::geometry::{Point3, EULER_CONVENTION};
use crate::kinematics::HexapodGeometry;
use crate::metrology::{DEFAULT_CONGRUENCE_TOL, DEFAULT_POINTS_PER_BALL};
use crate::pipeline::{DecoupledOptions, ReferenceBudget, SteelLengthBasis};
use crate::thermal::{LegThermalModel, ALPHA_ALUMINIUM, ALPHA_STEEL};

/// A value shared by all legs or given per leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerLeg {
    Uniform(f64),
    Legs([f64; 6]),
}

impl PerLeg {
    pub fn expand(self) -> [f64; 6] {
        match self {
            PerLeg::Uniform(v) => [v; 6],
            PerLeg::Legs(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalSection {
    pub alpha_al_per_k: PerLeg,
    pub alpha_st_per_k: PerLeg,
    pub l_al_mm: PerLeg,
}

impl Default for ThermalSection {
    fn default() -> Self {
        Self {
            alpha_al_per_k: PerLeg::Uniform(ALPHA_ALUMINIUM),
            alpha_st_per_k: PerLeg::Uniform(ALPHA_STEEL),
            l_al_mm: PerLeg::Uniform(200.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetrologyDefaults {
    pub points_per_ball: usize,
    pub congruence_tolerance_mm: f64,
}

impl Default for MetrologyDefaults {
    fn default() -> Self {
        Self {
            points_per_ball: DEFAULT_POINTS_PER_BALL,
            congruence_tolerance_mm: DEFAULT_CONGRUENCE_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrectionSection {
    #[serde(default)]
    pub steel_length_basis: SteelLengthBasis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_reference_gap_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_leg_temperature_change_k: Option<f64>,
}

/// Project configuration as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectConfigFile {
    pub format_version: u32,
    pub euler_convention: String,
    pub length_unit: String,
    #[serde(default)]
    pub angle_unit: AngleUnit,
    /// Relative paths are resolved against the config file's directory.
    pub geometry_file: PathBuf,
    #[serde(default)]
    pub thermal: ThermalSection,
    #[serde(default)]
    pub metrology: MetrologyDefaults,
    #[serde(default)]
    pub correction: CorrectionSection,
}

impl ProjectConfigFile {
    pub fn new(geometry_file: impl Into<PathBuf>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            euler_convention: EULER_CONVENTION.into(),
            length_unit: LENGTH_UNIT.into(),
            angle_unit: AngleUnit::Deg,
            geometry_file: geometry_file.into(),
            thermal: ThermalSection::default(),
            metrology: MetrologyDefaults::default(),
            correction: CorrectionSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryFile {
    pub format_version: u32,
    pub length_unit: String,
    /// Joint centres of the base, base frame.
    pub base_joints_mm: [[f64; 3]; 6],
    /// Joint centres of the platform, platform frame.
    pub platform_joints_mm: [[f64; 3]; 6],
}

impl GeometryFile {
    pub fn from_geometry(g: &HexapodGeometry) -> Self {
        let arr = |p: &[Point3; 6]| p.map(|v| [v.x, v.y, v.z]);
        Self {
            format_version: FORMAT_VERSION,
            length_unit: LENGTH_UNIT.into(),
            base_joints_mm: arr(g.base_joints()),
            platform_joints_mm: arr(g.platform_joints()),
        }
    }

    pub fn to_geometry(&self, path: &Path) -> Result<HexapodGeometry, IoError> {
        check_units(path, &self.length_unit, None)?;
        let pts = |a: &[[f64; 3]; 6]| a.map(|v| Point3::new(v[0], v[1], v[2]));
        HexapodGeometry::new(pts(&self.base_joints_mm), pts(&self.platform_joints_mm)).map_err(|e| IoError::schema(path, e))
    }
}

/// Fully resolved project configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectConfig {
    pub geometry: HexapodGeometry,
    pub thermal: LegThermalModel,
    pub metrology: MetrologyDefaults,
    pub angle_unit: AngleUnit,
    pub decoupled: DecoupledOptions,
    pub budget: ReferenceBudget,
}

impl ProjectConfig {
    /// Reads the config and the geometry file it references.
    pub fn load(path: &Path) -> Result<Self, IoError> {
        let file: ProjectConfigFile = load_toml(path)?;
        check_units(path, &file.length_unit, Some(&file.euler_convention))?;
        let geom_path = if file.geometry_file.is_absolute() {
            file.geometry_file.clone()
        } else {
            path.parent().unwrap_or(Path::new(".")).join(&file.geometry_file)
        };
        if !geom_path.exists() {
            return Err(IoError::schema(
                path,
                format!("geometry file {} does not exist", geom_path.display()),
            ));
        }
        let geometry = load_toml::<GeometryFile>(&geom_path)?.to_geometry(&geom_path)?;
        let t = &file.thermal;
        let thermal = LegThermalModel::new(t.alpha_al_per_k.expand(), t.alpha_st_per_k.expand(), t.l_al_mm.expand())
            .map_err(|e| IoError::schema(path, e))?;
        let m = file.metrology;
        if m.points_per_ball < 4 {
            return Err(IoError::schema(path, "metrology.points_per_ball must be at least 4"));
        }
        if !(m.congruence_tolerance_mm > 0.0) {
            return Err(IoError::schema(path, "metrology.congruence_tolerance_mm must be positive"));
        }
        let c = file.correction;
        Ok(Self {
            geometry,
            thermal,
            metrology: m,
            angle_unit: file.angle_unit,
            decoupled: DecoupledOptions {
                basis: c.steel_length_basis,
                ..Default::default()
            },
            budget: ReferenceBudget {
                max_gap_s: c.max_reference_gap_s,
                max_leg_temperature_change: c.max_leg_temperature_change_k,
            },
        })
    }
}
