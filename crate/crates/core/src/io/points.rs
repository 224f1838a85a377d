use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IoError, FORMAT_VERSION};
use crate::geometry::Point3;
use crate::metrology::{fit_sphere, MetrologyError, ProbePointSet};

const HEADER: [&str; 4] = ["ball", "x_mm", "y_mm", "z_mm"];

#[derive(Debug, Serialize, Deserialize)]
struct PointRow {
    ball: String,
    x_mm: f64,
    y_mm: f64,
    z_mm: f64,
}

/// Probed points grouped by ball label, in order of first appearance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProbePoints {
    pub balls: Vec<(String, Vec<Point3>)>,
}

impl ProbePoints {
    pub fn push(&mut self, ball: &str, p: Point3) {
        match self.balls.iter_mut().find(|(b, _)| b == ball) {
            Some((_, pts)) => pts.push(p),
            None => self.balls.push((ball.to_string(), vec![p])),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereFitEntry {
    pub ball: String,
    pub points: usize,
    pub center_mm: [f64; 3],
    pub radius_mm: f64,
    pub rms_residual_mm: f64,
}

/// Sphere parameters of every ball in a probe-point file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereFitFile {
    pub format_version: u32,
    pub length_unit: String,
    pub spheres: Vec<SphereFitEntry>,
}

impl SphereFitFile {
    pub fn fit(points: &ProbePoints, nominal_radius: Option<f64>) -> Result<Self, MetrologyError> {
        let spheres = points
            .balls
            .iter()
            .map(|(ball, pts)| {
                let f = fit_sphere(&ProbePointSet::new(pts.clone(), nominal_radius)?)?;
                Ok(SphereFitEntry {
                    ball: ball.clone(),
                    points: pts.len(),
                    center_mm: [f.center.x, f.center.y, f.center.z],
                    radius_mm: f.radius,
                    rms_residual_mm: f.rms_residual,
                })
            })
            .collect::<Result<_, MetrologyError>>()?;
        Ok(Self {
            format_version: FORMAT_VERSION,
            length_unit: super::LENGTH_UNIT.into(),
            spheres,
        })
    }
}

/// Parses the CSV text. The first line must be `#format_version=1`.
pub fn read_probe_points(text: &str, path: &Path) -> Result<ProbePoints, IoError> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let version = first
        .trim()
        .strip_prefix('#')
        .and_then(|s| s.trim().strip_prefix("format_version"))
        .and_then(|s| s.trim().strip_prefix('='))
        .map(str::trim)
        .ok_or_else(|| IoError::schema(path, "first line must be '#format_version=1'"))?;
    if version != FORMAT_VERSION.to_string() {
        return Err(IoError::UnsupportedVersion {
            path: path.to_path_buf(),
            found: version.to_string(),
            supported: FORMAT_VERSION,
        });
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(rest.as_bytes());
    let header = rdr.headers().map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(IoError::schema(path, format!("expected columns {}", HEADER.join(","))));
    }
    let mut out = ProbePoints::default();
    for row in rdr.deserialize::<PointRow>() {
        let row = row.map_err(|e| IoError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let p = Point3::new(row.x_mm, row.y_mm, row.z_mm);
        if !p.iter().all(|v| v.is_finite()) {
            return Err(IoError::schema(path, format!("non-finite point for ball '{}'", row.ball)));
        }
        out.push(&row.ball, p);
    }
    if out.balls.is_empty() {
        return Err(IoError::schema(path, "no points"));
    }
    Ok(out)
}

pub fn write_probe_points(points: &ProbePoints) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (ball, pts) in &points.balls {
        for p in pts {
            w.serialize(PointRow {
                ball: ball.clone(),
                x_mm: p.x,
                y_mm: p.y,
                z_mm: p.z,
            })
            .expect("in-memory csv write");
        }
    }
    let body = String::from_utf8(w.into_inner().expect("flush")).expect("utf8 csv");
    format!("#format_version={FORMAT_VERSION}\n{body}")
}
