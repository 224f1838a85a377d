use std::fmt;
use std::path::{Path, PathBuf};

use hexapod_core::io::{
    load_toml, parse_toml, read_probe_points, read_text, report_long_csv, to_toml, AngleUnit, EstimatesFile,
    GroundTruthFile, IoError, ProjectConfig, ReportFile, ScenarioFile, SessionFile, SphereFitFile,
};
use hexapod_core::par::Execution;
use hexapod_core::pipeline::{check_reference_budget, estimate_all};
use hexapod_core::simulator::{comparison_from_session, simulate_session_with};

pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_PHYSICS: u8 = 4;
pub const EXIT_IO: u8 = 5;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid input content.
    Config(String),
    /// The computation itself failed.
    Physics(String),
    /// File system trouble.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Physics(_) => EXIT_PHYSICS,
            CliError::Io(_) => EXIT_IO,
        }
    }

    fn physics(e: impl fmt::Display) -> Self {
        CliError::Physics(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid input: {m}"),
            CliError::Physics(m) => write!(f, "computation failed: {m}"),
            CliError::Io(m) => write!(f, "i/o: {m}"),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        // a missing input file is a configuration mistake, not an i/o fault
        let missing = matches!(&e, IoError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound);
        if e.is_content_error() || missing {
            CliError::Config(e.to_string())
        } else {
            CliError::Io(e.to_string())
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes every file to a temporary sibling first and renames once all
/// writes succeeded, so a failure leaves no partial outputs behind.
fn write_all(files: &[(PathBuf, String)]) -> Result<(), CliError> {
    let tmp = |p: &Path| {
        let mut name = p.file_name().unwrap_or_default().to_os_string();
        name.push(".partial");
        p.with_file_name(name)
    };
    let mut written = Vec::new();
    let result = (|| {
        for (path, text) in files {
            let t = tmp(path);
            std::fs::write(&t, text).map_err(|e| io_err(&t, e))?;
            written.push(t);
        }
        for (path, _) in files {
            std::fs::rename(tmp(path), path).map_err(|e| io_err(path, e))?;
        }
        Ok(())
    })();
    if result.is_err() {
        for t in written {
            let _ = std::fs::remove_file(t);
        }
    }
    result
}

pub fn simulate(
    config: &Path,
    scenario: &Path,
    out: &Path,
    seed: Option<u64>,
    angle_unit: Option<AngleUnit>,
) -> Result<(), CliError> {
    let project = ProjectConfig::load(config)?;
    let mut file: ScenarioFile = load_toml(scenario)?;
    if let Some(s) = seed {
        file.seed = s;
    }
    let cfg = file.to_config(&project, scenario)?;
    let unit = angle_unit.unwrap_or(project.angle_unit);

    let (session, truth) = simulate_session_with(&cfg, Execution::Parallel).map_err(CliError::physics)?;
    let report = comparison_from_session(
        &cfg.geometry,
        &cfg.thermal,
        &session,
        Some(&truth),
        Some(cfg.ambient_temperature),
        &project.decoupled,
        Execution::Parallel,
    )
    .map_err(CliError::physics)?;

    let files = vec![
        (out.join("session.toml"), to_toml(&SessionFile::from_session(&session, unit))),
        (out.join("ground_truth.toml"), to_toml(&GroundTruthFile::from_truth(&truth, unit))),
        (out.join("report.toml"), to_toml(&ReportFile::from_report(&report, unit))),
    ];
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    write_all(&files)
}

pub fn correct(config: &Path, session: &Path, out: &Path, angle_unit: Option<AngleUnit>) -> Result<(), CliError> {
    let project = ProjectConfig::load(config)?;
    let file: SessionFile = load_toml(session)?;
    let session_data = file.to_session(session)?;
    let unit = angle_unit.unwrap_or(project.angle_unit);
    let estimates = estimate_all(
        &project.geometry,
        &project.thermal,
        &session_data,
        &project.decoupled,
        Execution::Parallel,
    )
    .map_err(CliError::physics)?;
    let warnings = check_reference_budget(&session_data, &project.budget).map_err(CliError::physics)?;
    for w in &warnings {
        eprintln!("warning: {}", w.message);
    }
    write_all(&[(out.to_path_buf(), to_toml(&EstimatesFile::new(&estimates, &warnings, unit)))])
}

pub fn fit(points: &Path, radius: Option<f64>) -> Result<String, CliError> {
    if let Some(r) = radius {
        if !(r > 0.0) {
            return Err(CliError::Config(format!("radius {r} must be positive")));
        }
    }
    let pts = read_probe_points(&read_text(points)?, points)?;
    let fits = SphereFitFile::fit(&pts, radius).map_err(CliError::physics)?;
    Ok(to_toml(&fits))
}

pub fn report(report: &Path, out: &Path) -> Result<(), CliError> {
    let file: ReportFile = parse_toml(&read_text(report)?, report)?;
    file.validate(report)?;
    write_all(&[(out.to_path_buf(), report_long_csv(&file))])
}
