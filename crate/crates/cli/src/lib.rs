//! Scenario runner for the rotator laboratory: parses a JSON scenario, runs
//! its task and writes a deterministic report plus data files.

pub mod report;
pub mod scenario;
pub mod tasks;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rotator_core::Error;

use report::{Diagnostic, Report, Status, REPORT_SCHEMA};
use scenario::{Scenario, ValidationError};
use tasks::{Context, DataFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_REFUSED: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Overrides the scenario's seed.
    pub seed: Option<u64>,
    /// Use finite differences instead of dual numbers for derivatives.
    pub oracle_fd: bool,
}

/// Why a run did not produce a clean report.
#[derive(Debug)]
pub enum Failure {
    Validation(ValidationError),
    /// The report is still written; it carries the diagnostic. Data produced
    /// before the refusal (a trajectory up to a singularity) comes along.
    Refused(Box<Report>, Vec<(String, String)>),
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Refused(..) => EXIT_REFUSED,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(e) => write!(f, "invalid scenario at {e}"),
            Failure::Refused(r, _) => {
                let d = r.diagnostic.as_ref().expect("refused reports carry a diagnostic");
                write!(f, "refused ({}): {}", d.kind, d.message)?;
                if !d.detail.is_null() {
                    write!(f, " {}", d.detail)?;
                }
                Ok(())
            }
            Failure::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

/// A finished run: the report and the files to place next to it.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub stem: String,
    pub report: Report,
    pub files: Vec<(String, String)>,
}

/// Reads and validates a scenario file.
pub fn load(path: &Path) -> Result<Scenario, ValidationError> {
    let text = fs::read_to_string(path).map_err(|e| ValidationError::new(path.display().to_string(), e.to_string()))?;
    scenario::parse(&text)
}

fn stem_for(scn: &Scenario, path: Option<&Path>) -> String {
    let raw = scn
        .name
        .clone()
        .or_else(|| path.and_then(|p| p.file_stem()).map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "scenario".into());
    raw.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Runs a validated scenario. `path` names the scenario file, used for the
/// output stem and for resolving relative spline files.
pub fn execute(scn: &Scenario, path: Option<&Path>, opts: RunOptions) -> Result<Outcome, Failure> {
    let seed = opts.seed.or(scn.seed).unwrap_or(0);
    let base_dir = path.and_then(Path::parent);
    let ctx = Context {
        seed,
        oracle_fd: opts.oracle_fd,
        base_dir,
    };
    let stem = stem_for(scn, path);
    let mut report = Report {
        schema: REPORT_SCHEMA,
        producer: format!("rotator {}", env!("CARGO_PKG_VERSION")),
        task: scn.task.name(),
        scenario: scn.clone(),
        seed,
        engine: if opts.oracle_fd { "finite_difference" } else { "dual" },
        status: Status::Ok,
        claims: Vec::new(),
        files: Vec::new(),
        diagnostic: None,
    };
    let refuse = |mut report: Report, e: &Error| {
        report.status = Status::Refused;
        report.diagnostic = Some(Diagnostic::from_error(e));
        report
    };
    match tasks::run_task(scn, &ctx) {
        Ok(out) => {
            report.claims = out.claims.0;
            let files: Vec<(String, String)> = out
                .files
                .into_iter()
                .map(|DataFile { suffix, contents }| (format!("{stem}.{suffix}"), contents))
                .collect();
            report.files = files.iter().map(|(n, _)| n.clone()).collect();
            if let Some(e) = out.refusal {
                return Err(Failure::Refused(Box::new(refuse(report, &e)), files));
            }
            Ok(Outcome { stem, report, files })
        }
        Err(e) if e.is_physics() => Err(Failure::Refused(Box::new(refuse(report, &e)), Vec::new())),
        Err(e) => Err(Failure::Validation(ValidationError::new(task_location(scn), e.to_string()))),
    }
}

/// The block a task reads its parameters from, used to locate errors that
/// only surface while the task runs (a missing spline file, say).
fn task_location(scn: &Scenario) -> &'static str {
    use scenario::Task::*;
    match scn.task {
        Simulate => "initial",
        Hessian | Kernel => "model",
        VerifyFree => "free",
        VerifyMagnetic => "magnetic",
        Toy => "toy",
        ScanF => "scan_f",
    }
}

/// Writes the report and its data files into `out_dir`.
pub fn write_outputs(out_dir: &Path, stem: &str, report: &Report, files: &[(String, String)]) -> std::io::Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    for (name, contents) in files {
        fs::write(out_dir.join(name), contents)?;
    }
    let p = out_dir.join(format!("{stem}.report.json"));
    fs::write(&p, report.to_json())?;
    Ok(p)
}

/// Loads, runs and writes one scenario; returns the exit code and a one-line message.
pub fn run_file(path: &Path, out_dir: &Path, opts: RunOptions) -> (i32, String) {
    let scn = match load(path) {
        Ok(s) => s,
        Err(e) => return (EXIT_VALIDATION, Failure::Validation(e).to_string()),
    };
    let res = std::panic::catch_unwind(|| execute(&scn, Some(path), opts));
    match res {
        Ok(Ok(o)) => match write_outputs(out_dir, &o.stem, &o.report, &o.files) {
            Ok(p) => (EXIT_OK, format!("wrote {}", p.display())),
            Err(e) => (EXIT_INTERNAL, format!("internal error: writing outputs: {e}")),
        },
        Ok(Err(f)) => {
            if let Failure::Refused(r, files) = &f {
                let stem = stem_for(&scn, Some(path));
                if let Err(e) = write_outputs(out_dir, &stem, r, files) {
                    return (EXIT_INTERNAL, format!("internal error: writing outputs: {e}"));
                }
            }
            (f.exit_code(), f.to_string())
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            (EXIT_INTERNAL, format!("internal error: {msg}"))
        }
    }
}
