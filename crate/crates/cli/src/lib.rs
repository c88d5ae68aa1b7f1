//! `toda-dress`: solve, verify and export configured soliton problems.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 singular solution, 4 I/O error.

pub mod format;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use toda_core::config::{Problem, ProblemConfig};
use toda_core::solitons::SolitonSolution;
use toda_core::verify::{
    abelian_reduction_check, cross_construction_check, det_factorization_check,
    inverse_consistency_check, toda_residual, GammaField, ZPoint,
};
use toda_core::{CMat, Error};

use crate::format::g17;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SINGULAR: u8 = 3;
pub const EXIT_IO: u8 = 4;

/// Tolerance of the inverse-consistency check.
pub const INVERSE_TOL: f64 = 1e-10;
/// Tolerance of the closed form against general dressing.
pub const CROSS_TOL: f64 = 1e-9;
/// Tolerance of the abelian τ-ratio check.
pub const ABELIAN_TOL: f64 = 1e-12;
/// Largest fraction of singular grid points `solve` and `export` accept.
pub const MAX_SINGULAR_FRACTION: f64 = 0.5;

#[derive(Debug, Parser)]
#[command(name = "toda-dress", version, about = "Non-abelian loop Toda solitons by rational dressing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate Γ_α on the grid and write one CSV file per α.
    Solve {
        config: PathBuf,
        /// Directory for the field files (defaults to `output.dir`).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the verification checks and print a JSON report.
    Verify {
        config: PathBuf,
        /// Also write the report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write every Γ_α entry on the grid as long-format records.
    Export {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = ExportFormat::Csv)]
        format: ExportFormat,
        /// Output file (defaults to `<output.dir>/<output.prefix>.<format>`).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl ExportFormat {
    fn extension(self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Json => "json",
        }
    }
}

/// A failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::new(EXIT_IO, format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// One check of the verification report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    pub skipped_points: usize,
    pub pass: bool,
}

/// One exported matrix entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub z_minus: f64,
    pub z_plus: f64,
    pub alpha: usize,
    pub row: usize,
    pub col: usize,
    pub re: f64,
    pub im: f64,
}

/// Runs a parsed command, writing human-readable output to `out`.
pub fn run(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let threads = thread_count()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::new(EXIT_IO, format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Solve { config, out_dir } => {
            let problem = load(config)?;
            let dir = out_dir.clone().unwrap_or_else(|| PathBuf::from(&problem.output.dir));
            for path in solve(&problem, &dir)? {
                writeln!(out, "{}", path.display()).map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
            }
            Ok(())
        }
        Command::Verify { config, report } => {
            let problem = load(config)?;
            let rep = verify(&problem)?;
            let text = serde_json::to_string_pretty(&rep).expect("report serializes") + "\n";
            if let Some(path) = report {
                write_atomic(path, text.as_bytes())?;
            }
            out.write_all(text.as_bytes())
                .map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
            if rep.pass {
                Ok(())
            } else {
                let failed: Vec<&str> = rep.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
                Err(CliError::new(EXIT_VERIFY, format!("failed checks: {}", failed.join(", "))))
            }
        }
        Command::Export { config, format, output } => {
            let problem = load(config)?;
            let path = output.clone().unwrap_or_else(|| {
                Path::new(&problem.output.dir).join(format!("{}.{}", problem.output.prefix, format.extension()))
            });
            export(&problem, *format, &path)?;
            writeln!(out, "{}", path.display()).map_err(|e| CliError::new(EXIT_IO, e.to_string()))
        }
    })
}

/// `TODA_DRESS_THREADS`, or the number of available cores.
fn thread_count() -> Result<usize, CliError> {
    match std::env::var("TODA_DRESS_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::new(
                EXIT_CONFIG,
                format!("TODA_DRESS_THREADS: expected a positive integer, got {v:?}"),
            )),
        },
        Err(_) => Ok(0),
    }
}

/// Reads and builds a configuration. Unreadable files are I/O errors;
/// invalid contents are configuration errors.
pub fn load(path: &Path) -> Result<Problem, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let cfg = ProblemConfig::from_json(&text)
        .map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
    cfg.build()
        .map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", path.display())))
}

/// `Γ_α` at every grid point in grid order; `None` where the solution is
/// singular.
pub fn evaluate(problem: &Problem) -> Result<Vec<(ZPoint, Option<Vec<CMat>>)>, CliError> {
    let sol = SolitonSolution::closed_form(problem.spec.clone());
    let values = problem
        .grid
        .points()
        .into_par_iter()
        .map(|z| match sol.gamma(z) {
            Ok(g) => Ok((z, Some(g))),
            Err(Error::SolutionSingularity(_)) => Ok((z, None)),
            Err(e) => Err(CliError::new(EXIT_CONFIG, e.to_string())),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let singular = values.iter().filter(|(_, g)| g.is_none()).count();
    if singular as f64 > MAX_SINGULAR_FRACTION * values.len() as f64 {
        let first: Vec<String> = values
            .iter()
            .filter(|(_, g)| g.is_none())
            .take(5)
            .map(|(z, _)| format!("({}, {})", g17(z.z_minus), g17(z.z_plus)))
            .collect();
        return Err(CliError::new(
            EXIT_SINGULAR,
            format!(
                "solution singular at {singular} of {} grid points, e.g. {}",
                values.len(),
                first.join(", ")
            ),
        ));
    }
    Ok(values)
}

/// Writes `<prefix>_<α>.csv` for every α into `dir` and returns the paths.
///
/// Columns are `z_minus, z_plus` followed by `re_<row>_<col>, im_<row>_<col>`
/// in row-major order; singular points have empty entry fields.
pub fn solve(problem: &Problem, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let values = evaluate(problem)?;
    let bs = problem.spec.structure();
    let mut paths = Vec::new();
    for (k, &n) in bs.sizes().iter().enumerate() {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["z_minus".to_string(), "z_plus".to_string()];
        for i in 1..=n {
            for j in 1..=n {
                header.push(format!("re_{i}_{j}"));
                header.push(format!("im_{i}_{j}"));
            }
        }
        w.write_record(&header).map_err(csv_error)?;
        for (z, g) in &values {
            let mut row = vec![g17(z.z_minus), g17(z.z_plus)];
            match g {
                Some(g) => {
                    let m = &g[k];
                    for i in 0..n {
                        for j in 0..n {
                            row.push(g17(m[(i, j)].re));
                            row.push(g17(m[(i, j)].im));
                        }
                    }
                }
                None => row.extend(std::iter::repeat_n(String::new(), 2 * n * n)),
            }
            w.write_record(&row).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
        let path = dir.join(format!("{}_{}.csv", problem.output.prefix, k + 1));
        write_atomic(&path, &bytes)?;
        paths.push(path);
    }
    Ok(paths)
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::new(EXIT_IO, e.to_string())
}

/// Long-format records in grid order, then α, row, column. Singular points
/// are left out.
pub fn records(problem: &Problem) -> Result<Vec<Record>, CliError> {
    let mut out = Vec::new();
    for (z, g) in evaluate(problem)? {
        let Some(g) = g else { continue };
        for (k, m) in g.iter().enumerate() {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    out.push(Record {
                        z_minus: z.z_minus,
                        z_plus: z.z_plus,
                        alpha: k + 1,
                        row: i + 1,
                        col: j + 1,
                        re: m[(i, j)].re,
                        im: m[(i, j)].im,
                    });
                }
            }
        }
    }
    Ok(out)
}

pub fn export(problem: &Problem, format: ExportFormat, path: &Path) -> Result<(), CliError> {
    let recs = records(problem)?;
    let bytes = match format {
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["z_minus", "z_plus", "alpha", "row", "col", "re", "im"])
                .map_err(csv_error)?;
            for r in &recs {
                w.write_record([
                    g17(r.z_minus),
                    g17(r.z_plus),
                    r.alpha.to_string(),
                    r.row.to_string(),
                    r.col.to_string(),
                    g17(r.re),
                    g17(r.im),
                ])
                .map_err(csv_error)?;
            }
            w.into_inner().map_err(|e| CliError::new(EXIT_IO, e.to_string()))?
        }
        ExportFormat::Json => {
            let mut text = serde_json::to_string_pretty(&recs).expect("records serialize");
            text.push('\n');
            text.into_bytes()
        }
    };
    write_atomic(path, &bytes)
}

/// Runs every applicable check. Construction errors are configuration
/// errors; a point where either construction is singular is skipped by
/// each check.
pub fn verify(problem: &Problem) -> Result<VerifyReport, CliError> {
    let spec = &problem.spec;
    let grid = &problem.grid;
    let closed = SolitonSolution::closed_form(spec.clone());
    let dressed = SolitonSolution::dressing(spec.clone())
        .map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?;
    let fail = |e: Error| match e {
        Error::EmptyReport => CliError::new(EXIT_SINGULAR, "solution singular at every grid point"),
        other => CliError::new(EXIT_CONFIG, other.to_string()),
    };
    let check = |name: &str, max: f64, tol: f64| CheckResult {
        name: name.into(),
        max_error: max,
        tolerance: tol,
        pass: max <= tol,
    };
    let mut checks = Vec::new();
    let residual = toda_residual(&closed, spec.pair(), grid, problem.h_fd).map_err(fail)?;
    let skipped = residual.skipped.len();
    checks.push(check("toda_residual", residual.max, problem.tolerance));
    let dres = toda_residual(&dressed, spec.pair(), grid, problem.h_fd).map_err(fail)?;
    checks.push(check("toda_residual_dressing", dres.max, problem.tolerance));
    let inv = inverse_consistency_check(&closed, grid).map_err(fail)?;
    checks.push(check("inverse_consistency", inv.max, INVERSE_TOL));
    let cross = cross_construction_check(spec, &closed, &dressed, grid).map_err(fail)?;
    checks.push(check("cross_construction", cross.max, CROSS_TOL));
    let det = det_factorization_check(&closed, grid, problem.h_fd).map_err(fail)?;
    checks.push(check("det_factorization", det.max, problem.tolerance));
    if spec.structure().is_abelian() {
        let ab = abelian_reduction_check(spec, &closed, grid).map_err(fail)?;
        checks.push(check("abelian_reduction", ab.max, ABELIAN_TOL));
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        checks,
        skipped_points: skipped,
        pass,
    })
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}
