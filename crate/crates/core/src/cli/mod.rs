//! The `lovelock` command line: `verify` and `convergence`.

pub mod report;
pub mod scenario;
pub mod suites;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use report::{write_report, Report, Row};
use scenario::{Axis, Scenario, Suite};

/// Environment variable naming the default report directory.
pub const OUT_DIR_ENV: &str = "LOVELOCK_OUT_DIR";

pub const EXIT_PASS: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_TOLERANCE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "lovelock", version, about = "Verification harness for characteristic-form actions on pseudo-Kähler tori")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Scenario file.
    pub scenario: PathBuf,
    /// Report directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = "lovelock-reports")]
    pub out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Dotted-key override, e.g. `--override metric.amplitude=0.03`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scenario's suite.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep the grid size or the ε schedule and fit convergence slopes.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "N")]
        axis: Axis,
    },
}

/// Runs a suite and always returns a report; an error mid-run is recorded
/// alongside the rows collected so far.
pub fn run_scenario(s: &Scenario, axis: Option<Axis>) -> Report {
    let start = Instant::now();
    let mut rows: Vec<Row> = Vec::new();
    let outcome = match axis {
        Some(axis) => suites::convergence(s, axis, &mut rows),
        None => suites::run_suite(s, &mut rows),
    };
    let suite = match axis {
        Some(axis) => format!("{}-{axis}", Suite::Convergence),
        None => s.suite.to_string(),
    };
    let elapsed_ms = start.elapsed().as_millis() as u64;
    Report::new(s, suite, rows, outcome.err().map(|e| e.to_string()), elapsed_ms)
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::Scenario(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn file_stem(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "scenario".into()
    } else {
        s
    }
}

/// Executes a parsed command line, writing human-readable lines to `out`
/// and diagnostics to `err`. Returns the process exit code.
pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let (common, axis) = match cli.command {
        Command::Verify { common } => (common, None),
        Command::Convergence { common, axis } => (common, Some(axis)),
    };
    let scenario = match Scenario::load(&common.scenario, &common.overrides) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", common.scenario.display());
            return EXIT_ERROR;
        }
    };
    let report = match in_pool(common.threads, || run_scenario(&scenario, axis)) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_ERROR;
        }
    };
    for row in &report.residuals {
        let _ = writeln!(out, "{}", row.summary());
    }
    let mut stem = file_stem(&scenario.name);
    if let Some(axis) = axis {
        stem = format!("{stem}-convergence-{axis}");
    }
    match write_report(&report, &common.out, &stem) {
        Ok((json, csv)) => {
            let _ = writeln!(out, "report: {} {}", json.display(), csv.display());
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_ERROR;
        }
    }
    let verdict = if report.pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        out,
        "{verdict} {} [{}] {} rows in {} ms",
        report.scenario,
        report.suite,
        report.residuals.len(),
        report.elapsed_ms
    );
    if let Some(e) = &report.error {
        let _ = writeln!(err, "error: {e}");
        EXIT_ERROR
    } else if report.pass {
        EXIT_PASS
    } else {
        EXIT_TOLERANCE
    }
}

/// Parses `args` (including the program name) and runs.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli, &mut std::io::stdout(), &mut std::io::stderr()),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_PASS
            }
        }
    }
}
