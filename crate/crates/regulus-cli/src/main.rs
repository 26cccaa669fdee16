//! Batch front end: parse a problem file, run the requested solver, print
//! the convergence table to stdout, and write the table plus a certificate
//! file next to the problem (or under `--output`).
//!
//! stdout carries exactly the table bytes so runs are comparable; paths and
//! wall time go to stderr. Exit codes: 0 success, 1 other errors, 2 parse
//! or configuration errors, 3 search exhausted or capped, 4 empty
//! admissible set, 5 no branch at the required depth, 6 verification
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use regulus_core::problem::{exit_code_for, run_problem, OutputFormat, ProblemConfig, ProblemKind};
use regulus_core::SearchCap;

#[derive(Parser)]
#[command(
    name = "regulus",
    version,
    about = "Certified zero finding, minimal-norm selection, leftmost paths, and monotone rates in exact arithmetic"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Approximate a zero of F stage by stage on a compact space
    Zero(RunArgs),
    /// Approximate the minimal-norm zero on a uniformly convex space
    Minnorm(RunArgs),
    /// Extract the leftmost infinite path of an infinite binary tree
    Leftmost(RunArgs),
    /// Iterate a monotone fixture and certify convergence rates
    Fejer(RunArgs),
}

impl Cmd {
    fn kind(&self) -> ProblemKind {
        match self {
            Cmd::Zero(_) => ProblemKind::Zero,
            Cmd::Minnorm(_) => ProblemKind::Minnorm,
            Cmd::Leftmost(_) => ProblemKind::Leftmost,
            Cmd::Fejer(_) => ProblemKind::Fejer,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Cmd::Zero(a) | Cmd::Minnorm(a) | Cmd::Leftmost(a) | Cmd::Fejer(a) => a,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Problem definition file (TOML)
    #[arg(long, value_name = "FILE")]
    problem: PathBuf,

    /// Run stages 0..=K (default: the file's own depth, then 8)
    #[arg(long, value_name = "K")]
    depth: Option<u32>,

    /// Table format
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    out: TableFormat,

    /// Re-derive every stage and cross-check the recorded certificates;
    /// any mismatch is reported and the run exits nonzero
    #[arg(long)]
    verify: bool,

    /// Artifact path prefix (default: the problem file without extension)
    #[arg(long, value_name = "PREFIX")]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

impl TableFormat {
    fn as_output(self) -> OutputFormat {
        match self {
            TableFormat::Csv => OutputFormat::Csv,
            TableFormat::Json => OutputFormat::Json,
        }
    }

    fn extension(self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Json => "json",
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd.kind(), cli.cmd.args()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("regulus: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn search_cap_from_env() -> Result<SearchCap, Failure> {
    match std::env::var("REGULUS_MAX_SEARCH") {
        Ok(s) => {
            let n: u64 = s.trim().parse().map_err(|_| {
                Failure::config(format!("REGULUS_MAX_SEARCH must be an integer, got {s:?}"))
            })?;
            Ok(SearchCap(Some(n)))
        }
        Err(std::env::VarError::NotPresent) => Ok(SearchCap::UNLIMITED),
        Err(e) => Err(Failure::config(format!("REGULUS_MAX_SEARCH: {e}"))),
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.to_path_buf().into_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_artifact(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure {
        code: 1,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

fn run(kind: ProblemKind, args: &RunArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.problem)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", args.problem.display())))?;
    let cfg = ProblemConfig::from_toml_str(&text).map_err(|e| Failure::config(e.to_string()))?;
    if cfg.kind != kind {
        return Err(Failure::config(format!(
            "problem file declares a {:?} problem; run it through that subcommand",
            cfg.kind
        )));
    }
    let cap = search_cap_from_env()?;

    let start = Instant::now();
    let out =
        run_problem(&cfg, args.depth, args.out.as_output(), args.verify, cap).map_err(|e| {
            Failure {
                code: exit_code_for(&e) as u8,
                message: e.to_string(),
            }
        })?;
    let elapsed = start.elapsed();

    print!("{}", out.table_text);

    let prefix = args
        .output
        .clone()
        .unwrap_or_else(|| args.problem.with_extension(""));
    let table_path = with_suffix(&prefix, &format!(".{}", args.out.extension()));
    let cert_path = with_suffix(&prefix, ".cert.json");
    write_artifact(&table_path, &out.table_text)?;
    write_artifact(&cert_path, &out.cert_json)?;
    let mut written = vec![table_path.clone(), cert_path.clone()];
    if let Some(psi) = &out.psi_csv {
        let psi_path = with_suffix(&prefix, ".psi.csv");
        write_artifact(&psi_path, psi)?;
        written.push(psi_path);
    }
    let listed: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
    eprintln!("artifacts: {}", listed.join(", "));
    eprintln!("wall time: {elapsed:?}");

    if let Some(report) = &out.verify {
        if report.all_ok() {
            eprintln!("verification: {} stages check out", report.rows.len());
        } else {
            for row in report.rows.iter().filter(|r| !r.ok) {
                eprintln!("verification failed at stage {}: {}", row.stage, row.detail);
            }
            return Err(Failure {
                code: 6,
                message: "verification failed; see the stage reports above".into(),
            });
        }
    }
    Ok(())
}
