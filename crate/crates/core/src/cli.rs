//! Command-line driver: `test`, `simulate` and `export-ci`.
//!
//! Exit codes: 0 on success, 2 for invalid input or flags, 3 for numeric or
//! convergence failures. Reports go to stdout, diagnostics to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::contrasts::ContrastKind;
use crate::dataset::load_csv;
use crate::error::Error;
use crate::inference::{max_t_test, Alternative, TestReport, TestSpec};
use crate::mvt::MvtSettings;
use crate::simulate::{csv_header, csv_row, run_power_grid, ScenarioSpec, SimResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "levdun", version, about = "Many-to-one and grand-mean tests for variance heterogeneity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a maxT test on grouped data from a CSV file.
    Test(TestArgs),
    /// Estimate rejection rates by Monte Carlo simulation.
    Simulate(SimulateArgs),
    /// Write simultaneous confidence intervals as CSV.
    ExportCi(TestArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ContrastArg {
    Dunnett,
    Grandmean,
}

impl From<ContrastArg> for ContrastKind {
    fn from(c: ContrastArg) -> Self {
        match c {
            ContrastArg::Dunnett => ContrastKind::Dunnett,
            ContrastArg::Grandmean => ContrastKind::GrandMean,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlternativeArg {
    Greater,
    Less,
    TwoSided,
}

impl From<AlternativeArg> for Alternative {
    fn from(a: AlternativeArg) -> Self {
        match a {
            AlternativeArg::Greater => Alternative::Greater,
            AlternativeArg::Less => Alternative::Less,
            AlternativeArg::TwoSided => Alternative::TwoSided,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "response")]
    pub response: String,
    #[arg(long, default_value = "group")]
    pub group: String,
    /// Label of the control group; defaults to the first group in the file.
    #[arg(long)]
    pub control: Option<String>,
    #[arg(long, value_enum, default_value = "dunnett")]
    pub contrast: ContrastArg,
    #[arg(long, value_enum, default_value = "greater")]
    pub alternative: AlternativeArg,
    /// Drop the zero deviation of each odd-sized group.
    #[arg(long)]
    pub modified: bool,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, env = "LEVDUN_SEED")]
    pub seed: Option<u64>,
    /// Lattice points used for the multivariate t integrals.
    #[arg(long, default_value_t = 100_000)]
    pub budget: usize,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON file holding one scenario or a list of scenarios.
    #[arg(long, conflicts_with_all = ["n", "sd"])]
    pub scenario: Option<PathBuf>,
    /// Group sizes, control first, e.g. 10,10,10,10.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Group standard deviations; defaults to all ones.
    #[arg(long, value_delimiter = ',')]
    pub sd: Vec<f64>,
    /// Extra standard-deviation pattern to run (repeatable), e.g. 1,1,1,3.
    #[arg(long)]
    pub pattern: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, env = "LEVDUN_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub modified: bool,
    #[arg(long, value_enum, default_value = "dunnett")]
    pub contrast: ContrastArg,
    #[arg(long, value_enum, default_value = "greater")]
    pub alternative: AlternativeArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100_000)]
    pub budget: usize,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_validation() { EXIT_INVALID } else { EXIT_NUMERIC },
            message: e.to_string(),
        }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INVALID,
        message: message.into(),
    }
}

fn mvt_settings(seed: Option<u64>, budget: usize) -> MvtSettings {
    let defaults = MvtSettings::default();
    MvtSettings {
        sample_budget: budget,
        seed: seed.unwrap_or(defaults.seed),
        ..defaults
    }
}

fn run_test(args: &TestArgs) -> Result<TestReport, Failure> {
    let sample = load_csv(&args.data, &args.response, &args.group, args.control.as_deref())
        .map_err(|e| match e {
            Error::Io(io) => invalid(format!("cannot read {}: {io}", args.data.display())),
            other => other.into(),
        })?;
    let spec = TestSpec {
        contrast_kind: args.contrast.into(),
        alternative: args.alternative.into(),
        modified: args.modified,
        alpha: args.alpha,
        mvt_settings: mvt_settings(args.seed, args.budget),
    };
    Ok(max_t_test(&sample, &spec)?)
}

fn emit(text: &str, out: &Option<PathBuf>, stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| invalid(format!("cannot write {}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| invalid(format!("cannot write to stdout: {e}"))),
    }
}

fn cmd_test(args: &TestArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let report = run_test(args)?;
    let text = match args.format {
        Format::Table => report.to_table(),
        Format::Json => report.to_json() + "\n",
        Format::Csv => report.rows_csv(),
    };
    emit(&text, &args.out, stdout)
}

fn cmd_export_ci(args: &TestArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    if args.out.is_none() {
        return Err(invalid("export-ci requires --out"));
    }
    let report = run_test(args)?;
    emit(&report.ci_csv(), &args.out, stdout)
}

/// A base scenario plus the sd patterns to run under it.
type Job = (ScenarioSpec, Vec<Vec<f64>>);

fn scenarios(args: &SimulateArgs) -> Result<Vec<Job>, Failure> {
    if let Some(path) = &args.scenario {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| invalid(format!("invalid scenario JSON: {e}")))?;
        let list = match value {
            serde_json::Value::Array(items) => items,
            single => vec![single],
        };
        return list
            .into_iter()
            .map(|v| {
                let spec: ScenarioSpec =
                    serde_json::from_value(v).map_err(|e| invalid(format!("invalid scenario: {e}")))?;
                let sds = spec.group_sds.clone();
                Ok((spec, vec![sds]))
            })
            .collect();
    }
    if args.n.is_empty() {
        return Err(invalid("either --scenario or --n is required"));
    }
    let base_sds = if args.sd.is_empty() { vec![1.0; args.n.len()] } else { args.sd.clone() };
    let mut patterns = vec![base_sds.clone()];
    for p in &args.pattern {
        let parsed: Result<Vec<f64>, _> = p.split(',').map(|x| x.trim().parse::<f64>()).collect();
        patterns.push(parsed.map_err(|_| invalid(format!("invalid --pattern '{p}'")))?);
    }
    let spec = ScenarioSpec {
        group_sizes: args.n.clone(),
        group_sds: base_sds,
        alternative: args.alternative.into(),
        modified: args.modified,
        contrast_kind: args.contrast.into(),
        alpha: args.alpha,
        replications: args.reps,
        seed: args.seed.unwrap_or(1),
        mvt_settings: mvt_settings(args.seed, args.budget),
    };
    Ok(vec![(spec, patterns)])
}

fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let mut results: Vec<(ScenarioSpec, SimResult)> = Vec::new();
    for (spec, patterns) in scenarios(args)? {
        spec.validate()?;
        for (sds, result) in run_power_grid(&spec, &patterns)? {
            results.push((ScenarioSpec { group_sds: sds, ..spec.clone() }, result));
        }
    }
    let text = match args.format {
        Format::Json => {
            let rows: Vec<serde_json::Value> = results
                .iter()
                .map(|(spec, result)| serde_json::json!({ "scenario": spec, "result": result }))
                .collect();
            serde_json::to_string_pretty(&rows).expect("results serialize") + "\n"
        }
        Format::Csv | Format::Table => {
            let width = results.iter().map(|(_, r)| r.per_contrast_rejection_rates.len()).max().unwrap_or(0);
            let mut text = csv_header(width) + "\n";
            for (spec, result) in &results {
                text.push_str(&csv_row(spec, result));
                text.push('\n');
            }
            text
        }
    };
    emit(&text, &None, stdout)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(rendered.as_bytes());
            } else {
                let _ = stdout.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Test(args) => cmd_test(args, stdout),
        Command::Simulate(args) => cmd_simulate(args, stdout),
        Command::ExportCi(args) => cmd_export_ci(args, stdout),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("levdun").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn zero_reps_is_invalid() {
        let (code, _, err) = run_capture(&["simulate", "--n", "4,4", "--reps", "0"]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("replications"));
    }

    #[test]
    fn unknown_flag_is_invalid() {
        let (code, _, _) = run_capture(&["test", "--bogus"]);
        assert_eq!(code, EXIT_INVALID);
    }

    #[test]
    fn missing_file_is_invalid() {
        let (code, _, err) = run_capture(&["test", "--data", "/nonexistent/file.csv"]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("cannot read"));
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("simulate"));
    }
}
