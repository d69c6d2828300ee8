//! Command-line front end used by the `flexwing` binary.
//!
//! Exit codes: 0 on success, 1 on a numeric failure, 2 on a configuration
//! or usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::{ControllerMode, ExperimentConfig};
use crate::harness::experiments::{
    compare_gains, run_case_study_1, run_case_study_2, run_experiment, Case2Mode, RunOptions, RunRecord,
};
use crate::linalg::Matrix;
use crate::plant::InputForm;
use crate::riccati::RiccatiVariant;
use crate::spectral::eigenvalues;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "flexwing",
    version,
    about = "Optimal control experiments for a flexible-wing aircraft model"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Nominal actor-critic training on both subsystems.
    Case1 {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for trajectory, weight, pole and report files.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Disturbed runs over consecutive seeds.
    Case2 {
        #[arg(long, default_value = "combined")]
        mode: Case2Mode,
        /// First seed; runs use `seed..seed + runs`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        runs: u64,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value = "literal")]
        input_form: InputForm,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Gains from every solver next to the DARE reference.
    Compare {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Horizon of the actor-critic run included in the table.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Runs an experiment described by a TOML file.
    Run {
        config: PathBuf,
        /// Replaces the seed list of the file with a single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        mode: Option<ControllerMode>,
        #[arg(long)]
        variant: Option<RiccatiVariant>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Eigenvalues of a square matrix read from a file.
    Poles {
        /// JSON nested list, or one row per line separated by spaces or commas.
        matrix_file: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
}

/// Parses a matrix given either as a JSON list of rows or as plain text
/// rows. Blank lines and lines starting with `#` are ignored.
pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = if text.trim_start().starts_with('[') {
        serde_json::from_str(text)?
    } else {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|e| Error::Config(format!("bad matrix entry `{t}`: {e}")))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?
    };
    crate::harness::config::rows_to_matrix(&rows, "matrix")
}

fn emit_csv<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(header)?;
    for row in rows {
        csv.write_record(row)?;
    }
    csv.flush()?;
    Ok(())
}

fn emit_json<W: Write, T: Serialize + ?Sized>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn opt(v: Option<impl ToString>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct RunSummary<'a> {
    name: &'a str,
    seed: u64,
    mode: String,
    settling_time: Option<f64>,
    spectral_radius: f64,
    converged_at: Option<usize>,
    saturation_events: usize,
    total_cost: f64,
    gain: &'a [f64],
}

fn run_summary(record: &RunRecord) -> RunSummary<'_> {
    RunSummary {
        name: &record.name,
        seed: record.seed,
        mode: record.mode.to_string(),
        settling_time: record.report.settling_time,
        spectral_radius: record.report.spectral_radius,
        converged_at: record.report.converged_at,
        saturation_events: record.report.saturation_events,
        total_cost: record.report.total_cost,
        gain: &record.report.gain,
    }
}

fn emit_runs<W: Write>(out: W, records: &[RunRecord], format: Format) -> Result<()> {
    let summaries: Vec<_> = records.iter().map(run_summary).collect();
    match format {
        Format::Json => emit_json(out, &summaries),
        Format::Csv => {
            let rows: Vec<Vec<String>> = summaries
                .iter()
                .map(|s| {
                    vec![
                        s.name.to_string(),
                        s.seed.to_string(),
                        s.mode.clone(),
                        opt(s.settling_time),
                        s.spectral_radius.to_string(),
                        opt(s.converged_at),
                        s.saturation_events.to_string(),
                        s.total_cost.to_string(),
                    ]
                })
                .collect();
            emit_csv(
                out,
                &[
                    "name",
                    "seed",
                    "mode",
                    "settling_time",
                    "spectral_radius",
                    "converged_at",
                    "saturation_events",
                    "total_cost",
                ],
                &rows,
            )
        }
    }
}

fn write_records(records: &[RunRecord], dir: Option<&Path>) -> Result<()> {
    let Some(dir) = dir else {
        return Ok(());
    };
    let mut count = 0;
    for record in records {
        count += record.write(dir)?.len();
    }
    eprintln!("wrote {count} files to {}", dir.display());
    Ok(())
}

fn log_timing(records: &[RunRecord]) {
    for r in records {
        eprintln!("{} seed {}: {:.3} s", r.name, r.seed, r.wall_clock.as_secs_f64());
    }
}

/// Executes a parsed command, writing summaries to `out`.
pub fn execute<W: Write>(command: Command, out: W) -> Result<()> {
    match command {
        Command::Case1 {
            seed,
            out: dir,
            steps,
            format,
        } => {
            let records = run_case_study_1(&RunOptions { seed, steps })?;
            log_timing(&records);
            write_records(&records, dir.as_deref())?;
            emit_runs(out, &records, format)
        }
        Command::Case2 {
            mode,
            seed,
            runs,
            steps,
            input_form,
            out: dir,
            format,
        } => {
            if runs == 0 {
                return Err(Error::Config("--runs must be positive".into()));
            }
            let seeds: Vec<u64> = (seed..seed + runs).collect();
            let result = run_case_study_2(mode, &seeds, input_form, steps)?;
            for s in &result.summaries {
                for o in s.outcomes.iter().filter(|o| o.error.is_some()) {
                    eprintln!("{} seed {}: {}", s.subsystem, o.seed, opt(o.error.as_ref()));
                }
            }
            write_records(&result.records, dir.as_deref())?;
            match format {
                Format::Json => emit_json(out, &result.summaries),
                Format::Csv => {
                    let rows: Vec<Vec<String>> = result
                        .summaries
                        .iter()
                        .map(|s| {
                            let passed = s
                                .outcomes
                                .iter()
                                .filter(|o| o.settling_time.is_some_and(|t| t <= s.deadline))
                                .count();
                            vec![
                                s.subsystem.to_string(),
                                s.mode.to_string(),
                                s.deadline.to_string(),
                                passed.to_string(),
                                s.outcomes.len().to_string(),
                                s.pass_fraction.to_string(),
                            ]
                        })
                        .collect();
                    emit_csv(
                        out,
                        &["subsystem", "mode", "deadline", "passed", "runs", "pass_fraction"],
                        &rows,
                    )
                }
            }
        }
        Command::Compare { seed, steps, format } => {
            let table = compare_gains(&RunOptions { seed, steps })?;
            match format {
                Format::Json => emit_json(out, &table),
                Format::Csv => {
                    let rows: Vec<Vec<String>> = table
                        .iter()
                        .flat_map(|c| {
                            c.rows.iter().map(|r| {
                                vec![
                                    c.subsystem.to_string(),
                                    r.source.clone(),
                                    r.gain
                                        .as_ref()
                                        .map(|g| g.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" "))
                                        .unwrap_or_default(),
                                    opt(r.spectral_radius),
                                    opt(r.diff_to_lqr),
                                    opt(r.error.as_ref()),
                                ]
                            })
                        })
                        .collect();
                    emit_csv(
                        out,
                        &["subsystem", "source", "gain", "spectral_radius", "diff_to_lqr", "error"],
                        &rows,
                    )
                }
            }
        }
        Command::Run {
            config,
            seed,
            out: dir,
            steps,
            mode,
            variant,
            format,
        } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                config.seeds = vec![seed];
            }
            if let Some(steps) = steps {
                config.steps = steps;
            }
            if let Some(mode) = mode {
                config.mode = mode;
            }
            if let Some(variant) = variant {
                config.variant = variant;
            }
            if config.seeds.is_empty() {
                return Err(Error::Config("config lists no seeds".into()));
            }
            let records = config
                .seeds
                .iter()
                .map(|&s| run_experiment(&config, s))
                .collect::<Result<Vec<_>>>()?;
            log_timing(&records);
            let dir = dir.or_else(|| config.output_dir.as_ref().map(PathBuf::from));
            write_records(&records, dir.as_deref())?;
            emit_runs(out, &records, format)
        }
        Command::Poles { matrix_file, format } => {
            let text = std::fs::read_to_string(&matrix_file)?;
            let poles = eigenvalues(&parse_matrix(&text)?)?;
            match format {
                Format::Json => emit_json(out, &poles),
                Format::Csv => {
                    let rows: Vec<Vec<String>> = poles
                        .poles
                        .iter()
                        .map(|p| {
                            vec![
                                p.re.to_string(),
                                p.im.to_string(),
                                p.mag.to_string(),
                                p.angle.to_string(),
                            ]
                        })
                        .collect();
                    emit_csv(out, &["re", "im", "mag", "angle"], &rows)
                }
            }
        }
    }
}

pub fn exit_code(error: &Error) -> u8 {
    if error.is_config() {
        2
    } else {
        1
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli.command, std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
