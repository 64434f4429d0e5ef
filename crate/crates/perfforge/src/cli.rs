//! Command-line interface: argument parsing, config loading, and report
//! rendering. Tables go to stdout, diagnostics to stderr.
//!
//! Exit codes: 0 success, 1 at least one task failed, 2 usage or
//! configuration error.

use std::path::{Path, PathBuf};

use clap::{ArgAction, Parser, Subcommand};

use crate::config::{
    effective_params, parse_config, validate_params, ParamSet, DEFAULT_CONFIG_NAME,
};
use crate::engine::{self, RunOptions, TaskStatus};

#[derive(Parser)]
#[command(
    name = "perfforge",
    version,
    about = "Incremental feature extraction for recorded musical performances"
)]
pub struct Cli {
    /// Dataset directory holding performances and outputs.
    #[arg(long, global = true, default_value = ".")]
    pub dataset: PathBuf,
    /// Parameter file. Defaults to <dataset>/features.cfg when present.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Increase diagnostic verbosity (-v, -vv).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Compute stale features.
    Run {
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Task id, feature, or piece to build. Repeatable.
        #[arg(long = "target")]
        targets: Vec<String>,
        /// Report what would run without writing anything.
        #[arg(long)]
        dry_run: bool,
    },
    /// Show every planned task and whether it is fresh.
    List {
        #[arg(long = "target")]
        targets: Vec<String>,
    },
    /// Like list, with the time of each task's last success.
    Status {
        #[arg(long = "target")]
        targets: Vec<String>,
    },
    /// Delete the outputs and build records of the selected tasks.
    Clean {
        #[arg(long = "target")]
        targets: Vec<String>,
    },
    /// Drop build records of the selected tasks, keeping outputs.
    Forget {
        #[arg(long = "target")]
        targets: Vec<String>,
    },
}

/// Parses argv and runs; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            2
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, String> {
    let params = load_params(&cli.dataset, cli.config.as_deref(), cli.verbose)?;
    let plan = engine::build_plan(&cli.dataset).map_err(|e| e.to_string())?;
    if cli.verbose > 0 {
        let pieces: std::collections::BTreeSet<&str> =
            plan.tasks.iter().map(|t| t.piece.as_str()).collect();
        eprintln!(
            "dataset {}: {} pieces, {} tasks",
            plan.dataset.display(),
            pieces.len(),
            plan.tasks.len()
        );
    }
    match &cli.command {
        Command::Run {
            jobs,
            targets,
            dry_run,
        } => {
            let options = RunOptions {
                jobs: *jobs,
                dry_run: *dry_run,
            };
            let report = engine::run(&plan, &params, targets, &options)
                .map_err(|e| e.to_string())?;
            render_run(&report, cli.verbose);
            Ok(if report.any_failed() { 1 } else { 0 })
        }
        Command::List { targets } => {
            let rows = engine::status(&plan, &params, targets).map_err(|e| e.to_string())?;
            render_list(&rows, false);
            Ok(0)
        }
        Command::Status { targets } => {
            let rows = engine::status(&plan, &params, targets).map_err(|e| e.to_string())?;
            render_list(&rows, true);
            Ok(0)
        }
        Command::Clean { targets } => {
            let report = engine::clean(&plan, targets).map_err(|e| e.to_string())?;
            println!(
                "cleaned {} tasks, removed {} files",
                report.tasks.len(),
                report.files_removed
            );
            Ok(0)
        }
        Command::Forget { targets } => {
            let dropped = engine::forget(&plan, targets).map_err(|e| e.to_string())?;
            println!("forgot {dropped} records");
            Ok(0)
        }
    }
}

/// Loads parameters from the explicit config, the dataset default, or
/// built-in defaults. An explicit path must exist; the default may be
/// absent.
fn load_params(dataset: &Path, config: Option<&Path>, verbose: u8) -> Result<ParamSet, String> {
    let (text, source) = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("config {}: {e}", path.display()))?;
            (text, path.display().to_string())
        }
        None => {
            let path = dataset.join(DEFAULT_CONFIG_NAME);
            match std::fs::read_to_string(&path) {
                Ok(text) => (text, path.display().to_string()),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    (String::new(), "built-in defaults".to_string())
                }
                Err(e) => return Err(format!("config {}: {e}", path.display())),
            }
        }
    };
    if verbose > 0 {
        eprintln!("parameters from {source}");
    }
    let file = parse_config(&text).map_err(|e| format!("config {source}: {e}"))?;
    let params = effective_params(&file);
    validate_params(&params).map_err(|e| format!("config {source}: {e}"))?;
    Ok(params)
}

fn piece_width<'a>(pieces: impl Iterator<Item = &'a str>) -> usize {
    pieces.map(str::len).chain([5]).max().unwrap()
}

fn render_run(report: &engine::RunReport, verbose: u8) {
    let width = piece_width(report.rows.iter().map(|r| r.piece.as_str()));
    for row in &report.rows {
        let mut line = format!(
            "{:<width$}  {:<9}  {}",
            row.piece,
            row.feature,
            row.status.label()
        );
        if verbose > 0 {
            if let Some(reason) = &row.reason {
                line.push_str(&format!("  ({reason})"));
            }
        }
        if verbose > 1 && row.status == TaskStatus::Ran {
            line.push_str(&format!("  [{:.3}s]", row.seconds));
        }
        println!("{line}");
        if let Some(message) = &row.message {
            eprintln!("error: task {}: {message}", row.task_id);
        }
    }
    println!(
        "{} ran, {} fresh, {} would run, {} failed, {} skipped",
        report.count(TaskStatus::Ran),
        report.count(TaskStatus::Fresh),
        report.count(TaskStatus::WouldRun),
        report.count(TaskStatus::Failed),
        report.count(TaskStatus::Skipped)
    );
}

fn render_list(rows: &[engine::StatusRow], with_times: bool) {
    let width = piece_width(rows.iter().map(|r| r.piece.as_str()));
    for row in rows {
        let state = match &row.reason {
            None => "fresh".to_string(),
            Some(reason) => format!("stale ({reason})"),
        };
        if with_times {
            let last = row.last_success.as_deref().unwrap_or("-");
            println!(
                "{:<width$}  {:<9}  {:<20}  {state}",
                row.piece, row.feature, last
            );
        } else {
            println!("{:<width$}  {:<9}  {state}", row.piece, row.feature);
        }
    }
    let stale = rows.iter().filter(|r| r.reason.is_some()).count();
    println!("{} tasks, {} stale", rows.len(), stale);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argv_shapes_parse() {
        let cli = Cli::try_parse_from([
            "perfforge", "run", "--dataset", "/d", "--jobs", "4", "--target", "velocity",
            "--target", "waltz", "--dry-run", "-vv",
        ])
        .unwrap();
        assert_eq!(cli.dataset, PathBuf::from("/d"));
        assert_eq!(cli.verbose, 2);
        match cli.command {
            Command::Run {
                jobs,
                targets,
                dry_run,
            } => {
                assert_eq!(jobs, 4);
                assert_eq!(targets, ["velocity", "waltz"]);
                assert!(dry_run);
            }
            _ => panic!("expected run"),
        }
    }

    #[test]
    fn unknown_flag_is_rejected() {
        assert!(Cli::try_parse_from(["perfforge", "run", "--frobnicate"]).is_err());
        assert!(Cli::try_parse_from(["perfforge"]).is_err());
    }

    #[test]
    fn missing_explicit_config_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_params(dir.path(), Some(Path::new("/nope.cfg")), 0).unwrap_err();
        assert!(err.contains("/nope.cfg"));
    }

    #[test]
    fn absent_default_config_falls_back() {
        let dir = tempfile::tempdir().unwrap();
        let params = load_params(dir.path(), None, 0).unwrap();
        assert_eq!(params, ParamSet::defaults());
    }

    #[test]
    fn default_config_is_read_when_present() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join(DEFAULT_CONFIG_NAME),
            "[beats]\nsubdivision = 4\n",
        )
        .unwrap();
        let params = load_params(dir.path(), None, 0).unwrap();
        assert_eq!(params.beats_subdivision(), 4);
    }

    #[test]
    fn config_errors_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        std::fs::write(&path, "[nonsense]\n").unwrap();
        let err = load_params(dir.path(), Some(&path), 0).unwrap_err();
        assert!(err.contains("bad.cfg"), "{err}");
        assert!(err.contains("nonsense"), "{err}");
    }
}
