//! Command-line front end: audit, DOT export, fixture generation and the
//! audit service.

pub mod commands;
pub mod service;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sheetaudit_core::equivalence::Level;
use sheetaudit_core::fixture::FixtureKind;
use sheetaudit_core::report::ReportFormat;

/// Exit status for a clean run.
pub const EXIT_CLEAN: u8 = 0;
/// Exit status when findings are present.
pub const EXIT_FINDINGS: u8 = 1;
/// Exit status for load, parse, usage or bind failures.
pub const EXIT_ERROR: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "sheetaudit", version, about = "Audit spreadsheets through formula equivalence classes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze a workbook, write the report and the open findings.
    Audit(AuditArgs),
    /// Write the cell-level and class-level data-flow graphs as DOT.
    ExportDot(ExportArgs),
    /// Generate a seeded workbook with known anomalies.
    Fixture(FixtureArgs),
    /// Serve the analysis over HTTP for the workbench.
    Serve(ServeArgs),
}

fn positive(s: &str) -> Result<u32, String> {
    match s.parse::<u32>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// FGJ (.json) workbook, a .csv sheet, or a directory of .csv sheets.
    pub input: PathBuf,
    /// Hierarchy level for area output.
    #[arg(long, default_value = "copy")]
    pub level: Level,
    /// Same-class cells required on each side of an interruption.
    #[arg(long, default_value = "2", value_parser = positive)]
    pub min_flank: u32,
    /// Longest interruption reported, in cells.
    #[arg(long, default_value = "1", value_parser = positive)]
    pub max_gap: u32,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "text")]
    pub format: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// JSON-lines log receiving one creation event per open finding.
    #[arg(long)]
    pub findings_log: Option<PathBuf>,
    /// Write the class hierarchy and the areas at `--level` as JSON.
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Directory receiving `cells.dot` and `<level>.dot`.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FixtureArgs {
    /// regular, interrupted, copied-too-far, empty-ref or mixed.
    pub kind: FixtureKind,
    #[arg(long, default_value = "1")]
    pub seed: u64,
    /// Data-sheet columns, the three input columns included.
    #[arg(long, default_value = "12")]
    pub cols: u32,
    /// Data rows below the header.
    #[arg(long, default_value = "50")]
    pub rows: u32,
    /// Anomalies to plant.
    #[arg(long, short = 'k', default_value = "5")]
    pub anomalies: usize,
    /// FGJ output; the ground truth goes next to it as `<stem>.truth.json`.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
    /// Findings log; replayed when it exists, created otherwise.
    #[arg(long)]
    pub findings_log: Option<PathBuf>,
    #[arg(long, default_value = "4")]
    pub workers: usize,
}
