use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Result};
use serde_json::json;
use sheetaudit_core::analysis::Analysis;
use sheetaudit_core::areas::{logical_areas, DetectorConfig, FindingStore};
use sheetaudit_core::fixture::{generate, FixtureSpec};
use sheetaudit_core::graph::export_dot;
use sheetaudit_core::load::{load_path, FgjDocument};
use sheetaudit_core::report::{emit_report, Report};

use crate::service::{self, AuditService};
use crate::{AuditArgs, ExportArgs, FixtureArgs, InputArgs, ServeArgs, EXIT_CLEAN, EXIT_ERROR, EXIT_FINDINGS};

/// Unix time in milliseconds, the findings-log envelope timestamp.
pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// A failure that maps to a specific exit status.
#[derive(Debug)]
pub struct Failure {
    pub status: u8,
    pub error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            status: EXIT_ERROR,
            error: e.into(),
        }
    }
}

fn config(input: &InputArgs) -> DetectorConfig {
    DetectorConfig {
        min_flank: input.min_flank,
        max_gap: input.max_gap,
    }
}

fn load(input: &InputArgs) -> Result<Analysis> {
    Ok(Analysis::new(load_path(&input.input)?))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| anyhow!("cannot write {}: {e}", path.display()))
}

/// Analysis, report and findings log. Returns the exit status.
pub fn audit(args: &AuditArgs, clock: fn() -> u64) -> Result<u8, Failure> {
    let analysis = load(&args.input)?;
    let findings = analysis.findings(&config(&args.input));
    let status = if findings.is_empty() { EXIT_CLEAN } else { EXIT_FINDINGS };
    let store = FindingStore::with_findings(findings, clock())?;
    let report = Report::build(&analysis.workbook, &analysis.hierarchy, &store);
    let text = emit_report(&report, args.format);
    match &args.output {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    if let Some(path) = &args.findings_log {
        write(path, &store.to_jsonl())?;
    }
    if let Some(path) = &args.hierarchy {
        let level = args.input.level;
        let doc = json!({
            "hierarchy": analysis.hierarchy.document(&analysis.workbook),
            "areas": {
                "level": level,
                "classes": logical_areas(&analysis.hierarchy, &analysis.workbook, level),
            },
        });
        write(path, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    }
    Ok(status)
}

/// Writes `cells.dot` and `<level>.dot`; returns their paths.
pub fn export(args: &ExportArgs) -> Result<Vec<PathBuf>, Failure> {
    let analysis = load(&args.input)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| anyhow!("cannot create {}: {e}", args.out_dir.display()))?;
    let cells = args.out_dir.join("cells.dot");
    write(&cells, &export_dot(&analysis.cells))?;
    let classes = args.out_dir.join(format!("{}.dot", args.input.level));
    write(&classes, &export_dot(&analysis.level_graph(args.input.level)))?;
    Ok(vec![cells, classes])
}

/// Path of the ground-truth sidecar for a fixture written to `output`.
pub fn truth_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("fixture");
    output.with_file_name(format!("{stem}.truth.json"))
}

pub fn fixture(args: &FixtureArgs) -> Result<(PathBuf, PathBuf), Failure> {
    let spec = FixtureSpec {
        kind: args.kind,
        seed: args.seed,
        cols: args.cols,
        rows: args.rows,
        anomalies: args.anomalies,
    };
    let (wb, truth) = generate(&spec)?;
    let doc = FgjDocument::from_workbook(&wb);
    write(&args.output, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    let sidecar = truth_path(&args.output);
    write(&sidecar, &(serde_json::to_string_pretty(&truth)? + "\n"))?;
    Ok((args.output.clone(), sidecar))
}

/// Builds the service, replaying an existing findings log or creating one.
pub fn service_for(args: &ServeArgs, clock: fn() -> u64) -> Result<AuditService> {
    let analysis = load(&args.input)?;
    let findings = analysis.findings(&config(&args.input));
    let store = match &args.findings_log {
        Some(path) if path.exists() => {
            let text = fs::read_to_string(path).map_err(|e| anyhow!("cannot read {}: {e}", path.display()))?;
            let store = FindingStore::replay(&text).map_err(|e| anyhow!("cannot replay {}: {e}", path.display()))?;
            let logged: Vec<_> = store.findings().iter().map(|f| (&f.id, &f.location, f.category)).collect();
            let fresh: Vec<_> = findings.iter().map(|f| (&f.id, &f.location, f.category)).collect();
            if logged != fresh {
                bail!(
                    "{} records findings for a different analysis; remove it or choose another --findings-log",
                    path.display()
                );
            }
            store
        }
        other => {
            let store = FindingStore::with_findings(findings, clock())?;
            if let Some(path) = other {
                write(path, &store.to_jsonl())?;
            }
            store
        }
    };
    Ok(AuditService::new(analysis, store, args.findings_log.clone(), clock))
}

pub fn serve(args: &ServeArgs) -> Result<(), Failure> {
    let service = Arc::new(service_for(args, now_ms)?);
    let server = tiny_http::Server::http(&args.bind)
        .map_err(|e| anyhow!("cannot bind {}: {e}", args.bind))?;
    eprintln!("sheetaudit: serving {} on http://{}", args.input.input.display(), args.bind);
    service::run(service, Arc::new(server), args.workers);
    Ok(())
}
