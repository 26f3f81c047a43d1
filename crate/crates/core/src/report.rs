//! Audit metrics, error statistics and report emission.
//!
//! All ratios are kept as exact integer fractions; display strings are rounded
//! half-up from the fraction itself, so no binary floating point sits between a
//! count and its printed percentage.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::areas::{Category, ErrorRecord, Finding, FindingStore, Impact};
use crate::equivalence::ClassHierarchy;
use crate::grid::{occupancy_counts, Workbook};

/// An exact ratio `num / den` with `den > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    /// `None` for a zero denominator: the ratio is absent, not zero.
    pub fn new(num: u64, den: u64) -> Option<Ratio> {
        (den != 0).then_some(Ratio { num, den })
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `num * scale / den` rounded half-up to `decimals` places, as text.
    fn scaled(self, scale: u64, decimals: u32) -> String {
        let unit = 10u128.pow(decimals);
        let scaled = u128::from(self.num) * u128::from(scale) * unit;
        let den = u128::from(self.den);
        let mut q = scaled / den;
        if 2 * (scaled % den) >= den {
            q += 1;
        }
        if decimals == 0 {
            q.to_string()
        } else {
            format!("{}.{:0width$}", q / unit, q % unit, width = decimals as usize)
        }
    }

    /// Percentage rounded half-up, e.g. `Ratio{1832, 60446}.percent(2) == "3.03"`.
    pub fn percent(self, decimals: u32) -> String {
        self.scaled(100, decimals)
    }

    /// Plain quotient rounded half-up.
    pub fn fixed(self, decimals: u32) -> String {
        self.scaled(1, decimals)
    }
}

/// Display precision of one ratio: a percentage or a plain quotient.
#[derive(Debug, Clone, Copy)]
enum Shown {
    Percent(u32),
    Fixed(u32),
}

impl Shown {
    fn render(self, r: Option<Ratio>) -> String {
        match (self, r) {
            (_, None) => "-".to_string(),
            (Shown::Percent(d), Some(r)) => format!("{}%", r.percent(d)),
            (Shown::Fixed(d), Some(r)) => r.fixed(d),
        }
    }
}

/// A ratio with its display string, as carried in JSON reports.
struct ShownRatio(Option<Ratio>, Shown);

impl Serialize for ShownRatio {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            None => serializer.serialize_none(),
            Some(r) => {
                let mut s = serializer.serialize_struct("Ratio", 4)?;
                s.serialize_field("num", &r.num)?;
                s.serialize_field("den", &r.den)?;
                s.serialize_field("value", &r.value())?;
                s.serialize_field("display", &self.1.render(Some(r)))?;
                s.end()
            }
        }
    }
}

/// Absolute counts of one report row (a sheet, a workbook or a total).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRow {
    pub name: String,
    /// Bounding-box area.
    pub cells: u64,
    pub occupied: u64,
    pub formulas: u64,
    pub literals: u64,
    /// Copy-equivalence classes, singletons included.
    pub ce_count: u64,
    #[serde(default)]
    pub error_classes: u64,
    #[serde(default)]
    pub errors: u64,
}

impl CountRow {
    pub fn occupied_pct(&self) -> Option<Ratio> {
        Ratio::new(self.occupied, self.cells)
    }
    pub fn formula_pct(&self) -> Option<Ratio> {
        Ratio::new(self.formulas, self.occupied)
    }
    pub fn literal_pct(&self) -> Option<Ratio> {
        Ratio::new(self.literals, self.occupied)
    }
    pub fn ce_to_formula(&self) -> Option<Ratio> {
        Ratio::new(self.ce_count, self.formulas)
    }
    pub fn avg_class_size(&self) -> Option<Ratio> {
        Ratio::new(self.formulas, self.ce_count)
    }
    pub fn error_classes_per_ce(&self) -> Option<Ratio> {
        Ratio::new(self.error_classes, self.ce_count)
    }
    pub fn errors_per_formula(&self) -> Option<Ratio> {
        Ratio::new(self.errors, self.formulas)
    }
    pub fn errors_per_occupied(&self) -> Option<Ratio> {
        Ratio::new(self.errors, self.occupied)
    }

    fn add(&mut self, other: &CountRow) {
        self.cells += other.cells;
        self.occupied += other.occupied;
        self.formulas += other.formulas;
        self.literals += other.literals;
        self.ce_count += other.ce_count;
        self.error_classes += other.error_classes;
        self.errors += other.errors;
    }

    fn json(&self, total: bool) -> serde_json::Value {
        let pct = if total { Shown::Percent(2) } else { Shown::Percent(1) };
        serde_json::json!({
            "name": self.name,
            "cells": self.cells,
            "occupied": self.occupied,
            "formulas": self.formulas,
            "literals": self.literals,
            "ce_count": self.ce_count,
            "error_classes": self.error_classes,
            "errors": self.errors,
            "occupied_pct": ShownRatio(self.occupied_pct(), pct),
            "formula_pct": ShownRatio(self.formula_pct(), pct),
            "literal_pct": ShownRatio(self.literal_pct(), pct),
            "ce_to_formula": ShownRatio(self.ce_to_formula(), Shown::Percent(1)),
            "avg_class_size": ShownRatio(self.avg_class_size(), Shown::Fixed(1)),
            "error_classes_per_ce": ShownRatio(self.error_classes_per_ce(), Shown::Percent(1)),
            "errors_per_formula": ShownRatio(self.errors_per_formula(), Shown::Percent(2)),
            "errors_per_occupied": ShownRatio(self.errors_per_occupied(), pct),
        })
    }
}

/// Rows plus their rolled-up total. For an analyzed workbook the rows are its
/// sheets; with injected counts they are whatever the caller supplies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditMetrics {
    pub rows: Vec<CountRow>,
    pub total: CountRow,
}

impl AuditMetrics {
    /// Injection mode: the total is the field-wise sum of `rows`.
    pub fn from_rows(rows: Vec<CountRow>, total_name: &str) -> Self {
        let mut total = CountRow {
            name: total_name.to_string(),
            ..CountRow::default()
        };
        for r in &rows {
            total.add(r);
        }
        AuditMetrics { rows, total }
    }
}

/// Per-sheet counts plus the workbook row.
///
/// The workbook `ce_count` is the number of copy classes in the hierarchy. A
/// sheet's `ce_count` is the number of copy classes with a member on it, so a
/// class copied across sheets counts once per sheet and the sheet values can
/// sum to more than the workbook value.
pub fn compute_metrics(wb: &Workbook, h: &ClassHierarchy) -> AuditMetrics {
    let mut classes_on: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); wb.sheets().len()];
    for c in h.classes(crate::equivalence::Level::Copy) {
        for m in &c.members {
            classes_on[m.sheet].insert(c.id.index);
        }
    }
    let rows: Vec<CountRow> = wb
        .sheets()
        .iter()
        .zip(&classes_on)
        .map(|(sheet, classes)| {
            let occ = occupancy_counts(sheet);
            CountRow {
                name: sheet.name().to_string(),
                cells: occ.cells,
                occupied: occ.occupied,
                formulas: occ.formulas,
                literals: occ.literals,
                ce_count: classes.len() as u64,
                error_classes: 0,
                errors: 0,
            }
        })
        .collect();
    let occ = wb.occupancy();
    let total = CountRow {
        name: wb.name().to_string(),
        cells: occ.cells,
        occupied: occ.occupied,
        formulas: occ.formulas,
        literals: occ.literals,
        ce_count: h.classes(crate::equivalence::Level::Copy).len() as u64,
        error_classes: 0,
        errors: 0,
    };
    AuditMetrics { rows, total }
}

/// Error classes and errors of one slice of the error database.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub error_classes: u64,
    pub errors: u64,
}

impl std::ops::Add for SplitCounts {
    type Output = SplitCounts;
    fn add(self, o: SplitCounts) -> SplitCounts {
        SplitCounts {
            error_classes: self.error_classes + o.error_classes,
            errors: self.errors + o.errors,
        }
    }
}

impl std::iter::Sum for SplitCounts {
    fn sum<I: Iterator<Item = SplitCounts>>(iter: I) -> Self {
        iter.fold(SplitCounts::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactSplit {
    pub qualitative: SplitCounts,
    pub quantitative: SplitCounts,
}

impl ImpactSplit {
    pub fn total(&self) -> SplitCounts {
        self.qualitative + self.quantitative
    }
}

impl std::ops::Add for ImpactSplit {
    type Output = ImpactSplit;
    fn add(self, o: ImpactSplit) -> ImpactSplit {
        ImpactSplit {
            qualitative: self.qualitative + o.qualitative,
            quantitative: self.quantitative + o.quantitative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub category: Category,
    #[serde(flatten)]
    pub counts: SplitCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorStatistics {
    /// Totals as declared by the error database.
    pub total: SplitCounts,
    pub by_impact: ImpactSplit,
    /// One entry per category, in `Category::ALL` order.
    pub by_category: Vec<CategoryCount>,
    pub formulas: u64,
    pub ce_count: u64,
    pub occupied: u64,
}

/// A mismatch found by [`ErrorStatistics::consistency_issues`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inconsistency {
    pub what: &'static str,
    pub expected: SplitCounts,
    pub found: SplitCounts,
}

impl fmt::Display for Inconsistency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} error classes / {} errors, expected {} / {}",
            self.what, self.found.error_classes, self.found.errors, self.expected.error_classes, self.expected.errors
        )
    }
}

impl ErrorStatistics {
    /// Injection mode: counts supplied directly instead of derived from verdicts.
    pub fn inject(
        total: SplitCounts,
        by_impact: ImpactSplit,
        by_category: &[(Category, SplitCounts)],
        formulas: u64,
        ce_count: u64,
        occupied: u64,
    ) -> Self {
        let by_category = Category::ALL
            .iter()
            .map(|&category| CategoryCount {
                category,
                counts: by_category
                    .iter()
                    .filter(|(c, _)| *c == category)
                    .map(|(_, s)| *s)
                    .sum(),
            })
            .collect();
        ErrorStatistics {
            total,
            by_impact,
            by_category,
            formulas,
            ce_count,
            occupied,
        }
    }

    pub fn category_total(&self) -> SplitCounts {
        self.by_category.iter().map(|c| c.counts).sum()
    }

    pub fn category(&self, category: Category) -> SplitCounts {
        self.by_category
            .iter()
            .find(|c| c.category == category)
            .map(|c| c.counts)
            .unwrap_or_default()
    }

    /// The impact split and the category split must each sum to the declared
    /// totals, and errors can never be fewer than error classes.
    pub fn consistency_issues(&self) -> Vec<Inconsistency> {
        let mut out = Vec::new();
        if self.by_impact.total() != self.total {
            out.push(Inconsistency {
                what: "impact split",
                expected: self.total,
                found: self.by_impact.total(),
            });
        }
        if self.category_total() != self.total {
            out.push(Inconsistency {
                what: "category split",
                expected: self.total,
                found: self.category_total(),
            });
        }
        if self.total.errors < self.total.error_classes {
            out.push(Inconsistency {
                what: "errors below error classes",
                expected: self.total,
                found: self.total,
            });
        }
        out
    }

    pub fn error_classes_per_ce(&self) -> Option<Ratio> {
        Ratio::new(self.total.error_classes, self.ce_count)
    }

    pub fn errors_per_formula(&self) -> Option<Ratio> {
        Ratio::new(self.total.errors, self.formulas)
    }

    pub fn errors_per_occupied(&self) -> Option<Ratio> {
        Ratio::new(self.total.errors, self.occupied)
    }

    fn json(&self) -> serde_json::Value {
        serde_json::json!({
            "error_classes": self.total.error_classes,
            "errors": self.total.errors,
            "by_impact": self.by_impact,
            "by_category": self.by_category,
            "formulas": self.formulas,
            "ce_count": self.ce_count,
            "occupied": self.occupied,
            "error_classes_per_ce": ShownRatio(self.error_classes_per_ce(), Shown::Percent(1)),
            "errors_per_formula": ShownRatio(self.errors_per_formula(), Shown::Percent(2)),
            "errors_per_occupied": ShownRatio(self.errors_per_occupied(), Shown::Percent(2)),
        })
    }
}

/// Groups records into error classes. A class takes the impact and category of
/// its first confirmed record; errors are split by each record's own values.
fn class_leaders(records: &[ErrorRecord]) -> BTreeMap<&str, &ErrorRecord> {
    let mut leaders: BTreeMap<&str, &ErrorRecord> = BTreeMap::new();
    for r in records {
        leaders.entry(r.error_class_key.as_str()).or_insert(r);
    }
    leaders
}

fn split_records<'a>(records: impl IntoIterator<Item = &'a ErrorRecord>) -> SplitCounts {
    let records: Vec<&ErrorRecord> = records.into_iter().collect();
    let keys: BTreeSet<&str> = records.iter().map(|r| r.error_class_key.as_str()).collect();
    SplitCounts {
        error_classes: keys.len() as u64,
        errors: records.len() as u64,
    }
}

pub fn compute_error_statistics(store: &FindingStore, h: &ClassHierarchy, wb: &Workbook) -> ErrorStatistics {
    let records = store.records();
    let leaders = class_leaders(records);
    let classes_with = |pred: &dyn Fn(&ErrorRecord) -> bool| leaders.values().filter(|r| pred(r)).count() as u64;
    let errors_with = |pred: &dyn Fn(&ErrorRecord) -> bool| records.iter().filter(|r| pred(r)).count() as u64;
    let impact = |i: Impact| SplitCounts {
        error_classes: classes_with(&|r| r.impact == i),
        errors: errors_with(&|r| r.impact == i),
    };
    let by_category: Vec<(Category, SplitCounts)> = Category::ALL
        .iter()
        .map(|&c| {
            (
                c,
                SplitCounts {
                    error_classes: classes_with(&|r| r.category == c),
                    errors: errors_with(&|r| r.category == c),
                },
            )
        })
        .collect();
    let occ = wb.occupancy();
    ErrorStatistics::inject(
        split_records(records),
        ImpactSplit {
            qualitative: impact(Impact::Qualitative),
            quantitative: impact(Impact::Quantitative),
        },
        &by_category,
        occ.formulas,
        h.classes(crate::equivalence::Level::Copy).len() as u64,
        occ.occupied,
    )
}

/// Fills the error columns of each sheet row and of the workbook row.
pub fn attach_errors(metrics: &mut AuditMetrics, store: &FindingStore) {
    let records = store.records();
    for row in &mut metrics.rows {
        let s = split_records(records.iter().filter(|r| r.location.sheet == row.name));
        row.error_classes = s.error_classes;
        row.errors = s.errors;
    }
    let s = split_records(records);
    metrics.total.error_classes = s.error_classes;
    metrics.total.errors = s.errors;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Text,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "text" => Ok(ReportFormat::Text),
            _ => Err(format!("unknown report format `{s}` (expected json or text)")),
        }
    }
}

/// Everything one report shows.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub workbook: String,
    pub metrics: AuditMetrics,
    pub error_statistics: ErrorStatistics,
    pub findings: Vec<Finding>,
}

impl Report {
    pub fn build(wb: &Workbook, h: &ClassHierarchy, store: &FindingStore) -> Self {
        let mut metrics = compute_metrics(wb, h);
        attach_errors(&mut metrics, store);
        Report {
            workbook: wb.name().to_string(),
            metrics,
            error_statistics: compute_error_statistics(store, h, wb),
            findings: store.findings().to_vec(),
        }
    }
}

pub fn emit_report(report: &Report, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let doc = serde_json::json!({
                "workbook": report.workbook,
                "sheets": report.metrics.rows.iter().map(|r| r.json(false)).collect::<Vec<_>>(),
                "metrics": report.metrics.total.json(true),
                "error_statistics": report.error_statistics.json(),
                "findings": report.findings,
            });
            let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
            text.push('\n');
            text
        }
        ReportFormat::Text => text_report(report),
    }
}

/// Fixed-width table. Columns holding only numbers, percentages or `-` are
/// right-aligned; the rest are left-aligned.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    fn render(&self, out: &mut String) {
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let numeric: Vec<bool> = (0..widths.len())
            .map(|i| {
                !self.rows.is_empty()
                    && self.rows.iter().all(|r| {
                        let c = r[i].trim_end_matches('%');
                        c == "-" || c.parse::<f64>().is_ok()
                    })
            })
            .collect();
        let line = |cells: &[String], out: &mut String| {
            let mut s = String::new();
            for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
                let sep = if i == 0 { "" } else { "  " };
                if numeric[i] {
                    write!(s, "{sep}{c:>w$}").unwrap();
                } else {
                    write!(s, "{sep}{c:<w$}").unwrap();
                }
            }
            out.push_str(s.trim_end());
            out.push('\n');
        };
        line(&self.header, out);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        line(&rule, out);
        for r in &self.rows {
            line(r, out);
        }
    }
}

fn absolute_cells(r: &CountRow) -> Vec<String> {
    vec![
        r.name.clone(),
        r.cells.to_string(),
        r.occupied.to_string(),
        r.formulas.to_string(),
        r.literals.to_string(),
        r.ce_count.to_string(),
        r.error_classes.to_string(),
        r.errors.to_string(),
    ]
}

fn relative_cells(r: &CountRow, total: bool) -> Vec<String> {
    let pct = Shown::Percent(if total { 2 } else { 1 });
    vec![
        r.name.clone(),
        r.cells.to_string(),
        pct.render(r.occupied_pct()),
        pct.render(r.formula_pct()),
        pct.render(r.literal_pct()),
        Shown::Percent(1).render(r.ce_to_formula()),
        Shown::Fixed(1).render(r.avg_class_size()),
        r.error_classes.to_string(),
        pct.render(r.errors_per_occupied()),
    ]
}

fn ce_cells(r: &CountRow) -> Vec<String> {
    vec![
        r.name.clone(),
        r.formulas.to_string(),
        r.ce_count.to_string(),
        r.error_classes.to_string(),
        Shown::Percent(1).render(r.ce_to_formula()),
        Shown::Percent(1).render(r.error_classes_per_ce()),
        Shown::Percent(2).render(r.errors_per_formula()),
    ]
}

/// Renders the metric tables of `metrics` (counts, relative, copy-equivalence).
pub fn metrics_tables(metrics: &AuditMetrics) -> String {
    let mut out = String::new();
    out.push_str("Error distribution, absolute\n");
    let mut t = Table::new(&["Name", "Cells", "Occupied", "Formulas", "Literals", "CE", "Error classes", "Errors"]);
    metrics.rows.iter().for_each(|r| t.row(absolute_cells(r)));
    t.row(absolute_cells(&metrics.total));
    t.render(&mut out);

    out.push_str("\nError distribution, relative (errors relative to occupied cells)\n");
    let mut t = Table::new(&[
        "Name",
        "Cells",
        "Occupied",
        "Formulas",
        "Literals",
        "CE/Formula",
        "Formulas/CE",
        "Error classes",
        "Errors",
    ]);
    metrics.rows.iter().for_each(|r| t.row(relative_cells(r, false)));
    t.row(relative_cells(&metrics.total, true));
    t.render(&mut out);

    out.push_str("\nError classes relative to copy-equivalence classes\n");
    let mut t = Table::new(&[
        "Name",
        "Formulas",
        "CE",
        "Error classes",
        "CE/Formula",
        "Error classes/CE",
        "Errors/Formula",
    ]);
    metrics.rows.iter().for_each(|r| t.row(ce_cells(r)));
    t.row(ce_cells(&metrics.total));
    t.render(&mut out);
    out
}

/// Renders the impact and category tables.
pub fn error_tables(stats: &ErrorStatistics) -> String {
    let mut out = String::new();
    out.push_str("Errors by impact\n");
    let mut t = Table::new(&["Impact", "Error classes", "Errors"]);
    for (label, s) in [
        ("Qualitative", stats.by_impact.qualitative),
        ("Quantitative", stats.by_impact.quantitative),
        ("Total", stats.by_impact.total()),
    ] {
        t.row(vec![label.to_string(), s.error_classes.to_string(), s.errors.to_string()]);
    }
    t.render(&mut out);

    out.push_str("\nErrors by category\n");
    let mut t = Table::new(&["Category", "Error classes", "Errors"]);
    for c in &stats.by_category {
        t.row(vec![
            c.category.label().to_string(),
            c.counts.error_classes.to_string(),
            c.counts.errors.to_string(),
        ]);
    }
    let total = stats.category_total();
    t.row(vec!["Total".into(), total.error_classes.to_string(), total.errors.to_string()]);
    t.render(&mut out);
    writeln!(
        out,
        "\nError rate: {} of occupied cells, {} of formulas",
        Shown::Percent(2).render(stats.errors_per_occupied()),
        Shown::Percent(2).render(stats.errors_per_formula())
    )
    .unwrap();
    out
}

fn text_report(report: &Report) -> String {
    let mut out = String::new();
    writeln!(out, "Audit report: {}\n", report.workbook).unwrap();
    out.push_str(&metrics_tables(&report.metrics));
    out.push('\n');
    out.push_str(&error_tables(&report.error_statistics));
    writeln!(out, "\nFindings ({})", report.findings.len()).unwrap();
    if !report.findings.is_empty() {
        let mut t = Table::new(&["Id", "Location", "Category", "Status", "Description"]);
        for f in &report.findings {
            let status = serde_json::to_value(f.status).expect("status serializes");
            t.row(vec![
                f.id.clone(),
                f.location.to_string(),
                f.category.label().to_string(),
                status.as_str().unwrap_or_default().to_string(),
                f.description.clone(),
            ]);
        }
        t.render(&mut out);
    }
    out
}
