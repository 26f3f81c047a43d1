use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::findings::{Category, Finding, Status};
use super::{sheet_runs, Orientation, Run};
use crate::equivalence::{copy_fingerprint, ClassHierarchy, ClassId};
use crate::formula::{referenced_cells, refs_with_relative_axis, Precedent};
use crate::grid::{column_name, CellPos, Rect, Workbook};

/// Sheets with fewer formula cells are skipped by the run-based detectors.
pub const MIN_FORMULAS_FOR_RUN_DETECTORS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Same-class cells required on each side of an interruption.
    pub min_flank: u32,
    /// Longest interruption (in cells) still reported.
    pub max_gap: u32,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { min_flank: 2, max_gap: 1 }
    }
}

fn category_rank(c: Category) -> u8 {
    match c {
        Category::ConstantInsteadOfFormula => 0,
        Category::ConstantInsteadOfReference => 1,
        Category::Other => 2,
        Category::ReferenceToEmptyCell => 3,
        Category::FormulaCopiedTooFar => 4,
    }
}

fn run_label(wb: &Workbook, run: &Run) -> String {
    format!("{}!{}", wb.sheet(run.sheet).name(), run.rect().a1())
}

fn formula_key(wb: &Workbook, pos: CellPos) -> Option<String> {
    wb.get(pos).ast().map(|ast| copy_fingerprint(ast).key)
}

fn new_finding(
    wb: &Workbook,
    pos: CellPos,
    category: Category,
    classes: Vec<ClassId>,
    run: Option<String>,
    description: String,
) -> Finding {
    Finding {
        id: String::new(),
        category,
        location: wb.address(pos),
        classes,
        run,
        description,
        status: Status::Open,
        formula_key: formula_key(wb, pos),
    }
}

fn eligible_sheets(wb: &Workbook) -> impl Iterator<Item = usize> + '_ {
    (0..wb.sheets().len()).filter(|&s| wb.sheet(s).formula_count() >= MIN_FORMULAS_FOR_RUN_DETECTORS)
}

fn number(findings: Vec<Finding>, wb: &Workbook) -> Vec<Finding> {
    let mut keyed: Vec<(CellPos, u8, Finding)> = findings
        .into_iter()
        .map(|f| {
            let pos = wb.pos(&f.location).expect("finding on a workbook sheet");
            (pos, category_rank(f.category), f)
        })
        .collect();
    keyed.sort_by_key(|k| (k.0, k.1));
    keyed
        .into_iter()
        .enumerate()
        .map(|(i, (_, _, mut f))| {
            f.id = format!("F{}", i + 1);
            f
        })
        .collect()
}

/// Cells interrupting an otherwise regular run of one copy class along a row or
/// column. Each interruption of at most `max_gap` occupied cells flanked by at
/// least `min_flank` class members on both sides yields one finding per
/// interrupting cell.
pub fn detect_interruptions(h: &ClassHierarchy, wb: &Workbook, config: &DetectorConfig) -> Vec<Finding> {
    let mut best: BTreeMap<CellPos, Finding> = BTreeMap::new();
    for sheet in eligible_sheets(wb) {
        for ((orientation, _), runs) in sheet_runs(h, wb, sheet) {
            for (i, a) in runs.iter().enumerate() {
                if a.len() < config.min_flank {
                    continue;
                }
                let Some(b) = runs[i + 1..].iter().find(|r| r.class == a.class) else {
                    continue;
                };
                let gap = b.start - a.end - 1;
                if gap == 0 || gap > config.max_gap || b.len() < config.min_flank {
                    continue;
                }
                let gap_cells: Vec<CellPos> = (a.end + 1..b.start).map(|at| a.cell(at)).collect();
                if gap_cells.iter().any(|&p| wb.get(p).is_empty()) {
                    continue;
                }
                let disrupted = h.class(a.class).expect("run class exists");
                let lineage = h.lineage(disrupted.representative()).expect("member lineage");
                let axis = match orientation {
                    Orientation::Row => format!("row {}", a.line),
                    Orientation::Column => format!("column {}", column_name(a.line)),
                };
                let runs_label = format!("{} and {}", run_label(wb, a), run_label(wb, b));
                for pos in gap_cells {
                    let content = wb.get(pos);
                    let (category, classes, what) = if content.kind().is_literal() {
                        (
                            Category::ConstantInsteadOfFormula,
                            vec![a.class],
                            "holds a constant".to_string(),
                        )
                    } else {
                        let own = h.lineage(pos).expect("formula cell lineage");
                        if own[2] == lineage[2] && own[1] != lineage[1] {
                            (
                                Category::ConstantInsteadOfReference,
                                vec![a.class, own[0]],
                                "has the same operator structure but a different logical form (a constant may replace a reference)"
                                    .to_string(),
                            )
                        } else {
                            (Category::Other, vec![a.class, own[0]], "holds an unrelated formula".to_string())
                        }
                    };
                    let description = format!(
                        "{} interrupts copy class {} along {}: the cell {}",
                        wb.address(pos),
                        a.class,
                        axis,
                        what
                    );
                    let candidate = new_finding(wb, pos, category, classes, Some(runs_label.clone()), description);
                    match best.get(&pos) {
                        Some(existing) if category_rank(existing.category) <= category_rank(category) => {}
                        _ => {
                            best.insert(pos, candidate);
                        }
                    }
                }
            }
        }
    }
    number(best.into_values().collect(), wb)
}

fn describe_precedent(wb: &Workbook, p: &Precedent) -> String {
    match p {
        Precedent::Cell(c) => wb.address(*c).to_string(),
        Precedent::OutOfGrid { sheet, col, row } => {
            format!("{}!(column {col}, row {row}) outside the grid", wb.sheet(*sheet).name())
        }
        Precedent::UnresolvedSheet(name) => format!("unknown sheet `{name}`"),
    }
}

fn is_empty_precedent(wb: &Workbook, p: &Precedent) -> bool {
    match p {
        Precedent::Cell(c) => wb.get(*c).is_empty(),
        Precedent::OutOfGrid { .. } | Precedent::UnresolvedSheet(_) => true,
    }
}

/// One finding per formula cell reading at least one empty cell, an
/// out-of-grid coordinate or an unknown sheet.
pub fn detect_empty_references(h: &ClassHierarchy, wb: &Workbook) -> Vec<Finding> {
    let mut out = Vec::new();
    for (pos, ast) in wb.formula_cells() {
        let offending: Vec<Precedent> = referenced_cells(ast, pos, wb)
            .into_iter()
            .filter(|p| is_empty_precedent(wb, p))
            .collect();
        if offending.is_empty() {
            continue;
        }
        let mut listed: Vec<String> = offending.iter().take(5).map(|p| describe_precedent(wb, p)).collect();
        if offending.len() > 5 {
            listed.push(format!("and {} more", offending.len() - 5));
        }
        let out_of_grid = offending.iter().any(|p| matches!(p, Precedent::OutOfGrid { .. }));
        let description = format!(
            "{} references {}: {}",
            wb.address(pos),
            if out_of_grid {
                "cells outside the grid or empty cells"
            } else {
                "empty cells"
            },
            listed.join(", ")
        );
        let classes = h.copy_class_of(pos).map(|c| vec![c.id]).unwrap_or_default();
        out.push(new_finding(wb, pos, Category::ReferenceToEmptyCell, classes, None, description));
    }
    number(out, wb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct MemberProbe {
    /// Has relative references and every one of them resolves to nothing.
    dangling: bool,
    /// Reads at least one occupied cell.
    reads_data: bool,
}

fn probe(wb: &Workbook, pos: CellPos) -> MemberProbe {
    let ast = wb.get(pos).ast().expect("run member is a formula");
    let relative = refs_with_relative_axis(ast, pos, wb);
    let dangling = !relative.is_empty() && relative.iter().all(|p| is_empty_precedent(wb, p));
    let reads_data = referenced_cells(ast, pos, wb)
        .iter()
        .any(|p| !is_empty_precedent(wb, p));
    MemberProbe { dangling, reads_data }
}

/// Trailing members of a run whose relative references all land on empty
/// cells while the interior of the run still reads data.
pub fn detect_copied_too_far(h: &ClassHierarchy, wb: &Workbook) -> Vec<Finding> {
    let mut flagged: BTreeMap<CellPos, Finding> = BTreeMap::new();
    for sheet in eligible_sheets(wb) {
        for (_, runs) in sheet_runs(h, wb, sheet) {
            for run in runs.iter().filter(|r| r.len() >= 2) {
                let cells: Vec<CellPos> = run.cells().collect();
                let probes: Vec<MemberProbe> = cells.iter().map(|&p| probe(wb, p)).collect();
                let head = probes.iter().take_while(|p| p.dangling).count();
                if head == cells.len() {
                    continue;
                }
                let tail = probes.iter().rev().take_while(|p| p.dangling).count();
                let interior = &probes[head..cells.len() - tail];
                if !interior.iter().any(|p| p.reads_data) {
                    continue;
                }
                let trailing = cells[..head].iter().chain(&cells[cells.len() - tail..]);
                let label = run_label(wb, run);
                let segment_of = |pos: &CellPos| {
                    let seg: Vec<&CellPos> = if cells[..head].contains(pos) {
                        cells[..head].iter().collect()
                    } else {
                        cells[cells.len() - tail..].iter().collect()
                    };
                    Rect {
                        top: seg[0].row,
                        left: seg[0].col,
                        bottom: seg[seg.len() - 1].row,
                        right: seg[seg.len() - 1].col,
                    }
                    .a1()
                };
                for pos in trailing {
                    if flagged.contains_key(pos) {
                        continue;
                    }
                    let description = format!(
                        "{} continues copy class {} past its data: every relative reference of the trailing segment {} reads an empty cell while the rest of {} reads data",
                        wb.address(*pos),
                        run.class,
                        segment_of(pos),
                        label
                    );
                    flagged.insert(
                        *pos,
                        new_finding(
                            wb,
                            *pos,
                            Category::FormulaCopiedTooFar,
                            vec![run.class],
                            Some(label.clone()),
                            description,
                        ),
                    );
                }
            }
        }
    }
    number(flagged.into_values().collect(), wb)
}

/// Runs every detector and merges their output into one canonically ordered,
/// freshly numbered list. At a cell flagged as copied too far the (implied)
/// empty-reference finding is dropped.
pub fn detect_all(h: &ClassHierarchy, wb: &Workbook, config: &DetectorConfig) -> Vec<Finding> {
    let too_far = detect_copied_too_far(h, wb);
    let too_far_cells: BTreeSet<_> = too_far.iter().map(|f| f.location.clone()).collect();
    let mut all = detect_interruptions(h, wb, config);
    all.extend(
        detect_empty_references(h, wb)
            .into_iter()
            .filter(|f| !too_far_cells.contains(&f.location)),
    );
    all.extend(too_far);
    number(all, wb)
}
