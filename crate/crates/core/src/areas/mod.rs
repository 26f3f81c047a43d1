//! Geometry of equivalence classes: logical areas, line runs, irregularity
//! detectors and the finding/verdict workflow.

mod detect;
mod findings;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

pub use detect::{
    detect_all, detect_copied_too_far, detect_empty_references, detect_interruptions, DetectorConfig,
    MIN_FORMULAS_FOR_RUN_DETECTORS,
};
pub use findings::{
    Category, ErrorRecord, Event, Finding, FindingStore, Impact, LogEntry, ReplayError, Status, StoreError, Verdict,
};

use crate::equivalence::{ClassHierarchy, ClassId, Level};
use crate::grid::{CellPos, Rect, Workbook};

/// Footprint of one class on one sheet as disjoint maximal rectangles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogicalArea {
    pub class: ClassId,
    pub sheet: String,
    pub regions: Vec<Rect>,
}

/// Row-major greedy rectangle cover: from each unassigned cell grow right as
/// far as possible, then down over full-width rows.
pub fn decompose(cells: &BTreeSet<(u32, u32)>) -> Vec<Rect> {
    // cells are (row, col)
    let mut free = cells.clone();
    let mut out = Vec::new();
    for &(row, col) in cells {
        if !free.contains(&(row, col)) {
            continue;
        }
        let mut right = col;
        while free.contains(&(row, right + 1)) {
            right += 1;
        }
        let mut bottom = row;
        while (col..=right).all(|c| free.contains(&(bottom + 1, c))) {
            bottom += 1;
        }
        for r in row..=bottom {
            for c in col..=right {
                free.remove(&(r, c));
            }
        }
        out.push(Rect {
            top: row,
            left: col,
            bottom,
            right,
        });
    }
    out
}

/// Logical areas of every class at `level`, ordered by class then sheet.
pub fn logical_areas(h: &ClassHierarchy, wb: &Workbook, level: Level) -> Vec<LogicalArea> {
    h.classes(level).iter().flat_map(|class| class_areas(h, wb, class.id)).collect()
}

/// Logical areas of a single class, one per sheet it touches.
pub fn class_areas(h: &ClassHierarchy, wb: &Workbook, id: ClassId) -> Vec<LogicalArea> {
    let Some(class) = h.class(id) else {
        return Vec::new();
    };
    let mut per_sheet: BTreeMap<usize, BTreeSet<(u32, u32)>> = BTreeMap::new();
    for m in &class.members {
        per_sheet.entry(m.sheet).or_default().insert((m.row, m.col));
    }
    per_sheet
        .into_iter()
        .map(|(sheet, cells)| LogicalArea {
            class: id,
            sheet: wb.sheet(sheet).name().to_string(),
            regions: decompose(&cells),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Row,
    Column,
}

/// A maximal run of one copy class along a row or a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub class: ClassId,
    pub sheet: usize,
    pub orientation: Orientation,
    /// Row number for a row run, column number for a column run.
    pub line: u32,
    pub start: u32,
    pub end: u32,
}

impl Run {
    // a run always holds at least one cell
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u32 {
        self.end - self.start + 1
    }

    pub fn cell(&self, at: u32) -> CellPos {
        match self.orientation {
            Orientation::Row => CellPos::new(self.sheet, at, self.line),
            Orientation::Column => CellPos::new(self.sheet, self.line, at),
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = CellPos> + '_ {
        (self.start..=self.end).map(|at| self.cell(at))
    }

    pub fn rect(&self) -> Rect {
        let (a, b) = (self.cell(self.start), self.cell(self.end));
        Rect {
            top: a.row,
            left: a.col,
            bottom: b.row,
            right: b.col,
        }
    }
}

/// All maximal copy-class runs of a sheet, per line in position order.
/// Returned as `(orientation, line) -> runs`.
pub fn sheet_runs(h: &ClassHierarchy, wb: &Workbook, sheet: usize) -> BTreeMap<(Orientation, u32), Vec<Run>> {
    let mut lines: BTreeMap<(Orientation, u32), Vec<(u32, ClassId)>> = BTreeMap::new();
    for (col, row, content) in wb.sheet(sheet).cells() {
        if content.ast().is_none() {
            continue;
        }
        let pos = CellPos::new(sheet, col, row);
        let class = h.copy_class_of(pos).expect("formula cell is partitioned").id;
        lines.entry((Orientation::Row, row)).or_default().push((col, class));
        lines.entry((Orientation::Column, col)).or_default().push((row, class));
    }
    lines
        .into_iter()
        .map(|((orientation, line), mut cells)| {
            cells.sort();
            let mut runs: Vec<Run> = Vec::new();
            for (at, class) in cells {
                match runs.last_mut() {
                    Some(r) if r.class == class && r.end + 1 == at => r.end = at,
                    _ => runs.push(Run {
                        class,
                        sheet,
                        orientation,
                        line,
                        start: at,
                        end: at,
                    }),
                }
            }
            ((orientation, line), runs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equivalence::partition;
    use crate::load::load_fgj;

    fn set(cells: &[(u32, u32)]) -> BTreeSet<(u32, u32)> {
        cells.iter().copied().collect()
    }

    #[test]
    fn contiguous_column() {
        let cells: Vec<(u32, u32)> = (2..=11).map(|r| (r, 2)).collect();
        assert_eq!(decompose(&set(&cells)), vec![Rect::parse_a1("B2:B11").unwrap()]);
    }

    #[test]
    fn gap_splits() {
        let cells: Vec<(u32, u32)> = (2..=11).filter(|&r| r != 6).map(|r| (r, 2)).collect();
        let rects: Vec<String> = decompose(&set(&cells)).iter().map(Rect::a1).collect();
        assert_eq!(rects, vec!["B2:B5", "B7:B11"]);
    }

    #[test]
    fn l_shape() {
        // B2:C2 plus B3
        let rects: Vec<String> = decompose(&set(&[(2, 2), (2, 3), (3, 2)])).iter().map(Rect::a1).collect();
        assert_eq!(rects, vec!["B2:C2", "B3"]);
    }

    #[test]
    fn block_grows_down_over_full_width() {
        let mut cells = Vec::new();
        for r in 1..=3 {
            for c in 1..=4 {
                cells.push((r, c));
            }
        }
        cells.push((4, 1));
        let rects: Vec<String> = decompose(&set(&cells)).iter().map(Rect::a1).collect();
        assert_eq!(rects, vec!["A1:D3", "A4"]);
    }

    #[test]
    fn areas_and_runs_of_a_sheet() {
        let mut cells = String::new();
        for r in 2..=6 {
            cells.push_str(&format!(r#"{{"addr":"A{r}","content":"{r}"}},{{"addr":"B{r}","content":"=A{r}*2"}},"#));
        }
        let doc = format!(r#"{{"workbook":"w","sheets":[{{"name":"S","cells":[{}]}}]}}"#, cells.trim_end_matches(','));
        let wb = load_fgj(doc.as_bytes()).unwrap();
        let h = partition(&wb);
        let areas = logical_areas(&h, &wb, Level::Copy);
        assert_eq!(areas.len(), 1);
        assert_eq!(areas[0].regions, vec![Rect::parse_a1("B2:B6").unwrap()]);
        let runs = sheet_runs(&h, &wb, 0);
        let col = &runs[&(Orientation::Column, 2)];
        assert_eq!(col.len(), 1);
        assert_eq!((col[0].start, col[0].end, col[0].len()), (2, 6, 5));
        assert_eq!(runs[&(Orientation::Row, 3)][0].len(), 1);
    }
}
