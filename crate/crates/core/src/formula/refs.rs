use std::collections::BTreeSet;

use super::{Expr, RefNode, Reference};
use crate::grid::{CellPos, Workbook};

/// A resolved precedent of a formula cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Precedent {
    Cell(CellPos),
    /// A relative reference that resolves above row 1 / left of column A or
    /// past the grid limits. Coordinates are the unclamped resolution.
    OutOfGrid { sheet: usize, col: i64, row: i64 },
    /// Sheet qualifier naming no sheet of the workbook.
    UnresolvedSheet(String),
}

impl Precedent {
    pub fn cell(&self) -> Option<CellPos> {
        match self {
            Precedent::Cell(p) => Some(*p),
            _ => None,
        }
    }
}

fn sheet_of(r: &Reference, origin: CellPos, wb: &Workbook) -> Result<usize, Precedent> {
    match &r.sheet {
        None => Ok(origin.sheet),
        Some(name) => wb
            .resolve_sheet(name)
            .ok_or_else(|| Precedent::UnresolvedSheet(name.clone())),
    }
}

/// Adds the precedents of a single reference node to `out`.
fn resolve_node(node: RefNode<'_>, origin: CellPos, wb: &Workbook, out: &mut BTreeSet<Precedent>) {
    match node {
        RefNode::Cell(r) => {
            let sheet = match sheet_of(r, origin, wb) {
                Ok(s) => s,
                Err(p) => {
                    out.insert(p);
                    return;
                }
            };
            out.insert(match r.resolve(origin.col, origin.row) {
                Ok((col, row)) => Precedent::Cell(CellPos::new(sheet, col, row)),
                Err((col, row)) => Precedent::OutOfGrid { sheet, col, row },
            });
        }
        RefNode::Range(range) => {
            let sheet = match sheet_of(&range.start, origin, wb) {
                Ok(s) => s,
                Err(p) => {
                    out.insert(p);
                    return;
                }
            };
            let a = range.start.resolve(origin.col, origin.row);
            let b = range.end.resolve(origin.col, origin.row);
            match (a, b) {
                (Ok((c1, r1)), Ok((c2, r2))) => {
                    for row in r1.min(r2)..=r1.max(r2) {
                        for col in c1.min(c2)..=c1.max(c2) {
                            out.insert(Precedent::Cell(CellPos::new(sheet, col, row)));
                        }
                    }
                }
                (Err((col, row)), _) | (_, Err((col, row))) => {
                    out.insert(Precedent::OutOfGrid { sheet, col, row });
                }
            }
        }
    }
}

/// Every cell the formula at `origin` reads, with ranges expanded.
pub fn referenced_cells(ast: &Expr, origin: CellPos, wb: &Workbook) -> BTreeSet<Precedent> {
    let mut out = BTreeSet::new();
    for node in ast.references() {
        resolve_node(node, origin, wb, &mut out);
    }
    out
}

/// Precedents of the references that have at least one relative axis (for a
/// range, on either endpoint).
pub fn refs_with_relative_axis(ast: &Expr, origin: CellPos, wb: &Workbook) -> BTreeSet<Precedent> {
    let mut out = BTreeSet::new();
    for node in ast.references() {
        let relative = match node {
            RefNode::Cell(r) => r.has_relative_axis(),
            RefNode::Range(r) => r.start.has_relative_axis() || r.end.has_relative_axis(),
        };
        if relative {
            resolve_node(node, origin, wb, &mut out);
        }
    }
    out
}
