//! Formula parsing into an origin-independent AST.
//!
//! Every A1 reference is normalized per axis at parse time: a `$`-anchored axis
//! keeps its absolute index, a bare axis is stored as the signed offset from
//! the containing cell. Two cells whose texts are copy/paste translations of
//! each other therefore parse to equal trees.

mod parser;
mod refs;
mod render;
mod translate;

use std::fmt;

pub use parser::{parse, ParseError, ParseErrorKind};
pub use refs::{referenced_cells, refs_with_relative_axis, Precedent};
pub use render::{render, RenderError};
pub use translate::{translate_a1, TranslateError};

use crate::grid::{MAX_COL, MAX_ROW};

/// One axis of a reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    /// Signed offset from the containing cell's coordinate.
    Relative(i64),
    /// 1-based absolute coordinate.
    Absolute(u32),
}

impl Axis {
    /// Resolves against an origin coordinate. Out-of-grid results are returned
    /// as `Err` carrying the unclamped coordinate.
    pub fn resolve(self, origin: u32, max: u32) -> Result<u32, i64> {
        let idx = match self {
            Axis::Relative(off) => i64::from(origin) + off,
            Axis::Absolute(idx) => i64::from(idx),
        };
        if (1..=i64::from(max)).contains(&idx) {
            Ok(idx as u32)
        } else {
            Err(idx)
        }
    }

    pub fn is_absolute(self) -> bool {
        matches!(self, Axis::Absolute(_))
    }
}

/// A single-cell reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Reference {
    /// Sheet qualifier as written; `None` means the containing sheet.
    pub sheet: Option<String>,
    pub col: Axis,
    pub row: Axis,
}

impl Reference {
    /// Resolves to `(col, row)` against the origin cell.
    pub fn resolve(&self, origin_col: u32, origin_row: u32) -> Result<(u32, u32), (i64, i64)> {
        let col = self.col.resolve(origin_col, MAX_COL);
        let row = self.row.resolve(origin_row, MAX_ROW);
        match (col, row) {
            (Ok(c), Ok(r)) => Ok((c, r)),
            (c, r) => Err((c.map_or_else(|e| e, i64::from), r.map_or_else(|e| e, i64::from))),
        }
    }

    pub fn has_relative_axis(&self) -> bool {
        !self.col.is_absolute() || !self.row.is_absolute()
    }
}

/// A rectangular range. Both endpoints carry the same sheet qualifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RangeRef {
    pub start: Reference,
    pub end: Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Percent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Concat,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "<>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Concat => "&",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }

    /// Binding strength; higher binds tighter.
    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 1,
            BinaryOp::Concat => 2,
            BinaryOp::Add | BinaryOp::Sub => 3,
            BinaryOp::Mul | BinaryOp::Div => 4,
            BinaryOp::Pow => 6,
        }
    }
}

impl fmt::Display for BinaryOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A formula expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Text(String),
    Bool(bool),
    Cell(Reference),
    Range(RangeRef),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// Function call; `name` is upper-case.
    Call { name: String, args: Vec<Expr> },
}

/// The parsed, reference-normalized form of one formula.
pub type FormulaAst = Expr;

/// A reference occurring in a formula.
#[derive(Debug, Clone, Copy)]
pub enum RefNode<'a> {
    Cell(&'a Reference),
    Range(&'a RangeRef),
}

impl Expr {
    /// All references in left-to-right order.
    pub fn references(&self) -> Vec<RefNode<'_>> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<RefNode<'a>>) {
        match self {
            Expr::Cell(r) => out.push(RefNode::Cell(r)),
            Expr::Range(r) => out.push(RefNode::Range(r)),
            Expr::Unary(_, e) => e.collect_refs(out),
            Expr::Binary(_, l, r) => {
                l.collect_refs(out);
                r.collect_refs(out);
            }
            Expr::Call { args, .. } => args.iter().for_each(|a| a.collect_refs(out)),
            Expr::Number(_) | Expr::Text(_) | Expr::Bool(_) => {}
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Unary(_, e) => 1 + e.node_count(),
            Expr::Binary(_, l, r) => 1 + l.node_count() + r.node_count(),
            Expr::Call { args, .. } => 1 + args.iter().map(Expr::node_count).sum::<usize>(),
            _ => 1,
        }
    }
}
