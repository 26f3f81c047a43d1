use std::fmt::Write as _;

use thiserror::Error;

use super::{Axis, BinaryOp, Expr, Reference, UnaryOp};
use crate::grid::{column_name, MAX_COL, MAX_ROW};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("reference #{node} resolves outside the grid (column {col}, row {row})")]
pub struct RenderError {
    /// 0-based index of the offending reference in left-to-right order.
    pub node: usize,
    pub col: i64,
    pub row: i64,
}

// binding levels: 1..=4 binary (cmp, &, +-, */), 5 unary minus, 6 ^, 7 %, 8 atoms
fn level(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Unary(UnaryOp::Neg, _) => 5,
        Expr::Unary(UnaryOp::Percent, _) => 7,
        _ => 8,
    }
}

pub(crate) fn sheet_prefix(sheet: &str) -> String {
    let plain = sheet.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_')
        && sheet.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.');
    if plain {
        format!("{sheet}!")
    } else {
        format!("'{}'!", sheet.replace('\'', "''"))
    }
}

struct Renderer {
    col: u32,
    row: u32,
    out: String,
    refs_seen: usize,
}

impl Renderer {
    fn axis(&self, axis: Axis, origin: u32, max: u32) -> Result<(bool, u32), i64> {
        axis.resolve(origin, max).map(|idx| (axis.is_absolute(), idx))
    }

    fn reference(&mut self, r: &Reference, with_sheet: bool) -> Result<(), RenderError> {
        let node = self.refs_seen;
        let col = self.axis(r.col, self.col, MAX_COL);
        let row = self.axis(r.row, self.row, MAX_ROW);
        let ((col_abs, c), (row_abs, rw)) = match (col, row) {
            (Ok(c), Ok(rw)) => (c, rw),
            (c, rw) => {
                return Err(RenderError {
                    node,
                    col: c.map_or_else(|e| e, |(_, i)| i64::from(i)),
                    row: rw.map_or_else(|e| e, |(_, i)| i64::from(i)),
                })
            }
        };
        if with_sheet {
            if let Some(sheet) = &r.sheet {
                self.out.push_str(&sheet_prefix(sheet));
            }
        }
        if col_abs {
            self.out.push('$');
        }
        self.out.push_str(&column_name(c));
        if row_abs {
            self.out.push('$');
        }
        write!(self.out, "{rw}").unwrap();
        Ok(())
    }

    fn child(&mut self, e: &Expr, parens: bool) -> Result<(), RenderError> {
        if parens {
            self.out.push('(');
            self.expr(e)?;
            self.out.push(')');
            Ok(())
        } else {
            self.expr(e)
        }
    }

    fn expr(&mut self, e: &Expr) -> Result<(), RenderError> {
        match e {
            Expr::Number(n) => write!(self.out, "{n}").unwrap(),
            Expr::Text(s) => write!(self.out, "\"{}\"", s.replace('"', "\"\"")).unwrap(),
            Expr::Bool(b) => self.out.push_str(if *b { "TRUE" } else { "FALSE" }),
            Expr::Cell(r) => {
                self.reference(r, true)?;
                self.refs_seen += 1;
            }
            Expr::Range(r) => {
                self.reference(&r.start, true)?;
                self.out.push(':');
                self.reference(&r.end, false)?;
                self.refs_seen += 1;
            }
            Expr::Unary(UnaryOp::Neg, inner) => {
                self.out.push('-');
                self.child(inner, level(inner) < 5)?;
            }
            Expr::Unary(UnaryOp::Percent, inner) => {
                self.child(inner, level(inner) < 8)?;
                self.out.push('%');
            }
            Expr::Binary(BinaryOp::Pow, l, r) => {
                self.child(l, level(l) < 7)?;
                self.out.push('^');
                self.child(r, level(r) < 5)?;
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                self.child(l, level(l) < p)?;
                self.out.push_str(op.symbol());
                self.child(r, level(r) <= p)?;
            }
            Expr::Call { name, args } => {
                self.out.push_str(name);
                self.out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        self.out.push(',');
                    }
                    self.expr(a)?;
                }
                self.out.push(')');
            }
        }
        Ok(())
    }
}

/// Renders an AST back to A1 text as it would appear in the cell at
/// `(origin_col, origin_row)`, with minimal parentheses.
pub fn render(ast: &Expr, origin_col: u32, origin_row: u32) -> Result<String, RenderError> {
    let mut r = Renderer {
        col: origin_col,
        row: origin_row,
        out: String::from("="),
        refs_seen: 0,
    };
    r.expr(ast)?;
    Ok(r.out)
}
