//! Shared generators and oracles for the property tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use sheetaudit_core::formula::{Axis, Expr, Reference};
use sheetaudit_core::grid::{column_name, CellPos, Sheet, Workbook};
use sheetaudit_core::load::cell_content;

/// One axis of a generated reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ax {
    Rel(i64),
    Abs(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TRef {
    pub sheet: Option<&'static str>,
    pub col: Ax,
    pub row: Ax,
}

/// Generated formula tree; references are origin-relative so one tree can be
/// written at any cell.
#[derive(Debug, Clone, PartialEq)]
pub enum TExpr {
    Num(f64),
    Str(String),
    Bool(bool),
    Cell(TRef),
    Range(TRef, Ax, Ax),
    Neg(Box<TExpr>),
    Pct(Box<TExpr>),
    Bin(&'static str, Box<TExpr>, Box<TExpr>),
    Call(&'static str, Vec<TExpr>),
}

/// Largest relative offset a generated reference uses; origins must keep at
/// least this much room to the top-left edge.
pub const MAX_OFFSET: i64 = 20;

pub const SHEETS: [&str; 3] = ["Sheet1", "Sheet2", "'Q3 Plan'"];
const FUNCS: [&str; 6] = ["SUM", "MAX", "IF", "ROUND", "LOG10", "ATAN2"];
const OPS: [&str; 12] = ["+", "-", "*", "/", "^", "&", "=", "<>", "<", "<=", ">", ">="];

fn ax() -> impl Strategy<Value = Ax> {
    prop_oneof![
        3 => (-MAX_OFFSET..=MAX_OFFSET).prop_map(Ax::Rel),
        1 => (1u32..=60).prop_map(Ax::Abs),
    ]
}

fn tref() -> impl Strategy<Value = TRef> {
    (
        prop_oneof![4 => Just(None), 1 => proptest::sample::select(&SHEETS[1..]).prop_map(Some)],
        ax(),
        ax(),
    )
        .prop_map(|(sheet, col, row)| TRef { sheet, col, row })
}

fn leaf() -> impl Strategy<Value = TExpr> {
    prop_oneof![
        1 => (0u32..1000).prop_map(|n| TExpr::Num(f64::from(n))),
        1 => (0u32..1000).prop_map(|n| TExpr::Num(f64::from(n) / 8.0)),
        // text that looks like references must survive copying untouched
        1 => "[A-Z]{1,2}[1-9]{1,2}|[a-z ]{0,6}|x\"y".prop_map(TExpr::Str),
        1 => any::<bool>().prop_map(TExpr::Bool),
        3 => tref().prop_map(TExpr::Cell),
        1 => (tref(), ax(), ax()).prop_map(|(a, c, r)| TExpr::Range(a, c, r)),
    ]
}

pub fn texpr() -> impl Strategy<Value = TExpr> {
    leaf().prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            1 => inner.clone().prop_map(|e| TExpr::Neg(Box::new(e))),
            1 => inner.clone().prop_map(|e| TExpr::Pct(Box::new(e))),
            4 => (proptest::sample::select(&OPS[..]), inner.clone(), inner.clone())
                .prop_map(|(op, l, r)| TExpr::Bin(op, Box::new(l), Box::new(r))),
            2 => (proptest::sample::select(&FUNCS[..]), proptest::collection::vec(inner, 0..3))
                .prop_map(|(f, args)| TExpr::Call(f, args)),
        ]
    })
}

fn axis_text(a: Ax, origin: u32, col: bool) -> String {
    match a {
        Ax::Rel(d) => {
            let idx = u32::try_from(i64::from(origin) + d).expect("origin leaves room for offsets");
            if col {
                column_name(idx)
            } else {
                idx.to_string()
            }
        }
        Ax::Abs(i) => {
            if col {
                format!("${}", column_name(i))
            } else {
                format!("${i}")
            }
        }
    }
}

fn ref_text(r: &TRef, col: u32, row: u32) -> String {
    let sheet = r.sheet.map(|s| format!("{s}!")).unwrap_or_default();
    format!("{sheet}{}{}", axis_text(r.col, col, true), axis_text(r.row, row, false))
}

fn is_compound(e: &TExpr) -> bool {
    matches!(e, TExpr::Neg(_) | TExpr::Pct(_) | TExpr::Bin(..))
}

fn write(e: &TExpr, col: u32, row: u32, out: &mut String) {
    // binary operands that are themselves binary go unparenthesized for half
    // the operators so precedence gets exercised; everything else compound is
    // parenthesized to stay within the grammar. The choice depends only on the
    // tree, so one tree reads the same at every origin.
    let child = |e: &TExpr, out: &mut String, loose: bool| {
        let bare = loose && matches!(e, TExpr::Bin(op, ..) if OPS.iter().position(|o| o == op).unwrap() % 2 == 0);
        if is_compound(e) && !bare {
            out.push('(');
            write(e, col, row, out);
            out.push(')');
        } else {
            write(e, col, row, out);
        }
    };
    match e {
        TExpr::Num(n) => out.push_str(&n.to_string()),
        TExpr::Str(s) => {
            out.push('"');
            out.push_str(&s.replace('"', "\"\""));
            out.push('"');
        }
        TExpr::Bool(b) => out.push_str(if *b { "TRUE" } else { "false" }),
        TExpr::Cell(r) => out.push_str(&ref_text(r, col, row)),
        TExpr::Range(a, c, r) => {
            out.push_str(&ref_text(a, col, row));
            out.push(':');
            out.push_str(&axis_text(*c, col, true));
            out.push_str(&axis_text(*r, row, false));
        }
        TExpr::Neg(inner) => {
            out.push('-');
            child(inner, out, false);
        }
        TExpr::Pct(inner) => {
            child(inner, out, false);
            out.push('%');
        }
        TExpr::Bin(op, l, r) => {
            child(l, out, *op != "^");
            out.push_str(op);
            child(r, out, *op != "^");
        }
        TExpr::Call(f, args) => {
            out.push_str(f);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write(a, col, row, out);
            }
            out.push(')');
        }
    }
}

/// Formula text of `e` written in the cell at `(col, row)`.
pub fn to_text(e: &TExpr, col: u32, row: u32) -> String {
    let mut out = String::from("=");
    write(e, col, row, &mut out);
    out
}

/// Same tree with every number replaced: logically equal, not a copy.
pub fn with_other_numbers(e: &TExpr) -> TExpr {
    map_leaves(e, &|l| match l {
        TExpr::Num(n) => Some(TExpr::Num(n + 1.0)),
        _ => None,
    })
}

/// Same tree with every relative row offset shifted: structurally equal only.
pub fn with_other_offsets(e: &TExpr) -> TExpr {
    let bump = |a: Ax| match a {
        Ax::Rel(d) => Ax::Rel(if d < MAX_OFFSET { d + 1 } else { d - 1 }),
        abs => abs,
    };
    map_leaves(e, &|l| match l {
        TExpr::Cell(r) => Some(TExpr::Cell(TRef {
            row: bump(r.row),
            ..r.clone()
        })),
        _ => None,
    })
}

fn map_leaves(e: &TExpr, f: &dyn Fn(&TExpr) -> Option<TExpr>) -> TExpr {
    if let Some(x) = f(e) {
        return x;
    }
    match e {
        TExpr::Neg(i) => TExpr::Neg(Box::new(map_leaves(i, f))),
        TExpr::Pct(i) => TExpr::Pct(Box::new(map_leaves(i, f))),
        TExpr::Bin(op, l, r) => TExpr::Bin(op, Box::new(map_leaves(l, f)), Box::new(map_leaves(r, f))),
        TExpr::Call(n, args) => TExpr::Call(n, args.iter().map(|a| map_leaves(a, f)).collect()),
        leaf => leaf.clone(),
    }
}

// ---- definition-based equivalence, independent of fingerprint keys ----

pub fn copy_eq(a: &Expr, b: &Expr) -> bool {
    a == b
}

fn logical_axis(a: Axis, b: Axis) -> bool {
    match (a, b) {
        (Axis::Relative(x), Axis::Relative(y)) => x == y,
        (Axis::Absolute(_), Axis::Absolute(_)) => true,
        _ => false,
    }
}

fn logical_ref(a: &Reference, b: &Reference) -> bool {
    a.sheet == b.sheet && logical_axis(a.col, b.col) && logical_axis(a.row, b.row)
}

/// Equal after wildcarding literal values and absolute coordinates.
pub fn logical_eq(a: &Expr, b: &Expr) -> bool {
    match (a, b) {
        (Expr::Number(_), Expr::Number(_)) | (Expr::Text(_), Expr::Text(_)) | (Expr::Bool(_), Expr::Bool(_)) => true,
        (Expr::Cell(x), Expr::Cell(y)) => logical_ref(x, y),
        (Expr::Range(x), Expr::Range(y)) => logical_ref(&x.start, &y.start) && logical_ref(&x.end, &y.end),
        (Expr::Unary(o1, x), Expr::Unary(o2, y)) => o1 == o2 && logical_eq(x, y),
        (Expr::Binary(o1, l1, r1), Expr::Binary(o2, l2, r2)) => o1 == o2 && logical_eq(l1, l2) && logical_eq(r1, r2),
        (Expr::Call { name: n1, args: a1 }, Expr::Call { name: n2, args: a2 }) => {
            n1 == n2 && a1.len() == a2.len() && a1.iter().zip(a2).all(|(x, y)| logical_eq(x, y))
        }
        _ => false,
    }
}

fn is_leaf(e: &Expr) -> bool {
    matches!(e, Expr::Number(_) | Expr::Text(_) | Expr::Bool(_) | Expr::Cell(_) | Expr::Range(_))
}

/// Same operator/function skeleton, every leaf a wildcard.
pub fn structural_eq(a: &Expr, b: &Expr) -> bool {
    match (a, b) {
        (x, y) if is_leaf(x) && is_leaf(y) => true,
        (Expr::Unary(o1, x), Expr::Unary(o2, y)) => o1 == o2 && structural_eq(x, y),
        (Expr::Binary(o1, l1, r1), Expr::Binary(o2, l2, r2)) => {
            o1 == o2 && structural_eq(l1, l2) && structural_eq(r1, r2)
        }
        (Expr::Call { name: n1, args: a1 }, Expr::Call { name: n2, args: a2 }) => {
            n1 == n2 && a1.len() == a2.len() && a1.iter().zip(a2).all(|(x, y)| structural_eq(x, y))
        }
        _ => false,
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Brute-force partition: union every pair the predicate relates.
pub fn oracle_partition(items: &[(CellPos, Expr)], eq: fn(&Expr, &Expr) -> bool) -> BTreeSet<BTreeSet<CellPos>> {
    let mut parent: Vec<usize> = (0..items.len()).collect();
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            if eq(&items[i].1, &items[j].1) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<CellPos>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().insert(item.0);
    }
    groups.into_values().collect()
}

/// A generated formula placement: template index, variant, sheet, cell.
#[derive(Debug, Clone)]
pub struct Placement {
    pub template: usize,
    pub variant: u8,
    pub sheet: usize,
    pub col: u32,
    pub row: u32,
}

/// Literal cells: sheet, column, row, value.
pub type Literals = Vec<(usize, u32, u32, u32)>;

/// Random workbook recipe: a few templates placed (with variants) on up to
/// two sheets, plus literal cells. At most `max_formulas` formulas.
pub fn workbook_recipe(max_formulas: usize) -> impl Strategy<Value = (Vec<TExpr>, Vec<Placement>, Literals)> {
    (
        proptest::collection::vec(texpr(), 1..6),
        proptest::collection::vec((0usize..6, 0u8..4, 0usize..2, 25u32..45, 25u32..75), 0..=max_formulas),
        proptest::collection::vec((0usize..2, 1u32..20, 1u32..20, 0u32..100), 0..30),
    )
        .prop_map(|(templates, raw, literals)| {
            let n = templates.len();
            let placements = raw
                .into_iter()
                .map(|(t, variant, sheet, col, row)| Placement {
                    template: t % n,
                    variant,
                    sheet,
                    col,
                    row,
                })
                .collect();
            (templates, placements, literals)
        })
}

/// Builds the workbook; later placements at an occupied cell are skipped.
pub fn build_workbook(templates: &[TExpr], placements: &[Placement], literals: &[(usize, u32, u32, u32)]) -> Workbook {
    let names = ["Sheet1", "Sheet2"];
    let mut sheets = [Sheet::new(names[0]), Sheet::new(names[1])];
    for p in placements {
        if !sheets[p.sheet].get(p.col, p.row).is_empty() {
            continue;
        }
        let base = &templates[p.template];
        let tree = match p.variant {
            0 | 1 => base.clone(),
            2 => with_other_numbers(base),
            _ => with_other_offsets(base),
        };
        let text = to_text(&tree, p.col, p.row);
        let content = cell_content(names[p.sheet], p.col, p.row, &text).expect("generated formulas parse");
        sheets[p.sheet].set(p.col, p.row, content);
    }
    for &(sheet, col, row, v) in literals {
        if sheets[sheet].get(col, row).is_empty() {
            sheets[sheet].set(col, row, cell_content(names[sheet], col, row, &v.to_string()).unwrap());
        }
    }
    let mut wb = Workbook::new("generated");
    for s in sheets {
        wb.add_sheet(s).unwrap();
    }
    wb
}
