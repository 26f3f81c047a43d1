//! Typed, addressable cell grid: addresses, cell contents, sheets and workbooks.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::FormulaAst;

/// Highest addressable column (`ZZZ`).
pub const MAX_COL: u32 = 18_278;
/// Highest addressable row.
pub const MAX_ROW: u32 = 1_048_576;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddressError {
    #[error("empty sheet name in address `{0}`")]
    EmptySheet(String),
    #[error("malformed cell address `{0}`")]
    Malformed(String),
    #[error("cell address `{0}` lies outside the grid")]
    OutOfGrid(String),
}

/// Renders a 1-based column index as bijective base-26 letters (1 = A, 27 = AA).
pub fn column_name(mut col: u32) -> String {
    assert!(col >= 1, "column index is 1-based");
    let mut buf = Vec::new();
    while col > 0 {
        let rem = (col - 1) % 26;
        buf.push(b'A' + rem as u8);
        col = (col - 1) / 26;
    }
    buf.reverse();
    String::from_utf8(buf).expect("ascii")
}

/// Parses column letters (case-insensitive). Returns `None` for non-letters or
/// an index beyond [`MAX_COL`].
pub fn parse_column(letters: &str) -> Option<u32> {
    if letters.is_empty() || letters.len() > 3 {
        return None;
    }
    let mut col: u32 = 0;
    for b in letters.bytes() {
        if !b.is_ascii_alphabetic() {
            return None;
        }
        col = col * 26 + u32::from(b.to_ascii_uppercase() - b'A' + 1);
    }
    (col <= MAX_COL).then_some(col)
}

/// Splits `B12` / `b12` into a (column, row) pair without sheet handling.
pub fn parse_a1(text: &str) -> Option<(u32, u32)> {
    let split = text.find(|c: char| c.is_ascii_digit())?;
    let (letters, digits) = text.split_at(split);
    let col = parse_column(letters)?;
    if digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let row: u32 = digits.parse().ok()?;
    (1..=MAX_ROW).contains(&row).then_some((col, row))
}

/// A fully qualified cell address.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellAddress {
    pub sheet: String,
    pub col: u32,
    pub row: u32,
}

impl CellAddress {
    pub fn new(sheet: impl Into<String>, col: u32, row: u32) -> Self {
        Self {
            sheet: sheet.into(),
            col,
            row,
        }
    }

    /// The address without its sheet, e.g. `B12`.
    pub fn local(&self) -> String {
        format!("{}{}", column_name(self.col), self.row)
    }

    /// Parses an unqualified A1 address on the given sheet.
    pub fn parse_local(sheet: &str, text: &str) -> Result<Self, AddressError> {
        if sheet.is_empty() {
            return Err(AddressError::EmptySheet(text.to_string()));
        }
        let (col, row) = parse_a1(text.trim()).ok_or_else(|| AddressError::Malformed(text.to_string()))?;
        Ok(Self::new(sheet, col, row))
    }
}

impl fmt::Display for CellAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}!{}", self.sheet, self.local())
    }
}

impl FromStr for CellAddress {
    type Err = AddressError;

    /// Parses `Sheet!A1`. The sheet part may be quoted (`'My Sheet'!A1`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bang = s.rfind('!').ok_or_else(|| AddressError::Malformed(s.to_string()))?;
        let (sheet, local) = (&s[..bang], &s[bang + 1..]);
        let sheet = match sheet.strip_prefix('\'').and_then(|x| x.strip_suffix('\'')) {
            Some(inner) => inner.replace("''", "'"),
            None => sheet.to_string(),
        };
        Self::parse_local(&sheet, local)
    }
}

impl Serialize for CellAddress {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CellAddress {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Workbook-internal cell position. Orders by sheet order, then row, then column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellPos {
    pub sheet: usize,
    pub row: u32,
    pub col: u32,
}

impl CellPos {
    pub fn new(sheet: usize, col: u32, row: u32) -> Self {
        Self { sheet, row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContentKind {
    Formula,
    NumberConstant,
    TextLabel,
    BooleanConstant,
    Empty,
}

impl ContentKind {
    pub fn is_literal(self) -> bool {
        matches!(
            self,
            ContentKind::NumberConstant | ContentKind::TextLabel | ContentKind::BooleanConstant
        )
    }
}

fn parse_decimal(text: &str) -> Option<f64> {
    let body = text.strip_prefix(['+', '-']).unwrap_or(text);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    let mut parts = mantissa.splitn(2, '.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next();
    let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if !digits(int) || !frac.is_none_or(digits) {
        return None;
    }
    if int.is_empty() && frac.is_none_or(str::is_empty) {
        return None;
    }
    if let Some(exp) = exponent {
        let exp = exp.strip_prefix(['+', '-']).unwrap_or(exp);
        if exp.is_empty() || !digits(exp) {
            return None;
        }
    }
    text.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Classifies trimmed cell source text.
pub fn classify_content(raw: &str) -> ContentKind {
    if raw.is_empty() {
        ContentKind::Empty
    } else if raw.starts_with('=') {
        ContentKind::Formula
    } else if parse_decimal(raw).is_some() {
        ContentKind::NumberConstant
    } else if raw.eq_ignore_ascii_case("true") || raw.eq_ignore_ascii_case("false") {
        ContentKind::BooleanConstant
    } else {
        ContentKind::TextLabel
    }
}

/// Content of one occupied cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellContent {
    Formula { raw: String, ast: FormulaAst },
    Number { raw: String, value: f64 },
    Text { raw: String },
    Boolean { raw: String, value: bool },
    Empty,
}

impl CellContent {
    /// Builds a non-formula content from trimmed raw text.
    ///
    /// Returns `None` for formulas, which need a parser and an origin.
    pub fn literal(raw: &str) -> Option<Self> {
        let raw_owned = raw.to_string();
        Some(match classify_content(raw) {
            ContentKind::Formula => return None,
            ContentKind::Empty => CellContent::Empty,
            ContentKind::NumberConstant => CellContent::Number {
                raw: raw_owned,
                value: parse_decimal(raw).expect("classified as number"),
            },
            ContentKind::BooleanConstant => CellContent::Boolean {
                raw: raw_owned,
                value: raw.eq_ignore_ascii_case("true"),
            },
            ContentKind::TextLabel => CellContent::Text { raw: raw_owned },
        })
    }

    pub fn kind(&self) -> ContentKind {
        match self {
            CellContent::Formula { .. } => ContentKind::Formula,
            CellContent::Number { .. } => ContentKind::NumberConstant,
            CellContent::Text { .. } => ContentKind::TextLabel,
            CellContent::Boolean { .. } => ContentKind::BooleanConstant,
            CellContent::Empty => ContentKind::Empty,
        }
    }

    pub fn raw(&self) -> Option<&str> {
        match self {
            CellContent::Formula { raw, .. }
            | CellContent::Number { raw, .. }
            | CellContent::Text { raw }
            | CellContent::Boolean { raw, .. } => Some(raw),
            CellContent::Empty => None,
        }
    }

    pub fn ast(&self) -> Option<&FormulaAst> {
        match self {
            CellContent::Formula { ast, .. } => Some(ast),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, CellContent::Empty)
    }
}

/// Inclusive rectangle of grid coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rect {
    pub top: u32,
    pub left: u32,
    pub bottom: u32,
    pub right: u32,
}

impl Rect {
    pub fn width(&self) -> u64 {
        u64::from(self.right - self.left + 1)
    }

    pub fn height(&self) -> u64 {
        u64::from(self.bottom - self.top + 1)
    }

    pub fn area(&self) -> u64 {
        self.width() * self.height()
    }

    pub fn contains(&self, col: u32, row: u32) -> bool {
        (self.left..=self.right).contains(&col) && (self.top..=self.bottom).contains(&row)
    }

    /// A1 rendering, `B2:C4` (or `B2` for a single cell).
    pub fn a1(&self) -> String {
        let start = format!("{}{}", column_name(self.left), self.top);
        if self.top == self.bottom && self.left == self.right {
            start
        } else {
            format!("{start}:{}{}", column_name(self.right), self.bottom)
        }
    }

    pub fn parse_a1(text: &str) -> Option<Self> {
        let (a, b) = match text.split_once(':') {
            Some((a, b)) => (a, b),
            None => (text, text),
        };
        let (c1, r1) = parse_a1(a)?;
        let (c2, r2) = parse_a1(b)?;
        Some(Rect {
            top: r1.min(r2),
            left: c1.min(c2),
            bottom: r1.max(r2),
            right: c1.max(c2),
        })
    }
}

/// One worksheet. Cells are stored sparsely keyed by `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sheet {
    name: String,
    cells: BTreeMap<(u32, u32), CellContent>,
    bounds: Option<Rect>,
}

static EMPTY: CellContent = CellContent::Empty;

impl Sheet {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            cells: BTreeMap::new(),
            bounds: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Stores a cell; storing `Empty` removes it. Returns the previous content.
    pub fn set(&mut self, col: u32, row: u32, content: CellContent) -> Option<CellContent> {
        if content.is_empty() {
            let prev = self.cells.remove(&(row, col));
            if prev.is_some() {
                self.recompute_bounds();
            }
            return prev;
        }
        self.bounds = Some(match self.bounds {
            None => Rect {
                top: row,
                left: col,
                bottom: row,
                right: col,
            },
            Some(r) => Rect {
                top: r.top.min(row),
                left: r.left.min(col),
                bottom: r.bottom.max(row),
                right: r.right.max(col),
            },
        });
        self.cells.insert((row, col), content)
    }

    fn recompute_bounds(&mut self) {
        self.bounds = self.cells.keys().fold(None, |acc, &(row, col)| {
            Some(match acc {
                None => Rect {
                    top: row,
                    left: col,
                    bottom: row,
                    right: col,
                },
                Some(r) => Rect {
                    top: r.top.min(row),
                    left: r.left.min(col),
                    bottom: r.bottom.max(row),
                    right: r.right.max(col),
                },
            })
        });
    }

    pub fn get(&self, col: u32, row: u32) -> &CellContent {
        self.cells.get(&(row, col)).unwrap_or(&EMPTY)
    }

    /// Bounding box of the occupied cells, `None` for an empty sheet.
    pub fn bounds(&self) -> Option<Rect> {
        self.bounds
    }

    /// Occupied cells in row-major order as `(col, row, content)`.
    pub fn cells(&self) -> impl Iterator<Item = (u32, u32, &CellContent)> {
        self.cells.iter().map(|(&(row, col), c)| (col, row, c))
    }

    pub fn formula_count(&self) -> usize {
        self.cells.values().filter(|c| c.kind() == ContentKind::Formula).count()
    }
}

/// Per-sheet occupancy numbers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occupancy {
    pub cells: u64,
    pub occupied: u64,
    pub formulas: u64,
    pub literals: u64,
}

impl std::ops::Add for Occupancy {
    type Output = Occupancy;

    fn add(self, o: Occupancy) -> Occupancy {
        Occupancy {
            cells: self.cells + o.cells,
            occupied: self.occupied + o.occupied,
            formulas: self.formulas + o.formulas,
            literals: self.literals + o.literals,
        }
    }
}

impl std::iter::Sum for Occupancy {
    fn sum<I: Iterator<Item = Occupancy>>(iter: I) -> Self {
        iter.fold(Occupancy::default(), |a, b| a + b)
    }
}

/// Bounding-box area, occupied cells, formulas and literals of a sheet.
/// Literals merge numbers, booleans and text labels.
pub fn occupancy_counts(sheet: &Sheet) -> Occupancy {
    let occupied = sheet.cells.len() as u64;
    let formulas = sheet.formula_count() as u64;
    Occupancy {
        cells: sheet.bounds().map_or(0, |b| b.area()),
        occupied,
        formulas,
        literals: occupied - formulas,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("duplicate sheet name `{0}`")]
pub struct DuplicateSheet(pub String);

/// An ordered collection of uniquely named sheets.
#[derive(Debug, Clone, PartialEq)]
pub struct Workbook {
    name: String,
    sheets: Vec<Sheet>,
}

impl Workbook {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            sheets: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn add_sheet(&mut self, sheet: Sheet) -> Result<usize, DuplicateSheet> {
        if self.sheet_index(sheet.name()).is_some() {
            return Err(DuplicateSheet(sheet.name().to_string()));
        }
        self.sheets.push(sheet);
        Ok(self.sheets.len() - 1)
    }

    pub fn sheets(&self) -> &[Sheet] {
        &self.sheets
    }

    pub fn sheet(&self, index: usize) -> &Sheet {
        &self.sheets[index]
    }

    /// Exact-name lookup.
    pub fn sheet_index(&self, name: &str) -> Option<usize> {
        self.sheets.iter().position(|s| s.name() == name)
    }

    /// Lookup used for formula sheet qualifiers: exact match first, then ASCII
    /// case-insensitive.
    pub fn resolve_sheet(&self, name: &str) -> Option<usize> {
        self.sheet_index(name)
            .or_else(|| self.sheets.iter().position(|s| s.name().eq_ignore_ascii_case(name)))
    }

    pub fn get(&self, pos: CellPos) -> &CellContent {
        self.sheets[pos.sheet].get(pos.col, pos.row)
    }

    pub fn address(&self, pos: CellPos) -> CellAddress {
        CellAddress::new(self.sheets[pos.sheet].name(), pos.col, pos.row)
    }

    pub fn pos(&self, addr: &CellAddress) -> Option<CellPos> {
        self.sheet_index(&addr.sheet).map(|s| CellPos::new(s, addr.col, addr.row))
    }

    /// All formula cells in canonical order.
    pub fn formula_cells(&self) -> impl Iterator<Item = (CellPos, &FormulaAst)> {
        self.sheets.iter().enumerate().flat_map(|(si, sheet)| {
            sheet
                .cells()
                .filter_map(move |(col, row, c)| c.ast().map(|ast| (CellPos::new(si, col, row), ast)))
        })
    }

    pub fn occupancy(&self) -> Occupancy {
        self.sheets.iter().map(occupancy_counts).sum()
    }
}
