//! Seeded synthetic workbooks with known anomalies.
//!
//! A fixture has three sheets. `Data` holds three input columns (A:C) under a
//! header row and formula columns to their right, each copied down every data
//! row. `Params` holds one rate referenced absolutely, and `Summary` totals
//! every formula column. Anomalies are planted on distinct rows at least three
//! apart and away from the run ends, so each one is seen in isolation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::areas::Category;
use crate::equivalence::copy_fingerprint;
use crate::formula::parse;
use crate::grid::{column_name, CellAddress, Sheet, Workbook};
use crate::load::cell_content;

const DATA: &str = "Data";
const INPUT_COLS: u32 = 3;
const FIRST_ROW: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureKind {
    Regular,
    Interrupted,
    CopiedTooFar,
    EmptyRef,
    Mixed,
}

impl FixtureKind {
    pub const ALL: [FixtureKind; 5] = [
        FixtureKind::Regular,
        FixtureKind::Interrupted,
        FixtureKind::CopiedTooFar,
        FixtureKind::EmptyRef,
        FixtureKind::Mixed,
    ];

    fn name(self) -> &'static str {
        match self {
            FixtureKind::Regular => "regular",
            FixtureKind::Interrupted => "interrupted",
            FixtureKind::CopiedTooFar => "copied-too-far",
            FixtureKind::EmptyRef => "empty-ref",
            FixtureKind::Mixed => "mixed",
        }
    }
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FixtureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FixtureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown fixture kind `{s}` (expected regular, interrupted, copied-too-far, empty-ref or mixed)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub kind: FixtureKind,
    pub seed: u64,
    /// Columns of the data sheet, inputs included.
    pub cols: u32,
    /// Data rows below the header.
    pub rows: u32,
    /// Anomalies to plant; ignored for `regular`.
    pub anomalies: usize,
}

impl FixtureSpec {
    pub fn new(kind: FixtureKind, seed: u64) -> Self {
        FixtureSpec {
            kind,
            seed,
            cols: 12,
            rows: 50,
            anomalies: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FixtureError {
    #[error("a fixture needs at least {min} columns, got {got}")]
    TooFewColumns { min: u32, got: u32 },
    #[error("{rows} data rows leave room for at most {room} row-bound anomalies, {wanted} requested")]
    TooFewRows { rows: u32, room: usize, wanted: usize },
}

/// One planted anomaly and the findings it should produce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeededAnomaly {
    pub category: Category,
    /// The cell that was altered (for an empty reference, the deleted input).
    pub seeded_cell: CellAddress,
    /// Cells where a finding of `category` is expected.
    pub expected: Vec<CellAddress>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: FixtureSpec,
    pub anomalies: Vec<SeededAnomaly>,
}

impl GroundTruth {
    /// Every expected `(location, category)` pair.
    pub fn expected_findings(&self) -> BTreeSet<(CellAddress, Category)> {
        self.anomalies
            .iter()
            .flat_map(|a| a.expected.iter().map(move |c| (c.clone(), a.category)))
            .collect()
    }
}

/// Formula templates for the data columns. Sources are input columns 1..=3.
#[derive(Debug, Clone, Copy)]
enum Template {
    Scale { src: u32, factor: u32 },
    Sum2 { a: u32, b: u32 },
    Rate { src: u32 },
    Range,
    Func { name: &'static str, a: u32, b: u32 },
    /// Running total over the column itself.
    Chain { src: u32 },
}

impl Template {
    fn random(rng: &mut ChaCha8Rng) -> Template {
        let src = |rng: &mut ChaCha8Rng| rng.gen_range(1..=INPUT_COLS);
        match rng.gen_range(0..6) {
            0 => Template::Scale {
                src: src(rng),
                factor: rng.gen_range(2..10),
            },
            1 => {
                let a = src(rng);
                let b = (a % INPUT_COLS) + 1;
                Template::Sum2 { a, b }
            }
            2 => Template::Rate { src: src(rng) },
            3 => Template::Range,
            4 => {
                let a = src(rng);
                Template::Func {
                    name: ["MAX", "MIN", "AVERAGE"][rng.gen_range(0..3)],
                    a,
                    b: (a % INPUT_COLS) + 1,
                }
            }
            _ => Template::Chain { src: src(rng) },
        }
    }

    /// Input columns read on the formula's own row.
    fn inputs(self) -> Vec<u32> {
        match self {
            Template::Scale { src, .. } | Template::Rate { src } | Template::Chain { src } => vec![src],
            Template::Sum2 { a, b } | Template::Func { a, b, .. } => vec![a, b],
            Template::Range => (1..=INPUT_COLS).collect(),
        }
    }

    /// Formula text at `(col, row)`. With `constant`, the last input reference
    /// is replaced by that number.
    fn text(self, col: u32, row: u32, constant: Option<u32>) -> String {
        let r = |c: u32| format!("{}{row}", column_name(c));
        let k = |c: u32| constant.map_or_else(|| r(c), |v| v.to_string());
        match self {
            Template::Scale { src, factor } => format!("={}*{factor}", k(src)),
            Template::Sum2 { a, b } => format!("={}+{}", r(a), k(b)),
            Template::Rate { src } => match constant {
                None => format!("={}*Params!$B$1", r(src)),
                Some(v) => format!("={}*{v}", r(src)),
            },
            Template::Range => match constant {
                None => format!("=SUM({}:{})", r(1), r(INPUT_COLS)),
                Some(v) => format!("=SUM({v})"),
            },
            Template::Func { name, a, b } => format!("={name}({},{})", r(a), k(b)),
            Template::Chain { src } => format!("={}{}+{}", column_name(col), row - 1, k(src)),
        }
    }
}

/// The data sheet under construction, with its formula column layout.
struct Layout {
    cols: Vec<(u32, Template)>,
    last_row: u32,
}

impl Layout {
    fn random(rng: &mut ChaCha8Rng, spec: &FixtureSpec) -> Layout {
        let last_row = FIRST_ROW + spec.rows - 1;
        let mut seen = BTreeSet::new();
        let mut cols = Vec::new();
        for col in INPUT_COLS + 1..=spec.cols {
            // distinct copy classes per column keep every column its own run
            loop {
                let t = Template::random(rng);
                let ast = parse(&t.text(col, FIRST_ROW, None), col, FIRST_ROW).expect("template parses");
                if seen.insert(copy_fingerprint(&ast).key) {
                    cols.push((col, t));
                    break;
                }
            }
        }
        Layout { cols, last_row }
    }
}

fn addr(col: u32, row: u32) -> CellAddress {
    CellAddress::new(DATA, col, row)
}

/// Picks `k` rows in `[FIRST_ROW + 2, last_row - 2]` pairwise at least three apart.
fn spaced_rows(rng: &mut ChaCha8Rng, layout: &Layout, k: usize, spec: &FixtureSpec) -> Result<Vec<u32>, FixtureError> {
    let lo = FIRST_ROW + 2;
    let hi = layout.last_row.saturating_sub(2);
    let mut candidates: Vec<u32> = (lo..=hi).collect();
    candidates.shuffle(rng);
    let mut chosen: Vec<u32> = Vec::new();
    for r in candidates {
        if chosen.len() == k {
            break;
        }
        if chosen.iter().all(|&c| c.abs_diff(r) >= 3) {
            chosen.push(r);
        }
    }
    if chosen.len() < k {
        let room = if hi >= lo { ((hi - lo) / 3 + 1) as usize } else { 0 };
        return Err(FixtureError::TooFewRows {
            rows: spec.rows,
            room,
            wanted: k,
        });
    }
    Ok(chosen)
}

/// Anomaly shapes, before placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Plant {
    ConstantFormula,
    ConstantReference,
    Other,
    EmptyRef,
    TooFar,
}

fn plants(rng: &mut ChaCha8Rng, spec: &FixtureSpec) -> Vec<Plant> {
    let k = spec.anomalies;
    match spec.kind {
        FixtureKind::Regular => vec![],
        FixtureKind::Interrupted => vec![Plant::ConstantFormula; k],
        FixtureKind::CopiedTooFar => vec![Plant::TooFar; k],
        FixtureKind::EmptyRef => vec![Plant::EmptyRef; k],
        FixtureKind::Mixed => {
            let all = [
                Plant::ConstantFormula,
                Plant::ConstantReference,
                Plant::Other,
                Plant::EmptyRef,
                Plant::TooFar,
            ];
            let mut out: Vec<Plant> = (0..k)
                .map(|i| if i < all.len() { all[i] } else { *all.choose(rng).expect("non-empty") })
                .collect();
            out.shuffle(rng);
            out
        }
    }
}

/// Generates the workbook and its ground truth. Equal specs give equal output.
pub fn generate(spec: &FixtureSpec) -> Result<(Workbook, GroundTruth), FixtureError> {
    let min_cols = INPUT_COLS + 2;
    if spec.cols < min_cols {
        return Err(FixtureError::TooFewColumns {
            min: min_cols,
            got: spec.cols,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let layout = Layout::random(&mut rng, spec);
    let plan = plants(&mut rng, spec);
    let row_bound = plan.iter().filter(|p| **p != Plant::TooFar).count();
    let mut rows = spaced_rows(&mut rng, &layout, row_bound, spec)?.into_iter();

    // cell text by (col, row); None deletes
    let mut cells: BTreeMap<(u32, u32), Option<String>> = BTreeMap::new();
    for c in 1..=spec.cols {
        let label = if c <= INPUT_COLS { format!("In{c}") } else { format!("Out{}", c - INPUT_COLS) };
        cells.insert((c, 1), Some(label));
    }
    for row in FIRST_ROW..=layout.last_row {
        for c in 1..=INPUT_COLS {
            cells.insert((c, row), Some(rng.gen_range(1..1000).to_string()));
        }
        for &(c, t) in &layout.cols {
            cells.insert((c, row), Some(t.text(c, row, None)));
        }
    }

    let mut anomalies = Vec::new();
    let mut extension: BTreeMap<u32, u32> = BTreeMap::new();
    let extendable: Vec<(u32, Template)> = layout
        .cols
        .iter()
        .copied()
        .filter(|(_, t)| !matches!(t, Template::Chain { .. }))
        .collect();
    for plant in plan {
        if plant == Plant::TooFar {
            let (col, t) = match extendable.choose(&mut rng) {
                Some(x) => *x,
                // every column is a running total; extend the first one
                None => layout.cols[0],
            };
            let n = extension.entry(col).or_default();
            *n += 1;
            let row = layout.last_row + *n;
            cells.insert((col, row), Some(t.text(col, row, None)));
            anomalies.push(SeededAnomaly {
                category: Category::FormulaCopiedTooFar,
                seeded_cell: addr(col, row),
                expected: vec![addr(col, row)],
            });
            continue;
        }
        let row = rows.next().expect("rows reserved for every row-bound anomaly");
        let &(col, t) = layout.cols.choose(&mut rng).expect("at least one formula column");
        let anomaly = match plant {
            Plant::ConstantFormula => {
                cells.insert((col, row), Some(rng.gen_range(1..10_000).to_string()));
                SeededAnomaly {
                    category: Category::ConstantInsteadOfFormula,
                    seeded_cell: addr(col, row),
                    expected: vec![addr(col, row)],
                }
            }
            Plant::ConstantReference => {
                cells.insert((col, row), Some(t.text(col, row, Some(rng.gen_range(1..1000)))));
                SeededAnomaly {
                    category: Category::ConstantInsteadOfReference,
                    seeded_cell: addr(col, row),
                    expected: vec![addr(col, row)],
                }
            }
            Plant::Other => {
                // a skeleton no template produces
                cells.insert((col, row), Some(format!("=A{row}-B{row}/2")));
                SeededAnomaly {
                    category: Category::Other,
                    seeded_cell: addr(col, row),
                    expected: vec![addr(col, row)],
                }
            }
            Plant::EmptyRef => {
                let input = *t.inputs().choose(&mut rng).expect("templates read inputs");
                cells.insert((input, row), None);
                let expected = layout
                    .cols
                    .iter()
                    .filter(|(_, t)| t.inputs().contains(&input))
                    .map(|&(c, _)| addr(c, row))
                    .collect();
                SeededAnomaly {
                    category: Category::ReferenceToEmptyCell,
                    seeded_cell: addr(input, row),
                    expected,
                }
            }
            Plant::TooFar => unreachable!("handled above"),
        };
        anomalies.push(anomaly);
    }

    let mut data = Sheet::new(DATA);
    for ((col, row), text) in cells {
        if let Some(text) = text {
            data.set(col, row, cell_content(DATA, col, row, &text).expect("generated cells parse"));
        }
    }
    let mut params = Sheet::new("Params");
    params.set(1, 1, cell_content("Params", 1, 1, "Rate").expect("label"));
    params.set(2, 1, cell_content("Params", 2, 1, "1.1").expect("number"));
    let mut summary = Sheet::new("Summary");
    for (i, &(col, _)) in layout.cols.iter().enumerate() {
        let c = i as u32 + 1;
        let name = column_name(col);
        summary.set(c, 1, cell_content("Summary", c, 1, &format!("Total {name}")).expect("label"));
        let text = format!("=SUM({DATA}!{name}{FIRST_ROW}:{name}{})", layout.last_row);
        summary.set(c, 2, cell_content("Summary", c, 2, &text).expect("summary formula parses"));
    }

    let mut wb = Workbook::new(format!("fixture-{}-{}", spec.kind, spec.seed));
    for s in [data, params, summary] {
        wb.add_sheet(s).expect("distinct sheet names");
    }
    Ok((wb, GroundTruth { spec: *spec, anomalies }))
}
