//! Copy, logical and structural fingerprints and the three-level class hierarchy.
//!
//! Each level serializes an abstracted AST into a prefix-notation key:
//!
//! * copy: the full normalized tree;
//! * logical: literals become type-tagged wildcards and absolute axes lose their
//!   coordinate (but keep the absolute flag); relative offsets are kept;
//! * structural: operators and `NAME/arity` calls only, every leaf is `_`.
//!
//! Keys are self-delimiting (strings are length-prefixed), so distinct
//! abstracted trees never share a key. Equal copy keys imply equal logical keys
//! imply equal structural keys, which is what makes the hierarchy a tree.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::formula::{Axis, Expr, Reference, UnaryOp};
use crate::grid::{CellPos, Workbook};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Copy,
    Logical,
    Structural,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Copy, Level::Logical, Level::Structural];

    fn prefix(self) -> char {
        match self {
            Level::Copy => 'C',
            Level::Logical => 'L',
            Level::Structural => 'S',
        }
    }

    pub fn parent(self) -> Option<Level> {
        match self {
            Level::Copy => Some(Level::Logical),
            Level::Logical => Some(Level::Structural),
            Level::Structural => None,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Copy => "copy",
            Level::Logical => "logical",
            Level::Structural => "structural",
        })
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "copy" => Ok(Level::Copy),
            "logical" => Ok(Level::Logical),
            "structural" => Ok(Level::Structural),
            _ => Err(format!("unknown level `{s}` (expected copy, logical or structural)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fingerprint {
    pub level: Level,
    pub key: String,
}

fn write_sheet(out: &mut String, sheet: &Option<String>) {
    match sheet {
        None => out.push('-'),
        Some(s) => write!(out, "q{}:{s}", s.len()).unwrap(),
    }
}

fn write_axis(out: &mut String, axis: Axis, level: Level) {
    match (axis, level) {
        (Axis::Relative(off), _) => write!(out, "r{off};").unwrap(),
        (Axis::Absolute(_), Level::Logical) => out.push_str("a*"),
        (Axis::Absolute(idx), _) => write!(out, "a{idx};").unwrap(),
    }
}

fn write_ref(out: &mut String, r: &Reference, level: Level) {
    write_axis(out, r.col, level);
    write_axis(out, r.row, level);
}

fn write_key(out: &mut String, e: &Expr, level: Level) {
    let structural = level == Level::Structural;
    match e {
        Expr::Number(_) | Expr::Text(_) | Expr::Bool(_) | Expr::Cell(_) | Expr::Range(_) if structural => {
            out.push('_')
        }
        Expr::Number(_) if level == Level::Logical => out.push_str("#n"),
        Expr::Text(_) if level == Level::Logical => out.push_str("#s"),
        Expr::Bool(_) if level == Level::Logical => out.push_str("#b"),
        Expr::Number(n) => write!(out, "n{n};").unwrap(),
        Expr::Text(s) => write!(out, "s{}:{s}", s.len()).unwrap(),
        Expr::Bool(b) => out.push_str(if *b { "bT" } else { "bF" }),
        Expr::Cell(r) => {
            out.push('c');
            write_sheet(out, &r.sheet);
            write_ref(out, r, level);
        }
        Expr::Range(r) => {
            out.push('g');
            write_sheet(out, &r.start.sheet);
            write_ref(out, &r.start, level);
            write_ref(out, &r.end, level);
        }
        Expr::Unary(op, inner) => {
            out.push_str(match op {
                UnaryOp::Neg => "u-",
                UnaryOp::Percent => "u%",
            });
            write_key(out, inner, level);
        }
        Expr::Binary(op, l, r) => {
            write!(out, "({} ", op.symbol()).unwrap();
            write_key(out, l, level);
            write_key(out, r, level);
            out.push(')');
        }
        Expr::Call { name, args } => {
            write!(out, "f{name}/{}(", args.len()).unwrap();
            for a in args {
                write_key(out, a, level);
            }
            out.push(')');
        }
    }
}

pub fn fingerprint(ast: &Expr, level: Level) -> Fingerprint {
    let mut key = String::new();
    write_key(&mut key, ast, level);
    Fingerprint { level, key }
}

pub fn copy_fingerprint(ast: &Expr) -> Fingerprint {
    fingerprint(ast, Level::Copy)
}

pub fn logical_fingerprint(ast: &Expr) -> Fingerprint {
    fingerprint(ast, Level::Logical)
}

pub fn structural_fingerprint(ast: &Expr) -> Fingerprint {
    fingerprint(ast, Level::Structural)
}

/// Class identifier, rendered `C3`, `L1`, `S2`; numbered from 1 per level in
/// representative order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId {
    pub level: Level,
    pub index: usize,
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.level.prefix(), self.index + 1)
    }
}

impl FromStr for ClassId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let level = match s.chars().next() {
            Some('C') | Some('c') => Level::Copy,
            Some('L') | Some('l') => Level::Logical,
            Some('S') | Some('s') => Level::Structural,
            _ => return Err(format!("malformed class id `{s}`")),
        };
        let n: usize = s[1..].parse().map_err(|_| format!("malformed class id `{s}`"))?;
        if n == 0 {
            return Err(format!("malformed class id `{s}`"));
        }
        Ok(ClassId { level, index: n - 1 })
    }
}

impl Serialize for ClassId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClassId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceClass {
    pub id: ClassId,
    pub fingerprint: Fingerprint,
    /// Canonical order: sheet order, then row, then column.
    pub members: Vec<CellPos>,
    pub parent: Option<ClassId>,
    pub children: Vec<ClassId>,
}

impl EquivalenceClass {
    pub fn representative(&self) -> CellPos {
        self.members[0]
    }

    pub fn level(&self) -> Level {
        self.id.level
    }
}

/// Formula cells partitioned at all three levels, with parent links
/// copy -> logical -> structural.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassHierarchy {
    copy: Vec<EquivalenceClass>,
    logical: Vec<EquivalenceClass>,
    structural: Vec<EquivalenceClass>,
    member_index: BTreeMap<CellPos, usize>,
}

fn group(cells: &[(CellPos, [String; 3])], level: Level) -> (Vec<EquivalenceClass>, Vec<usize>) {
    let slot = level as usize;
    let mut by_key: HashMap<&str, usize> = HashMap::new();
    let mut classes: Vec<(String, Vec<CellPos>)> = Vec::new();
    let mut assignment = Vec::with_capacity(cells.len());
    // cells arrive in canonical order, so first-seen order is representative order
    for (pos, keys) in cells {
        let idx = *by_key.entry(keys[slot].as_str()).or_insert_with(|| {
            classes.push((keys[slot].clone(), Vec::new()));
            classes.len() - 1
        });
        classes[idx].1.push(*pos);
        assignment.push(idx);
    }
    let classes = classes
        .into_iter()
        .enumerate()
        .map(|(index, (key, members))| EquivalenceClass {
            id: ClassId { level, index },
            fingerprint: Fingerprint { level, key },
            members,
            parent: None,
            children: Vec::new(),
        })
        .collect();
    (classes, assignment)
}

fn link(children: &mut [EquivalenceClass], parents: &mut [EquivalenceClass], child_of: &[usize], parent_of: &[usize]) {
    for (cell, &c) in child_of.iter().enumerate() {
        let p = parent_of[cell];
        match children[c].parent {
            None => {
                children[c].parent = Some(parents[p].id);
                parents[p].children.push(children[c].id);
            }
            Some(existing) => debug_assert_eq!(existing, parents[p].id, "abstraction is not monotone"),
        }
    }
}

/// Partitions every formula cell of the workbook at all three levels.
pub fn partition(wb: &Workbook) -> ClassHierarchy {
    let cells: Vec<(CellPos, [String; 3])> = wb
        .formula_cells()
        .map(|(pos, ast)| {
            (
                pos,
                [
                    copy_fingerprint(ast).key,
                    logical_fingerprint(ast).key,
                    structural_fingerprint(ast).key,
                ],
            )
        })
        .collect();
    let (mut copy, copy_of) = group(&cells, Level::Copy);
    let (mut logical, logical_of) = group(&cells, Level::Logical);
    let (mut structural, structural_of) = group(&cells, Level::Structural);
    link(&mut copy, &mut logical, &copy_of, &logical_of);
    link(&mut logical, &mut structural, &logical_of, &structural_of);
    let member_index = cells.iter().zip(&copy_of).map(|((pos, _), &c)| (*pos, c)).collect();
    ClassHierarchy {
        copy,
        logical,
        structural,
        member_index,
    }
}

impl ClassHierarchy {
    pub fn classes(&self, level: Level) -> &[EquivalenceClass] {
        match level {
            Level::Copy => &self.copy,
            Level::Logical => &self.logical,
            Level::Structural => &self.structural,
        }
    }

    pub fn class(&self, id: ClassId) -> Option<&EquivalenceClass> {
        self.classes(id.level).get(id.index)
    }

    pub fn is_empty(&self) -> bool {
        self.copy.is_empty()
    }

    pub fn formula_count(&self) -> usize {
        self.member_index.len()
    }

    /// The class containing `pos` at `level`, if `pos` is a formula cell.
    pub fn class_of(&self, pos: CellPos, level: Level) -> Option<&EquivalenceClass> {
        let mut class = &self.copy[*self.member_index.get(&pos)?];
        while class.level() != level {
            class = self.class(class.parent?)?;
        }
        Some(class)
    }

    pub fn copy_class_of(&self, pos: CellPos) -> Option<&EquivalenceClass> {
        self.class_of(pos, Level::Copy)
    }

    /// Copy, logical and structural class ids of a formula cell.
    pub fn lineage(&self, pos: CellPos) -> Option<[ClassId; 3]> {
        let c = self.copy_class_of(pos)?;
        let l = self.class(c.parent?)?;
        let s = self.class(l.parent?)?;
        Some([c.id, l.id, s.id])
    }

    /// Formula cells in canonical order.
    pub fn formula_cells(&self) -> impl Iterator<Item = CellPos> + '_ {
        self.member_index.keys().copied()
    }

    /// JSON-ready view with addresses resolved against the workbook.
    pub fn document(&self, wb: &Workbook) -> HierarchyDocument {
        let level = |level| {
            self.classes(level)
                .iter()
                .map(|c| ClassEntry {
                    id: c.id,
                    level: c.level(),
                    key: c.fingerprint.key.clone(),
                    parent: c.parent,
                    children: c.children.clone(),
                    representative: wb.address(c.representative()).to_string(),
                    members: c.members.iter().map(|&m| wb.address(m).to_string()).collect(),
                })
                .collect()
        };
        HierarchyDocument {
            workbook: wb.name().to_string(),
            formula_cells: self.formula_count(),
            copy: level(Level::Copy),
            logical: level(Level::Logical),
            structural: level(Level::Structural),
        }
    }
}

/// Ordered classes at one level.
pub fn classes_at_level(h: &ClassHierarchy, level: Level) -> &[EquivalenceClass] {
    h.classes(level)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: ClassId,
    pub level: Level,
    pub key: String,
    pub parent: Option<ClassId>,
    pub children: Vec<ClassId>,
    pub representative: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyDocument {
    pub workbook: String,
    pub formula_cells: usize,
    pub copy: Vec<ClassEntry>,
    pub logical: Vec<ClassEntry>,
    pub structural: Vec<ClassEntry>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;
    use crate::load::load_fgj;

    fn key(text: &str, col: u32, row: u32, level: Level) -> String {
        fingerprint(&parse(text, col, row).unwrap(), level).key
    }

    #[test]
    fn copy_keys() {
        assert_eq!(key("=A2*2", 2, 2, Level::Copy), key("=A3*2", 2, 3, Level::Copy));
        assert_ne!(key("=A2*2", 2, 2, Level::Copy), key("=A2*2", 2, 3, Level::Copy));
        assert_eq!(key("=$A$1*2", 2, 2, Level::Copy), key("=$A$1*2", 5, 9, Level::Copy));
    }

    #[test]
    fn logical_keys() {
        assert_eq!(key("=A2*2", 2, 2, Level::Logical), key("=A2*3", 2, 2, Level::Logical));
        assert_ne!(key("=A2*2", 2, 2, Level::Copy), key("=A2*3", 2, 2, Level::Copy));
        assert_eq!(key("=$A$1*B2", 3, 2, Level::Logical), key("=$D$9*B2", 3, 2, Level::Logical));
        assert_ne!(key("=A2*2", 2, 2, Level::Logical), key("=B2*2", 2, 2, Level::Logical));
        // the absolute flag survives the abstraction
        assert_ne!(key("=$A$1+B1", 3, 1, Level::Logical), key("=A1+B1", 3, 1, Level::Logical));
        // literal types stay distinct
        assert_ne!(key("=A1&1", 2, 1, Level::Logical), key("=A1&\"1\"", 2, 1, Level::Logical));
        // sheet qualifier of an absolute reference is kept
        assert_ne!(key("=X!$A$1", 2, 1, Level::Logical), key("=Y!$A$1", 2, 1, Level::Logical));
    }

    #[test]
    fn structural_keys() {
        assert_eq!(key("=A1+B1", 3, 1, Level::Structural), key("=C5+D9", 3, 1, Level::Structural));
        assert_ne!(key("=A1+B1", 3, 1, Level::Structural), key("=A1*B1", 3, 1, Level::Structural));
        assert_eq!(key("=SUM(A1:A9)", 3, 1, Level::Structural), key("=SUM(B2:C4)", 3, 1, Level::Structural));
        assert_ne!(key("=SUM(A1:A9)", 3, 1, Level::Structural), key("=SUM(A1:A9,B1)", 3, 1, Level::Structural));
        // constant in place of a reference: same skeleton, different logical class
        assert_eq!(key("=A1+2", 3, 1, Level::Structural), key("=A1+B2", 3, 1, Level::Structural));
        assert_ne!(key("=A1+2", 3, 1, Level::Logical), key("=A1+B2", 3, 1, Level::Logical));
    }

    #[test]
    fn keys_are_self_delimiting() {
        // a string containing key syntax must not collide with structure
        assert_ne!(key("=\"a\"&\"b\"", 1, 1, Level::Copy), key("=\"a\"\"&\"\"b\"", 1, 1, Level::Copy));
        assert_ne!(key("=Q!A1", 2, 1, Level::Copy), key("=A1", 2, 1, Level::Copy));
    }

    fn six_cell() -> Workbook {
        let doc = r#"{"workbook":"w","sheets":[{"name":"S","cells":[
            {"addr":"A1","content":"1"},{"addr":"A2","content":"2"},
            {"addr":"B1","content":"=A1*2"},{"addr":"B2","content":"=A2*2"},
            {"addr":"B3","content":"=A2*3"},{"addr":"C1","content":"=A1+B1"}]}]}"#;
        load_fgj(doc.as_bytes()).unwrap()
    }

    fn member_sets(h: &ClassHierarchy, wb: &Workbook, level: Level) -> Vec<Vec<String>> {
        h.classes(level)
            .iter()
            .map(|c| c.members.iter().map(|&m| wb.address(m).local()).collect())
            .collect()
    }

    #[test]
    fn six_cell_partition() {
        let wb = six_cell();
        let h = partition(&wb);
        assert_eq!(member_sets(&h, &wb, Level::Copy), vec![vec!["B1", "B2"], vec!["C1"], vec!["B3"]]);
        // B3 reads A2, one row up: its relative offset differs from B1/B2, so
        // it is logically distinct even though only the constant looks different
        assert_eq!(member_sets(&h, &wb, Level::Logical), vec![vec!["B1", "B2"], vec!["C1"], vec!["B3"]]);
        assert_eq!(member_sets(&h, &wb, Level::Structural), vec![vec!["B1", "B2", "B3"], vec!["C1"]]);
        assert_eq!(classes_at_level(&h, Level::Copy).len(), 3);
        assert_eq!(classes_at_level(&h, Level::Structural).len(), 2);
        let b3 = wb.pos(&"S!B3".parse().unwrap()).unwrap();
        assert_eq!(h.lineage(b3).unwrap().map(|id| id.to_string()), ["C3", "L3", "S1"]);
        assert_eq!(h.class("S1".parse().unwrap()).unwrap().children.len(), 2);
    }

    #[test]
    fn empty_workbook() {
        let h = partition(&Workbook::new("e"));
        assert!(h.is_empty());
        assert!(classes_at_level(&h, Level::Logical).is_empty());
    }

    #[test]
    fn class_id_parsing() {
        let id: ClassId = "L12".parse().unwrap();
        assert_eq!(id, ClassId { level: Level::Logical, index: 11 });
        assert_eq!(id.to_string(), "L12");
        assert!("X1".parse::<ClassId>().is_err());
        assert!("C0".parse::<ClassId>().is_err());
        assert!("C".parse::<ClassId>().is_err());
    }
}
