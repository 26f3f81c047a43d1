//! Data-flow graphs: cell level and aggregated to equivalence classes.
//!
//! Edges point from precedent to dependent, the direction data flows.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;
use thiserror::Error;

use crate::equivalence::{ClassHierarchy, ClassId};
use crate::formula::{referenced_cells, Precedent};
use crate::grid::{CellAddress, CellPos, Workbook};

/// A node of the cell graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellNode {
    Cell(CellPos),
    /// Reference past the grid edge; kept as a dangling input of its sheet.
    OutOfGrid { sheet: usize, col: i64, row: i64 },
    /// Qualifier naming no sheet of the workbook.
    MissingSheet(String),
}

impl From<Precedent> for CellNode {
    fn from(p: Precedent) -> Self {
        match p {
            Precedent::Cell(c) => CellNode::Cell(c),
            Precedent::OutOfGrid { sheet, col, row } => CellNode::OutOfGrid { sheet, col, row },
            Precedent::UnresolvedSheet(s) => CellNode::MissingSheet(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellGraph {
    /// Canonical order.
    nodes: Vec<CellNode>,
    labels: Vec<String>,
    /// `(precedent, dependent)` node indices, sorted.
    edges: Vec<(usize, usize)>,
    cyclic: BTreeSet<CellPos>,
}

fn node_label(wb: &Workbook, n: &CellNode) -> String {
    match n {
        CellNode::Cell(p) => wb.address(*p).to_string(),
        CellNode::OutOfGrid { sheet, col, row } => format!("{}!(C{col},R{row})", wb.sheet(*sheet).name()),
        CellNode::MissingSheet(s) => format!("{s}!?"),
    }
}

/// Every formula cell with an edge from each of its resolved precedents.
pub fn cell_graph(wb: &Workbook) -> CellGraph {
    let mut pairs: BTreeSet<(CellNode, CellPos)> = BTreeSet::new();
    let mut nodes: BTreeSet<CellNode> = BTreeSet::new();
    for (pos, ast) in wb.formula_cells() {
        nodes.insert(CellNode::Cell(pos));
        for p in referenced_cells(ast, pos, wb) {
            let n = CellNode::from(p);
            nodes.insert(n.clone());
            pairs.insert((n, pos));
        }
    }
    let nodes: Vec<CellNode> = nodes.into_iter().collect();
    let index: BTreeMap<&CellNode, usize> = nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let mut edges: Vec<(usize, usize)> = pairs
        .iter()
        .map(|(from, to)| (index[from], index[&CellNode::Cell(*to)]))
        .collect();
    edges.sort_unstable();

    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(nodes.len(), edges.len());
    for _ in &nodes {
        g.add_node(());
    }
    for &(a, b) in &edges {
        g.add_edge(NodeIndex::new(a), NodeIndex::new(b), ());
    }
    let mut cyclic = BTreeSet::new();
    for scc in tarjan_scc(&g) {
        let on_cycle = scc.len() > 1 || g.contains_edge(scc[0], scc[0]);
        if on_cycle {
            for ix in scc {
                if let CellNode::Cell(p) = nodes[ix.index()] {
                    cyclic.insert(p);
                }
            }
        }
    }
    let labels = nodes.iter().map(|n| node_label(wb, n)).collect();
    CellGraph {
        nodes,
        labels,
        edges,
        cyclic,
    }
}

impl CellGraph {
    pub fn nodes(&self) -> &[CellNode] {
        &self.nodes
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(precedent, dependent)`.
    pub fn edges(&self) -> impl Iterator<Item = (&CellNode, &CellNode)> + '_ {
        self.edges.iter().map(|&(a, b)| (&self.nodes[a], &self.nodes[b]))
    }

    /// Cells lying on a reference cycle, self-references included.
    pub fn cyclic_cells(&self) -> &BTreeSet<CellPos> {
        &self.cyclic
    }
}

/// A node of the aggregated graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AreaNode {
    Class(ClassId),
    /// Non-formula precedents of one sheet, by sheet index.
    Inputs(usize),
    /// Precedents on a sheet the workbook does not have.
    MissingSheet(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AreaNodeInfo {
    pub id: String,
    #[serde(skip)]
    pub node: AreaNode,
    pub kind: &'static str,
    /// Member cells for a class; distinct referenced cells for an input node.
    pub members: usize,
    pub representative: Option<CellAddress>,
    /// Edges between two members of the same class, dropped from `edges`.
    pub self_dependencies: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AreaEdge {
    pub from: String,
    pub to: String,
    pub weight: u64,
    #[serde(skip)]
    pub source: AreaNode,
    #[serde(skip)]
    pub target: AreaNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AreaGraph {
    pub nodes: Vec<AreaNodeInfo>,
    pub edges: Vec<AreaEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown class id `{0}`")]
    UnknownClass(String),
    #[error("{cell} is not covered by any visible class")]
    NotCovered { cell: CellAddress },
    #[error("{cell} is covered by more than one visible class ({classes})")]
    DoubleCovered { cell: CellAddress, classes: String },
}

impl GraphError {
    pub fn cell(&self) -> Option<&CellAddress> {
        match self {
            GraphError::UnknownClass(_) => None,
            GraphError::NotCovered { cell } | GraphError::DoubleCovered { cell, .. } => Some(cell),
        }
    }
}

fn area_id(wb: &Workbook, n: &AreaNode) -> String {
    match n {
        AreaNode::Class(c) => c.to_string(),
        AreaNode::Inputs(s) => format!("inputs:{}", wb.sheet(*s).name()),
        AreaNode::MissingSheet(s) => format!("missing:{s}"),
    }
}

impl AreaGraph {
    pub fn node(&self, n: &AreaNode) -> Option<&AreaNodeInfo> {
        self.nodes.iter().find(|i| &i.node == n)
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn self_dependencies(&self) -> u64 {
        self.nodes.iter().map(|n| n.self_dependencies).sum()
    }
}

/// Maps every formula cell to the one visible class containing it.
fn owners(
    h: &ClassHierarchy,
    wb: &Workbook,
    visible: &BTreeSet<ClassId>,
) -> Result<BTreeMap<CellPos, ClassId>, GraphError> {
    for id in visible {
        if h.class(*id).is_none() {
            return Err(GraphError::UnknownClass(id.to_string()));
        }
    }
    let mut out = BTreeMap::new();
    for pos in h.formula_cells() {
        let lineage = h.lineage(pos).expect("formula cell has a lineage");
        let covering: Vec<ClassId> = lineage.into_iter().filter(|c| visible.contains(c)).collect();
        match covering.as_slice() {
            [one] => {
                out.insert(pos, *one);
            }
            [] => return Err(GraphError::NotCovered { cell: wb.address(pos) }),
            many => {
                return Err(GraphError::DoubleCovered {
                    cell: wb.address(pos),
                    classes: many.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "),
                })
            }
        }
    }
    Ok(out)
}

/// Collapses the cell graph onto the visible classes.
///
/// `visible` must cover every formula cell exactly once, with a class standing
/// in for all of its descendants. Precedents that are not formula cells go to
/// one input node per sheet.
pub fn aggregate(
    cg: &CellGraph,
    h: &ClassHierarchy,
    wb: &Workbook,
    visible: &BTreeSet<ClassId>,
) -> Result<AreaGraph, GraphError> {
    let owner = owners(h, wb, visible)?;
    let map = |n: &CellNode| -> AreaNode {
        match n {
            CellNode::Cell(p) => match owner.get(p) {
                Some(c) => AreaNode::Class(*c),
                None => AreaNode::Inputs(p.sheet),
            },
            CellNode::OutOfGrid { sheet, .. } => AreaNode::Inputs(*sheet),
            CellNode::MissingSheet(s) => AreaNode::MissingSheet(s.clone()),
        }
    };

    let mut weights: BTreeMap<(AreaNode, AreaNode), u64> = BTreeMap::new();
    let mut selfdeps: BTreeMap<AreaNode, u64> = BTreeMap::new();
    let mut input_members: BTreeMap<AreaNode, BTreeSet<&CellNode>> = BTreeMap::new();
    for (from, to) in cg.edges() {
        let (a, b) = (map(from), map(to));
        if !matches!(a, AreaNode::Class(_)) {
            input_members.entry(a.clone()).or_default().insert(from);
        }
        if a == b {
            *selfdeps.entry(a).or_default() += 1;
        } else {
            *weights.entry((a, b)).or_default() += 1;
        }
    }

    let mut nodes: Vec<AreaNodeInfo> = visible
        .iter()
        .map(|&id| {
            let class = h.class(id).expect("checked above");
            AreaNodeInfo {
                id: id.to_string(),
                node: AreaNode::Class(id),
                kind: "class",
                members: class.members.len(),
                representative: Some(wb.address(class.representative())),
                self_dependencies: selfdeps.get(&AreaNode::Class(id)).copied().unwrap_or(0),
            }
        })
        .collect();
    for (node, members) in &input_members {
        nodes.push(AreaNodeInfo {
            id: area_id(wb, node),
            node: node.clone(),
            kind: if matches!(node, AreaNode::MissingSheet(_)) { "missing" } else { "inputs" },
            members: members.len(),
            representative: None,
            self_dependencies: 0,
        });
    }
    nodes.sort_by(|a, b| a.node.cmp(&b.node));
    let edges = weights
        .into_iter()
        .map(|((source, target), weight)| AreaEdge {
            from: area_id(wb, &source),
            to: area_id(wb, &target),
            weight,
            source,
            target,
        })
        .collect();
    Ok(AreaGraph { nodes, edges })
}

/// Quotes a DOT identifier or label.
fn quoted(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Graphs that can be written as a DOT digraph.
pub trait ToDot {
    fn write_dot(&self, out: &mut String);
}

/// DOT text: `digraph audit { ... }`, LF line endings, nodes then edges in
/// canonical order. Byte-identical for equal graphs.
pub fn export_dot(g: &impl ToDot) -> String {
    let mut out = String::from("digraph audit {\n");
    g.write_dot(&mut out);
    out.push_str("}\n");
    out
}

fn edge_line(out: &mut String, from: &str, to: &str, weight: u64) {
    write!(out, "  {} -> {}", quoted(from), quoted(to)).unwrap();
    if weight > 1 {
        write!(out, " [label={}]", quoted(&weight.to_string())).unwrap();
    }
    out.push_str(";\n");
}

impl ToDot for AreaGraph {
    fn write_dot(&self, out: &mut String) {
        out.push_str("  node [shape=box];\n");
        for n in &self.nodes {
            let cells = if n.members == 1 { "1 cell".to_string() } else { format!("{} cells", n.members) };
            let label = match &n.representative {
                Some(rep) => format!("{}\n{cells}\n{rep}", n.id),
                None => format!("{}\n{cells}", n.id),
            };
            write!(out, "  {} [label={}", quoted(&n.id), quoted(&label)).unwrap();
            match n.kind {
                "inputs" => out.push_str(", shape=ellipse"),
                "missing" => out.push_str(", shape=ellipse, style=dashed"),
                _ => {}
            }
            out.push_str("];\n");
        }
        for e in &self.edges {
            edge_line(out, &e.from, &e.to, e.weight);
        }
    }
}

impl ToDot for CellGraph {
    fn write_dot(&self, out: &mut String) {
        out.push_str("  node [shape=box];\n");
        for (n, label) in self.nodes.iter().zip(&self.labels) {
            write!(out, "  {}", quoted(label)).unwrap();
            match n {
                CellNode::Cell(p) if self.cyclic.contains(p) => out.push_str(" [color=red]"),
                CellNode::Cell(_) => {}
                _ => out.push_str(" [style=dashed]"),
            }
            out.push_str(";\n");
        }
        for &(a, b) in &self.edges {
            edge_line(out, &self.labels[a], &self.labels[b], 1);
        }
    }
}
