//! One-stop analysis of a loaded workbook.

use std::collections::BTreeSet;

use crate::areas::{detect_all, DetectorConfig, Finding};
use crate::equivalence::{partition, ClassHierarchy, ClassId, Level};
use crate::graph::{aggregate, cell_graph, AreaGraph, CellGraph, GraphError};
use crate::grid::Workbook;

/// A workbook with its class hierarchy and cell-level data-flow graph.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub workbook: Workbook,
    pub hierarchy: ClassHierarchy,
    pub cells: CellGraph,
}

impl Analysis {
    pub fn new(workbook: Workbook) -> Self {
        let hierarchy = partition(&workbook);
        let cells = cell_graph(&workbook);
        Analysis {
            workbook,
            hierarchy,
            cells,
        }
    }

    pub fn findings(&self, config: &DetectorConfig) -> Vec<Finding> {
        detect_all(&self.hierarchy, &self.workbook, config)
    }

    pub fn area_graph(&self, visible: &BTreeSet<ClassId>) -> Result<AreaGraph, GraphError> {
        aggregate(&self.cells, &self.hierarchy, &self.workbook, visible)
    }

    /// The graph with every class of `level` visible.
    pub fn level_graph(&self, level: Level) -> AreaGraph {
        let visible = self.hierarchy.classes(level).iter().map(|c| c.id).collect();
        self.area_graph(&visible).expect("a full level covers every formula cell once")
    }
}
