//! Spreadsheet auditing engine.
//!
//! Formula cells are partitioned into copy, logical and structural equivalence
//! classes. Irregularities in the geometric layout of those classes are reported
//! as findings for an auditor to confirm or dismiss, and the data flow between
//! classes is available as a graph with DOT export.

pub mod analysis;
pub mod areas;
pub mod equivalence;
pub mod fixture;
pub mod formula;
pub mod graph;
pub mod grid;
pub mod load;
pub mod report;
