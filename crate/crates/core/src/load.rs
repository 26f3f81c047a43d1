//! Workbook interchange: Formula-Grid JSON (FGJ) and CSV sheet sets.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{self, ParseError};
use crate::grid::{column_name, CellAddress, CellContent, Sheet, Workbook};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed workbook document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("sheet `{sheet}`: malformed CSV: {source}")]
    Csv {
        sheet: String,
        #[source]
        source: csv::Error,
    },
    #[error("duplicate sheet name `{0}`")]
    DuplicateSheet(String),
    #[error("sheet with an empty name")]
    EmptySheetName,
    #[error("sheet `{sheet}`: malformed cell address `{addr}`")]
    BadAddress { sheet: String, addr: String },
    #[error("sheet `{sheet}`: cell {addr} appears more than once")]
    DuplicateCell { sheet: String, addr: String },
    #[error("{sheet}!{addr}: {source}")]
    Formula {
        sheet: String,
        addr: String,
        #[source]
        source: ParseError,
    },
    #[error("{0}: unsupported input (expected .json, .csv or a directory of .csv files)")]
    UnsupportedInput(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FgjCell {
    pub addr: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FgjSheet {
    pub name: String,
    pub cells: Vec<FgjCell>,
}

/// The FGJ document shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FgjDocument {
    pub workbook: String,
    pub sheets: Vec<FgjSheet>,
}

/// Classifies and, for formulas, parses one cell's source text.
pub fn cell_content(sheet: &str, col: u32, row: u32, raw: &str) -> Result<CellContent, LoadError> {
    let trimmed = raw.trim();
    if let Some(lit) = CellContent::literal(trimmed) {
        return Ok(lit);
    }
    let ast = formula::parse(trimmed, col, row).map_err(|source| LoadError::Formula {
        sheet: sheet.to_string(),
        addr: format!("{}{}", column_name(col), row),
        source,
    })?;
    Ok(CellContent::Formula {
        raw: trimmed.to_string(),
        ast,
    })
}

fn put(sheet: &mut Sheet, col: u32, row: u32, raw: &str) -> Result<(), LoadError> {
    let content = cell_content(sheet.name(), col, row, raw)?;
    if content.is_empty() {
        return Ok(());
    }
    if sheet.set(col, row, content).is_some() {
        return Err(LoadError::DuplicateCell {
            sheet: sheet.name().to_string(),
            addr: format!("{}{}", column_name(col), row),
        });
    }
    Ok(())
}

impl FgjDocument {
    pub fn into_workbook(self) -> Result<Workbook, LoadError> {
        let mut wb = Workbook::new(self.workbook);
        for fs in self.sheets {
            if fs.name.is_empty() {
                return Err(LoadError::EmptySheetName);
            }
            let mut sheet = Sheet::new(fs.name.clone());
            for cell in &fs.cells {
                let addr = CellAddress::parse_local(&fs.name, &cell.addr).map_err(|_| LoadError::BadAddress {
                    sheet: fs.name.clone(),
                    addr: cell.addr.clone(),
                })?;
                put(&mut sheet, addr.col, addr.row, &cell.content)?;
            }
            wb.add_sheet(sheet).map_err(|e| LoadError::DuplicateSheet(e.0))?;
        }
        Ok(wb)
    }

    /// Exports a workbook; cells in row-major order.
    pub fn from_workbook(wb: &Workbook) -> Self {
        FgjDocument {
            workbook: wb.name().to_string(),
            sheets: wb
                .sheets()
                .iter()
                .map(|s| FgjSheet {
                    name: s.name().to_string(),
                    cells: s
                        .cells()
                        .map(|(col, row, c)| FgjCell {
                            addr: format!("{}{}", column_name(col), row),
                            content: c.raw().unwrap_or_default().to_string(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

pub fn load_fgj(bytes: &[u8]) -> Result<Workbook, LoadError> {
    let doc: FgjDocument = serde_json::from_slice(bytes)?;
    doc.into_workbook()
}

/// Builds one sheet from CSV bytes; field (r, c) lands in row r, column c.
pub fn load_csv_sheet(name: &str, bytes: &[u8]) -> Result<Sheet, LoadError> {
    if name.is_empty() {
        return Err(LoadError::EmptySheetName);
    }
    let mut sheet = Sheet::new(name);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|source| LoadError::Csv {
            sheet: name.to_string(),
            source,
        })?;
        for (c, field) in record.iter().enumerate() {
            put(&mut sheet, c as u32 + 1, r as u32 + 1, field)?;
        }
    }
    Ok(sheet)
}

/// Builds a workbook from named CSV sheets, keeping their order.
pub fn load_csv_sheets<'a>(
    workbook: &str,
    sheets: impl IntoIterator<Item = (&'a str, &'a [u8])>,
) -> Result<Workbook, LoadError> {
    let mut wb = Workbook::new(workbook);
    for (name, bytes) in sheets {
        let sheet = load_csv_sheet(name, bytes)?;
        wb.add_sheet(sheet).map_err(|e| LoadError::DuplicateSheet(e.0))?;
    }
    Ok(wb)
}

fn read(path: &Path) -> Result<Vec<u8>, LoadError> {
    fs::read(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Loads a workbook from disk: an FGJ `.json` file, a single `.csv` sheet, or a
/// directory whose `.csv` files (sorted by name) form the sheets.
pub fn load_path(path: &Path) -> Result<Workbook, LoadError> {
    let io = |source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    };
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
            .collect();
        files.sort();
        let contents = files
            .iter()
            .map(|f| Ok((stem(f), read(f)?)))
            .collect::<Result<Vec<_>, LoadError>>()?;
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "workbook".to_string());
        return load_csv_sheets(&name, contents.iter().map(|(n, b)| (n.as_str(), b.as_slice())));
    }
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "json" | "fgj" => load_fgj(&read(path)?),
        "csv" => {
            let name = stem(path);
            let bytes = read(path)?;
            load_csv_sheets(&name, [(name.as_str(), bytes.as_slice())])
        }
        _ if !path.exists() => Err(io(std::io::Error::from(std::io::ErrorKind::NotFound))),
        _ => Err(LoadError::UnsupportedInput(path.to_path_buf())),
    }
}
