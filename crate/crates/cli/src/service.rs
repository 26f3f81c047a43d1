//! HTTP/JSON audit service.
//!
//! Reads run concurrently against the immutable analysis. Verdicts take the
//! store lock, which also covers the append to the findings log, so log order
//! equals application order.

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread;

use serde::Deserialize;
use serde_json::{json, Value};
use sheetaudit_core::analysis::Analysis;
use sheetaudit_core::areas::{class_areas, FindingStore, Impact, StoreError, Verdict};
use sheetaudit_core::equivalence::{ClassId, Level};
use sheetaudit_core::grid::{column_name, CellContent, CellPos, Rect};
use sheetaudit_core::report::{compute_error_statistics, Report, ReportFormat};

/// Largest rectangle `/workbook` returns in one page.
pub const MAX_PAGE_CELLS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub status: u16,
    pub body: Value,
}

impl Response {
    fn ok(body: Value) -> Self {
        Response { status: 200, body }
    }

    fn error(status: u16, code: &str, message: impl Into<String>) -> Self {
        Response {
            status,
            body: json!({ "error": code, "message": message.into() }),
        }
    }

    fn error_at(status: u16, code: &str, message: impl Into<String>, cell: String) -> Self {
        Response {
            status,
            body: json!({ "error": code, "message": message.into(), "cell": cell }),
        }
    }
}

pub struct AuditService {
    analysis: Analysis,
    store: Mutex<FindingStore>,
    log_path: Option<PathBuf>,
    clock: fn() -> u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerdictRequest {
    action: String,
    impact: Option<Impact>,
    #[serde(default)]
    note: String,
}

fn query_pairs(query: &str) -> Vec<(String, String)> {
    url::form_urlencoded::parse(query.as_bytes()).into_owned().collect()
}

fn query_value<'a>(pairs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn kind_name(content: &CellContent) -> &'static str {
    match content {
        CellContent::Formula { .. } => "formula",
        CellContent::Number { .. } => "number",
        CellContent::Text { .. } => "text",
        CellContent::Boolean { .. } => "boolean",
        CellContent::Empty => "empty",
    }
}

impl AuditService {
    /// `log_path`, when set, receives every verdict event as it is recorded.
    pub fn new(analysis: Analysis, store: FindingStore, log_path: Option<PathBuf>, clock: fn() -> u64) -> Self {
        AuditService {
            analysis,
            store: Mutex::new(store),
            log_path,
            clock,
        }
    }

    pub fn store(&self) -> std::sync::MutexGuard<'_, FindingStore> {
        self.store.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Routes one request. `url` is the path with an optional query string.
    pub fn handle(&self, method: &str, url: &str, body: &[u8]) -> Response {
        let (path, query) = url.split_once('?').unwrap_or((url, ""));
        let query = query_pairs(query);
        let segments: Vec<&str> = path.trim_matches('/').split('/').collect();
        match (method, segments.as_slice()) {
            ("GET", ["workbook"]) => self.workbook(&query),
            ("GET", ["hierarchy"]) => Response::ok(json!(self.analysis.hierarchy.document(&self.analysis.workbook))),
            ("GET", ["class", id]) => self.class(id),
            ("GET", ["graph"]) => self.graph(&query),
            ("GET", ["findings"]) => Response::ok(json!(self.store().findings())),
            ("GET", ["statistics"]) => self.statistics(),
            ("POST", ["findings", id, "verdict"]) => self.verdict(id, body),
            (_, ["workbook"] | ["hierarchy"] | ["class", _] | ["graph"] | ["findings"] | ["statistics"])
            | (_, ["findings", _, "verdict"]) => {
                Response::error(405, "method_not_allowed", format!("{method} is not supported on {path}"))
            }
            _ => Response::error(404, "not_found", format!("no route for {path}")),
        }
    }

    fn workbook(&self, query: &[(String, String)]) -> Response {
        let wb = &self.analysis.workbook;
        let sheets: Vec<Value> = wb
            .sheets()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                json!({
                    "index": i,
                    "name": s.name(),
                    "bounds": s.bounds().map(|b| b.a1()),
                    "formulas": s.formula_count(),
                })
            })
            .collect();
        let mut body = json!({ "workbook": wb.name(), "sheets": sheets });
        let Some(sheet_name) = query_value(query, "sheet") else {
            return Response::ok(body);
        };
        let Some(sheet) = wb.sheet_index(sheet_name) else {
            return Response::error(404, "unknown_sheet", format!("no sheet named `{sheet_name}`"));
        };
        let rect = match query_value(query, "rect") {
            Some(text) => match Rect::parse_a1(text) {
                Some(r) => r,
                None => return Response::error(400, "bad_rect", format!("`{text}` is not an A1 rectangle")),
            },
            None => match wb.sheet(sheet).bounds() {
                Some(b) => b,
                None => {
                    body["cells"] = json!([]);
                    return Response::ok(body);
                }
            },
        };
        if rect.area() > MAX_PAGE_CELLS {
            return Response::error(
                400,
                "rect_too_large",
                format!("{} spans {} cells; pages are limited to {MAX_PAGE_CELLS}", rect.a1(), rect.area()),
            );
        }
        let cells: Vec<Value> = wb
            .sheet(sheet)
            .cells()
            .filter(|(col, row, _)| rect.contains(*col, *row))
            .map(|(col, row, content)| {
                let pos = CellPos::new(sheet, col, row);
                json!({
                    "addr": format!("{}{row}", column_name(col)),
                    "raw": content.raw(),
                    "kind": kind_name(content),
                    "classes": self.analysis.hierarchy.lineage(pos),
                })
            })
            .collect();
        body["page"] = json!({ "sheet": wb.sheet(sheet).name(), "rect": rect.a1() });
        body["cells"] = json!(cells);
        Response::ok(body)
    }

    fn class(&self, id: &str) -> Response {
        let Ok(class_id) = id.parse::<ClassId>() else {
            return Response::error(400, "bad_class_id", format!("`{id}` is not a class id"));
        };
        let h = &self.analysis.hierarchy;
        let wb = &self.analysis.workbook;
        let Some(class) = h.class(class_id) else {
            return Response::error(404, "unknown_class", format!("no class `{id}`"));
        };
        Response::ok(json!({
            "id": class.id,
            "level": class.id.level,
            "key": class.fingerprint.key,
            "parent": class.parent,
            "children": class.children,
            "representative": wb.address(class.representative()),
            "members": class.members.iter().map(|p| wb.address(*p)).collect::<Vec<_>>(),
            "areas": class_areas(h, wb, class_id),
        }))
    }

    fn graph(&self, query: &[(String, String)]) -> Response {
        let visible: BTreeSet<ClassId> = match query_value(query, "visible") {
            Some(list) => {
                let mut ids = BTreeSet::new();
                for part in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    match part.parse() {
                        Ok(id) => {
                            ids.insert(id);
                        }
                        Err(_) => return Response::error(400, "bad_class_id", format!("`{part}` is not a class id")),
                    }
                }
                ids
            }
            None => {
                let level = match query_value(query, "level").map(str::parse::<Level>) {
                    None => Level::Copy,
                    Some(Ok(l)) => l,
                    Some(Err(e)) => return Response::error(400, "bad_level", e),
                };
                self.analysis.hierarchy.classes(level).iter().map(|c| c.id).collect()
            }
        };
        match self.analysis.area_graph(&visible) {
            Ok(g) => Response::ok(json!(g)),
            Err(e) => match e.cell() {
                Some(cell) => Response::error_at(422, "visible_set_not_a_cover", e.to_string(), cell.to_string()),
                None => Response::error(404, "unknown_class", e.to_string()),
            },
        }
    }

    fn statistics(&self) -> Response {
        let store = self.store();
        let report = Report::build(&self.analysis.workbook, &self.analysis.hierarchy, &store);
        let full: Value = serde_json::from_str(&sheetaudit_core::report::emit_report(&report, ReportFormat::Json))
            .expect("report JSON parses");
        let stats = compute_error_statistics(&store, &self.analysis.hierarchy, &self.analysis.workbook);
        Response::ok(json!({
            "error_statistics": full["error_statistics"],
            "metrics": full["metrics"],
            "consistency_issues": stats.consistency_issues().iter().map(ToString::to_string).collect::<Vec<_>>(),
        }))
    }

    fn verdict(&self, id: &str, body: &[u8]) -> Response {
        let req: VerdictRequest = match serde_json::from_slice(body) {
            Ok(r) => r,
            Err(e) => return Response::error(400, "bad_request", format!("verdict body: {e}")),
        };
        let verdict = match (req.action.as_str(), req.impact) {
            ("confirm", Some(impact)) => Verdict::Confirm { impact, note: req.note },
            ("confirm", None) => {
                return Response::error(400, "bad_request", "a confirmation needs an impact (qualitative or quantitative)")
            }
            ("dismiss", None) => Verdict::Dismiss { note: req.note },
            ("dismiss", Some(_)) => return Response::error(400, "bad_request", "a dismissal takes no impact"),
            (other, _) => {
                return Response::error(400, "bad_request", format!("unknown action `{other}` (expected confirm or dismiss)"))
            }
        };
        let mut store = self.store();
        let result = store.record_verdict(id, verdict, (self.clock)()).cloned();
        match result {
            Ok(finding) => {
                let entry = store.log().last().expect("verdict was logged");
                if let Some(path) = &self.log_path {
                    let line = serde_json::to_string(entry).expect("log entries serialize");
                    let written = OpenOptions::new()
                        .append(true)
                        .create(true)
                        .open(path)
                        .and_then(|mut f| writeln!(f, "{line}"));
                    if let Err(e) = written {
                        return Response::error(
                            500,
                            "log_write_failed",
                            format!("verdict applied but not persisted to {}: {e}", path.display()),
                        );
                    }
                }
                let record = store.records().iter().find(|r| r.finding_id == finding.id).cloned();
                Response::ok(json!({ "finding": finding, "record": record }))
            }
            Err(e @ StoreError::NotFound(_)) => Response::error(404, "unknown_finding", e.to_string()),
            Err(e @ StoreError::NotOpen { .. }) => {
                let cell = store.finding(id).map(|f| f.location.to_string()).unwrap_or_default();
                Response::error_at(409, "finding_not_open", e.to_string(), cell)
            }
            Err(e @ StoreError::DuplicateId(_)) => Response::error(500, "store_error", e.to_string()),
        }
    }
}

/// Serves `service` on `server` with `workers` threads until the server is
/// unblocked or dropped.
pub fn run(service: Arc<AuditService>, server: Arc<tiny_http::Server>, workers: usize) {
    let handles: Vec<_> = (0..workers.max(1))
        .map(|_| {
            let service = Arc::clone(&service);
            let server = Arc::clone(&server);
            thread::spawn(move || {
                for mut request in server.incoming_requests() {
                    let mut body = Vec::new();
                    let response = match request.as_reader().read_to_end(&mut body) {
                        Ok(_) => service.handle(request.method().as_str(), request.url(), &body),
                        Err(e) => Response::error(400, "bad_request", format!("reading body: {e}")),
                    };
                    let text = serde_json::to_string(&response.body).expect("responses serialize");
                    let header = tiny_http::Header::from_bytes("Content-Type", "application/json")
                        .expect("static header is valid");
                    let reply = tiny_http::Response::from_string(text)
                        .with_status_code(response.status)
                        .with_header(header);
                    // a client that hung up is not the service's problem
                    let _ = request.respond(reply);
                }
            })
        })
        .collect();
    for h in handles {
        let _ = h.join();
    }
}
