mod common;

use common::{build_workbook, workbook_recipe};
use proptest::prelude::*;
use serde_json::Value;
use sheetaudit_core::analysis::Analysis;
use sheetaudit_core::areas::{Category, DetectorConfig, FindingStore, Impact, Verdict};
use sheetaudit_core::equivalence::partition;
use sheetaudit_core::grid::Workbook;
use sheetaudit_core::load::load_fgj;
use sheetaudit_core::report::{
    compute_error_statistics, compute_metrics, emit_report, metrics_tables, AuditMetrics, CountRow,
    ErrorStatistics, ImpactSplit, Ratio, Report, ReportFormat, SplitCounts,
};

fn row(name: &str, counts: [u64; 7]) -> CountRow {
    let [cells, occupied, formulas, literals, ce_count, error_classes, errors] = counts;
    CountRow {
        name: name.into(),
        cells,
        occupied,
        formulas,
        literals,
        ce_count,
        error_classes,
        errors,
    }
}

/// Three field-audit workbooks, counts as published.
fn field_counts() -> AuditMetrics {
    AuditMetrics::from_rows(
        vec![
            row("RAT-2001", [56_485, 19_444, 12_382, 7_062, 814, 21, 257]),
            row("TP-Report", [69_835, 23_502, 16_873, 6_629, 950, 83, 1_561]),
            row("AB-Market", [66_385, 17_500, 7_174, 10_326, 95, 5, 14]),
        ],
        "Total",
    )
}

fn split(error_classes: u64, errors: u64) -> SplitCounts {
    SplitCounts { error_classes, errors }
}

#[test]
fn injected_rows_roll_up_to_the_published_total() {
    let m = field_counts();
    assert_eq!(m.total, row("Total", [192_705, 60_446, 36_429, 24_017, 1_859, 109, 1_832]));
}

#[test]
fn relative_distribution_rounds_to_the_published_percentages() {
    let m = field_counts();
    let shown = |r: Option<Ratio>, d| r.unwrap().percent(d);
    let expected = [
        ("RAT-2001", ["34.4", "63.7", "36.3", "6.6"]),
        ("TP-Report", ["33.7", "71.8", "28.2", "5.6"]),
        ("AB-Market", ["26.4", "41.0", "59.0", "1.3"]),
    ];
    for (r, (name, [occ, formula, literal, ce])) in m.rows.iter().zip(expected) {
        assert_eq!(r.name, name);
        assert_eq!(shown(r.occupied_pct(), 1), occ);
        assert_eq!(shown(r.formula_pct(), 1), formula);
        assert_eq!(shown(r.literal_pct(), 1), literal);
        assert_eq!(shown(r.ce_to_formula(), 1), ce);
    }
    let whole: Vec<[String; 3]> = m
        .rows
        .iter()
        .map(|r| [shown(r.occupied_pct(), 0), shown(r.formula_pct(), 0), shown(r.literal_pct(), 0)])
        .collect();
    assert_eq!(
        whole,
        vec![
            ["34".to_string(), "64".into(), "36".into()],
            ["34".into(), "72".into(), "28".into()],
            ["26".into(), "41".into(), "59".into()],
        ]
    );
    let t = &m.total;
    assert_eq!(shown(t.occupied_pct(), 2), "31.37");
    assert_eq!(shown(t.formula_pct(), 2), "60.27");
    assert_eq!(shown(t.literal_pct(), 2), "39.73");
    assert_eq!(shown(t.ce_to_formula(), 1), "5.1");
    assert_eq!(t.avg_class_size().unwrap().fixed(1), "19.6");
    assert_eq!(shown(t.errors_per_occupied(), 2), "3.03");
}

#[test]
fn copy_class_ratios_use_half_up_rounding() {
    // a second count of the first workbook's classes (811) is used here
    let rows = [
        row("RAT-2001", [0, 0, 12_382, 0, 811, 21, 257]),
        row("TP-Report", [0, 0, 16_873, 0, 950, 83, 1_561]),
        row("AB-Market", [0, 0, 7_174, 0, 95, 5, 14]),
        row("Total", [0, 0, 36_429, 0, 1_859, 109, 1_832]),
    ];
    let got: Vec<(String, String)> = rows
        .iter()
        .map(|r| (r.error_classes_per_ce().unwrap().percent(1), r.errors_per_formula().unwrap().percent(2)))
        .collect();
    let want = [("2.6", "2.08"), ("8.7", "9.25"), ("5.3", "0.20"), ("5.9", "5.03")];
    let want: Vec<(String, String)> = want.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    assert_eq!(got, want);
}

#[test]
fn injected_error_splits_reproduce_the_totals() {
    let by_impact = ImpactSplit {
        qualitative: split(85, 1_591),
        quantitative: split(24, 241),
    };
    let by_category = [
        (Category::ConstantInsteadOfFormula, split(16, 1_222)),
        (Category::ConstantInsteadOfReference, split(8, 78)),
        (Category::ReferenceToEmptyCell, split(8, 78)),
        (Category::FormulaCopiedTooFar, split(24, 215)),
        (Category::Other, split(53, 239)),
    ];
    let stats = ErrorStatistics::inject(split(109, 1_832), by_impact, &by_category, 36_429, 1_859, 60_446);
    assert!(stats.consistency_issues().is_empty(), "{:?}", stats.consistency_issues());
    assert_eq!(stats.category_total(), split(109, 1_832));
    assert_eq!(stats.by_impact.total(), split(109, 1_832));
    assert_eq!(stats.errors_per_occupied().unwrap().percent(2), "3.03");

    // per-workbook impact rows add up to the impact totals
    let per_workbook = [
        ImpactSplit { qualitative: split(7, 84), quantitative: split(14, 183) },
        ImpactSplit { qualitative: split(73, 1_503), quantitative: split(10, 58) },
        ImpactSplit { qualitative: split(5, 14), quantitative: split(0, 0) },
    ];
    let classes: u64 = per_workbook.iter().map(|s| s.total().error_classes).sum();
    assert_eq!(classes, 109);
    assert_eq!(per_workbook.iter().map(|s| s.qualitative.error_classes).sum::<u64>(), 85);
    assert_eq!(per_workbook.iter().map(|s| s.quantitative.error_classes).sum::<u64>(), 24);
    assert_eq!(per_workbook.iter().map(|s| s.quantitative.errors).sum::<u64>(), 241);
    // the first workbook's rows sum to 267 errors against its 257 total, and
    // the qualitative errors to 1,601 against 1,591
    assert_eq!(per_workbook[0].total().errors, 267);
    assert_eq!(per_workbook.iter().map(|s| s.qualitative.errors).sum::<u64>(), 1_601);
}

#[test]
fn mismatched_splits_are_reported() {
    let stats = ErrorStatistics::inject(
        split(3, 5),
        ImpactSplit { qualitative: split(2, 4), quantitative: split(1, 1) },
        &[(Category::Other, split(3, 6))],
        10,
        4,
        20,
    );
    let issues = stats.consistency_issues();
    assert_eq!(issues.len(), 1);
    assert_eq!(issues[0].what, "category split");
}

#[test]
fn injected_metrics_render_as_tables() {
    let text = metrics_tables(&field_counts());
    assert!(text.contains("RAT-2001"));
    let total = text.lines().filter(|l| l.starts_with("Total")).nth(1).unwrap();
    for cell in ["192705", "31.37%", "60.27%", "39.73%", "5.1%", "19.6", "109", "3.03%"] {
        assert!(total.split_whitespace().any(|c| c == cell), "{cell} missing from `{total}`");
    }
}

fn seeded_errors() -> (Workbook, FindingStore) {
    // B1:B12 copy one formula; five of its inputs are missing
    let mut cells = Vec::new();
    for r in 1..=12 {
        if r % 2 == 0 || r == 1 || r == 12 {
            cells.push(format!(r#"{{"addr":"A{r}","content":"{r}"}}"#));
        }
        cells.push(format!(r#"{{"addr":"B{r}","content":"=A{r}*2"}}"#));
    }
    let doc = format!(r#"{{"workbook":"coalesce","sheets":[{{"name":"S","cells":[{}]}}]}}"#, cells.join(","));
    let wb = load_fgj(doc.as_bytes()).unwrap();
    let analysis = Analysis::new(wb.clone());
    let findings = analysis.findings(&DetectorConfig::default());
    (wb, FindingStore::with_findings(findings, 0).unwrap())
}

#[test]
fn copy_equivalent_errors_coalesce_into_one_class() {
    let (wb, mut store) = seeded_errors();
    let ids: Vec<String> = store.findings().iter().map(|f| f.id.clone()).collect();
    let cells: Vec<String> = store.findings().iter().map(|f| f.location.local()).collect();
    assert_eq!(cells, ["B3", "B5", "B7", "B9", "B11"]);
    for (i, id) in ids.iter().enumerate() {
        let impact = if i == 0 { Impact::Quantitative } else { Impact::Qualitative };
        store
            .record_verdict(id, Verdict::Confirm { impact, note: String::new() }, 1)
            .unwrap();
    }
    let h = partition(&wb);
    let stats = compute_error_statistics(&store, &h, &wb);
    assert_eq!(stats.total, split(1, 5));
    // the class follows its first record; each error keeps its own impact
    assert_eq!(stats.by_impact.quantitative, split(1, 1));
    assert_eq!(stats.by_impact.qualitative, split(0, 4));
    assert_eq!(stats.category(Category::ReferenceToEmptyCell), split(1, 5));
}

#[test]
fn reports_are_deterministic_and_carry_the_schema() {
    let (wb, store) = seeded_errors();
    let h = partition(&wb);
    let report = Report::build(&wb, &h, &store);
    for format in [ReportFormat::Json, ReportFormat::Text] {
        assert_eq!(emit_report(&report, format), emit_report(&Report::build(&wb, &h, &store), format));
    }
    let doc: Value = serde_json::from_str(&emit_report(&report, ReportFormat::Json)).unwrap();
    let keys: Vec<&str> = doc.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["error_statistics", "findings", "metrics", "sheets", "workbook"]);
    assert_eq!(doc["findings"].as_array().unwrap().len(), 5);
    assert_eq!(doc["metrics"]["ce_to_formula"]["display"], "8.3%");
}

#[test]
fn empty_workbook_reports_absent_ratios() {
    let wb = Workbook::new("empty");
    let h = partition(&wb);
    let report = Report::build(&wb, &h, &FindingStore::new());
    let doc: Value = serde_json::from_str(&emit_report(&report, ReportFormat::Json)).unwrap();
    assert!(doc["metrics"]["ce_to_formula"].is_null());
    assert!(doc["sheets"].as_array().unwrap().is_empty());
    let text = emit_report(&report, ReportFormat::Text);
    assert!(text.contains("Findings (0)"));
}

/// floor(x + 1/2) with x = num * scale * 10^d / den, written as one division.
fn half_up_oracle(num: u64, den: u64, scale: u64, d: u32) -> String {
    let unit = 10u128.pow(d);
    let q = (2 * u128::from(num) * u128::from(scale) * unit + u128::from(den)) / (2 * u128::from(den));
    if d == 0 {
        q.to_string()
    } else {
        let digits = format!("{q:0>width$}", width = d as usize + 1);
        let (int, frac) = digits.split_at(digits.len() - d as usize);
        format!("{int}.{frac}")
    }
}

proptest! {
    #[test]
    fn rounding_matches_the_oracle(num in 0u64..1_000_000, den in 1u64..1_000_000, d in 0u32..4) {
        let r = Ratio::new(num, den).unwrap();
        prop_assert_eq!(r.percent(d), half_up_oracle(num, den, 100, d));
        prop_assert_eq!(r.fixed(d), half_up_oracle(num, den, 1, d));
    }

    #[test]
    fn metric_invariants_hold((templates, placements, literals) in workbook_recipe(80)) {
        let wb = build_workbook(&templates, &placements, &literals);
        let h = partition(&wb);
        let m = compute_metrics(&wb, &h);
        for r in m.rows.iter().chain([&m.total]) {
            prop_assert_eq!(r.formulas + r.literals, r.occupied);
            if let (Some(f), Some(l)) = (r.formula_pct(), r.literal_pct()) {
                prop_assert_eq!(f.num + l.num, f.den);
                let shown: f64 = f.percent(1).parse::<f64>().unwrap() + l.percent(1).parse::<f64>().unwrap();
                prop_assert!((shown - 100.0).abs() <= 0.1 + 1e-9);
            }
            if let (Some(a), Some(b)) = (r.ce_to_formula(), r.avg_class_size()) {
                prop_assert_eq!(a.num * b.num, a.den * b.den);
            }
        }
        let sum = |f: fn(&CountRow) -> u64| m.rows.iter().map(f).sum::<u64>();
        prop_assert_eq!(sum(|r| r.cells), m.total.cells);
        prop_assert_eq!(sum(|r| r.occupied), m.total.occupied);
        prop_assert_eq!(sum(|r| r.formulas), m.total.formulas);
        prop_assert_eq!(sum(|r| r.literals), m.total.literals);
        // a class copied across sheets counts on each sheet it touches
        prop_assert!(sum(|r| r.ce_count) >= m.total.ce_count);
    }

    #[test]
    fn verdicts_keep_the_splits_consistent(seed in 0u64..40, verdicts in proptest::collection::vec(0u8..3, 0..40)) {
        let spec = sheetaudit_core::fixture::FixtureSpec::new(sheetaudit_core::fixture::FixtureKind::Mixed, seed);
        let (wb, _) = sheetaudit_core::fixture::generate(&spec).unwrap();
        let analysis = Analysis::new(wb);
        let mut store = FindingStore::with_findings(analysis.findings(&DetectorConfig::default()), 0).unwrap();
        let ids: Vec<String> = store.findings().iter().map(|f| f.id.clone()).collect();
        for (id, v) in ids.iter().zip(&verdicts) {
            let verdict = match v {
                0 => Verdict::Confirm { impact: Impact::Qualitative, note: String::new() },
                1 => Verdict::Confirm { impact: Impact::Quantitative, note: String::new() },
                _ => Verdict::Dismiss { note: String::new() },
            };
            store.record_verdict(id, verdict, 1).unwrap();
        }
        let stats = compute_error_statistics(&store, &analysis.hierarchy, &analysis.workbook);
        prop_assert!(stats.consistency_issues().is_empty());
        prop_assert_eq!(stats.total.errors, store.records().len() as u64);
        prop_assert_eq!(stats.category_total(), stats.total);
        prop_assert!(stats.total.errors >= stats.total.error_classes);
    }
}
