use std::collections::BTreeSet;

use sheetaudit_core::areas::{detect_all, Category, DetectorConfig};
use sheetaudit_core::equivalence::partition;
use sheetaudit_core::fixture::{generate, FixtureKind, FixtureSpec};
use sheetaudit_core::grid::CellAddress;

type Located = BTreeSet<(CellAddress, Category)>;

/// (planted, detected)
fn found(kind: FixtureKind, seed: u64) -> (Located, Located) {
    let (wb, gt) = generate(&FixtureSpec::new(kind, seed)).unwrap();
    let h = partition(&wb);
    let got = detect_all(&h, &wb, &DetectorConfig::default())
        .into_iter()
        .map(|f| (f.location, f.category))
        .collect();
    (gt.expected_findings(), got)
}

#[test]
fn seeded_anomalies_are_recalled() {
    for kind in [FixtureKind::Interrupted, FixtureKind::EmptyRef, FixtureKind::CopiedTooFar, FixtureKind::Mixed] {
        for seed in 0..10 {
            let (expected, got) = found(kind, seed);
            let missed: Vec<_> = expected.difference(&got).collect();
            let extra: Vec<_> = got.difference(&expected).collect();
            assert!(missed.is_empty(), "{kind} seed {seed}: missed {missed:?}");
            assert!(extra.is_empty(), "{kind} seed {seed}: unexpected {extra:?}");
        }
    }
}

#[test]
fn regular_fixture_is_clean() {
    for seed in 0..10 {
        let (expected, got) = found(FixtureKind::Regular, seed);
        assert!(expected.is_empty());
        assert!(got.is_empty(), "seed {seed}: {got:?}");
    }
}
