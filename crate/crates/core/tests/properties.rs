use cellvault_core::alert::{classify_pattern, evaluate, AlertRule, PatternLabel, RuleKind};
use cellvault_core::analytics::{
    covariance, formula_volatility, retirement_report, series_stats, Verdict,
};
use cellvault_core::audit::{parse_chain, verify_manifest, AuditEntry, AuditEvent, ChangeManifest};
use cellvault_core::diff::{
    classify, diff, summarize, ChangeKind, ChangeRecord, Policy, WatchConfig,
};
use cellvault_core::ingest::ingest_json;
use cellvault_core::model::{
    canonicalize, format_a1, parse_a1, snapshot_hash, CellAddress, CellValue, SnapshotHash,
    WorkbookSnapshot,
};
use cellvault_core::store::{CommitMeta, Store};
use cellvault_testkit::gen::{self, Shape};
use cellvault_testkit::{oracle, rng};
use proptest::prelude::*;

fn pair(seed: u64) -> (WorkbookSnapshot, WorkbookSnapshot) {
    let shape = Shape::default();
    let mut r = rng(seed);
    let a = gen::snapshot(&mut r, &shape);
    let b = gen::mutate(&mut r, &a, &shape);
    (a, b)
}

/// Replays a change set onto `old`.
fn apply(old: &WorkbookSnapshot, changes: &[ChangeRecord]) -> WorkbookSnapshot {
    let mut wb = old.clone();
    for c in changes {
        match (c.kind, &c.new) {
            (ChangeKind::SheetRemoved, _) => {
                wb.remove_sheet(c.address.sheet());
            }
            (ChangeKind::SheetAdded, None) => {
                wb.sheet_mut(c.address.sheet());
            }
            (_, Some(cell)) => wb.set(&c.address, cell.clone()),
            (_, None) => {
                wb.sheet_mut(c.address.sheet())
                    .remove(c.address.row(), c.address.col());
            }
        }
    }
    wb
}

fn nums(xs: &[i64]) -> Vec<CellValue> {
    xs.iter()
        .map(|&x| CellValue::number(x as f64).unwrap())
        .collect()
}

proptest! {
    #[test]
    fn a1_roundtrip(col in 1u32..=16384, row in 1u32..=1_048_576) {
        prop_assert_eq!(parse_a1(&format_a1(col, row)).unwrap(), (col, row));
    }

    #[test]
    fn canonical_json_roundtrip(seed in any::<u64>()) {
        let wb = gen::snapshot(&mut rng(seed), &Shape::default());
        let bytes = canonicalize(&wb);
        prop_assert_eq!(&ingest_json(&bytes).unwrap().snapshot, &wb);
        prop_assert_eq!(SnapshotHash::of_bytes(&bytes), snapshot_hash(&wb));
    }

    #[test]
    fn canonical_form_ignores_insertion_order(seed in any::<u64>()) {
        let wb = gen::snapshot(&mut rng(seed), &Shape::default());
        let mut cells: Vec<(CellAddress, _)> = Vec::new();
        for (name, sheet) in wb.sheets() {
            for ((r, c), cell) in sheet.iter() {
                cells.push((CellAddress::new(name, r, c).unwrap(), cell.clone()));
            }
        }
        cells.reverse();
        let mut rebuilt = WorkbookSnapshot::new();
        for (name, _) in wb.sheets() {
            rebuilt.sheet_mut(name);
        }
        for (a, cell) in cells {
            rebuilt.set(&a, cell);
        }
        prop_assert_eq!(canonicalize(&rebuilt), canonicalize(&wb));
    }

    #[test]
    fn diff_matches_grid_oracle(seed in any::<u64>()) {
        let (a, b) = pair(seed);
        prop_assert_eq!(diff(&a, &b), oracle::diff(&a, &b));
    }

    #[test]
    fn diff_of_self_is_empty(seed in any::<u64>()) {
        let (a, _) = pair(seed);
        prop_assert!(diff(&a, &a).is_empty());
    }

    #[test]
    fn diff_is_antisymmetric(seed in any::<u64>()) {
        let (a, b) = pair(seed);
        let forward = diff(&a, &b);
        let backward = diff(&b, &a);
        prop_assert_eq!(forward.len(), backward.len());
        for (f, r) in forward.iter().zip(&backward) {
            prop_assert_eq!(&f.address, &r.address);
            prop_assert_eq!(f.kind.inverse(), r.kind);
            prop_assert_eq!(&f.old, &r.new);
            prop_assert_eq!(&f.new, &r.old);
        }
    }

    #[test]
    fn diff_replays_to_target(seed in any::<u64>()) {
        let (a, b) = pair(seed);
        prop_assert_eq!(apply(&a, &diff(&a, &b)), b);
    }

    #[test]
    fn cell_level_records_have_matching_sides(seed in any::<u64>()) {
        let (a, b) = pair(seed);
        for r in diff(&a, &b) {
            let expect_old = matches!(r.kind, ChangeKind::CellRemoved | ChangeKind::SheetRemoved
                | ChangeKind::ValueChanged | ChangeKind::FormulaChanged | ChangeKind::ValueAndFormulaChanged);
            let expect_new = matches!(r.kind, ChangeKind::CellAdded | ChangeKind::SheetAdded
                | ChangeKind::ValueChanged | ChangeKind::FormulaChanged | ChangeKind::ValueAndFormulaChanged);
            if r.is_cell_level() {
                prop_assert_eq!(r.old.is_some(), expect_old);
                prop_assert_eq!(r.new.is_some(), expect_new);
            } else {
                prop_assert!(r.kind.is_structural());
            }
        }
    }

    #[test]
    fn classification_and_summary(seed in any::<u64>(), top in 1u32..10, bottom in 10u32..20) {
        let (a, b) = pair(seed);
        let config = WatchConfig::new(vec![format!("*!A{top}:J{bottom}").parse().unwrap()]);
        let changes = classify(diff(&a, &b), &config);
        for r in &changes {
            let normal = r.kind == ChangeKind::ValueChanged
                && config.input_regions[0].contains(&r.address)
                && r.old.as_ref().unwrap().formula.is_none()
                && r.new.as_ref().unwrap().formula.is_none();
            prop_assert_eq!(r.policy, Some(if normal { Policy::Normal } else { Policy::Exceptional }));
        }
        let s = summarize(&changes);
        prop_assert_eq!(s.by_kind.values().sum::<usize>(), s.total);
        prop_assert_eq!(s.by_sheet.values().sum::<usize>(), s.total);
        prop_assert_eq!(s.exceptional_count, changes.iter().filter(|r| r.policy == Some(Policy::Exceptional)).count());
    }

    #[test]
    fn pattern_matches_oracle(values in prop::collection::vec(-3i64..4, 2..9), blank in any::<bool>()) {
        let mut window = nums(&values);
        if blank && window.len() > 2 {
            window[1] = CellValue::Empty;
        }
        prop_assert_eq!(classify_pattern(&window).unwrap(), oracle::pattern(&window));
    }

    #[test]
    fn pattern_ignores_positive_affine_maps(values in prop::collection::vec(-50i64..50, 2..9),
                                             scale in 0.001f64..1000.0, shift in -1000i64..1000) {
        let base = classify_pattern(&nums(&values)).unwrap();
        let mapped: Vec<CellValue> = values
            .iter()
            .map(|&v| CellValue::number(v as f64 * scale).unwrap())
            .collect();
        prop_assert_eq!(classify_pattern(&mapped).unwrap(), base);
        let shifted: Vec<i64> = values.iter().map(|v| v + shift).collect();
        prop_assert_eq!(classify_pattern(&nums(&shifted)).unwrap(), base);
    }

    #[test]
    fn crossing_rules_follow_their_definitions(old in -100i64..100, new in -100i64..100, t in -100i64..100, d in 1i64..50) {
        let (o, n, t, d) = (old as f64, new as f64, t as f64, d as f64);
        let a1: CellAddress = "S!A1".parse().unwrap();
        let snap = |x: f64| {
            let mut wb = WorkbookSnapshot::new();
            wb.set(&a1, cellvault_core::model::Cell::value(CellValue::number(x).unwrap()));
            wb
        };
        let (p, q) = (snap(o), snap(n));
        let cases = [
            (RuleKind::ThresholdUp { threshold: t }, o < t && t <= n),
            (RuleKind::ThresholdDown { threshold: t }, o > t && t >= n),
            (RuleKind::DeltaAbs { delta: d }, (n - o).abs() > d),
            (RuleKind::RangeBreach { lo: t, hi: t + d }, (t..=t + d).contains(&o) && !(t..=t + d).contains(&n)),
        ];
        for (kind, expected) in cases {
            let rule = AlertRule::new("r", "S!A1".parse().unwrap(), kind);
            let history = vec![p.clone()];
            let firings = evaluate(std::slice::from_ref(&rule), Some(&p), &q, "c", history.as_slice()).unwrap();
            prop_assert_eq!(firings.len(), usize::from(expected));
            let again = evaluate(std::slice::from_ref(&rule), Some(&p), &q, "c", history.as_slice()).unwrap();
            prop_assert_eq!(firings, again);
        }
    }

    #[test]
    fn unchanged_snapshot_never_fires(seed in any::<u64>(), t in -50i64..50) {
        let (a, _) = pair(seed);
        let rules = vec![
            AlertRule::new("up", "*!A1:T20".parse().unwrap(), RuleKind::ThresholdUp { threshold: t as f64 }),
            AlertRule::new("down", "*!A1:T20".parse().unwrap(), RuleKind::ThresholdDown { threshold: t as f64 }),
            AlertRule::new("delta", "*!A1:T20".parse().unwrap(), RuleKind::DeltaAbs { delta: 0.5 }),
            AlertRule::new("range", "*!A1:T20".parse().unwrap(), RuleKind::RangeBreach { lo: -1.0, hi: 1.0 }),
            AlertRule::new("formula", "*!A1:T20".parse().unwrap(), RuleKind::FormulaChanged),
        ];
        let history = vec![a.clone()];
        prop_assert!(evaluate(&rules, Some(&a), &a, "c", history.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn stats_match_exact_oracle(seed in any::<u64>(), len in 2usize..=50) {
        let xs = gen::series(&mut rng(seed), len);
        let s = series_stats(&xs).unwrap();
        let o = oracle::stats(&xs);
        prop_assert!((s.mean - o.mean).abs() <= 1e-9, "mean {} vs {}", s.mean, o.mean);
        prop_assert!((s.variance - o.variance).abs() <= 1e-9, "variance {} vs {}", s.variance, o.variance);
        prop_assert!((s.slope - o.slope).abs() <= 1e-9, "slope {} vs {}", s.slope, o.slope);
        prop_assert!(s.variance >= 0.0);
    }

    #[test]
    fn covariance_matches_exact_oracle(seed in any::<u64>(), len in 2usize..=50) {
        let mut r = rng(seed);
        let a = gen::series(&mut r, len);
        let b = gen::series(&mut r, len);
        let c = covariance(&a, &b).unwrap();
        prop_assert!((c - oracle::covariance(&a, &b)).abs() <= 1e-9);
        prop_assert_eq!(covariance(&a, &a).unwrap(), series_stats(&a).unwrap().variance);
        prop_assert_eq!(covariance(&a, &vec![3.5; len]).unwrap(), 0.0);
    }

    #[test]
    fn slope_of_a_line(a in -1e3f64..1e3, b in -1e3f64..1e3, len in 2usize..=50) {
        let xs: Vec<f64> = (0..len).map(|i| a + b * i as f64).collect();
        prop_assert!((series_stats(&xs).unwrap().slope - b).abs() <= 1e-9);
    }

    #[test]
    fn volatility_is_monotone(flags in prop::collection::vec(any::<bool>(), 0..30), window in 1usize..15, pick in any::<prop::sample::Index>()) {
        let before = formula_volatility(&flags, window).unwrap();
        prop_assert!((0.0..=1.0).contains(&before));
        if flags.is_empty() {
            return Ok(());
        }
        let tail_start = flags.len().saturating_sub(window);
        let i = tail_start + pick.index(flags.len() - tail_start);
        let mut more = flags.clone();
        more[i] = true;
        prop_assert!(formula_volatility(&more, window).unwrap() >= before);
    }

    #[test]
    fn ready_is_stable_under_quiet_commits(flags in prop::collection::vec(any::<bool>(), 0..30), window in 1usize..15, extra in 0usize..10) {
        let r = retirement_report("w", window, &flags).unwrap();
        if r.verdict == Verdict::Ready {
            let mut longer = flags.clone();
            longer.extend(std::iter::repeat_n(false, extra));
            prop_assert_eq!(retirement_report("w", window, &longer).unwrap().verdict, Verdict::Ready);
        }
        let considered = window.min(flags.len());
        if considered > 0 {
            prop_assert_eq!(r.volatility, r.formula_change_commits as f64 / considered as f64);
        }
        prop_assert_eq!(r.verdict == Verdict::InsufficientHistory, flags.len() < window);
    }

    #[test]
    fn manifest_partition(seed in any::<u64>(), top in 1u32..20, bottom in 1u32..20) {
        let (a, b) = pair(seed);
        let changes = diff(&a, &b);
        let (top, bottom) = (top.min(bottom), top.max(bottom));
        let manifest = ChangeManifest {
            manifest_id: "m".into(),
            approver: "x".into(),
            created: "2026-01-01T00:00:00Z".into(),
            required: vec![CellAddress::new("S", top, 1).unwrap()],
            allowed: vec![format!("S!A{top}:T{bottom}").parse().unwrap(), format!("Data!A{top}:C{bottom}").parse().unwrap()],
            applies_to: "w".into(),
        };
        let report = verify_manifest(&changes, &manifest).unwrap();
        prop_assert_eq!(report.counts.allowed + report.counts.violations, changes.len());
        prop_assert!(report.violations.iter().all(|r| !manifest.allows(&r.address)));
        prop_assert_eq!(report.compliant, report.violations.is_empty() && report.unfulfilled.is_empty());
        prop_assert_eq!(verify_manifest(&changes, &manifest).unwrap(), report);
    }

    #[test]
    fn audit_chain_detects_edits_before_the_head(n in 2usize..8, victim in any::<prop::sample::Index>()) {
        let mut lines: Vec<String> = Vec::new();
        for i in 0..n {
            let event = AuditEvent {
                actor: format!("a{}", i % 3),
                action: "commit".into(),
                target: format!("c{i}"),
                timestamp: "2026-01-01T00:00:00.000Z".into(),
            };
            lines.push(AuditEntry::chained(event, i as u64 + 1, lines.last().map(String::as_str)).to_line());
        }
        prop_assert_eq!(parse_chain(lines.iter().map(String::as_str)).unwrap().len(), n);
        // The newest line has no successor holding its digest.
        let i = victim.index(n - 1);
        lines[i] = lines[i].replace("\"c", "\"x");
        prop_assert!(parse_chain(lines.iter().map(String::as_str)).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn store_lineage_properties(seed in any::<u64>(), len in 2usize..6) {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::init(dir.path()).unwrap();
        let shape = Shape::default();
        let mut r = rng(seed);
        let mut snaps = vec![gen::snapshot(&mut r, &shape)];
        while snaps.len() < len {
            let next = gen::mutate(&mut r, snaps.last().unwrap(), &shape);
            snaps.push(next);
        }
        for (i, s) in snaps.iter().enumerate() {
            store.commit("w", s, CommitMeta::new(format!("u{i}"))).unwrap();
        }
        let log = store.log("w").unwrap();
        prop_assert_eq!(log.len(), len);
        for (record, snap) in log.iter().zip(&snaps) {
            let bytes = store.restore_bytes("w", &record.commit_id).unwrap();
            prop_assert_eq!(SnapshotHash::of_bytes(&bytes), record.snapshot.clone());
            prop_assert_eq!(&store.get_snapshot(&record.snapshot).unwrap(), snap);
        }
        // History flags agree with per-transition diffs, cell by cell.
        for w in 0..len - 1 {
            for change in diff(&snaps[w], &snaps[w + 1]).iter().filter(|c| c.is_cell_level()) {
                let h = store.cell_history("w", &change.address, len).unwrap();
                prop_assert!(h.points[w + 1].changed);
            }
        }
        let a1 = CellAddress::new("S", 1, 1).unwrap();
        let h = store.cell_history("w", &a1, len).unwrap();
        for w in 0..len - 1 {
            let touched = diff(&snaps[w], &snaps[w + 1]).iter().any(|c| c.address == a1 && c.is_cell_level());
            prop_assert_eq!(h.points[w + 1].changed, touched);
        }
        prop_assert_eq!(store.verify_audit_chain("w").unwrap(), len);
    }

    #[test]
    fn repeated_commits_do_not_grow_objects(seed in any::<u64>(), n in 2usize..5) {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::init(dir.path()).unwrap();
        let wb = gen::snapshot(&mut rng(seed), &Shape::default());
        store.commit("w", &wb, CommitMeta::new("a")).unwrap();
        let once = store.object_stats().unwrap();
        for _ in 1..n {
            prop_assert_eq!(store.commit("w", &wb, CommitMeta::new("a")).unwrap().new_objects, 0);
        }
        prop_assert_eq!(store.object_stats().unwrap(), once);
        prop_assert_eq!(store.log("w").unwrap().len(), n);
    }
}

#[test]
fn every_small_window_gets_exactly_one_label() {
    let mut seen = std::collections::BTreeSet::new();
    for code in 0..256u32 {
        let values: Vec<i64> = (0..4).map(|i| ((code >> (2 * i)) & 3) as i64).collect();
        let window = nums(&values);
        let label = classify_pattern(&window).unwrap();
        assert_eq!(label, oracle::pattern(&window), "{values:?}");
        seen.insert(format!("{label:?}"));
    }
    assert_eq!(seen.len(), 6, "{seen:?}");
    let labels = [
        [40, 40, 40, 50],
        [20, 30, 40, 50],
        [40, 49, 40, 50],
        [49, 49, 40, 50],
    ]
    .map(|w| classify_pattern(&nums(&w)).unwrap());
    assert_eq!(
        labels,
        [
            PatternLabel::Step,
            PatternLabel::Trend,
            PatternLabel::Oscillation,
            PatternLabel::Reversal
        ]
    );
}
