//! Property tests for the spec's structural invariants.

use chrono::NaiveDate;
use proptest::prelude::*;

use gexlab_core::config::{GreeksSource, GridSpec, TemplateKind, Thresholds};
use gexlab_core::gex_engine::compute_gex;
use gexlab_core::greeks::OptionKind;
use gexlab_core::market_data::{
    load_chain_file, write_chain_file, Calendar, ChainSnapshot, OptionContract,
};
use gexlab_core::obfuscator::{leak_audit, obfuscate};
use gexlab_core::pattern_rules::detect_all;
use gexlab_core::stats_validator::{wilson_interval, Z_95};
use gexlab_core::GexProfile;

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

prop_compose! {
    fn arb_contract(as_of: NaiveDate)(
        strike_frac in 0.85f64..1.15,
        dte in 1i64..90,
        is_call in any::<bool>(),
        oi in 0u64..5_000,
        vol in 0.08f64..0.45,
        bid in 0.0f64..5.0,
        spread in 0.0f64..0.5,
    ) -> OptionContract {
        OptionContract {
            strike: (500.0 * strike_frac * 100.0).round() / 100.0,
            expiry: as_of + chrono::Days::new(dte as u64),
            kind: if is_call { OptionKind::Call } else { OptionKind::Put },
            open_interest: oi,
            implied_vol: (vol * 1e4).round() / 1e4,
            gamma: None,
            bid: (bid * 100.0).round() / 100.0,
            ask: ((bid + spread) * 100.0).round() / 100.0,
        }
    }
}

prop_compose! {
    fn arb_snapshot()(
        contracts in prop::collection::vec(arb_contract(date(2024, 1, 16)), 1..12),
        spot_frac in 0.9f64..1.1,
    ) -> ChainSnapshot {
        ChainSnapshot {
            as_of: date(2024, 1, 16),
            ticker: "SPY".into(),
            spot: 500.0 * spot_frac,
            contracts,
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chain_file_round_trip(snapshot in arb_snapshot()) {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        write_chain_file(&p1, std::slice::from_ref(&snapshot)).unwrap();
        let loaded = load_chain_file(&p1).unwrap();
        write_chain_file(&p2, &loaded).unwrap();
        prop_assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let reloaded = load_chain_file(&p2).unwrap();
        prop_assert_eq!(loaded, reloaded);
    }

    #[test]
    fn net_gex_linear_in_oi(snapshot in arb_snapshot()) {
        let thresholds = Thresholds::default();
        let grid = GridSpec { points: 11, ..GridSpec::default() };
        let base = compute_gex(&snapshot, GreeksSource::Recompute, &thresholds, &grid, 0.0).unwrap();
        let mut doubled = snapshot.clone();
        for c in &mut doubled.contracts {
            c.open_interest *= 2;
        }
        let twice = compute_gex(&doubled, GreeksSource::Recompute, &thresholds, &grid, 0.0).unwrap();
        prop_assert_eq!(twice.net_gex, 2.0 * base.net_gex);
        prop_assert_eq!(twice.call_gex, 2.0 * base.call_gex);
        prop_assert_eq!(twice.put_gex, 2.0 * base.put_gex);
    }

    #[test]
    fn net_gex_sign_invariant_under_scaling(snapshot in arb_snapshot(), scale in 2u64..50) {
        let thresholds = Thresholds::default();
        let grid = GridSpec { points: 11, ..GridSpec::default() };
        let base = compute_gex(&snapshot, GreeksSource::Recompute, &thresholds, &grid, 0.0).unwrap();
        let mut scaled = snapshot.clone();
        for c in &mut scaled.contracts {
            c.open_interest *= scale;
        }
        let after = compute_gex(&scaled, GreeksSource::Recompute, &thresholds, &grid, 0.0).unwrap();
        if base.net_gex != 0.0 {
            prop_assert_eq!(after.net_gex.signum(), base.net_gex.signum());
        } else {
            prop_assert_eq!(after.net_gex, 0.0);
        }
    }

    #[test]
    fn rule_signals_deterministic_and_conjunctive(snapshot in arb_snapshot()) {
        let thresholds = Thresholds::default();
        let grid = GridSpec { points: 21, ..GridSpec::default() };
        let profile = compute_gex(&snapshot, GreeksSource::Recompute, &thresholds, &grid, 0.0).unwrap();
        let a = detect_all(&profile, &thresholds);
        let b = detect_all(&profile, &thresholds);
        prop_assert_eq!(&a, &b);
        for signal in &a {
            prop_assert_eq!(signal.triggered, signal.details.iter().all(|c| c.passed));
        }
    }

    #[test]
    fn obfuscation_preserves_structure_bit_exactly(
        snapshot in arb_snapshot(),
        window_len in 1usize..4,
    ) {
        let thresholds = Thresholds::default();
        let grid = GridSpec { points: 21, ..GridSpec::default() };
        let mut window: Vec<(NaiveDate, GexProfile)> = Vec::new();
        let mut day = snapshot.as_of;
        for _ in 0..window_len {
            let mut snap = snapshot.clone();
            snap.as_of = day;
            for c in &mut snap.contracts {
                if c.expiry <= day {
                    c.expiry = day + chrono::Days::new(1);
                }
            }
            let profile = compute_gex(&snap, GreeksSource::Recompute, &thresholds, &grid, 0.0).unwrap();
            window.push((day, profile));
            day = day + chrono::Days::new(1);
        }
        let (case, key) = obfuscate("SPY", &window, 1, TemplateKind::Unbiased, None, 42).unwrap();
        prop_assert_eq!(case.days.len(), window.len());
        for (i, (date_i, profile)) in window.iter().enumerate() {
            let d = &case.days[i];
            prop_assert_eq!(d.rel_day as usize, i);
            prop_assert_eq!(d.net_gex.to_bits(), profile.net_gex.to_bits());
            prop_assert_eq!(d.call_gex.to_bits(), profile.call_gex.to_bits());
            prop_assert_eq!(d.put_gex.to_bits(), profile.put_gex.to_bits());
            prop_assert_eq!(d.spot.to_bits(), profile.spot.to_bits());
            prop_assert_eq!(d.flip_point, profile.flip_point);
            prop_assert_eq!(d.call_conc, profile.call_gamma_concentration);
            prop_assert_eq!(d.top_oi_share, profile.top_strike_oi_share);
            prop_assert_eq!(key.dates[i], (i as u32, *date_i));
        }
        // serialized case never leaks, and the mapping is deterministic
        prop_assert!(leak_audit(&case.serialized()).clean());
        let (again, _) = obfuscate("SPY", &window, 1, TemplateKind::Unbiased, None, 42).unwrap();
        prop_assert_eq!(case, again);
    }

    #[test]
    fn wilson_interval_brackets_the_point(s in 0u64..100, extra in 1u64..400) {
        let n = s + extra;
        let ci = wilson_interval(s, n, Z_95);
        prop_assert!(ci.ci_low <= ci.rate + 1e-12);
        prop_assert!(ci.rate <= ci.ci_high + 1e-12);
        prop_assert!(ci.ci_low >= 0.0 && ci.ci_high <= 1.0);
    }

    #[test]
    fn forward_extremes_bracket_t3(path in prop::collection::vec(-0.03f64..0.03, 8)) {
        use gexlab_core::config::OutcomeConfig;
        use gexlab_core::llm_harness::{classify, DetectionResult, Horizon};
        use gexlab_core::market_data::UnderlyingBar;
        use gexlab_core::outcome_engine::compute_outcomes;
        use gexlab_core::pattern_rules::PatternKind;
        use gexlab_core::Regime;

        let base = date(2024, 3, 1);
        let mut close = 100.0f64;
        let bars: Vec<UnderlyingBar> = path
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let open = close;
                close *= 1.0 + r;
                UnderlyingBar {
                    date: base + chrono::Days::new(i as u64),
                    open,
                    high: open.max(close) * 1.001,
                    low: open.min(close) * 0.999,
                    close,
                }
            })
            .collect();
        let detection = DetectionResult {
            case_id: "p".into(),
            detected: true,
            pattern: Some(PatternKind::GammaPositioning),
            who: "dealers".into(),
            whom: "traders".into(),
            what: "hedging".into(),
            confidence: 80,
            horizon: Horizon::T1,
            classification: classify(80),
        };
        let profile = GexProfile {
            as_of: bars[0].date,
            net_gex: -5e9,
            call_gex: 1e9,
            put_gex: -6e9,
            spot: bars[0].close,
            flip_point: None,
            call_gamma_concentration: Some(0.2),
            top_strike_oi_share: None,
            top_strike: None,
            per_strike_gex: vec![],
            regime: Regime::Negative,
            min_dte: 1,
        };
        let record = compute_outcomes(
            &detection,
            &bars,
            bars[0].date,
            &profile,
            &OutcomeConfig::default(),
        )
        .unwrap();
        prop_assert!(record.max_gain_3d >= record.t3_return - 1e-12);
        prop_assert!(record.t3_return >= record.max_drawdown_3d - 1e-12);
        prop_assert!(record.max_gain_3d >= 0.0 && record.max_drawdown_3d <= 0.0);
    }

    #[test]
    fn calendar_has_each_snapshot_date_once(days in prop::collection::btree_set(0u64..500, 1..60)) {
        let base = date(2024, 1, 2);
        let snapshots: Vec<ChainSnapshot> = days
            .iter()
            .map(|&offset| ChainSnapshot {
                as_of: base + chrono::Days::new(offset),
                ticker: "SPY".into(),
                spot: 500.0,
                contracts: vec![],
            })
            .collect();
        let calendar = Calendar::from_snapshots(&snapshots, 253);
        prop_assert_eq!(calendar.len(), days.len());
        for s in &snapshots {
            prop_assert_eq!(calendar.dates.iter().filter(|d| **d == s.as_of).count(), 1);
        }
    }
}
