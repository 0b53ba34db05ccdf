//! Deterministic mock agent mirroring the rule detectors. The harness hands
//! it per-case rule signals through provenance; no real model ever sees
//! those.

use std::collections::BTreeMap;

use super::{classify, Agent, AgentError, AgentRequest, DetectionResult, Horizon};
use crate::pattern_rules::RuleSignal;

/// Fixed mock confidence for any triggered signal.
pub const MOCK_CONFIDENCE: u8 = 80;

/// The mock contract: first triggered pattern in enum order wins, confidence
/// 80; no trigger means a null detection at confidence 0.
pub fn mock_detection(case_id: &str, signals: &[RuleSignal]) -> DetectionResult {
    let mut triggered: Vec<&RuleSignal> = signals.iter().filter(|s| s.triggered).collect();
    triggered.sort_by_key(|s| s.kind);
    match triggered.first() {
        Some(signal) => DetectionResult {
            case_id: case_id.to_string(),
            detected: true,
            pattern: Some(signal.kind),
            who: "dealers with negative gamma exposure".to_string(),
            whom: "directional traders".to_string(),
            what: "forced pro-cyclical hedging amplifying moves".to_string(),
            confidence: MOCK_CONFIDENCE,
            horizon: Horizon::T1,
            classification: classify(MOCK_CONFIDENCE),
        },
        None => DetectionResult {
            case_id: case_id.to_string(),
            detected: false,
            pattern: None,
            who: String::new(),
            whom: String::new(),
            what: String::new(),
            confidence: 0,
            horizon: Horizon::T1,
            classification: classify(0),
        },
    }
}

/// Emits the wire-format JSON the parser expects, so mock runs exercise the
/// same completion-parsing path as live runs.
pub struct MockAgent {
    signals_by_case: BTreeMap<String, Vec<RuleSignal>>,
}

impl MockAgent {
    pub fn new(signals_by_case: BTreeMap<String, Vec<RuleSignal>>) -> Self {
        Self { signals_by_case }
    }
}

impl Agent for MockAgent {
    fn complete(&self, request: &AgentRequest) -> Result<String, AgentError> {
        let entries: Vec<serde_json::Value> = request
            .case_ids
            .iter()
            .map(|case_id| {
                let signals = self
                    .signals_by_case
                    .get(case_id)
                    .map(|v| v.as_slice())
                    .unwrap_or(&[]);
                let d = mock_detection(case_id, signals);
                serde_json::json!({
                    "case_id": d.case_id,
                    "detected": d.detected,
                    "pattern": d.pattern.map(|p| p.name()),
                    "who": d.who,
                    "whom": d.whom,
                    "what": d.what,
                    "confidence": d.confidence,
                    "horizon": match d.horizon {
                        Horizon::T1 => "T+1",
                        Horizon::T2 => "T+2",
                        Horizon::T3 => "T+3",
                    },
                })
            })
            .collect();
        Ok(serde_json::json!({ "detections": entries }).to_string())
    }

    fn name(&self) -> &str {
        "mock"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Thresholds;
    use crate::gex_engine::{GexProfile, Regime};
    use crate::llm_harness::Classification;
    use crate::pattern_rules::{detect_all, PatternKind};
    use chrono::NaiveDate;

    fn profile_triggering_gp() -> GexProfile {
        GexProfile {
            as_of: NaiveDate::from_ymd_opt(2024, 1, 16).unwrap(),
            net_gex: -6e9,
            call_gex: 1.5e9,
            put_gex: -7.5e9,
            spot: 500.0,
            flip_point: Some(503.0),
            call_gamma_concentration: Some(0.2),
            top_strike_oi_share: Some(0.5),
            top_strike: Some(494.0),
            per_strike_gex: vec![],
            regime: Regime::Negative,
            min_dte: 1,
        }
    }

    #[test]
    fn triggered_gamma_positioning_yields_mechanical_detection() {
        let signals = detect_all(&profile_triggering_gp(), &Thresholds::default());
        let d = mock_detection("c1", &signals);
        assert!(d.detected);
        assert_eq!(d.pattern, Some(PatternKind::GammaPositioning));
        assert_eq!(d.confidence, 80);
        assert!(d.who.contains("dealers"));
        assert_eq!(d.classification, Classification::Mechanical);
        assert_eq!(d.horizon, Horizon::T1);
    }

    #[test]
    fn zero_dte_signal_maps_to_zero_dte_pattern() {
        let mut p = profile_triggering_gp();
        p.flip_point = None; // kill gamma positioning
        p.min_dte = 0;
        p.net_gex = -4e9;
        p.call_gamma_concentration = Some(0.1);
        let signals = detect_all(&p, &Thresholds::default());
        let d = mock_detection("c1", &signals);
        assert_eq!(d.pattern, Some(PatternKind::ZeroDteHedging));
        assert_eq!(d.confidence, 80);
    }

    #[test]
    fn no_signals_is_a_null_detection() {
        let d = mock_detection("c1", &[]);
        assert!(!d.detected);
        assert_eq!(d.confidence, 0);
        assert_eq!(d.pattern, None);
    }

    #[test]
    fn two_triggers_tie_break_by_enum_order() {
        let mut p = profile_triggering_gp();
        p.top_strike_oi_share = Some(0.9);
        p.top_strike = Some(500.5);
        p.min_dte = 1;
        let signals = detect_all(&p, &Thresholds::default());
        assert!(signals.iter().filter(|s| s.triggered).count() >= 2);
        let d = mock_detection("c1", &signals);
        assert_eq!(d.pattern, Some(PatternKind::GammaPositioning));
    }
}
