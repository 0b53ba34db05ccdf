//! Deterministic rule detectors for the three dealer-constraint patterns.
//! These drive the biased-prompt hints and the mock agent.
//!
//! All inequalities are strict. "Gamma concentration" criteria are read as
//! dominance of either side (max of call share and put share): a chain-derived
//! profile with deeply negative net GEX is necessarily put-dominant, so a
//! call-share-only reading could never coexist with the negative-GEX
//! criterion.

use serde::{Deserialize, Serialize};

use crate::config::Thresholds;
use crate::gex_engine::GexProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    GammaPositioning,
    StockPinning,
    ZeroDteHedging,
}

impl PatternKind {
    pub const ALL: [PatternKind; 3] = [
        PatternKind::GammaPositioning,
        PatternKind::StockPinning,
        PatternKind::ZeroDteHedging,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PatternKind::GammaPositioning => "gamma_positioning",
            PatternKind::StockPinning => "stock_pinning",
            PatternKind::ZeroDteHedging => "zero_dte_hedging",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gamma_positioning" => Some(PatternKind::GammaPositioning),
            "stock_pinning" => Some(PatternKind::StockPinning),
            "zero_dte_hedging" => Some(PatternKind::ZeroDteHedging),
            _ => None,
        }
    }
}

/// One threshold comparison inside a rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionCheck {
    pub criterion: String,
    /// Observed value; absent when the prerequisite field is missing.
    pub value: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
}

impl CriterionCheck {
    fn new(criterion: &str, value: Option<f64>, threshold: f64, passed: bool) -> Self {
        Self {
            criterion: criterion.to_string(),
            value,
            threshold,
            passed,
        }
    }
}

/// Outcome of one rule over one profile; `triggered` is the conjunction of
/// every criterion flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSignal {
    pub kind: PatternKind,
    pub triggered: bool,
    pub details: Vec<CriterionCheck>,
}

impl RuleSignal {
    fn from_checks(kind: PatternKind, details: Vec<CriterionCheck>) -> Self {
        let triggered = details.iter().all(|c| c.passed);
        Self {
            kind,
            triggered,
            details,
        }
    }
}

/// Dominant-side gamma concentration: max(call share, put share).
fn dominance(call_conc: Option<f64>) -> Option<f64> {
    call_conc.map(|c| c.max(1.0 - c))
}

/// Pattern 1: deeply negative net GEX with spot near the flip point and a
/// dominant gamma side.
pub fn detect_gamma_positioning(profile: &GexProfile, t: &Thresholds) -> RuleSignal {
    let net_ok = profile.net_gex < t.gp_net_gex;
    let flip_prox = profile.flip_point.map(|f| (profile.spot / f - 1.0).abs());
    let flip_ok = flip_prox.map(|p| p < t.gp_flip_proximity).unwrap_or(false);
    let dom = dominance(profile.call_gamma_concentration);
    let dom_ok = dom.map(|d| d > t.gp_concentration).unwrap_or(false);
    RuleSignal::from_checks(
        PatternKind::GammaPositioning,
        vec![
            CriterionCheck::new("net_gex_below", Some(profile.net_gex), t.gp_net_gex, net_ok),
            CriterionCheck::new("flip_proximity", flip_prox, t.gp_flip_proximity, flip_ok),
            CriterionCheck::new("gamma_concentration", dom, t.gp_concentration, dom_ok),
        ],
    )
}

/// Pattern 2: near-expiry OI stacked on one strike with spot pinned to it.
pub fn detect_stock_pinning(profile: &GexProfile, t: &Thresholds) -> RuleSignal {
    let share_ok = profile
        .top_strike_oi_share
        .map(|s| s > t.pin_oi_share)
        .unwrap_or(false);
    let strike_prox = profile
        .top_strike
        .map(|k| (profile.spot / k - 1.0).abs());
    let prox_ok = strike_prox
        .map(|p| p < t.pin_strike_proximity)
        .unwrap_or(false);
    let dte_ok = profile.min_dte < t.pin_max_dte;
    RuleSignal::from_checks(
        PatternKind::StockPinning,
        vec![
            CriterionCheck::new(
                "top_strike_oi_share",
                profile.top_strike_oi_share,
                t.pin_oi_share,
                share_ok,
            ),
            CriterionCheck::new(
                "strike_proximity",
                strike_prox,
                t.pin_strike_proximity,
                prox_ok,
            ),
            CriterionCheck::new(
                "min_dte",
                Some(profile.min_dte as f64),
                t.pin_max_dte as f64,
                dte_ok,
            ),
        ],
    )
}

/// Pattern 3: same-day expiry with outsized GEX magnitude and one-sided gamma.
pub fn detect_0dte(profile: &GexProfile, t: &Thresholds) -> RuleSignal {
    let dte_ok = profile.min_dte == 0;
    let magnitude = profile.net_gex.abs();
    let mag_ok = magnitude > t.zdte_gex_magnitude;
    let dom = dominance(profile.call_gamma_concentration);
    let dom_ok = dom.map(|d| d > t.zdte_concentration).unwrap_or(false);
    RuleSignal::from_checks(
        PatternKind::ZeroDteHedging,
        vec![
            CriterionCheck::new("min_dte_zero", Some(profile.min_dte as f64), 0.0, dte_ok),
            CriterionCheck::new(
                "gex_magnitude",
                Some(magnitude),
                t.zdte_gex_magnitude,
                mag_ok,
            ),
            CriterionCheck::new(
                "gamma_concentration",
                dom,
                t.zdte_concentration,
                dom_ok,
            ),
        ],
    )
}

/// All three detectors in enum order.
pub fn detect_all(profile: &GexProfile, t: &Thresholds) -> Vec<RuleSignal> {
    vec![
        detect_gamma_positioning(profile, t),
        detect_stock_pinning(profile, t),
        detect_0dte(profile, t),
    ]
}
