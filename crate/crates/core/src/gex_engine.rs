//! Dealer dollar gamma exposure: per-strike aggregation, flip point,
//! concentration metrics, and regime classification.
//!
//! Per-contract dollar GEX is gamma * OI * 100 * spot^2; calls enter
//! positively, puts negatively. Summation is sequential in input order so a
//! given chain always reduces to bit-identical totals.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{GreeksSource, GridSpec, Thresholds};
use crate::greeks::{bs_gamma, OptionKind, PricingInputs};
use crate::market_data::ChainSnapshot;

/// Calendar days / 365, the year fraction used for recomputed Greeks.
pub const DAYS_PER_YEAR: f64 = 365.0;

#[derive(Debug, Error)]
pub enum GexError {
    #[error("snapshot {date} has no contracts")]
    EmptyChain { date: NaiveDate },
    #[error("vendor greeks requested but contract {strike} {expiry} has no gamma")]
    MissingGamma { strike: f64, expiry: NaiveDate },
    #[error("snapshot {date} has no attached spot (attach_spots must run first)")]
    MissingSpot { date: NaiveDate },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Negative,
    Neutral,
    Positive,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Negative => "NEGATIVE_GAMMA",
            Regime::Neutral => "NEUTRAL_GAMMA",
            Regime::Positive => "POSITIVE_GAMMA",
        }
    }

    pub fn classify(net_gex: f64, thresholds: &Thresholds) -> Self {
        if net_gex < thresholds.regime_negative {
            Regime::Negative
        } else if net_gex > thresholds.regime_positive {
            Regime::Positive
        } else {
            Regime::Neutral
        }
    }
}

/// Derived dollar-gamma structure for one trading day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GexProfile {
    pub as_of: NaiveDate,
    /// Signed dollar gamma, calls minus puts.
    pub net_gex: f64,
    /// Call-side dollar gamma, >= 0.
    pub call_gex: f64,
    /// Put-side dollar gamma, <= 0.
    pub put_gex: f64,
    pub spot: f64,
    /// Hypothetical spot where net GEX changes sign; absent when it never does.
    pub flip_point: Option<f64>,
    /// call_gex / (call_gex + |put_gex|); absent when the chain has no gamma mass.
    pub call_gamma_concentration: Option<f64>,
    /// Largest share of near-dated OI at a single strike within the spot window.
    pub top_strike_oi_share: Option<f64>,
    pub top_strike: Option<f64>,
    /// Net dollar gamma per strike, ascending by strike.
    pub per_strike_gex: Vec<(f64, f64)>,
    pub regime: Regime,
    /// Calendar days to the nearest expiry on the chain.
    pub min_dte: u32,
}

fn year_fraction(as_of: NaiveDate, expiry: NaiveDate) -> f64 {
    (expiry - as_of).num_days() as f64 / DAYS_PER_YEAR
}

fn contract_gamma(
    snapshot: &ChainSnapshot,
    contract: &crate::market_data::OptionContract,
    source: GreeksSource,
    rate: f64,
) -> Result<f64, GexError> {
    match source {
        GreeksSource::Vendor => contract.gamma.ok_or(GexError::MissingGamma {
            strike: contract.strike,
            expiry: contract.expiry,
        }),
        GreeksSource::Recompute => Ok(bs_gamma(&PricingInputs::new(
            snapshot.spot,
            contract.strike,
            year_fraction(snapshot.as_of, contract.expiry),
            contract.implied_vol,
            rate,
        ))),
    }
}

fn signed_contract_gex(gamma: f64, oi: u64, spot: f64, kind: OptionKind) -> f64 {
    let dollars = gamma * oi as f64 * 100.0 * spot * spot;
    match kind {
        OptionKind::Call => dollars,
        OptionKind::Put => -dollars,
    }
}

/// Net GEX revalued at a hypothetical spot with strikes, OI, and IV frozen.
/// Gamma is always recomputed here; vendor gamma is only valid at the
/// observed spot.
pub fn revalue_net_gex(snapshot: &ChainSnapshot, hypothetical_spot: f64, rate: f64) -> f64 {
    let mut net = 0.0;
    for c in &snapshot.contracts {
        if c.open_interest == 0 {
            continue;
        }
        let gamma = bs_gamma(&PricingInputs::new(
            hypothetical_spot,
            c.strike,
            year_fraction(snapshot.as_of, c.expiry),
            c.implied_vol,
            rate,
        ));
        net += signed_contract_gex(gamma, c.open_interest, hypothetical_spot, c.kind);
    }
    net
}

/// Locates the net-GEX zero crossing nearest the current spot by scanning a
/// fixed grid over [lo*spot, hi*spot] and linearly interpolating between the
/// bracketing points. Absent when the profile never changes sign (including
/// the all-zero degenerate chain).
pub fn compute_flip_point(snapshot: &ChainSnapshot, grid: &GridSpec, rate: f64) -> Option<f64> {
    debug_assert!(grid.points >= 2);
    let spot = snapshot.spot;
    let n = grid.points;
    let xs: Vec<f64> = (0..n)
        .map(|i| spot * (grid.lo + (grid.hi - grid.lo) * i as f64 / (n - 1) as f64))
        .collect();
    let values: Vec<f64> = xs.iter().map(|&s| revalue_net_gex(snapshot, s, rate)).collect();

    let mut best: Option<f64> = None;
    let mut best_dist = f64::INFINITY;
    for i in 0..n - 1 {
        let (a, b) = (values[i], values[i + 1]);
        let crossing = if a == 0.0 && b == 0.0 {
            continue;
        } else if a == 0.0 {
            Some(xs[i])
        } else if b == 0.0 {
            Some(xs[i + 1])
        } else if a.signum() != b.signum() {
            Some(xs[i] + (xs[i + 1] - xs[i]) * (a / (a - b)))
        } else {
            None
        };
        if let Some(x) = crossing {
            let dist = (x - spot).abs();
            if dist < best_dist {
                best_dist = dist;
                best = Some(x);
            }
        }
    }
    best
}

/// Chain-wide call share of gross gamma dollars plus the windowed near-dated
/// top-strike OI share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationMetrics {
    /// Absent when the chain carries no gamma mass.
    pub call_gamma_concentration: Option<f64>,
    /// Absent when no near-dated OI falls inside the spot window.
    pub top_strike_oi_share: Option<f64>,
    pub top_strike: Option<f64>,
}

pub fn concentration_metrics(
    snapshot: &ChainSnapshot,
    window: f64,
    near_dte: u32,
    source: GreeksSource,
    rate: f64,
) -> Result<ConcentrationMetrics, GexError> {
    let (call_gex, put_gex) = directional_gex(snapshot, source, rate)?;
    let gross = call_gex + put_gex.abs();
    let call_gamma_concentration = if gross > 0.0 {
        Some(call_gex / gross)
    } else {
        None
    };

    let spot = snapshot.spot;
    let mut by_strike: Vec<(f64, u64)> = Vec::new();
    for c in &snapshot.contracts {
        let dte = (c.expiry - snapshot.as_of).num_days();
        if dte >= near_dte as i64 {
            continue;
        }
        if (c.strike / spot - 1.0).abs() > window {
            continue;
        }
        match by_strike.iter_mut().find(|(k, _)| *k == c.strike) {
            Some((_, oi)) => *oi += c.open_interest,
            None => by_strike.push((c.strike, c.open_interest)),
        }
    }
    let total: u64 = by_strike.iter().map(|(_, oi)| oi).sum();
    if total == 0 {
        return Ok(ConcentrationMetrics {
            call_gamma_concentration,
            top_strike_oi_share: None,
            top_strike: None,
        });
    }
    let (top_strike, top_oi) = by_strike
        .iter()
        .copied()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.total_cmp(&a.0)))
        .expect("non-empty by_strike");
    Ok(ConcentrationMetrics {
        call_gamma_concentration,
        top_strike_oi_share: Some(top_oi as f64 / total as f64),
        top_strike: Some(top_strike),
    })
}

fn directional_gex(
    snapshot: &ChainSnapshot,
    source: GreeksSource,
    rate: f64,
) -> Result<(f64, f64), GexError> {
    let mut call_gex = 0.0;
    let mut put_gex = 0.0;
    for c in &snapshot.contracts {
        let gamma = contract_gamma(snapshot, c, source, rate)?;
        let signed = signed_contract_gex(gamma, c.open_interest, snapshot.spot, c.kind);
        match c.kind {
            OptionKind::Call => call_gex += signed,
            OptionKind::Put => put_gex += signed,
        }
    }
    Ok((call_gex, put_gex))
}

/// Builds the full gamma-structure profile for one snapshot.
pub fn compute_gex(
    snapshot: &ChainSnapshot,
    source: GreeksSource,
    thresholds: &Thresholds,
    grid: &GridSpec,
    rate: f64,
) -> Result<GexProfile, GexError> {
    if snapshot.contracts.is_empty() {
        return Err(GexError::EmptyChain {
            date: snapshot.as_of,
        });
    }
    if snapshot.spot <= 0.0 {
        return Err(GexError::MissingSpot {
            date: snapshot.as_of,
        });
    }

    let mut call_gex = 0.0;
    let mut put_gex = 0.0;
    let mut per_strike: Vec<(f64, f64)> = Vec::new();
    let mut min_dte: i64 = i64::MAX;
    for c in &snapshot.contracts {
        let gamma = contract_gamma(snapshot, c, source, rate)?;
        let signed = signed_contract_gex(gamma, c.open_interest, snapshot.spot, c.kind);
        match c.kind {
            OptionKind::Call => call_gex += signed,
            OptionKind::Put => put_gex += signed,
        }
        match per_strike.iter_mut().find(|(k, _)| *k == c.strike) {
            Some((_, v)) => *v += signed,
            None => per_strike.push((c.strike, signed)),
        }
        min_dte = min_dte.min((c.expiry - snapshot.as_of).num_days());
    }
    per_strike.sort_by(|a, b| a.0.total_cmp(&b.0));
    let net_gex = call_gex + put_gex;

    let conc = concentration_metrics(
        snapshot,
        thresholds.concentration_window,
        thresholds.near_dte,
        source,
        rate,
    )?;
    let flip_point = compute_flip_point(snapshot, grid, rate);

    Ok(GexProfile {
        as_of: snapshot.as_of,
        net_gex,
        call_gex,
        put_gex,
        spot: snapshot.spot,
        flip_point,
        call_gamma_concentration: conc.call_gamma_concentration,
        top_strike_oi_share: conc.top_strike_oi_share,
        top_strike: conc.top_strike,
        per_strike_gex: per_strike,
        regime: Regime::classify(net_gex, thresholds),
        min_dte: min_dte.max(0) as u32,
    })
}
