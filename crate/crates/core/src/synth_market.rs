//! Seeded synthetic chains and bar paths with known ground truth, so every
//! pipeline stage has an oracle.
//!
//! Each regime constructs chains that clear (or miss) the default rule
//! thresholds with at least a 10% margin, then verifies itself by running the
//! real GEX engine and detectors over the output; a spec whose targets cannot
//! be hit fails with `InfeasibleSpec` instead of emitting a mislabeled
//! corpus.
//!
//! Construction notes, per regime (base vol 0.18, spot from the bar path):
//! - PersistentNegative: 1-DTE calls 0.5% above spot, 1-DTE puts 1.2% below
//!   with 7x the call OI. Put dominance lands near 0.78 and the sign flip
//!   sits 0.5-0.8% above spot, so gamma positioning triggers while the pin
//!   rule fails on strike distance (1.2% > 1%).
//! - Pinned: equal call/put OI stacked on the at-spot strike one day out;
//!   gamma cancels exactly, net GEX is zero everywhere, and only the pin
//!   rule can fire.
//! - ZeroDteSpike: same-day puts at spot (expiry-limit gamma) plus a larger
//!   0-DTE put block 1.5% above spot that contributes OI but no gamma,
//!   breaking the pin rule twice while |net GEX| clears $3B.
//! - Flat: symmetric strikes >= 10 days out with a 2% put-side OI tilt; net
//!   stays tens of millions negative, nothing triggers.
//! - Alternating: PersistentNegative construction on even days, Flat on odd.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{GreeksSource, GridSpec, Thresholds};
use crate::gex_engine::{compute_gex, DAYS_PER_YEAR};
use crate::greeks::{bs_gamma, OptionKind, PricingInputs};
use crate::market_data::{ChainSnapshot, OptionContract, UnderlyingBar};
use crate::pattern_rules::{detect_all, PatternKind};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible spec on day {day} ({date}): {detail}")]
    InfeasibleSpec {
        day: u32,
        date: NaiveDate,
        detail: String,
    },
    #[error("spec invalid: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioRegime {
    PersistentNegative,
    Alternating,
    Pinned,
    ZeroDteSpike,
    Flat,
}

impl ScenarioRegime {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioRegime::PersistentNegative => "persistent_negative",
            ScenarioRegime::Alternating => "alternating",
            ScenarioRegime::Pinned => "pinned",
            ScenarioRegime::ZeroDteSpike => "zero_dte_spike",
            ScenarioRegime::Flat => "flat",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.replace('-', "_").as_str() {
            "persistent_negative" => Some(Self::PersistentNegative),
            "alternating" => Some(Self::Alternating),
            "pinned" => Some(Self::Pinned),
            "zero_dte_spike" => Some(Self::ZeroDteSpike),
            "flat" => Some(Self::Flat),
            _ => None,
        }
    }
}

/// Per-regime OI shape knobs; the defaults carry the >=10% threshold margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OiProfile {
    /// Mean of the per-day net-GEX target draw (dollars, signed).
    pub net_target_mean: f64,
    /// Stdev of the per-day net-GEX target draw.
    pub net_target_sd: f64,
    /// Targets are clamped into this closed range.
    pub net_clamp: (f64, f64),
    /// Put OI per call contract in the negative-gamma construction.
    pub put_call_oi_ratio: f64,
    /// OI stacked on the pin strike (each side).
    pub pin_oi: u64,
    /// Return amplification applied the day after a negative-GEX day.
    pub amplification: f64,
}

impl OiProfile {
    fn for_regime(regime: ScenarioRegime) -> Self {
        let (mean, sd, clamp) = match regime {
            ScenarioRegime::PersistentNegative | ScenarioRegime::Alternating => {
                (-6.0e9, 1.0e9, (-9.0e9, -3.5e9))
            }
            ScenarioRegime::ZeroDteSpike => (-4.8e9, 0.6e9, (-6.5e9, -3.6e9)),
            _ => (0.0, 0.0, (0.0, 0.0)),
        };
        Self {
            net_target_mean: mean,
            net_target_sd: sd,
            net_clamp: clamp,
            put_call_oi_ratio: 7.0,
            pin_oi: 5_000,
            amplification: 1.0,
        }
    }

    /// 2024-like negative-gamma calibration: mean -$19.87B, daily targets
    /// clamped just inside [-$40.69B, -$4.75B].
    pub fn calibrated_2024() -> Self {
        Self {
            net_target_mean: -19.87e9,
            net_target_sd: 8.0e9,
            net_clamp: (-40.28e9, -4.80e9),
            ..Self::for_regime(ScenarioRegime::PersistentNegative)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub regime: ScenarioRegime,
    pub days: u32,
    pub seed: u64,
    pub ticker: String,
    pub base_spot: f64,
    /// Annualized volatility for both the bar path and chain IVs.
    pub vol: f64,
    /// Outermost wing strikes as a fraction of spot (strike coverage span).
    pub wing_span: f64,
    pub start_date: NaiveDate,
    pub oi_profile: OiProfile,
}

impl ScenarioSpec {
    pub fn new(regime: ScenarioRegime, days: u32, seed: u64) -> Self {
        Self {
            regime,
            days,
            seed,
            ticker: "SPY".to_string(),
            base_spot: 500.0,
            vol: 0.18,
            wing_span: 0.105,
            start_date: NaiveDate::from_ymd_opt(2024, 1, 2).unwrap(),
            oi_profile: OiProfile::for_regime(regime),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthLabel {
    pub date: NaiveDate,
    pub regime: ScenarioRegime,
    pub expected_pattern: Option<PatternKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarket {
    /// One verified snapshot per trading day, spot already attached.
    pub snapshots: Vec<ChainSnapshot>,
    /// Bars covering every chain day plus 5 extra sessions of forward runway.
    pub bars: Vec<UnderlyingBar>,
    pub truth: Vec<TruthLabel>,
}

fn next_trading_day(mut date: NaiveDate) -> NaiveDate {
    loop {
        date = date.succ_opt().expect("date range");
        if !matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            return date;
        }
    }
}

fn trading_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = if matches!(start.weekday(), Weekday::Sat | Weekday::Sun) {
        next_trading_day(start)
    } else {
        start
    };
    for _ in 0..count {
        out.push(d);
        d = next_trading_day(d);
    }
    out
}

/// Day kind by construction; drives both chain shape and bar amplification.
fn negative_by_construction(regime: ScenarioRegime, day: u32) -> bool {
    match regime {
        ScenarioRegime::PersistentNegative | ScenarioRegime::ZeroDteSpike => true,
        ScenarioRegime::Alternating => day % 2 == 0,
        _ => false,
    }
}

fn expected_pattern(regime: ScenarioRegime, day: u32) -> Option<PatternKind> {
    match regime {
        ScenarioRegime::PersistentNegative => Some(PatternKind::GammaPositioning),
        ScenarioRegime::Pinned => Some(PatternKind::StockPinning),
        ScenarioRegime::ZeroDteSpike => Some(PatternKind::ZeroDteHedging),
        ScenarioRegime::Flat => None,
        ScenarioRegime::Alternating => {
            (day % 2 == 0).then_some(PatternKind::GammaPositioning)
        }
    }
}

struct Leg {
    rel_strike: f64,
    dte: i64,
    kind: OptionKind,
    oi: f64,
    /// Scaled by the net-GEX target solve or fixed as-is.
    scaled: bool,
}

fn legs_for_day(spec: &ScenarioSpec, day: u32) -> Vec<Leg> {
    let p = &spec.oi_profile;
    let wing = spec.wing_span;
    let negative_shape = |legs: &mut Vec<Leg>| {
        legs.push(Leg {
            rel_strike: 1.005,
            dte: 1,
            kind: OptionKind::Call,
            oi: 1_000.0,
            scaled: true,
        });
        legs.push(Leg {
            rel_strike: 0.988,
            dte: 1,
            kind: OptionKind::Put,
            oi: 1_000.0 * p.put_call_oi_ratio,
            scaled: true,
        });
        legs.push(Leg {
            rel_strike: 1.0 + wing,
            dte: 30,
            kind: OptionKind::Call,
            oi: 1.0,
            scaled: false,
        });
        legs.push(Leg {
            rel_strike: 1.0 - wing,
            dte: 30,
            kind: OptionKind::Put,
            oi: 1.0,
            scaled: false,
        });
    };
    let flat_shape = |legs: &mut Vec<Leg>| {
        for (rel, dte) in [(1.0, 10), (0.95, 20), (1.05, 20), (1.0 - wing, 30), (1.0 + wing, 30)] {
            legs.push(Leg {
                rel_strike: rel,
                dte,
                kind: OptionKind::Call,
                oi: 1_000.0,
                scaled: false,
            });
            legs.push(Leg {
                rel_strike: rel,
                dte,
                kind: OptionKind::Put,
                oi: 1_020.0,
                scaled: false,
            });
        }
    };
    let mut legs = Vec::new();
    match spec.regime {
        ScenarioRegime::PersistentNegative => negative_shape(&mut legs),
        ScenarioRegime::Alternating => {
            if day % 2 == 0 {
                negative_shape(&mut legs)
            } else {
                flat_shape(&mut legs)
            }
        }
        ScenarioRegime::Flat => flat_shape(&mut legs),
        ScenarioRegime::Pinned => {
            for kind in [OptionKind::Call, OptionKind::Put] {
                legs.push(Leg {
                    rel_strike: 1.0,
                    dte: 1,
                    kind,
                    oi: p.pin_oi as f64,
                    scaled: false,
                });
            }
            for (rel, dte) in [(0.95, 30), (1.05, 30), (1.0 - wing, 30), (1.0 + wing, 30)] {
                for kind in [OptionKind::Call, OptionKind::Put] {
                    legs.push(Leg {
                        rel_strike: rel,
                        dte,
                        kind,
                        oi: (p.pin_oi / 100).max(1) as f64,
                        scaled: false,
                    });
                }
            }
        }
        ScenarioRegime::ZeroDteSpike => {
            legs.push(Leg {
                rel_strike: 1.0,
                dte: 0,
                kind: OptionKind::Put,
                oi: 1_000.0,
                scaled: true,
            });
            legs.push(Leg {
                rel_strike: 1.015,
                dte: 0,
                kind: OptionKind::Put,
                oi: 1_200.0,
                scaled: true,
            });
            legs.push(Leg {
                rel_strike: 1.0 - wing,
                dte: 30,
                kind: OptionKind::Put,
                oi: 1.0,
                scaled: false,
            });
            legs.push(Leg {
                rel_strike: 1.0 + wing,
                dte: 30,
                kind: OptionKind::Put,
                oi: 1.0,
                scaled: false,
            });
        }
    }
    legs
}

fn build_contract(
    spot: f64,
    as_of: NaiveDate,
    leg: &Leg,
    oi: u64,
    vol: f64,
    rate: f64,
) -> OptionContract {
    let strike = if leg.rel_strike == 1.0 {
        spot
    } else {
        spot * leg.rel_strike
    };
    let expiry = as_of + chrono::Days::new(leg.dte as u64);
    let gamma = bs_gamma(&PricingInputs::new(
        spot,
        strike,
        (expiry - as_of).num_days() as f64 / DAYS_PER_YEAR,
        vol,
        rate,
    ));
    // synthetic quotes: small positive spread, wide enough never to invert
    let bid = (0.01 * spot * (vol / 0.2)).max(0.01);
    OptionContract {
        strike,
        expiry,
        kind: leg.kind,
        open_interest: oi,
        implied_vol: vol,
        gamma: Some(gamma),
        bid,
        ask: bid + 0.05,
    }
}

/// Generates the corpus, bars, and truth labels, then verifies every day
/// against the real detectors under default thresholds.
pub fn generate(spec: &ScenarioSpec) -> Result<SyntheticMarket, SynthError> {
    if spec.days == 0 {
        return Err(SynthError::InvalidSpec("days must be >= 1".into()));
    }
    if spec.base_spot <= 0.0 || spec.vol <= 0.0 {
        return Err(SynthError::InvalidSpec(
            "base_spot and vol must be positive".into(),
        ));
    }
    if spec.wing_span < 0.10 {
        return Err(SynthError::InvalidSpec(
            "wing_span must cover at least +/-10% of spot".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let n_days = spec.days as usize;
    let dates = trading_days(spec.start_date, n_days + 5);
    let daily_vol = spec.vol / 252.0_f64.sqrt();

    // bar path first; chain spots ride on the closes
    let mut bars = Vec::with_capacity(dates.len());
    let mut close = spec.base_spot;
    for (i, &date) in dates.iter().enumerate() {
        let mut z: f64 = normal.sample(&mut rng);
        let amplified = i > 0 && negative_by_construction(spec.regime, (i - 1) as u32);
        if amplified {
            z *= spec.oi_profile.amplification;
        }
        let open = close;
        close = (close * ((-0.5 * daily_vol * daily_vol) + daily_vol * z).exp()).max(0.01);
        let up: f64 = rng.gen_range(0.0..daily_vol * 0.7);
        let down: f64 = rng.gen_range(0.0..daily_vol * 0.7);
        let high = open.max(close) * (1.0 + up);
        let low = (open.min(close) * (1.0 - down)).max(0.005);
        bars.push(UnderlyingBar {
            date,
            open,
            high,
            low,
            close,
        });
    }

    let thresholds = Thresholds::default();
    let grid = GridSpec::default();
    let mut snapshots = Vec::with_capacity(n_days);
    let mut truth = Vec::with_capacity(n_days);
    for day in 0..spec.days {
        let date = dates[day as usize];
        let spot = bars[day as usize].close;
        let legs = legs_for_day(spec, day);

        // solve the OI scale for the day's net-GEX target by linearity
        let needs_target = legs.iter().any(|l| l.scaled);
        let scale = if needs_target {
            let target = {
                let draw = spec.oi_profile.net_target_mean
                    + spec.oi_profile.net_target_sd * normal.sample(&mut rng);
                draw.clamp(spec.oi_profile.net_clamp.0, spec.oi_profile.net_clamp.1)
            };
            let mut unit_net = 0.0;
            for leg in legs.iter().filter(|l| l.scaled) {
                let c = build_contract(spot, date, leg, 1, spec.vol, 0.0);
                let signed = c.gamma.unwrap() * leg.oi * 100.0 * spot * spot;
                unit_net += match leg.kind {
                    OptionKind::Call => signed,
                    OptionKind::Put => -signed,
                };
            }
            if unit_net == 0.0 || target / unit_net <= 0.0 {
                return Err(SynthError::InfeasibleSpec {
                    day,
                    date,
                    detail: format!(
                        "target net GEX {target:.3e} unreachable from unit net {unit_net:.3e}"
                    ),
                });
            }
            target / unit_net
        } else {
            1.0
        };

        let contracts: Vec<OptionContract> = legs
            .iter()
            .map(|leg| {
                let oi = if leg.scaled {
                    ((leg.oi * scale).round() as u64).max(1)
                } else {
                    leg.oi.round() as u64
                };
                build_contract(spot, date, leg, oi, spec.vol, 0.0)
            })
            .collect();
        let snapshot = ChainSnapshot {
            as_of: date,
            ticker: spec.ticker.clone(),
            spot,
            contracts,
        };

        // verification: ground truth and the real detectors must agree
        let profile = compute_gex(&snapshot, GreeksSource::Recompute, &thresholds, &grid, 0.0)
            .map_err(|e| SynthError::InfeasibleSpec {
                day,
                date,
                detail: e.to_string(),
            })?;
        let signals = detect_all(&profile, &thresholds);
        let first_triggered = signals.iter().find(|s| s.triggered).map(|s| s.kind);
        let expected = expected_pattern(spec.regime, day);
        if first_triggered != expected {
            return Err(SynthError::InfeasibleSpec {
                day,
                date,
                detail: format!(
                    "expected {:?}, detectors produced {:?} (net {:.3e}, flip {:?}, conc {:?}, share {:?}, dte {})",
                    expected,
                    first_triggered,
                    profile.net_gex,
                    profile.flip_point,
                    profile.call_gamma_concentration,
                    profile.top_strike_oi_share,
                    profile.min_dte
                ),
            });
        }

        truth.push(TruthLabel {
            date,
            regime: spec.regime,
            expected_pattern: expected,
        });
        snapshots.push(snapshot);
    }

    Ok(SyntheticMarket {
        snapshots,
        bars,
        truth,
    })
}

/// `truth.csv`: date,regime,expected_pattern.
pub fn write_truth_csv(path: &std::path::Path, truth: &[TruthLabel]) -> std::io::Result<()> {
    let mut out = String::from("date,regime,expected_pattern\n");
    for t in truth {
        out.push_str(&format!(
            "{},{},{}\n",
            t.date,
            t.regime.name(),
            t.expected_pattern.map(|p| p.name()).unwrap_or("")
        ));
    }
    std::fs::write(path, out)
}
