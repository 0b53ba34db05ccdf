//! Forward-return outcomes and materialization flags for each detection.
//!
//! Returns are close-to-close on the underlying bars. Strict mode follows the
//! C1-or-C4 union; broad mode maps each pattern to its natural criterion
//! (positioning -> C1 move, pinning -> C3 strike convergence, 0DTE -> C4
//! range expansion) with the any-of union as the patternless fallback. C2 is
//! computed and reported but excluded from both modes; its loose
//! operationalization (any nonzero next-day move counts as follow-through)
//! makes it nearly always true.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{MaterializationMode, OutcomeConfig};
use crate::gex_engine::GexProfile;
use crate::llm_harness::DetectionResult;
use crate::market_data::UnderlyingBar;
use crate::pattern_rules::PatternKind;

#[derive(Debug, Error)]
pub enum OutcomeError {
    #[error("detection date {date} not found in bars")]
    MissingDetectionDate { date: NaiveDate },
    #[error("fewer than 3 trading days after {date} (have {available})")]
    TruncatedHorizon { date: NaiveDate, available: usize },
}

/// Forward-market behavior for one detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub case_id: String,
    /// Close-to-close T+1 return.
    pub t1_return: f64,
    /// Close-to-close T+3 return.
    pub t3_return: f64,
    /// (high - low) of T+1 over the detection close.
    pub t1_intraday_range: f64,
    /// Annualized stdev of daily log returns over up to 5 sessions after
    /// detection (at least 3 exist whenever the record is complete).
    pub realized_vol_5d: f64,
    /// Best close-to-close return over T+1..T+3, floored at 0.
    pub max_gain_3d: f64,
    /// Worst close-to-close return over T+1..T+3, capped at 0.
    pub max_drawdown_3d: f64,
    /// Volatility amplification: |T+1 return| above the move threshold.
    pub c1_vol_amplification: bool,
    /// Directional follow-through; reported only, excluded from both modes.
    pub c2_direction: bool,
    /// Strike convergence: T+1 close within tolerance of the top strike.
    pub c3_strike_convergence: bool,
    /// Range expansion: T+1 intraday range above the range threshold.
    pub c4_range_expansion: bool,
    pub materialized_strict: bool,
    pub materialized_broad: bool,
    /// End-of-sample truncation; excluded from accuracy denominators.
    pub incomplete: bool,
}

impl OutcomeRecord {
    /// Placeholder for a detection whose forward horizon ran off the sample.
    pub fn truncated(case_id: &str) -> Self {
        Self {
            case_id: case_id.to_string(),
            t1_return: 0.0,
            t3_return: 0.0,
            t1_intraday_range: 0.0,
            realized_vol_5d: 0.0,
            max_gain_3d: 0.0,
            max_drawdown_3d: 0.0,
            c1_vol_amplification: false,
            c2_direction: false,
            c3_strike_convergence: false,
            c4_range_expansion: false,
            materialized_strict: false,
            materialized_broad: false,
            incomplete: true,
        }
    }

    pub fn materialized(&self, mode: MaterializationMode) -> bool {
        match mode {
            MaterializationMode::Strict => self.materialized_strict,
            MaterializationMode::Broad => self.materialized_broad,
        }
    }
}

/// Computes every forward metric and flag for one detection anchored at
/// `detection_date`. Requires the detection bar plus at least 3 subsequent
/// sessions; realized vol uses up to 5.
pub fn compute_outcomes(
    detection: &DetectionResult,
    bars: &[UnderlyingBar],
    detection_date: NaiveDate,
    profile: &GexProfile,
    cfg: &OutcomeConfig,
) -> Result<OutcomeRecord, OutcomeError> {
    let anchor = bars
        .iter()
        .position(|b| b.date == detection_date)
        .ok_or(OutcomeError::MissingDetectionDate {
            date: detection_date,
        })?;
    let forward = &bars[anchor + 1..];
    if forward.len() < 3 {
        return Err(OutcomeError::TruncatedHorizon {
            date: detection_date,
            available: forward.len(),
        });
    }
    let c0 = bars[anchor].close;
    let t1 = &forward[0];
    let t1_return = t1.close / c0 - 1.0;
    let t3_return = forward[2].close / c0 - 1.0;
    let t1_intraday_range = (t1.high - t1.low) / c0;

    let horizon_returns: Vec<f64> = forward[..3].iter().map(|b| b.close / c0 - 1.0).collect();
    let max_gain_3d = horizon_returns.iter().copied().fold(0.0_f64, f64::max);
    let max_drawdown_3d = horizon_returns.iter().copied().fold(0.0_f64, f64::min);

    let vol_window = forward.len().min(5);
    let mut log_returns = Vec::with_capacity(vol_window);
    let mut prev = c0;
    for bar in &forward[..vol_window] {
        log_returns.push((bar.close / prev).ln());
        prev = bar.close;
    }
    let realized_vol_5d = sample_stdev(&log_returns) * 252.0_f64.sqrt();

    let c1 = t1_return.abs() > cfg.c1_move;
    let c2 = t1_return != 0.0;
    let c3 = profile
        .top_strike
        .map(|k| (t1.close / k - 1.0).abs() < cfg.c3_strike_proximity)
        .unwrap_or(false);
    let c4 = t1_intraday_range > cfg.c4_range;

    let materialized_strict = c1 || c4;
    let materialized_broad = match detection.pattern {
        Some(PatternKind::GammaPositioning) => c1,
        Some(PatternKind::StockPinning) => c3,
        Some(PatternKind::ZeroDteHedging) => c4,
        None => c1 || c3 || c4,
    };

    Ok(OutcomeRecord {
        case_id: detection.case_id.clone(),
        t1_return,
        t3_return,
        t1_intraday_range,
        realized_vol_5d,
        max_gain_3d,
        max_drawdown_3d,
        c1_vol_amplification: c1,
        c2_direction: c2,
        c3_strike_convergence: c3,
        c4_range_expansion: c4,
        materialized_strict,
        materialized_broad,
        incomplete: false,
    })
}

fn sample_stdev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
    var.sqrt()
}

/// (materialized, mechanical-with-complete-outcome) counts joined by case id.
pub fn materialization_counts(
    records: &[OutcomeRecord],
    detections: &[DetectionResult],
    mode: MaterializationMode,
) -> (u64, u64) {
    let mut materialized = 0u64;
    let mut denominator = 0u64;
    for d in detections {
        if !d.is_mechanical() {
            continue;
        }
        let Some(record) = records.iter().find(|r| r.case_id == d.case_id) else {
            continue;
        };
        if record.incomplete {
            continue;
        }
        denominator += 1;
        if record.materialized(mode) {
            materialized += 1;
        }
    }
    (materialized, denominator)
}

/// Materialized share of Mechanical detections; absent when there are none.
pub fn accuracy(
    records: &[OutcomeRecord],
    detections: &[DetectionResult],
    mode: MaterializationMode,
) -> Option<f64> {
    let (materialized, denominator) = materialization_counts(records, detections, mode);
    if denominator == 0 {
        None
    } else {
        Some(materialized as f64 / denominator as f64)
    }
}
