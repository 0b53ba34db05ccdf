//! Hypothesis tests, intervals, resampling, power and causality analysis,
//! and assembly of the aggregate scorecard.

mod binomial;
mod bootstrap;
mod regression;
mod trend;

pub use binomial::{
    binomial_test, bonferroni, power_analysis, wilson_interval, PowerAnalysis, RateWithCi, Z_95,
};
pub use bootstrap::{bootstrap_rate, BootstrapStats};
pub use regression::{granger, pearson, Differencing, GrangerResult, PearsonResult};
pub use trend::{cochran_armitage, TrendTest};

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{MaterializationMode, StatsConfig};
use crate::gex_engine::{GexProfile, Regime};
use crate::llm_harness::DetectionResult;
use crate::market_data::{coverage_report, Calendar, CoverageReport, UnderlyingBar};
use crate::outcome_engine::OutcomeRecord;
use crate::pattern_rules::PatternKind;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("degenerate groups: {0}")]
    DegenerateGroups(String),
    #[error("singular design matrix")]
    SingularDesign,
    #[error("series length mismatch: x={x}, y={y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("series too short: len={len}, need >= {need}")]
    SeriesTooShort { len: usize, need: usize },
    #[error("numeric failure: {0}")]
    Numeric(String),
}

/// Mechanical detections over total tests, with a 95% Wilson interval.
pub fn detection_rate(detections: &[DetectionResult], total_days: u64) -> RateWithCi {
    assert!(total_days > 0, "detection_rate needs total_days > 0");
    let mechanical = detections.iter().filter(|d| d.is_mechanical()).count() as u64;
    wilson_interval(mechanical, total_days, Z_95)
}

/// Inputs for the net-alpha figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaInputs {
    pub strategy_returns: Vec<f64>,
    pub benchmark_returns: Vec<f64>,
    /// Round-trip transaction cost per trade, default 5 bps.
    pub tc_per_trade: f64,
    pub trades: u64,
}

/// mean(strategy) - mean(benchmark) - tc * trades / observations.
pub fn net_alpha(inputs: &AlphaInputs) -> f64 {
    fn mean(xs: &[f64]) -> f64 {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().sum::<f64>() / xs.len() as f64
        }
    }
    let obs = inputs.strategy_returns.len().max(1) as f64;
    mean(&inputs.strategy_returns) - mean(&inputs.benchmark_returns)
        - inputs.tc_per_trade * inputs.trades as f64 / obs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternStats {
    pub pattern: PatternKind,
    pub tests: u64,
    pub mechanical: u64,
    pub detection: RateWithCi,
    pub accuracy: Option<f64>,
    pub p_value: f64,
    pub bonferroni_alpha: f64,
    /// Significant only under the corrected alpha, never the raw one.
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Funnel {
    pub tests: u64,
    pub detections: u64,
    pub materialized: u64,
    pub detection_rate: f64,
    pub accuracy: Option<f64>,
    pub overall_success: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarterStats {
    pub label: String,
    pub days: u64,
    pub tests: u64,
    pub mechanical: u64,
    pub detection_rate: f64,
    pub accuracy: Option<f64>,
    pub mean_return: Option<f64>,
    pub net_alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrangerRow {
    pub differencing: Differencing,
    pub lag: usize,
    pub f_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub significant: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeDistribution {
    pub negative_days: u64,
    pub neutral_days: u64,
    pub positive_days: u64,
    pub coverage: CoverageReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterializationBreakdown {
    pub complete_outcomes: u64,
    pub c1_rate: Option<f64>,
    pub c2_rate: Option<f64>,
    pub c3_rate: Option<f64>,
    pub c4_rate: Option<f64>,
    pub strict_rate: Option<f64>,
    pub broad_rate: Option<f64>,
}

/// The aggregate statistical scorecard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub mode: MaterializationMode,
    pub per_pattern: Vec<PatternStats>,
    pub funnel: Funnel,
    pub quarterly: Vec<QuarterStats>,
    pub trend_test: Option<TrendTest>,
    pub bootstrap: Option<BootstrapStats>,
    pub power: Vec<PowerAnalysis>,
    pub granger: Vec<GrangerRow>,
    pub pearson_within_negative_regime: Option<PearsonResult>,
    pub regime_distribution: RegimeDistribution,
    pub materialization: MaterializationBreakdown,
}

/// Everything the report needs, already joined by case id.
pub struct ReportInputs<'a> {
    pub calendar: &'a Calendar,
    pub expected_days: u32,
    pub coverage_threshold: f64,
    /// Profiles in date order.
    pub profiles: &'a [GexProfile],
    pub bars: &'a [UnderlyingBar],
    pub detections: &'a [DetectionResult],
    pub outcomes: &'a [OutcomeRecord],
    /// case_id -> forward-return anchor date.
    pub detection_dates: &'a BTreeMap<String, NaiveDate>,
    pub mode: MaterializationMode,
    pub cfg: &'a StatsConfig,
}

struct JoinedCase<'a> {
    detection: &'a DetectionResult,
    outcome: Option<&'a OutcomeRecord>,
    date: Option<NaiveDate>,
}

impl JoinedCase<'_> {
    /// Mechanical detections whose forward horizon ran off the sample leave
    /// the funnel entirely, keeping overall = rate x accuracy exact.
    fn eligible(&self) -> bool {
        if !self.detection.is_mechanical() {
            return true;
        }
        self.outcome.map(|o| !o.incomplete).unwrap_or(false)
    }

    fn materialized(&self, mode: MaterializationMode) -> bool {
        self.detection.is_mechanical()
            && self
                .outcome
                .map(|o| !o.incomplete && o.materialized(mode))
                .unwrap_or(false)
    }
}

fn quarter_label(date: NaiveDate) -> String {
    format!("{}Q{}", date.year(), (date.month0() / 3) + 1)
}

/// Daily |log return| series aligned to dates, the EOD realized-volatility
/// proxy used for the causality checks.
fn vol_proxy_by_date(bars: &[UnderlyingBar]) -> BTreeMap<NaiveDate, f64> {
    let mut out = BTreeMap::new();
    for pair in bars.windows(2) {
        let r = (pair[1].close / pair[0].close).ln().abs();
        out.insert(pair[1].date, r);
    }
    out
}

pub fn build_report(inputs: &ReportInputs) -> StatsReport {
    let joined: Vec<JoinedCase> = inputs
        .detections
        .iter()
        .map(|d| JoinedCase {
            detection: d,
            outcome: inputs.outcomes.iter().find(|o| o.case_id == d.case_id),
            date: inputs.detection_dates.get(&d.case_id).copied(),
        })
        .collect();
    let eligible: Vec<&JoinedCase> = joined.iter().filter(|c| c.eligible()).collect();

    let tests = eligible.len() as u64;
    let mechanical = eligible
        .iter()
        .filter(|c| c.detection.is_mechanical())
        .count() as u64;
    let materialized = eligible
        .iter()
        .filter(|c| c.materialized(inputs.mode))
        .count() as u64;
    let funnel = Funnel {
        tests,
        detections: mechanical,
        materialized,
        detection_rate: if tests > 0 {
            mechanical as f64 / tests as f64
        } else {
            0.0
        },
        accuracy: (mechanical > 0).then(|| materialized as f64 / mechanical as f64),
        overall_success: (tests > 0).then(|| materialized as f64 / tests as f64),
    };

    let bonferroni_alpha = bonferroni(inputs.cfg.alpha, PatternKind::ALL.len() as u32);
    let per_pattern: Vec<PatternStats> = PatternKind::ALL
        .iter()
        .map(|&pattern| {
            let mech: Vec<&&JoinedCase> = eligible
                .iter()
                .filter(|c| {
                    c.detection.is_mechanical() && c.detection.pattern == Some(pattern)
                })
                .collect();
            let mech_count = mech.len() as u64;
            let mat_count = mech
                .iter()
                .filter(|c| c.materialized(inputs.mode))
                .count() as u64;
            let n = tests.max(1);
            let detection = wilson_interval(mech_count, n, Z_95);
            let p_value = binomial_test(mech_count, n, inputs.cfg.null_rate);
            PatternStats {
                pattern,
                tests: n,
                mechanical: mech_count,
                detection,
                accuracy: (mech_count > 0).then(|| mat_count as f64 / mech_count as f64),
                p_value,
                bonferroni_alpha,
                significant: p_value < bonferroni_alpha,
            }
        })
        .collect();

    // quarterly slices over the calendar's quarters
    let mut quarter_days: BTreeMap<String, u64> = BTreeMap::new();
    for d in &inputs.calendar.dates {
        *quarter_days.entry(quarter_label(*d)).or_insert(0) += 1;
    }
    let bench_returns_by_quarter: BTreeMap<String, Vec<f64>> = {
        let mut map: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for pair in inputs.bars.windows(2) {
            map.entry(quarter_label(pair[1].date))
                .or_default()
                .push(pair[1].close / pair[0].close - 1.0);
        }
        map
    };
    let quarterly: Vec<QuarterStats> = quarter_days
        .iter()
        .map(|(label, &days)| {
            let in_quarter: Vec<&&JoinedCase> = eligible
                .iter()
                .filter(|c| c.date.map(|d| quarter_label(d) == *label).unwrap_or(false))
                .collect();
            let q_tests = in_quarter.len() as u64;
            let q_mech: Vec<&&&JoinedCase> = in_quarter
                .iter()
                .filter(|c| c.detection.is_mechanical())
                .collect();
            let q_mech_count = q_mech.len() as u64;
            let q_mat = q_mech
                .iter()
                .filter(|c| c.materialized(inputs.mode))
                .count() as u64;
            // volatility-agnostic absolute-return proxy: one round-trip per
            // mechanical detection, next-day close-to-close
            let strategy_returns: Vec<f64> = q_mech
                .iter()
                .filter_map(|c| c.outcome.map(|o| o.t1_return.abs()))
                .collect();
            let mean_return = (!strategy_returns.is_empty())
                .then(|| strategy_returns.iter().sum::<f64>() / strategy_returns.len() as f64);
            let alpha = (!strategy_returns.is_empty()).then(|| {
                net_alpha(&AlphaInputs {
                    trades: strategy_returns.len() as u64,
                    strategy_returns: strategy_returns.clone(),
                    benchmark_returns: bench_returns_by_quarter
                        .get(label)
                        .cloned()
                        .unwrap_or_default(),
                    tc_per_trade: inputs.cfg.tc_per_trade,
                })
            });
            QuarterStats {
                label: label.clone(),
                days,
                tests: q_tests,
                mechanical: q_mech_count,
                detection_rate: if q_tests > 0 {
                    q_mech_count as f64 / q_tests as f64
                } else {
                    0.0
                },
                accuracy: (q_mech_count > 0).then(|| q_mat as f64 / q_mech_count as f64),
                mean_return,
                net_alpha: alpha,
            }
        })
        .collect();

    let trend_groups: Vec<(u64, u64)> = quarterly
        .iter()
        .filter(|q| q.tests > 0)
        .map(|q| (q.mechanical, q.tests))
        .collect();
    let trend_test = cochran_armitage(&trend_groups).ok();

    let detection_bools: Vec<bool> = eligible
        .iter()
        .map(|c| c.detection.is_mechanical())
        .collect();
    let bootstrap = (!detection_bools.is_empty()).then(|| {
        bootstrap_rate(
            &detection_bools,
            inputs.cfg.bootstrap_iterations,
            inputs.cfg.bootstrap_seed,
        )
    });

    let power: Vec<PowerAnalysis> = inputs
        .cfg
        .power_targets
        .iter()
        .map(|&target| {
            power_analysis(inputs.cfg.power_p1, inputs.cfg.null_rate, inputs.cfg.alpha, target)
        })
        .collect();

    // GEX -> forward realized volatility causality, Level and Diff
    let vol_by_date = vol_proxy_by_date(inputs.bars);
    let mut gex_series = Vec::new();
    let mut vol_series = Vec::new();
    for p in inputs.profiles {
        if let Some(v) = vol_by_date.get(&p.as_of) {
            gex_series.push(p.net_gex);
            vol_series.push(*v);
        }
    }
    let mut granger_rows = Vec::new();
    for differencing in [Differencing::Level, Differencing::Diff] {
        for lag in 1..=inputs.cfg.granger_max_lag {
            let row = match granger(&gex_series, &vol_series, lag, differencing) {
                Ok(r) => GrangerRow {
                    differencing,
                    lag,
                    f_stat: Some(r.f_stat),
                    p_value: Some(r.p_value),
                    significant: r.p_value < inputs.cfg.alpha,
                    error: None,
                },
                Err(e) => GrangerRow {
                    differencing,
                    lag,
                    f_stat: None,
                    p_value: None,
                    significant: false,
                    error: Some(e.to_string()),
                },
            };
            granger_rows.push(row);
        }
    }

    // within the negative regime: |net GEX| vs next-day volatility
    let mut neg_gex = Vec::new();
    let mut neg_fwd_vol = Vec::new();
    for pair in inputs.profiles.windows(2) {
        if pair[0].regime == Regime::Negative {
            if let Some(v) = vol_by_date.get(&pair[1].as_of) {
                neg_gex.push(pair[0].net_gex.abs());
                neg_fwd_vol.push(*v);
            }
        }
    }
    let pearson_within_negative_regime = pearson(&neg_gex, &neg_fwd_vol).ok();

    let regime_distribution = RegimeDistribution {
        negative_days: inputs
            .profiles
            .iter()
            .filter(|p| p.regime == Regime::Negative)
            .count() as u64,
        neutral_days: inputs
            .profiles
            .iter()
            .filter(|p| p.regime == Regime::Neutral)
            .count() as u64,
        positive_days: inputs
            .profiles
            .iter()
            .filter(|p| p.regime == Regime::Positive)
            .count() as u64,
        coverage: coverage_report(inputs.calendar, inputs.expected_days, inputs.coverage_threshold),
    };

    let complete: Vec<&OutcomeRecord> = eligible
        .iter()
        .filter(|c| c.detection.is_mechanical())
        .filter_map(|c| c.outcome)
        .filter(|o| !o.incomplete)
        .collect();
    let rate_of = |f: &dyn Fn(&OutcomeRecord) -> bool| -> Option<f64> {
        (!complete.is_empty())
            .then(|| complete.iter().filter(|o| f(o)).count() as f64 / complete.len() as f64)
    };
    let materialization = MaterializationBreakdown {
        complete_outcomes: complete.len() as u64,
        c1_rate: rate_of(&|o| o.c1_vol_amplification),
        c2_rate: rate_of(&|o| o.c2_direction),
        c3_rate: rate_of(&|o| o.c3_strike_convergence),
        c4_rate: rate_of(&|o| o.c4_range_expansion),
        strict_rate: rate_of(&|o| o.materialized_strict),
        broad_rate: rate_of(&|o| o.materialized_broad),
    };

    StatsReport {
        mode: inputs.mode,
        per_pattern,
        funnel,
        quarterly,
        trend_test,
        bootstrap,
        power,
        granger: granger_rows,
        pearson_within_negative_regime,
        regime_distribution,
        materialization,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(crate::market_data::fmt_f64).unwrap_or_default()
}

/// Writes the per-table CSV bundle next to report.json for external plotting.
pub fn write_report_tables(dir: &Path, report: &StatsReport) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let f = crate::market_data::fmt_f64;

    let mut detection = String::from("pattern,tests,mechanical,rate,ci_low,ci_high,accuracy,p_value,bonferroni_alpha,significant\n");
    for p in &report.per_pattern {
        detection.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            p.pattern.name(),
            p.tests,
            p.mechanical,
            f(p.detection.rate),
            f(p.detection.ci_low),
            f(p.detection.ci_high),
            fmt_opt(p.accuracy),
            f(p.p_value),
            f(p.bonferroni_alpha),
            p.significant
        ));
    }
    std::fs::write(dir.join("detection.csv"), detection)?;

    let mut quarterly =
        String::from("quarter,days,tests,mechanical,detection_rate,accuracy,mean_return,net_alpha\n");
    for q in &report.quarterly {
        quarterly.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            q.label,
            q.days,
            q.tests,
            q.mechanical,
            f(q.detection_rate),
            fmt_opt(q.accuracy),
            fmt_opt(q.mean_return),
            fmt_opt(q.net_alpha)
        ));
    }
    std::fs::write(dir.join("quarterly.csv"), quarterly)?;

    let mut materialization = String::from("criterion,rate\n");
    for (name, rate) in [
        ("c1_vol_amplification", report.materialization.c1_rate),
        ("c2_direction_excluded", report.materialization.c2_rate),
        ("c3_strike_convergence", report.materialization.c3_rate),
        ("c4_range_expansion", report.materialization.c4_rate),
        ("strict_c1_or_c4", report.materialization.strict_rate),
        ("broad_pattern_specific", report.materialization.broad_rate),
    ] {
        materialization.push_str(&format!("{},{}\n", name, fmt_opt(rate)));
    }
    std::fs::write(dir.join("materialization.csv"), materialization)?;

    let mut granger = String::from("differencing,lag,f_stat,p_value,significant,error\n");
    for g in &report.granger {
        granger.push_str(&format!(
            "{},{},{},{},{},{}\n",
            match g.differencing {
                Differencing::Level => "level",
                Differencing::Diff => "diff",
            },
            g.lag,
            fmt_opt(g.f_stat),
            fmt_opt(g.p_value),
            g.significant,
            g.error.clone().unwrap_or_default()
        ));
    }
    std::fs::write(dir.join("granger.csv"), granger)?;

    let r = &report.regime_distribution;
    let regime = format!(
        "regime,days\nnegative,{}\nneutral,{}\npositive,{}\ncoverage,{}\n",
        r.negative_days,
        r.neutral_days,
        r.positive_days,
        f(r.coverage.ratio)
    );
    std::fs::write(dir.join("regime.csv"), regime)?;
    Ok(())
}
