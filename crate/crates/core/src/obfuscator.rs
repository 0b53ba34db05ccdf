//! Temporal obfuscation: turns dated, ticker-identified gamma structure into
//! context-stripped cases, and audits any outgoing text for leaks.
//!
//! Relative days count trading sessions, not calendar days; a Friday-to-Monday
//! window renders as T+0, T+1. The provenance key that reverses the mapping is
//! returned separately and is never serialized into a case or prompt.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ObfuscationConfig, TemplateKind};
use crate::gex_engine::GexProfile;
use crate::pattern_rules::{PatternKind, RuleSignal};

#[derive(Debug, Error)]
pub enum ObfuscateError {
    #[error("window dates are not strictly increasing: {prev} then {next}")]
    NonMonotonicDates { prev: NaiveDate, next: NaiveDate },
    #[error("window is empty")]
    EmptyWindow,
}

/// One structural day with every identifying field removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralDay {
    /// Trading-day offset from the window start (T+N).
    pub rel_day: u32,
    pub net_gex: f64,
    pub call_gex: f64,
    pub put_gex: f64,
    pub spot: f64,
    pub flip_point: Option<f64>,
    pub call_conc: Option<f64>,
    pub top_oi_share: Option<f64>,
    pub rel_dte: u32,
}

/// Pattern names from rule hits, used for biased-template hints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintSummary {
    pub patterns: Vec<PatternKind>,
}

impl HintSummary {
    /// Keeps pattern names only; threshold values stay out of prompts.
    pub fn from_signals(signals: &[RuleSignal]) -> Option<Self> {
        let patterns: Vec<PatternKind> = signals
            .iter()
            .filter(|s| s.triggered)
            .map(|s| s.kind)
            .collect();
        if patterns.is_empty() {
            None
        } else {
            Some(Self { patterns })
        }
    }
}

/// A context-stripped multi-day record ready for prompt rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObfuscatedCase {
    pub case_id: String,
    pub index_alias: String,
    pub days: Vec<StructuralDay>,
    pub template: TemplateKind,
    /// Rule-hit summary, biased template only.
    pub hint: Option<HintSummary>,
}

impl ObfuscatedCase {
    pub fn serialized(&self) -> String {
        serde_json::to_string(self).expect("case serializes")
    }
}

/// Sealed mapping back to real dates; stored on a restricted path, never
/// rendered into prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceKey {
    pub case_id: String,
    pub ticker: String,
    /// (rel_day, original date), one entry per window day.
    pub dates: Vec<(u32, NaiveDate)>,
}

impl ProvenanceKey {
    /// The date forward returns anchor to: the last day in the window.
    pub fn detection_date(&self) -> NaiveDate {
        self.dates.last().expect("non-empty window").1
    }
}

/// Stable opaque id from (base date, ticker, salt). The template is not part
/// of the hash so unbiased and biased runs over the same window share ids.
fn case_id(base_date: NaiveDate, ticker: &str, salt: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(base_date.to_string().as_bytes());
    hasher.update(b"|");
    hasher.update(ticker.as_bytes());
    hasher.update(b"|");
    hasher.update(salt.to_le_bytes());
    let digest = hasher.finalize();
    hex::encode(&digest[..8])
}

/// Strips dates, ticker, and context from a window of profiles. Numeric
/// fields are copied bit-exactly; only the identity axes change.
pub fn obfuscate(
    ticker: &str,
    window: &[(NaiveDate, GexProfile)],
    base_index: u32,
    template: TemplateKind,
    hint: Option<HintSummary>,
    salt: u64,
) -> Result<(ObfuscatedCase, ProvenanceKey), ObfuscateError> {
    if window.is_empty() {
        return Err(ObfuscateError::EmptyWindow);
    }
    for pair in window.windows(2) {
        if pair[1].0 <= pair[0].0 {
            return Err(ObfuscateError::NonMonotonicDates {
                prev: pair[0].0,
                next: pair[1].0,
            });
        }
    }
    let id = case_id(window[0].0, ticker, salt);
    let days: Vec<StructuralDay> = window
        .iter()
        .enumerate()
        .map(|(i, (_, p))| StructuralDay {
            rel_day: i as u32,
            net_gex: p.net_gex,
            call_gex: p.call_gex,
            put_gex: p.put_gex,
            spot: p.spot,
            flip_point: p.flip_point,
            call_conc: p.call_gamma_concentration,
            top_oi_share: p.top_strike_oi_share,
            rel_dte: p.min_dte,
        })
        .collect();
    let case = ObfuscatedCase {
        case_id: id.clone(),
        index_alias: format!("INDEX_{base_index}"),
        days,
        template,
        hint: if template == TemplateKind::Biased {
            hint
        } else {
            None
        },
    };
    let provenance = ProvenanceKey {
        case_id: id,
        ticker: ticker.to_string(),
        dates: window
            .iter()
            .enumerate()
            .map(|(i, (d, _))| (i as u32, *d))
            .collect(),
    };
    Ok((case, provenance))
}

/// Formats signed dollars in billions with one decimal: -$32.9B.
pub fn format_gex_billions(v: f64) -> String {
    let billions = v / 1e9;
    if billions < 0.0 {
        format!("-${:.1}B", -billions)
    } else {
        format!("${billions:.1}B")
    }
}

/// Rule class for an audit hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakRule {
    IsoDate,
    MonthName,
    WeekdayName,
    Year,
    Ticker,
    EventKeyword,
    VolatilityContext,
    Blocklist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakMatch {
    pub rule: LeakRule,
    pub text: String,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AuditReport {
    pub matches: Vec<LeakMatch>,
}

impl AuditReport {
    pub fn clean(&self) -> bool {
        self.matches.is_empty()
    }
}

/// Compiled leak scanner. Rules overlap (a year inside an ISO date, a ticker
/// inside a "VIX at" phrase); earlier rule classes claim their span first so
/// each leaking region is reported once.
pub struct LeakAuditor {
    rules: Vec<(LeakRule, Regex)>,
}

impl LeakAuditor {
    pub fn new(cfg: &ObfuscationConfig) -> Self {
        let mut extra = cfg.blocklist.clone();
        if let Some(path) = &cfg.blocklist_file {
            if let Ok(text) = std::fs::read_to_string(path) {
                extra.extend(
                    text.lines()
                        .map(|l| l.trim().to_string())
                        .filter(|l| !l.is_empty() && !l.starts_with('#')),
                );
            }
        }
        Self::with_terms(&cfg.tickers, &cfg.events, &extra)
    }

    pub fn with_terms(tickers: &[String], events: &[String], blocklist: &[String]) -> Self {
        let months = "January|February|March|April|May|June|July|August|September|October|\
                      November|December|Jan|Feb|Mar|Apr|Jun|Jul|Aug|Sep|Sept|Oct|Nov|Dec";
        let weekdays = "Monday|Tuesday|Wednesday|Thursday|Friday|Saturday|Sunday|\
                        Mon|Tue|Tues|Wed|Thu|Thur|Thurs|Fri|Sat|Sun";
        let mut rules = vec![
            (
                LeakRule::IsoDate,
                Regex::new(r"\b\d{4}-\d{2}-\d{2}\b").unwrap(),
            ),
            (
                LeakRule::MonthName,
                Regex::new(&format!(r"\b(?:{months})\b")).unwrap(),
            ),
            (
                LeakRule::WeekdayName,
                Regex::new(&format!(r"\b(?:{weekdays})\b")).unwrap(),
            ),
            (
                LeakRule::Year,
                Regex::new(r"\b(?:199\d|20[0-2]\d|203[0-5])\b").unwrap(),
            ),
            (
                LeakRule::VolatilityContext,
                Regex::new(r"(?i)\bVIX\s+at\b").unwrap(),
            ),
        ];
        if !tickers.is_empty() {
            let alt = tickers
                .iter()
                .map(|t| regex::escape(t))
                .collect::<Vec<_>>()
                .join("|");
            rules.push((LeakRule::Ticker, Regex::new(&format!(r"\b(?:{alt})\b")).unwrap()));
        }
        if !events.is_empty() {
            // Case-sensitive for short all-caps terms (CPI, Fed, FOMC, OpEx),
            // case-insensitive for ordinary words.
            let mut cs = Vec::new();
            let mut ci = Vec::new();
            for e in events {
                if e.chars().any(|c| c.is_uppercase()) {
                    cs.push(regex::escape(e));
                } else {
                    ci.push(regex::escape(e));
                }
            }
            if !cs.is_empty() {
                rules.push((
                    LeakRule::EventKeyword,
                    Regex::new(&format!(r"\b(?:{})\b", cs.join("|"))).unwrap(),
                ));
            }
            if !ci.is_empty() {
                rules.push((
                    LeakRule::EventKeyword,
                    Regex::new(&format!(r"(?i)\b(?:{})\b", ci.join("|"))).unwrap(),
                ));
            }
        }
        if !blocklist.is_empty() {
            let alt = blocklist
                .iter()
                .map(|t| regex::escape(t))
                .collect::<Vec<_>>()
                .join("|");
            rules.push((
                LeakRule::Blocklist,
                Regex::new(&format!(r"(?i)\b(?:{alt})\b")).unwrap(),
            ));
        }
        Self { rules }
    }

    /// Scans text for every leak-pattern hit; clean means zero matches.
    pub fn audit(&self, text: &str) -> AuditReport {
        let mut matches: Vec<LeakMatch> = Vec::new();
        let mut claimed: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (rule, re) in &self.rules {
            for m in re.find_iter(text) {
                let span = (m.start(), m.end());
                let overlaps = claimed
                    .iter()
                    .any(|&(s, e)| m.start() < e && s < m.end());
                if overlaps {
                    continue;
                }
                claimed.insert(span);
                matches.push(LeakMatch {
                    rule: *rule,
                    text: m.as_str().to_string(),
                    offset: m.start(),
                });
            }
        }
        matches.sort_by_key(|m| m.offset);
        AuditReport { matches }
    }
}

impl Default for LeakAuditor {
    fn default() -> Self {
        Self::new(&ObfuscationConfig::default())
    }
}

/// One-shot audit with the default rule set.
pub fn leak_audit(text: &str) -> AuditReport {
    LeakAuditor::default().audit(text)
}

/// Writes cases one per line; the provenance keys go to a separate path.
pub fn write_cases_jsonl(path: &Path, cases: &[ObfuscatedCase]) -> std::io::Result<()> {
    let mut out = String::new();
    for case in cases {
        out.push_str(&case.serialized());
        out.push('\n');
    }
    std::fs::write(path, out)
}

pub fn read_cases_jsonl(path: &Path) -> std::io::Result<Vec<ObfuscatedCase>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })
        .collect()
}

pub fn write_provenance_jsonl(path: &Path, keys: &[ProvenanceKey]) -> std::io::Result<()> {
    let mut out = String::new();
    for key in keys {
        out.push_str(&serde_json::to_string(key).expect("provenance serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)
}

pub fn read_provenance_jsonl(path: &Path) -> std::io::Result<Vec<ProvenanceKey>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gex_engine::Regime;
    use crate::market_data::Calendar;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn profile(net: f64, spot: f64) -> GexProfile {
        GexProfile {
            as_of: date(2024, 1, 16),
            net_gex: net,
            call_gex: net.max(0.0),
            put_gex: net.min(0.0),
            spot,
            flip_point: Some(spot * 1.01),
            call_gamma_concentration: Some(0.25),
            top_strike_oi_share: Some(0.6),
            top_strike: Some(spot),
            per_strike_gex: vec![],
            regime: Regime::Negative,
            min_dte: 1,
        }
    }

    #[test]
    fn two_day_window_obfuscates_to_relative_days() {
        let w = vec![
            (date(2024, 1, 16), profile(-32.9e9, 500.0)),
            (date(2024, 1, 17), profile(-30.0e9, 501.0)),
        ];
        let (case, key) =
            obfuscate("SPY", &w, 1, TemplateKind::Unbiased, None, 42).unwrap();
        assert_eq!(case.index_alias, "INDEX_1");
        assert_eq!(case.days.len(), 2);
        assert_eq!(case.days[0].rel_day, 0);
        assert_eq!(case.days[1].rel_day, 1);
        assert_eq!(key.dates, vec![(0, date(2024, 1, 16)), (1, date(2024, 1, 17))]);
    }

    #[test]
    fn single_day_window() {
        let w = vec![(date(2024, 1, 16), profile(-5e9, 500.0))];
        let (case, _) = obfuscate("SPY", &w, 1, TemplateKind::Unbiased, None, 42).unwrap();
        assert_eq!(case.days.len(), 1);
        assert_eq!(case.days[0].rel_day, 0);
    }

    #[test]
    fn weekend_gap_counts_trading_days() {
        // Friday then Monday: rel_day 0, 1. Oracle: positions in the trading
        // calendar differ by exactly one.
        let fri = date(2024, 1, 12);
        let mon = date(2024, 1, 15);
        let cal = Calendar::from_dates(vec![date(2024, 1, 11), fri, mon, date(2024, 1, 16)], 253);
        let w = vec![(fri, profile(-5e9, 500.0)), (mon, profile(-4e9, 501.0))];
        let (case, key) = obfuscate("SPY", &w, 1, TemplateKind::Unbiased, None, 42).unwrap();
        assert_eq!(case.days[1].rel_day - case.days[0].rel_day, 1);
        let oracle_offset = cal.position(mon).unwrap() - cal.position(fri).unwrap();
        assert_eq!(oracle_offset as u32, case.days[1].rel_day);
        assert_eq!(key.detection_date(), mon);
    }

    #[test]
    fn non_monotonic_window_is_an_error() {
        let w = vec![
            (date(2024, 1, 17), profile(-5e9, 500.0)),
            (date(2024, 1, 16), profile(-4e9, 501.0)),
        ];
        assert!(matches!(
            obfuscate("SPY", &w, 1, TemplateKind::Unbiased, None, 42),
            Err(ObfuscateError::NonMonotonicDates { .. })
        ));
    }

    #[test]
    fn preserved_fields_are_bit_exact() {
        let p = profile(-32.9123456789e9, 500.03);
        let w = vec![(date(2024, 1, 16), p.clone())];
        let (case, _) = obfuscate("SPY", &w, 1, TemplateKind::Unbiased, None, 42).unwrap();
        let d = &case.days[0];
        assert_eq!(d.net_gex.to_bits(), p.net_gex.to_bits());
        assert_eq!(d.call_gex.to_bits(), p.call_gex.to_bits());
        assert_eq!(d.put_gex.to_bits(), p.put_gex.to_bits());
        assert_eq!(d.spot.to_bits(), p.spot.to_bits());
        assert_eq!(d.flip_point, p.flip_point);
        assert_eq!(d.call_conc, p.call_gamma_concentration);
        assert_eq!(d.top_oi_share, p.top_strike_oi_share);
        assert_eq!(d.rel_dte, p.min_dte);
    }

    #[test]
    fn same_window_and_salt_give_identical_cases() {
        let w = vec![(date(2024, 1, 16), profile(-5e9, 500.0))];
        let (a, _) = obfuscate("SPY", &w, 1, TemplateKind::Unbiased, None, 42).unwrap();
        let (b, _) = obfuscate("SPY", &w, 1, TemplateKind::Unbiased, None, 42).unwrap();
        assert_eq!(a, b);
        let (c, _) = obfuscate("SPY", &w, 1, TemplateKind::Unbiased, None, 43).unwrap();
        assert_ne!(a.case_id, c.case_id);
    }

    #[test]
    fn unbiased_and_biased_share_case_ids() {
        let w = vec![(date(2024, 1, 16), profile(-5e9, 500.0))];
        let (u, _) = obfuscate("SPY", &w, 1, TemplateKind::Unbiased, None, 42).unwrap();
        let (b, _) = obfuscate(
            "SPY",
            &w,
            1,
            TemplateKind::Biased,
            Some(HintSummary {
                patterns: vec![PatternKind::GammaPositioning],
            }),
            42,
        )
        .unwrap();
        assert_eq!(u.case_id, b.case_id);
        assert!(u.hint.is_none());
        assert!(b.hint.is_some());
    }

    #[test]
    fn provenance_reverses_every_rel_day_uniquely() {
        let w = vec![
            (date(2024, 1, 16), profile(-5e9, 500.0)),
            (date(2024, 1, 17), profile(-4e9, 501.0)),
            (date(2024, 1, 18), profile(-3e9, 502.0)),
        ];
        let (case, key) = obfuscate("SPY", &w, 1, TemplateKind::Unbiased, None, 42).unwrap();
        let mut seen = BTreeSet::new();
        for day in &case.days {
            let hits: Vec<_> = key.dates.iter().filter(|(r, _)| *r == day.rel_day).collect();
            assert_eq!(hits.len(), 1);
            assert!(seen.insert(hits[0].1));
        }
    }

    #[test]
    fn clean_structural_text_passes_audit() {
        let report = leak_audit("Day T+0 INDEX_1 GEX: -$32.9B");
        assert!(report.clean(), "{:?}", report.matches);
    }

    #[test]
    fn weekday_is_one_match() {
        let report = leak_audit("Monday GEX -$5B");
        assert_eq!(report.matches.len(), 1);
        assert_eq!(report.matches[0].rule, LeakRule::WeekdayName);
    }

    #[test]
    fn ticker_date_event_are_three_matches() {
        let report = leak_audit("SPY 2024-01-16 Fed meeting");
        assert_eq!(report.matches.len(), 3, "{:?}", report.matches);
        let rules: Vec<LeakRule> = report.matches.iter().map(|m| m.rule).collect();
        assert!(rules.contains(&LeakRule::Ticker));
        assert!(rules.contains(&LeakRule::IsoDate));
        assert!(rules.contains(&LeakRule::EventKeyword));
    }

    #[test]
    fn year_inside_iso_date_not_double_counted() {
        let report = leak_audit("on 2024-01-16 only");
        assert_eq!(report.matches.len(), 1);
        assert_eq!(report.matches[0].rule, LeakRule::IsoDate);
        // Standalone year still caught.
        let report = leak_audit("during 2024 vol rose");
        assert_eq!(report.matches.len(), 1);
        assert_eq!(report.matches[0].rule, LeakRule::Year);
    }

    #[test]
    fn offsets_point_at_the_match() {
        let text = "calm then Monday storm";
        let report = leak_audit(text);
        assert_eq!(report.matches.len(), 1);
        let m = &report.matches[0];
        assert_eq!(&text[m.offset..m.offset + m.text.len()], "Monday");
    }

    #[test]
    fn vix_context_and_blocklist_extension() {
        let report = leak_audit("VIX at 14 all week");
        assert!(!report.clean());
        let auditor = LeakAuditor::with_terms(&[], &[], &["opex friday".to_string()]);
        assert!(!auditor.audit("ahead of OpEx Friday flows").clean());
        assert!(auditor.audit("plain structural text").clean());
    }

    #[test]
    fn serialized_case_is_clean() {
        let w = vec![(date(2024, 1, 16), profile(-32.9e9, 500.0))];
        let (case, _) = obfuscate("SPY", &w, 1, TemplateKind::Unbiased, None, 42).unwrap();
        let report = leak_audit(&case.serialized());
        assert!(report.clean(), "{:?}", report.matches);
    }

    #[test]
    fn gex_formatting_matches_prompt_rendering() {
        assert_eq!(format_gex_billions(-32.9e9), "-$32.9B");
        assert_eq!(format_gex_billions(5.04e9), "$5.0B");
        assert_eq!(format_gex_billions(0.0), "$0.0B");
        assert_eq!(format_gex_billions(-19.87e9), "-$19.9B");
    }

    #[test]
    fn jsonl_round_trip() {
        let w = vec![(date(2024, 1, 16), profile(-5e9, 500.0))];
        let (case, key) = obfuscate("SPY", &w, 1, TemplateKind::Unbiased, None, 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cases_path = dir.path().join("cases.jsonl");
        let prov_path = dir.path().join("provenance.jsonl");
        write_cases_jsonl(&cases_path, std::slice::from_ref(&case)).unwrap();
        write_provenance_jsonl(&prov_path, std::slice::from_ref(&key)).unwrap();
        assert_eq!(read_cases_jsonl(&cases_path).unwrap(), vec![case]);
        assert_eq!(read_provenance_jsonl(&prov_path).unwrap(), vec![key]);
    }
}
