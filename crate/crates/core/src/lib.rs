//! Dealer gamma-exposure analytics with an obfuscation-tested LLM detection
//! harness: chain ingestion, GEX structure, deterministic pattern rules,
//! context stripping, batched model calls, forward-return outcomes, and the
//! statistical scorecard.

pub mod config;
pub mod gex_engine;
pub mod greeks;
pub mod llm_harness;
pub mod market_data;
pub mod obfuscator;
pub mod outcome_engine;
pub mod pattern_rules;
pub mod pipeline;
pub mod stats_validator;
pub mod synth_market;

pub use config::{RunConfig, Thresholds};
pub use gex_engine::{GexProfile, Regime};
pub use greeks::OptionKind;
pub use llm_harness::{CaseOutcome, DetectionResult};
pub use market_data::{Calendar, ChainSnapshot, OptionContract, UnderlyingBar};
pub use obfuscator::{LeakAuditor, ObfuscatedCase, ProvenanceKey};
pub use outcome_engine::OutcomeRecord;
pub use pattern_rules::{PatternKind, RuleSignal};
pub use stats_validator::StatsReport;
