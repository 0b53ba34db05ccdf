//! Prompt rendering, batched provider calls, and structured parsing of
//! WHO -> WHOM -> WHAT detections, with a deterministic mock agent.

mod agent;
mod mock;
mod parse;
mod template;

pub use agent::{Agent, AgentError, AgentRequest, HttpAgent};
pub use mock::{mock_detection, MockAgent};
pub use parse::{extract_first_json_object, parse_response, ParseFailure};
pub use template::{render_batch_prompt, render_prompt, PromptTemplate, RenderError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{AgentConfig, Thresholds};
use crate::obfuscator::{LeakAuditor, ObfuscatedCase};
use crate::pattern_rules::PatternKind;

/// Confidence at or above this classifies a detection as Mechanical.
pub const MECHANICAL_CONFIDENCE: u8 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Horizon {
    #[default]
    #[serde(rename = "T+1")]
    T1,
    #[serde(rename = "T+2")]
    T2,
    #[serde(rename = "T+3")]
    T3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Mechanical,
    NonMechanical,
}

/// Pure function of confidence; never trusted from the model.
pub fn classify(confidence: u8) -> Classification {
    if confidence >= MECHANICAL_CONFIDENCE {
        Classification::Mechanical
    } else {
        Classification::NonMechanical
    }
}

/// Parsed, validated structured output for one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub case_id: String,
    pub detected: bool,
    pub pattern: Option<PatternKind>,
    pub who: String,
    pub whom: String,
    pub what: String,
    /// 0-100; 0 whenever detected is false.
    pub confidence: u8,
    pub horizon: Horizon,
    pub classification: Classification,
}

impl DetectionResult {
    pub fn is_mechanical(&self) -> bool {
        self.classification == Classification::Mechanical
    }
}

/// Per-case outcome of a batch run; parse failures degrade, they do not abort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CaseOutcome {
    Detection(DetectionResult),
    Failed { case_id: String, error: String },
}

impl CaseOutcome {
    pub fn case_id(&self) -> &str {
        match self {
            CaseOutcome::Detection(d) => &d.case_id,
            CaseOutcome::Failed { case_id, .. } => case_id,
        }
    }

    pub fn detection(&self) -> Option<&DetectionResult> {
        match self {
            CaseOutcome::Detection(d) => Some(d),
            CaseOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("prompt failed leak audit before send: {0} match(es)")]
    LeakDetected(usize),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("provider unavailable after {attempts} attempt(s): {last_error}")]
    ProviderUnavailable { attempts: u32, last_error: String },
}

/// Runs every case through the agent in batches of `cfg.batch_size`,
/// returning exactly one outcome per case in input order.
///
/// Each outgoing prompt is re-audited at send time; a leak is a hard
/// failure and nothing is transmitted. Malformed per-case output gets one
/// structured-repair retry, then degrades to `CaseOutcome::Failed`.
pub fn run_batch(
    cases: &[ObfuscatedCase],
    template: &PromptTemplate,
    agent: &dyn Agent,
    cfg: &AgentConfig,
    auditor: &LeakAuditor,
    thresholds: &Thresholds,
) -> Result<Vec<CaseOutcome>, HarnessError> {
    let batch_size = cfg.batch_size.max(1);
    let batches: Vec<&[ObfuscatedCase]> = cases.chunks(batch_size).collect();
    let in_flight = cfg.max_in_flight.max(1).min(batches.len().max(1));

    let mut results: Vec<Option<Vec<CaseOutcome>>> = vec![None; batches.len()];
    if in_flight <= 1 {
        for (i, batch) in batches.iter().enumerate() {
            results[i] = Some(process_one_batch(
                batch, template, agent, cfg, auditor, thresholds,
            )?);
        }
    } else {
        type Slot = std::sync::Mutex<Option<Result<Vec<CaseOutcome>, HarnessError>>>;
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots: Vec<Slot> = (0..batches.len()).map(|_| std::sync::Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..in_flight {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= batches.len() {
                        break;
                    }
                    let out = process_one_batch(
                        batches[i], template, agent, cfg, auditor, thresholds,
                    );
                    *slots[i].lock().unwrap() = Some(out);
                });
            }
        });
        for (i, slot) in slots.into_iter().enumerate() {
            results[i] = Some(slot.into_inner().unwrap().expect("worker filled slot")?);
        }
    }

    Ok(results.into_iter().flat_map(|r| r.unwrap()).collect())
}

fn process_one_batch(
    batch: &[ObfuscatedCase],
    template: &PromptTemplate,
    agent: &dyn Agent,
    cfg: &AgentConfig,
    auditor: &LeakAuditor,
    thresholds: &Thresholds,
) -> Result<Vec<CaseOutcome>, HarnessError> {
    let prompt = render_batch_prompt(batch, template, auditor, thresholds)?;
    let completion = send_audited(&prompt, batch, agent, cfg, auditor)?;

    let entries = parse::batch_entries(&completion);
    let mut outcomes = Vec::with_capacity(batch.len());
    for case in batch {
        let entry = entries
            .as_ref()
            .ok()
            .and_then(|list| {
                list.iter()
                    .find(|e| e.get("case_id").and_then(|v| v.as_str()) == Some(&case.case_id))
            })
            .cloned();
        let parsed = match entry {
            Some(value) => {
                parse_response(&value, Some(&case.case_id), template.allows_null_detection)
            }
            None => Err(ParseFailure::new(
                Some(case.case_id.clone()),
                "no entry for case in completion",
            )),
        };
        match parsed {
            Ok(d) => outcomes.push(CaseOutcome::Detection(d)),
            Err(first_err) => {
                // One structured-repair retry on a single-case prompt.
                match repair_case(case, template, agent, cfg, auditor, thresholds) {
                    Ok(d) => outcomes.push(CaseOutcome::Detection(d)),
                    Err(second_err) => {
                        log::warn!(
                            "case {}: parse failed twice ({first_err}; {second_err})",
                            case.case_id
                        );
                        outcomes.push(CaseOutcome::Failed {
                            case_id: case.case_id.clone(),
                            error: format!("{first_err}; repair: {second_err}"),
                        });
                    }
                }
            }
        }
    }
    Ok(outcomes)
}

fn repair_case(
    case: &ObfuscatedCase,
    template: &PromptTemplate,
    agent: &dyn Agent,
    cfg: &AgentConfig,
    auditor: &LeakAuditor,
    thresholds: &Thresholds,
) -> Result<DetectionResult, ParseFailure> {
    let base = render_prompt(case, template, auditor, thresholds)
        .map_err(|e| ParseFailure::new(Some(case.case_id.clone()), &e.to_string()))?;
    let prompt = format!(
        "{base}\n\nYour previous answer did not validate against the schema. \
         Respond again with exactly one JSON object in the documented shape and \
         nothing else."
    );
    let batch = std::slice::from_ref(case);
    let completion = send_audited(&prompt, batch, agent, cfg, auditor)
        .map_err(|e| ParseFailure::new(Some(case.case_id.clone()), &e.to_string()))?;
    let entries = parse::batch_entries(&completion)
        .map_err(|e| ParseFailure::new(Some(case.case_id.clone()), &e.to_string()))?;
    let entry = entries
        .iter()
        .find(|e| e.get("case_id").and_then(|v| v.as_str()) == Some(&case.case_id))
        .or_else(|| entries.first())
        .ok_or_else(|| ParseFailure::new(Some(case.case_id.clone()), "empty repair response"))?;
    parse_response(entry, Some(&case.case_id), template.allows_null_detection)
}

/// The only path to the provider: re-audits the outgoing prompt, then calls
/// with exponential backoff on transport errors.
fn send_audited(
    prompt: &str,
    batch: &[ObfuscatedCase],
    agent: &dyn Agent,
    cfg: &AgentConfig,
    auditor: &LeakAuditor,
) -> Result<String, HarnessError> {
    let report = auditor.audit(prompt);
    if !report.clean() {
        return Err(HarnessError::LeakDetected(report.matches.len()));
    }
    let request = AgentRequest {
        prompt: prompt.to_string(),
        case_ids: batch.iter().map(|c| c.case_id.clone()).collect(),
    };
    let attempts = cfg.max_attempts.max(1);
    let mut last_error = String::new();
    for attempt in 0..attempts {
        match agent.complete(&request) {
            Ok(text) => return Ok(text),
            Err(e) => {
                last_error = e.to_string();
                if attempt + 1 < attempts {
                    let delay = cfg.backoff_ms.saturating_mul(1 << attempt.min(16));
                    std::thread::sleep(std::time::Duration::from_millis(delay));
                }
            }
        }
    }
    Err(HarnessError::ProviderUnavailable {
        attempts,
        last_error,
    })
}
