//! Strict schema validation of provider completions. The classification is
//! always derived from confidence here, never read from the model.

use serde_json::Value;
use thiserror::Error;

use super::{classify, DetectionResult, Horizon};
use crate::pattern_rules::PatternKind;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse failure{}: {reason}", case_id.as_deref().map(|c| format!(" for case {c}")).unwrap_or_default())]
pub struct ParseFailure {
    pub case_id: Option<String>,
    pub reason: String,
}

impl ParseFailure {
    pub fn new(case_id: Option<String>, reason: &str) -> Self {
        Self {
            case_id,
            reason: reason.to_string(),
        }
    }
}

/// Extracts the first balanced JSON object from free text, skipping string
/// contents and escapes.
pub fn extract_first_json_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Pulls the per-case entry list out of a raw completion: the first JSON
/// object must carry a `detections` array (a bare single entry is accepted
/// as a one-element list).
pub fn batch_entries(completion: &str) -> Result<Vec<Value>, ParseFailure> {
    let raw = extract_first_json_object(completion)
        .ok_or_else(|| ParseFailure::new(None, "no JSON object in completion"))?;
    let value: Value = serde_json::from_str(raw)
        .map_err(|e| ParseFailure::new(None, &format!("invalid JSON: {e}")))?;
    match value.get("detections") {
        Some(Value::Array(entries)) => Ok(entries.clone()),
        Some(other) => Err(ParseFailure::new(
            None,
            &format!("detections is not an array: {other}"),
        )),
        None => {
            if value.get("case_id").is_some() {
                Ok(vec![value])
            } else {
                Err(ParseFailure::new(None, "missing detections array"))
            }
        }
    }
}

fn required_str<'v>(
    entry: &'v Value,
    field: &str,
    case_id: &Option<String>,
) -> Result<&'v str, ParseFailure> {
    entry
        .get(field)
        .and_then(|v| v.as_str())
        .ok_or_else(|| ParseFailure::new(case_id.clone(), &format!("missing or non-string {field}")))
}

fn non_empty(
    value: &str,
    field: &str,
    case_id: &Option<String>,
) -> Result<String, ParseFailure> {
    let trimmed = value.trim();
    if trimmed.is_empty() {
        return Err(ParseFailure::new(
            case_id.clone(),
            &format!("{field} must be non-empty when detected"),
        ));
    }
    Ok(trimmed.to_string())
}

/// Validates one per-case payload against the output schema. Confidence is
/// clamped into [0, 100] with a warning; everything else is strict.
pub fn parse_response(
    entry: &Value,
    expected_case_id: Option<&str>,
    allows_null_detection: bool,
) -> Result<DetectionResult, ParseFailure> {
    let case_hint = expected_case_id.map(|s| s.to_string());
    if !entry.is_object() {
        return Err(ParseFailure::new(case_hint, "entry is not a JSON object"));
    }
    let case_id = required_str(entry, "case_id", &case_hint)?.to_string();
    if let Some(expected) = expected_case_id {
        if case_id != expected {
            return Err(ParseFailure::new(
                case_hint,
                &format!("case_id mismatch: got {case_id}, expected {expected}"),
            ));
        }
    }
    let hint = Some(case_id.clone());
    let detected = entry
        .get("detected")
        .and_then(|v| v.as_bool())
        .ok_or_else(|| ParseFailure::new(hint.clone(), "missing or non-bool detected"))?;
    let raw_confidence = entry
        .get("confidence")
        .and_then(|v| v.as_f64())
        .ok_or_else(|| ParseFailure::new(hint.clone(), "missing or non-numeric confidence"))?;
    let mut confidence = if !(0.0..=100.0).contains(&raw_confidence) {
        log::warn!("case {case_id}: confidence {raw_confidence} out of range, clamping");
        raw_confidence.clamp(0.0, 100.0)
    } else {
        raw_confidence
    }
    .round() as u8;

    if detected {
        let pattern_str = required_str(entry, "pattern", &hint)?;
        let pattern = PatternKind::parse(pattern_str).ok_or_else(|| {
            ParseFailure::new(hint.clone(), &format!("unknown pattern {pattern_str:?}"))
        })?;
        let who = non_empty(required_str(entry, "who", &hint)?, "who", &hint)?;
        let whom = non_empty(required_str(entry, "whom", &hint)?, "whom", &hint)?;
        let what = non_empty(required_str(entry, "what", &hint)?, "what", &hint)?;
        let horizon = match required_str(entry, "horizon", &hint)? {
            "T+1" => Horizon::T1,
            "T+2" => Horizon::T2,
            "T+3" => Horizon::T3,
            other => {
                return Err(ParseFailure::new(
                    hint,
                    &format!("horizon must be T+1..T+3, got {other:?}"),
                ))
            }
        };
        Ok(DetectionResult {
            case_id,
            detected: true,
            pattern: Some(pattern),
            who,
            whom,
            what,
            confidence,
            horizon,
            classification: classify(confidence),
        })
    } else {
        if !allows_null_detection {
            return Err(ParseFailure::new(
                hint,
                "null detection not allowed under the biased template",
            ));
        }
        if confidence != 0 {
            log::warn!("case {case_id}: null detection with confidence {confidence}, forcing 0");
            confidence = 0;
        }
        Ok(DetectionResult {
            case_id,
            detected: false,
            pattern: None,
            who: String::new(),
            whom: String::new(),
            what: String::new(),
            confidence,
            horizon: Horizon::T1,
            classification: classify(confidence),
        })
    }
}
