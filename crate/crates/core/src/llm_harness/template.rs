//! Prompt templates and placeholder substitution.
//!
//! The unbiased template shows raw structure and asks the neutral question;
//! null detections are valid. The biased template adds a regime label and any
//! rule-screen hints, and refuses null answers. Both are fully obfuscated;
//! rendering audits the case serialization first and the finished prompt
//! after, and refuses to produce leaking text.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::config::{TemplateKind, Thresholds};
use crate::gex_engine::Regime;
use crate::obfuscator::{format_gex_billions, LeakAuditor, ObfuscatedCase, StructuralDay};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("unfilled placeholder remains in rendered prompt: {0}")]
    UnfilledPlaceholder(String),
    #[error("leak detected in {context}: {matches} match(es), first: {first}")]
    LeakDetected {
        context: &'static str,
        matches: usize,
        first: String,
    },
}

const OUTPUT_SCHEMA: &str = r#"Respond with a single JSON object and nothing else:
{"detections": [{"case_id": "<id>", "detected": true|false, "pattern": "gamma_positioning"|"stock_pinning"|"zero_dte_hedging"|null, "who": "<constrained actor>", "whom": "<affected party>", "what": "<forced action and mechanism>", "confidence": 0-100, "horizon": "T+1"|"T+2"|"T+3"}]}
One entry per case, in input order."#;

const UNBIASED_BODY: &str = "You are looking at end-of-day structural positioning data for {{index_alias}}, an unnamed equity index. Sessions are relative (Day T+N); dollar figures are aggregate dealer gamma exposure.\n\n{{case_blocks}}\n\nDo you detect any structural market mechanics? For each case, identify the economic actor under constraint, the participants affected, and the action the constraint forces. If you detect no pattern for a case, answer with detected = false and confidence = 0.\n\n{{output_schema}}";

const BIASED_BODY: &str = "You are looking at end-of-day structural positioning data for {{index_alias}}, an unnamed equity index. Sessions are relative (Day T+N); dollar figures are aggregate dealer gamma exposure. Each case carries its gamma regime label and any rule-based screens it tripped.\n\n{{case_blocks}}\n\nWhat patterns do you see? For every case name the most likely dealer-constraint pattern and the actor/affected/forced-action chain. A null detection is not an accepted answer: every entry must have detected = true and a named pattern.\n\n{{output_schema}}";

const DAY_LINE: &str = "Day T+{{rel_day}} | Net GEX: {{net_gex}} | Call GEX: {{call_gex}} | Put GEX: {{put_gex}} | Spot: {{spot}} | Flip point: {{flip_point}} | Call concentration: {{call_conc}} | Top-strike OI share: {{top_oi_share}} | Min DTE: {{rel_dte}}";

/// A renderable prompt shape; `body` and `day_line` carry `{{name}}`
/// placeholders.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub kind: TemplateKind,
    pub body: String,
    pub day_line: String,
    pub allows_null_detection: bool,
}

impl PromptTemplate {
    pub fn unbiased() -> Self {
        Self {
            kind: TemplateKind::Unbiased,
            body: UNBIASED_BODY.to_string(),
            day_line: DAY_LINE.to_string(),
            allows_null_detection: true,
        }
    }

    pub fn biased() -> Self {
        Self {
            kind: TemplateKind::Biased,
            body: BIASED_BODY.to_string(),
            day_line: DAY_LINE.to_string(),
            allows_null_detection: false,
        }
    }

    pub fn for_kind(kind: TemplateKind) -> Self {
        match kind {
            TemplateKind::Unbiased => Self::unbiased(),
            TemplateKind::Biased => Self::biased(),
        }
    }
}

fn substitute(template: &str, vars: &BTreeMap<&str, String>) -> String {
    let mut out = template.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{{{key}}}}}"), value);
    }
    out
}

fn fmt_price(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "n/a".into())
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:.1}%", x * 100.0))
        .unwrap_or_else(|| "n/a".into())
}

fn render_day(day: &StructuralDay, day_line: &str) -> String {
    let vars: BTreeMap<&str, String> = BTreeMap::from([
        ("rel_day", day.rel_day.to_string()),
        ("net_gex", format_gex_billions(day.net_gex)),
        ("call_gex", format_gex_billions(day.call_gex)),
        ("put_gex", format_gex_billions(day.put_gex)),
        ("spot", format!("{:.2}", day.spot)),
        ("flip_point", fmt_price(day.flip_point)),
        ("call_conc", fmt_pct(day.call_conc)),
        ("top_oi_share", fmt_pct(day.top_oi_share)),
        ("rel_dte", day.rel_dte.to_string()),
    ]);
    substitute(day_line, &vars)
}

fn regime_for_case(case: &ObfuscatedCase, thresholds: &Thresholds) -> Regime {
    let last = case.days.last().expect("case has at least one day");
    Regime::classify(last.net_gex, thresholds)
}

fn render_case_block(
    case: &ObfuscatedCase,
    template: &PromptTemplate,
    thresholds: &Thresholds,
) -> String {
    let mut block = format!("Case {}:\n", case.case_id);
    if template.kind == TemplateKind::Biased {
        block.push_str(&format!(
            "Regime: {}\n",
            regime_for_case(case, thresholds).label()
        ));
        if let Some(hint) = &case.hint {
            let names: Vec<&str> = hint.patterns.iter().map(|p| p.name()).collect();
            block.push_str(&format!("Rule screens tripped: {}\n", names.join(", ")));
        }
    }
    for day in &case.days {
        block.push_str(&render_day(day, &template.day_line));
        block.push('\n');
    }
    block
}

fn finish(
    cases: &[ObfuscatedCase],
    template: &PromptTemplate,
    auditor: &LeakAuditor,
    thresholds: &Thresholds,
) -> Result<String, RenderError> {
    for case in cases {
        let report = auditor.audit(&case.serialized());
        if !report.clean() {
            return Err(RenderError::LeakDetected {
                context: "case serialization",
                matches: report.matches.len(),
                first: report.matches[0].text.clone(),
            });
        }
    }
    let blocks: Vec<String> = cases
        .iter()
        .map(|c| render_case_block(c, template, thresholds))
        .collect();
    let alias = cases
        .first()
        .map(|c| c.index_alias.clone())
        .unwrap_or_else(|| "INDEX_1".into());
    let vars: BTreeMap<&str, String> = BTreeMap::from([
        ("index_alias", alias),
        ("case_blocks", blocks.join("\n").trim_end().to_string()),
        ("output_schema", OUTPUT_SCHEMA.to_string()),
    ]);
    let text = substitute(&template.body, &vars);
    if let Some(pos) = text.find("{{") {
        let end = text[pos..].find("}}").map(|e| pos + e + 2).unwrap_or(text.len());
        return Err(RenderError::UnfilledPlaceholder(text[pos..end].to_string()));
    }
    let report = auditor.audit(&text);
    if !report.clean() {
        return Err(RenderError::LeakDetected {
            context: "rendered prompt",
            matches: report.matches.len(),
            first: report.matches[0].text.clone(),
        });
    }
    Ok(text)
}

/// Renders a single-case prompt, leak-gated on both the case serialization
/// and the final text.
pub fn render_prompt(
    case: &ObfuscatedCase,
    template: &PromptTemplate,
    auditor: &LeakAuditor,
    thresholds: &Thresholds,
) -> Result<String, RenderError> {
    finish(std::slice::from_ref(case), template, auditor, thresholds)
}

/// Renders one prompt carrying a whole batch of cases.
pub fn render_batch_prompt(
    cases: &[ObfuscatedCase],
    template: &PromptTemplate,
    auditor: &LeakAuditor,
    thresholds: &Thresholds,
) -> Result<String, RenderError> {
    finish(cases, template, auditor, thresholds)
}
