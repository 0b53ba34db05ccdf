//! Stage orchestration: ingest -> gex -> rules -> obfuscate -> detect ->
//! outcomes -> validate, each a file-to-file transform under the run
//! directory, with a checksum manifest for idempotent resume.
//!
//! Every stage reads only prior-stage artifacts, so any stage can be rerun
//! standalone. A completed stage whose inputs, config, and outputs all hash
//! the same is skipped; once anything runs, everything downstream runs too.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{AgentMode, RunConfig, TemplateKind};
use crate::gex_engine::{compute_gex, GexError, GexProfile};
use crate::llm_harness::{
    run_batch, Agent, CaseOutcome, DetectionResult, HarnessError, HttpAgent, MockAgent,
    PromptTemplate, RenderError,
};
use crate::market_data::{
    attach_spots, fmt_f64, load_bars_file, load_chain_file, write_bars_file, write_chain_file,
    Calendar, MarketDataError, UnderlyingBar,
};
use crate::obfuscator::{
    obfuscate, read_cases_jsonl, read_provenance_jsonl, write_cases_jsonl,
    write_provenance_jsonl, HintSummary, LeakAuditor, ObfuscateError, ObfuscatedCase,
    ProvenanceKey,
};
use crate::outcome_engine::{compute_outcomes, OutcomeError, OutcomeRecord};
use crate::pattern_rules::{detect_all, RuleSignal};
use crate::stats_validator::{build_report, write_report_tables, ReportInputs, StatsReport};
use crate::synth_market::{generate, write_truth_csv, ScenarioSpec, SynthError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("[{stage}] {source}")]
    MarketData {
        stage: &'static str,
        source: MarketDataError,
    },
    #[error("[{stage}] {source}")]
    Gex {
        stage: &'static str,
        source: GexError,
    },
    #[error("[{stage}] {source}")]
    Obfuscate {
        stage: &'static str,
        source: ObfuscateError,
    },
    #[error("[{stage}] case {case_id}: {source}")]
    Outcome {
        stage: &'static str,
        case_id: String,
        source: OutcomeError,
    },
    #[error("[{stage}] {source}")]
    Harness {
        stage: &'static str,
        source: HarnessError,
    },
    #[error("[{stage}] leak gate: {0} match(es) in {context}", .matches)]
    LeakGate {
        stage: &'static str,
        matches: usize,
        context: String,
    },
    #[error("[{stage}] {source}")]
    Render {
        stage: &'static str,
        source: RenderError,
    },
    #[error("[{stage}] io on {path}: {source}")]
    Io {
        stage: &'static str,
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("[{stage}] bad artifact {path}: {detail}")]
    BadArtifact {
        stage: &'static str,
        path: PathBuf,
        detail: String,
    },
    #[error("[synth] {source}")]
    Synth { source: SynthError },
    #[error("config: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("unknown stage {0:?}")]
    UnknownStage(String),
}

impl PipelineError {
    /// Process exit code: 2 for validation-gate (leak) failures, 3 for
    /// provider failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::LeakGate { .. } => 2,
            PipelineError::Render {
                source: RenderError::LeakDetected { .. },
                ..
            } => 2,
            PipelineError::Harness {
                source: HarnessError::LeakDetected(_),
                ..
            } => 2,
            PipelineError::Harness {
                source: HarnessError::Render(RenderError::LeakDetected { .. }),
                ..
            } => 2,
            PipelineError::Harness {
                source: HarnessError::ProviderUnavailable { .. },
                ..
            } => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Gex,
    Rules,
    Obfuscate,
    Detect,
    Outcomes,
    Validate,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Gex,
        Stage::Rules,
        Stage::Obfuscate,
        Stage::Detect,
        Stage::Outcomes,
        Stage::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Gex => "gex",
            Stage::Rules => "rules",
            Stage::Obfuscate => "obfuscate",
            Stage::Detect => "detect",
            Stage::Outcomes => "outcomes",
            Stage::Validate => "validate",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.iter().copied().find(|st| st.name() == s)
    }

    fn artifacts(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest => &["chain.csv", "bars.csv", "calendar.json"],
            Stage::Gex => &["profiles.jsonl", "gex.csv"],
            Stage::Rules => &["signals.jsonl", "signals.csv"],
            Stage::Obfuscate => &["cases.jsonl", "private/provenance.jsonl"],
            Stage::Detect => &["detections.jsonl", "failures.jsonl"],
            Stage::Outcomes => &["outcomes.csv"],
            Stage::Validate => &["report.json"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
struct StageRecord {
    artifacts: BTreeMap<String, String>,
}

/// Content-addressed record of a run; rewritten after every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_sha256: String,
    stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    fn new(config_hash: &str) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: config_hash.to_string(),
            stages: BTreeMap::new(),
        }
    }
}

fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn config_hash(cfg: &RunConfig) -> String {
    let canonical = cfg.to_toml().unwrap_or_default();
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn io_err<'p>(
    stage: &'static str,
    path: &'p Path,
) -> impl FnOnce(std::io::Error) -> PipelineError + 'p {
    move |source| PipelineError::Io {
        stage,
        path: path.to_path_buf(),
        source,
    }
}

pub struct Pipeline {
    cfg: RunConfig,
    out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub executed: Vec<String>,
    pub skipped: Vec<String>,
    pub out_dir: PathBuf,
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Self {
        let out = cfg.output.dir.clone();
        Self { cfg, out }
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn manifest_path(&self) -> PathBuf {
        self.artifact("manifest.json")
    }

    fn load_manifest(&self) -> Option<Manifest> {
        let text = std::fs::read_to_string(self.manifest_path()).ok()?;
        serde_json::from_str(&text).ok()
    }

    fn save_manifest(&self, manifest: &Manifest) -> Result<(), PipelineError> {
        let path = self.manifest_path();
        let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        std::fs::write(&path, text).map_err(io_err("manifest", &path))
    }

    fn stage_is_current(&self, manifest: &Manifest, stage: Stage) -> bool {
        let Some(record) = manifest.stages.get(stage.name()) else {
            return false;
        };
        for rel in stage.artifacts() {
            let path = self.artifact(rel);
            let Some(expected) = record.artifacts.get(*rel) else {
                return false;
            };
            match sha256_file(&path) {
                Ok(actual) if actual == *expected => {}
                _ => return false,
            }
        }
        true
    }

    fn record_stage(&self, manifest: &mut Manifest, stage: Stage) -> Result<(), PipelineError> {
        let mut record = StageRecord::default();
        for rel in stage.artifacts() {
            let path = self.artifact(rel);
            let hash = sha256_file(&path).map_err(io_err("manifest", &path))?;
            record.artifacts.insert(rel.to_string(), hash);
        }
        manifest.stages.insert(stage.name().to_string(), record);
        self.save_manifest(manifest)
    }

    /// Runs all stages with checksum-based resume.
    pub fn run(&self) -> Result<RunSummary, PipelineError> {
        std::fs::create_dir_all(&self.out).map_err(io_err("run", &self.out))?;
        let hash = config_hash(&self.cfg);
        let mut manifest = match self.load_manifest() {
            Some(m) if m.config_sha256 == hash && m.version == env!("CARGO_PKG_VERSION") => m,
            _ => Manifest::new(&hash),
        };
        let mut executed = Vec::new();
        let mut skipped = Vec::new();
        let mut dirty = false;
        for stage in Stage::ALL {
            if !dirty && self.stage_is_current(&manifest, stage) {
                log::info!("[{}] up to date, skipping", stage.name());
                skipped.push(stage.name().to_string());
                continue;
            }
            dirty = true;
            log::info!("[{}] running", stage.name());
            self.run_stage(stage)?;
            self.record_stage(&mut manifest, stage)?;
            executed.push(stage.name().to_string());
        }
        Ok(RunSummary {
            executed,
            skipped,
            out_dir: self.out.clone(),
        })
    }

    /// Runs one stage on whatever prior artifacts exist.
    pub fn run_stage(&self, stage: Stage) -> Result<(), PipelineError> {
        std::fs::create_dir_all(&self.out).map_err(io_err("run", &self.out))?;
        match stage {
            Stage::Ingest => self.stage_ingest(),
            Stage::Gex => self.stage_gex(),
            Stage::Rules => self.stage_rules(),
            Stage::Obfuscate => self.stage_obfuscate(),
            Stage::Detect => self.stage_detect(),
            Stage::Outcomes => self.stage_outcomes(),
            Stage::Validate => self.stage_validate(),
        }
    }

    // ---- ingest ----------------------------------------------------------

    fn stage_ingest(&self) -> Result<(), PipelineError> {
        const STAGE: &str = "ingest";
        let wrap = |source| PipelineError::MarketData {
            stage: STAGE,
            source,
        };
        let mut snapshots = load_chain_file(&self.cfg.data.chain).map_err(wrap)?;
        let bars = load_bars_file(&self.cfg.data.bars).map_err(wrap)?;
        attach_spots(&mut snapshots, &bars).map_err(wrap)?;
        let calendar = Calendar::from_snapshots(&snapshots, self.cfg.data.expected_trading_days);
        write_chain_file(&self.artifact("chain.csv"), &snapshots).map_err(wrap)?;
        write_bars_file(&self.artifact("bars.csv"), &bars).map_err(wrap)?;
        let cal_path = self.artifact("calendar.json");
        std::fs::write(
            &cal_path,
            serde_json::to_string_pretty(&calendar).expect("calendar serializes"),
        )
        .map_err(io_err(STAGE, &cal_path))?;
        Ok(())
    }

    fn load_ingested(
        &self,
        stage: &'static str,
    ) -> Result<(Vec<crate::market_data::ChainSnapshot>, Vec<UnderlyingBar>, Calendar), PipelineError>
    {
        let wrap = move |source| PipelineError::MarketData { stage, source };
        let mut snapshots = load_chain_file(&self.artifact("chain.csv")).map_err(wrap)?;
        let bars = load_bars_file(&self.artifact("bars.csv")).map_err(wrap)?;
        attach_spots(&mut snapshots, &bars).map_err(wrap)?;
        let cal_path = self.artifact("calendar.json");
        let calendar: Calendar = serde_json::from_str(
            &std::fs::read_to_string(&cal_path).map_err(io_err(stage, &cal_path))?,
        )
        .map_err(|e| PipelineError::BadArtifact {
            stage,
            path: cal_path.clone(),
            detail: e.to_string(),
        })?;
        Ok((snapshots, bars, calendar))
    }

    // ---- gex --------------------------------------------------------------

    fn stage_gex(&self) -> Result<(), PipelineError> {
        const STAGE: &str = "gex";
        let (snapshots, _bars, _calendar) = self.load_ingested(STAGE)?;
        let mut profiles = Vec::with_capacity(snapshots.len());
        for snapshot in &snapshots {
            let profile = compute_gex(
                snapshot,
                self.cfg.greeks.source,
                &self.cfg.thresholds,
                &self.cfg.greeks.grid,
                self.cfg.greeks.rate,
            )
            .map_err(|source| PipelineError::Gex {
                stage: STAGE,
                source,
            })?;
            profiles.push(profile);
        }
        let jsonl_path = self.artifact("profiles.jsonl");
        let mut jsonl = String::new();
        for p in &profiles {
            jsonl.push_str(&serde_json::to_string(p).expect("profile serializes"));
            jsonl.push('\n');
        }
        std::fs::write(&jsonl_path, jsonl).map_err(io_err(STAGE, &jsonl_path))?;

        let mut csv = String::from(
            "date,net_gex,call_gex,put_gex,spot,flip_point,call_conc,top_oi_share,regime,min_dte\n",
        );
        for p in &profiles {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                p.as_of,
                fmt_f64(p.net_gex),
                fmt_f64(p.call_gex),
                fmt_f64(p.put_gex),
                fmt_f64(p.spot),
                p.flip_point.map(fmt_f64).unwrap_or_default(),
                p.call_gamma_concentration.map(fmt_f64).unwrap_or_default(),
                p.top_strike_oi_share.map(fmt_f64).unwrap_or_default(),
                match p.regime {
                    crate::gex_engine::Regime::Negative => "negative",
                    crate::gex_engine::Regime::Neutral => "neutral",
                    crate::gex_engine::Regime::Positive => "positive",
                },
                p.min_dte
            ));
        }
        let csv_path = self.artifact("gex.csv");
        std::fs::write(&csv_path, csv).map_err(io_err(STAGE, &csv_path))?;
        Ok(())
    }

    fn load_profiles(&self, stage: &'static str) -> Result<Vec<GexProfile>, PipelineError> {
        let path = self.artifact("profiles.jsonl");
        let text = std::fs::read_to_string(&path).map_err(io_err(stage, &path))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                serde_json::from_str(l).map_err(|e| PipelineError::BadArtifact {
                    stage,
                    path: path.clone(),
                    detail: e.to_string(),
                })
            })
            .collect()
    }

    // ---- rules ------------------------------------------------------------

    fn stage_rules(&self) -> Result<(), PipelineError> {
        const STAGE: &str = "rules";
        let profiles = self.load_profiles(STAGE)?;
        let mut jsonl = String::new();
        let mut csv = String::from("date,pattern,triggered,criterion,value,threshold,passed\n");
        for profile in &profiles {
            let signals = detect_all(profile, &self.cfg.thresholds);
            #[derive(Serialize)]
            struct Row<'a> {
                date: NaiveDate,
                signals: &'a [RuleSignal],
            }
            jsonl.push_str(
                &serde_json::to_string(&Row {
                    date: profile.as_of,
                    signals: &signals,
                })
                .expect("signals serialize"),
            );
            jsonl.push('\n');
            for s in &signals {
                for c in &s.details {
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        profile.as_of,
                        s.kind.name(),
                        s.triggered,
                        c.criterion,
                        c.value.map(fmt_f64).unwrap_or_default(),
                        fmt_f64(c.threshold),
                        c.passed
                    ));
                }
            }
        }
        let jsonl_path = self.artifact("signals.jsonl");
        std::fs::write(&jsonl_path, jsonl).map_err(io_err(STAGE, &jsonl_path))?;
        let csv_path = self.artifact("signals.csv");
        std::fs::write(&csv_path, csv).map_err(io_err(STAGE, &csv_path))?;
        Ok(())
    }

    fn load_signals(
        &self,
        stage: &'static str,
    ) -> Result<BTreeMap<NaiveDate, Vec<RuleSignal>>, PipelineError> {
        #[derive(Deserialize)]
        struct Row {
            date: NaiveDate,
            signals: Vec<RuleSignal>,
        }
        let path = self.artifact("signals.jsonl");
        let text = std::fs::read_to_string(&path).map_err(io_err(stage, &path))?;
        let mut out = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let row: Row = serde_json::from_str(line).map_err(|e| PipelineError::BadArtifact {
                stage,
                path: path.clone(),
                detail: e.to_string(),
            })?;
            out.insert(row.date, row.signals);
        }
        Ok(out)
    }

    // ---- obfuscate ---------------------------------------------------------

    fn stage_obfuscate(&self) -> Result<(), PipelineError> {
        const STAGE: &str = "obfuscate";
        let profiles = self.load_profiles(STAGE)?;
        let signals = self.load_signals(STAGE)?;
        let (snapshots, _, _) = self.load_ingested(STAGE)?;
        let ticker = snapshots
            .first()
            .map(|s| s.ticker.clone())
            .unwrap_or_else(|| "UNKNOWN".into());

        let auditor = LeakAuditor::new(&self.cfg.obfuscation);
        let window = self.cfg.obfuscation.window.max(1);
        let mut cases = Vec::new();
        let mut keys = Vec::new();
        let dated: Vec<(NaiveDate, GexProfile)> =
            profiles.into_iter().map(|p| (p.as_of, p)).collect();
        for chunk in dated.chunks(window) {
            if chunk.len() < window {
                log::warn!(
                    "[obfuscate] dropping {} trailing day(s) shorter than the window",
                    chunk.len()
                );
                continue;
            }
            let hint = if self.cfg.template.kind == TemplateKind::Biased {
                signals
                    .get(&chunk.last().unwrap().0)
                    .and_then(|s| HintSummary::from_signals(s))
            } else {
                None
            };
            let (case, key) = obfuscate(
                &ticker,
                chunk,
                self.cfg.obfuscation.base_index,
                self.cfg.template.kind,
                hint,
                self.cfg.obfuscation.seed,
            )
            .map_err(|source| PipelineError::Obfuscate {
                stage: STAGE,
                source,
            })?;
            // hard gate: no case leaves this stage unless its serialization
            // is clean
            let report = auditor.audit(&case.serialized());
            if !report.clean() {
                return Err(PipelineError::LeakGate {
                    stage: STAGE,
                    matches: report.matches.len(),
                    context: format!("case {}", case.case_id),
                });
            }
            cases.push(case);
            keys.push(key);
        }

        let cases_path = self.artifact("cases.jsonl");
        write_cases_jsonl(&cases_path, &cases).map_err(io_err(STAGE, &cases_path))?;
        let private_dir = self.artifact("private");
        std::fs::create_dir_all(&private_dir).map_err(io_err(STAGE, &private_dir))?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            let _ = std::fs::set_permissions(&private_dir, std::fs::Permissions::from_mode(0o700));
        }
        let prov_path = private_dir.join("provenance.jsonl");
        write_provenance_jsonl(&prov_path, &keys).map_err(io_err(STAGE, &prov_path))?;
        Ok(())
    }

    fn load_cases(&self, stage: &'static str) -> Result<Vec<ObfuscatedCase>, PipelineError> {
        let path = self.artifact("cases.jsonl");
        read_cases_jsonl(&path).map_err(io_err(stage, &path))
    }

    fn load_provenance(&self, stage: &'static str) -> Result<Vec<ProvenanceKey>, PipelineError> {
        let path = self.artifact("private/provenance.jsonl");
        read_provenance_jsonl(&path).map_err(io_err(stage, &path))
    }

    // ---- detect ------------------------------------------------------------

    fn stage_detect(&self) -> Result<(), PipelineError> {
        const STAGE: &str = "detect";
        let cases = self.load_cases(STAGE)?;
        let provenance = self.load_provenance(STAGE)?;
        let template = PromptTemplate::for_kind(self.cfg.template.kind);
        let auditor = LeakAuditor::new(&self.cfg.obfuscation);

        let mock_agent;
        let http_agent;
        let agent: &dyn Agent = match self.cfg.agent.mode {
            AgentMode::Mock => {
                let signals = self.load_signals(STAGE)?;
                let by_case: BTreeMap<String, Vec<RuleSignal>> = provenance
                    .iter()
                    .filter_map(|key| {
                        signals
                            .get(&key.detection_date())
                            .map(|s| (key.case_id.clone(), s.clone()))
                    })
                    .collect();
                mock_agent = MockAgent::new(by_case);
                &mock_agent
            }
            AgentMode::Live => {
                http_agent = HttpAgent::from_config(&self.cfg.agent).map_err(|e| {
                    PipelineError::Harness {
                        stage: STAGE,
                        source: HarnessError::ProviderUnavailable {
                            attempts: 0,
                            last_error: e.to_string(),
                        },
                    }
                })?;
                &http_agent
            }
        };

        // journal-based resume: previously answered cases are not re-sent
        let detections_path = self.artifact("detections.jsonl");
        let failures_path = self.artifact("failures.jsonl");
        let mut done: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
        if let Ok(text) = std::fs::read_to_string(&detections_path) {
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                if let Ok(d) = serde_json::from_str::<DetectionResult>(line) {
                    done.insert(d.case_id);
                }
            }
        } else {
            std::fs::write(&detections_path, "").map_err(io_err(STAGE, &detections_path))?;
        }
        std::fs::write(&failures_path, "").map_err(io_err(STAGE, &failures_path))?;

        let pending: Vec<ObfuscatedCase> = cases
            .into_iter()
            .filter(|c| !done.contains(&c.case_id))
            .collect();
        if pending.is_empty() {
            return Ok(());
        }

        let outcomes = run_batch(
            &pending,
            &template,
            agent,
            &self.cfg.agent,
            &auditor,
            &self.cfg.thresholds,
        )
        .map_err(|source| PipelineError::Harness {
            stage: STAGE,
            source,
        })?;

        let mut journal = std::fs::OpenOptions::new()
            .append(true)
            .open(&detections_path)
            .map_err(io_err(STAGE, &detections_path))?;
        let mut failures = std::fs::OpenOptions::new()
            .append(true)
            .open(&failures_path)
            .map_err(io_err(STAGE, &failures_path))?;
        for outcome in &outcomes {
            match outcome {
                CaseOutcome::Detection(d) => {
                    writeln!(journal, "{}", serde_json::to_string(d).expect("serializes"))
                        .map_err(io_err(STAGE, &detections_path))?;
                }
                CaseOutcome::Failed { case_id, error } => {
                    writeln!(
                        failures,
                        "{}",
                        serde_json::json!({ "case_id": case_id, "error": error })
                    )
                    .map_err(io_err(STAGE, &failures_path))?;
                }
            }
        }
        journal.flush().map_err(io_err(STAGE, &detections_path))?;
        failures.flush().map_err(io_err(STAGE, &failures_path))?;
        Ok(())
    }

    fn load_detections(&self, stage: &'static str) -> Result<Vec<DetectionResult>, PipelineError> {
        let path = self.artifact("detections.jsonl");
        let text = std::fs::read_to_string(&path).map_err(io_err(stage, &path))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                serde_json::from_str(l).map_err(|e| PipelineError::BadArtifact {
                    stage,
                    path: path.clone(),
                    detail: e.to_string(),
                })
            })
            .collect()
    }

    // ---- outcomes ----------------------------------------------------------

    fn stage_outcomes(&self) -> Result<(), PipelineError> {
        const STAGE: &str = "outcomes";
        let detections = self.load_detections(STAGE)?;
        let provenance = self.load_provenance(STAGE)?;
        let profiles = self.load_profiles(STAGE)?;
        let (_, bars, _) = self.load_ingested(STAGE)?;
        let date_by_case: BTreeMap<&str, NaiveDate> = provenance
            .iter()
            .map(|k| (k.case_id.as_str(), k.detection_date()))
            .collect();
        let profile_by_date: BTreeMap<NaiveDate, &GexProfile> =
            profiles.iter().map(|p| (p.as_of, p)).collect();

        let mut records = Vec::with_capacity(detections.len());
        for d in &detections {
            let Some(&date) = date_by_case.get(d.case_id.as_str()) else {
                return Err(PipelineError::BadArtifact {
                    stage: STAGE,
                    path: self.artifact("private/provenance.jsonl"),
                    detail: format!("case {} has no provenance", d.case_id),
                });
            };
            let Some(profile) = profile_by_date.get(&date) else {
                return Err(PipelineError::BadArtifact {
                    stage: STAGE,
                    path: self.artifact("profiles.jsonl"),
                    detail: format!("no profile for {date}"),
                });
            };
            match compute_outcomes(d, &bars, date, profile, &self.cfg.outcomes) {
                Ok(record) => records.push(record),
                Err(OutcomeError::TruncatedHorizon { .. }) => {
                    records.push(OutcomeRecord::truncated(&d.case_id));
                }
                Err(source) => {
                    return Err(PipelineError::Outcome {
                        stage: STAGE,
                        case_id: d.case_id.clone(),
                        source,
                    })
                }
            }
        }

        let path = self.artifact("outcomes.csv");
        let mut writer = csv::Writer::from_path(&path).map_err(|e| PipelineError::BadArtifact {
            stage: STAGE,
            path: path.clone(),
            detail: e.to_string(),
        })?;
        for r in &records {
            writer.serialize(r).map_err(|e| PipelineError::BadArtifact {
                stage: STAGE,
                path: path.clone(),
                detail: e.to_string(),
            })?;
        }
        writer.flush().map_err(io_err(STAGE, &path))?;
        Ok(())
    }

    fn load_outcomes(&self, stage: &'static str) -> Result<Vec<OutcomeRecord>, PipelineError> {
        let path = self.artifact("outcomes.csv");
        let mut reader =
            csv::Reader::from_path(&path).map_err(|e| PipelineError::BadArtifact {
                stage,
                path: path.clone(),
                detail: e.to_string(),
            })?;
        reader
            .deserialize()
            .map(|row| {
                row.map_err(|e| PipelineError::BadArtifact {
                    stage,
                    path: path.clone(),
                    detail: e.to_string(),
                })
            })
            .collect()
    }

    // ---- validate ----------------------------------------------------------

    fn stage_validate(&self) -> Result<(), PipelineError> {
        const STAGE: &str = "validate";
        let (_, bars, calendar) = self.load_ingested(STAGE)?;
        let profiles = self.load_profiles(STAGE)?;
        let detections = self.load_detections(STAGE)?;
        let outcomes = self.load_outcomes(STAGE)?;
        let provenance = self.load_provenance(STAGE)?;
        let detection_dates: BTreeMap<String, NaiveDate> = provenance
            .iter()
            .map(|k| (k.case_id.clone(), k.detection_date()))
            .collect();

        let report = build_report(&ReportInputs {
            calendar: &calendar,
            expected_days: self.cfg.data.expected_trading_days,
            coverage_threshold: self.cfg.data.coverage_threshold,
            profiles: &profiles,
            bars: &bars,
            detections: &detections,
            outcomes: &outcomes,
            detection_dates: &detection_dates,
            mode: self.cfg.outcomes.mode,
            cfg: &self.cfg.stats,
        });
        let path = self.artifact("report.json");
        std::fs::write(
            &path,
            serde_json::to_string_pretty(&report).expect("report serializes"),
        )
        .map_err(io_err(STAGE, &path))?;
        write_report_tables(&self.artifact("tables"), &report)
            .map_err(io_err(STAGE, &self.artifact("tables")))?;
        Ok(())
    }

    pub fn read_report(&self) -> Result<StatsReport, PipelineError> {
        let path = self.artifact("report.json");
        let text = std::fs::read_to_string(&path).map_err(io_err("report", &path))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::BadArtifact {
            stage: "report",
            path,
            detail: e.to_string(),
        })
    }
}

/// Writes a synthetic corpus in the ingest schemas plus truth.csv.
pub fn run_synth(spec: &ScenarioSpec, out_dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(out_dir).map_err(io_err("synth", out_dir))?;
    let market = generate(spec).map_err(|source| PipelineError::Synth { source })?;
    let chain = out_dir.join("chain.csv");
    let bars = out_dir.join("bars.csv");
    let truth = out_dir.join("truth.csv");
    write_chain_file(&chain, &market.snapshots).map_err(|source| PipelineError::MarketData {
        stage: "synth",
        source,
    })?;
    write_bars_file(&bars, &market.bars).map_err(|source| PipelineError::MarketData {
        stage: "synth",
        source,
    })?;
    write_truth_csv(&truth, &market.truth).map_err(io_err("synth", &truth))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth_market::ScenarioRegime;

    fn config_for(dir: &Path, regime: ScenarioRegime, days: u32, seed: u64) -> RunConfig {
        let data_dir = dir.join("data");
        let spec = ScenarioSpec::new(regime, days, seed);
        run_synth(&spec, &data_dir).unwrap();
        let mut cfg = RunConfig::default();
        cfg.data.chain = data_dir.join("chain.csv");
        cfg.data.bars = data_dir.join("bars.csv");
        cfg.output.dir = dir.join("run");
        cfg.stats.bootstrap_iterations = 500;
        cfg
    }

    #[test]
    fn full_mock_run_produces_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config_for(dir.path(), ScenarioRegime::PersistentNegative, 12, 5);
        let pipeline = Pipeline::new(cfg);
        let summary = pipeline.run().unwrap();
        assert_eq!(summary.executed.len(), 7);
        for stage in Stage::ALL {
            for artifact in stage.artifacts() {
                assert!(
                    pipeline.artifact(artifact).exists(),
                    "missing {artifact} after run"
                );
            }
        }
        let report = pipeline.read_report().unwrap();
        // every day triggers, so the mock detects on every eligible case
        assert_eq!(report.funnel.detection_rate, 1.0);
    }

    #[test]
    fn rerun_unchanged_skips_everything_with_identical_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config_for(dir.path(), ScenarioRegime::Flat, 10, 8);
        let pipeline = Pipeline::new(cfg);
        pipeline.run().unwrap();
        let manifest_before = std::fs::read(pipeline.manifest_path()).unwrap();
        let summary = pipeline.run().unwrap();
        assert!(summary.executed.is_empty(), "{:?}", summary.executed);
        assert_eq!(summary.skipped.len(), 7);
        let manifest_after = std::fs::read(pipeline.manifest_path()).unwrap();
        assert_eq!(manifest_before, manifest_after);
    }

    #[test]
    fn tampered_intermediate_triggers_reruns() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config_for(dir.path(), ScenarioRegime::Flat, 10, 8);
        let pipeline = Pipeline::new(cfg);
        pipeline.run().unwrap();
        // tamper with a mid-pipeline artifact
        let gex_path = pipeline.artifact("gex.csv");
        let mut text = std::fs::read_to_string(&gex_path).unwrap();
        text.push_str("tampered\n");
        std::fs::write(&gex_path, text).unwrap();
        let summary = pipeline.run().unwrap();
        assert!(summary.executed.contains(&"gex".to_string()));
        // ingest is untouched and stays skipped
        assert!(summary.skipped.contains(&"ingest".to_string()));
    }

    #[test]
    fn missing_bars_file_names_the_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config_for(dir.path(), ScenarioRegime::Flat, 8, 2);
        cfg.data.bars = dir.path().join("nope.csv");
        let pipeline = Pipeline::new(cfg);
        let err = pipeline.run().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[ingest]"), "{msg}");
        assert_eq!(err.exit_code(), 1);
    }
}
