//! gexlab: dealer gamma-exposure analytics and obfuscation-tested LLM
//! detection, driven stage by stage over plain-file artifacts.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use gexlab_core::config::{AgentMode, RunConfig, TemplateKind};
use gexlab_core::pipeline::{run_synth, Pipeline, PipelineError, Stage};
use gexlab_core::synth_market::{OiProfile, ScenarioRegime, ScenarioSpec};

#[derive(Parser)]
#[command(name = "gexlab", version, about = "Gamma-exposure structure, obfuscated cases, detection harness, and statistical validation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output (run) directory; overrides [output].dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Prompt template; overrides [template].kind.
    #[arg(long, value_parser = parse_template)]
    template: Option<TemplateKind>,
    /// Agent backend; overrides [agent].mode.
    #[arg(long, value_parser = parse_agent)]
    agent: Option<AgentMode>,
    /// Master seed; overrides the obfuscation salt and bootstrap seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trading days per obfuscated case; overrides [obfuscation].window.
    #[arg(long)]
    window: Option<usize>,
}

fn parse_template(s: &str) -> Result<TemplateKind, String> {
    match s {
        "unbiased" => Ok(TemplateKind::Unbiased),
        "biased" => Ok(TemplateKind::Biased),
        _ => Err("expected unbiased or biased".into()),
    }
}

fn parse_agent(s: &str) -> Result<AgentMode, String> {
    match s {
        "mock" => Ok(AgentMode::Mock),
        "live" => Ok(AgentMode::Live),
        _ => Err("expected mock or live".into()),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline (or one stage with --stage), resuming completed
    /// stages by checksum.
    Run {
        #[command(flatten)]
        common: PipelineArgs,
        /// Run only this stage: ingest|gex|rules|obfuscate|detect|outcomes|validate.
        #[arg(long)]
        stage: Option<String>,
    },
    /// Load and canonicalize the chain and bar files.
    Ingest(PipelineArgs),
    /// Compute gamma-exposure profiles from the ingested chain.
    Gex(PipelineArgs),
    /// Evaluate the rule detectors over the profiles.
    Rules(PipelineArgs),
    /// Strip temporal and identity context into cases.
    Obfuscate(PipelineArgs),
    /// Query the agent over the obfuscated cases.
    Detect(PipelineArgs),
    /// Score forward-return outcomes for each detection.
    Outcomes(PipelineArgs),
    /// Build the statistical report.
    Validate(PipelineArgs),
    /// Re-render the report tables and print a summary.
    Report(PipelineArgs),
    /// Generate a synthetic corpus with known ground truth.
    Synth {
        /// persistent-negative|alternating|pinned|zero-dte-spike|flat
        #[arg(long)]
        regime: String,
        #[arg(long, default_value_t = 242)]
        days: u32,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500.0)]
        base_spot: f64,
        #[arg(long, default_value_t = 0.18)]
        vol: f64,
        /// Use the 2024-like net-GEX calibration (mean -$19.87B).
        #[arg(long)]
        calibrate_2024: bool,
    },
}

fn load_config(args: &PipelineArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)
        .with_context(|| format!("loading config {}", args.config.display()))?;
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    if let Some(template) = args.template {
        cfg.template.kind = template;
    }
    if let Some(agent) = args.agent {
        cfg.agent.mode = agent;
    }
    if let Some(seed) = args.seed {
        cfg.obfuscation.seed = seed;
        cfg.stats.bootstrap_seed = seed;
    }
    if let Some(window) = args.window {
        cfg.obfuscation.window = window.max(1);
    }
    Ok(cfg)
}

fn run_pipeline_command(args: &PipelineArgs, stage: Option<&str>) -> Result<(), PipelineError> {
    let cfg = match load_config(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    };
    let pipeline = Pipeline::new(cfg);
    match stage {
        Some(name) => {
            let stage =
                Stage::parse(name).ok_or_else(|| PipelineError::UnknownStage(name.to_string()))?;
            pipeline.run_stage(stage)?;
            println!("stage {} complete -> {}", stage.name(), pipeline.out_dir().display());
        }
        None => {
            let summary = pipeline.run()?;
            println!(
                "run complete -> {} (executed: {}; skipped: {})",
                summary.out_dir.display(),
                if summary.executed.is_empty() {
                    "none".to_string()
                } else {
                    summary.executed.join(", ")
                },
                if summary.skipped.is_empty() {
                    "none".to_string()
                } else {
                    summary.skipped.join(", ")
                },
            );
        }
    }
    Ok(())
}

fn print_report_summary(pipeline: &Pipeline) -> Result<(), PipelineError> {
    let report = pipeline.read_report()?;
    let pct = |v: f64| format!("{:.1}%", v * 100.0);
    let opt_pct = |v: Option<f64>| v.map(pct).unwrap_or_else(|| "n/a".into());
    println!("funnel: {} tests -> {} detections ({}) -> {} materialized (accuracy {}, overall {})",
        report.funnel.tests,
        report.funnel.detections,
        pct(report.funnel.detection_rate),
        report.funnel.materialized,
        opt_pct(report.funnel.accuracy),
        opt_pct(report.funnel.overall_success),
    );
    for p in &report.per_pattern {
        println!(
            "  {:<18} rate {} [{} - {}]  accuracy {}  p={:.2e}{}",
            p.pattern.name(),
            pct(p.detection.rate),
            pct(p.detection.ci_low),
            pct(p.detection.ci_high),
            opt_pct(p.accuracy),
            p.p_value,
            if p.significant { " *" } else { "" }
        );
    }
    for q in &report.quarterly {
        println!(
            "  {}: days {}  detection {}  accuracy {}  mean_ret {}  alpha {}",
            q.label,
            q.days,
            pct(q.detection_rate),
            opt_pct(q.accuracy),
            opt_pct(q.mean_return),
            q.net_alpha
                .map(|a| format!("{:.1} bps", a * 1e4))
                .unwrap_or_else(|| "n/a".into())
        );
    }
    if let Some(t) = &report.trend_test {
        println!("  quarterly trend: z = {:.3}, p = {:.3}", t.z, t.p_value);
    }
    for g in report.granger.iter().filter(|g| g.f_stat.is_some()) {
        println!(
            "  granger {:?} lag {}: F = {:.3}, p = {:.4}{}",
            g.differencing,
            g.lag,
            g.f_stat.unwrap(),
            g.p_value.unwrap(),
            if g.significant { " *" } else { "" }
        );
    }
    Ok(())
}

fn real_main() -> Result<(), PipelineError> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // keep exit code 2 reserved for validation-gate failures
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match &cli.command {
        Command::Run { common, stage } => run_pipeline_command(common, stage.as_deref()),
        Command::Ingest(a) => run_pipeline_command(a, Some("ingest")),
        Command::Gex(a) => run_pipeline_command(a, Some("gex")),
        Command::Rules(a) => run_pipeline_command(a, Some("rules")),
        Command::Obfuscate(a) => run_pipeline_command(a, Some("obfuscate")),
        Command::Detect(a) => run_pipeline_command(a, Some("detect")),
        Command::Outcomes(a) => run_pipeline_command(a, Some("outcomes")),
        Command::Validate(a) => run_pipeline_command(a, Some("validate")),
        Command::Report(a) => {
            let cfg = match load_config(a) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    std::process::exit(1);
                }
            };
            let pipeline = Pipeline::new(cfg);
            print_report_summary(&pipeline)
        }
        Command::Synth {
            regime,
            days,
            seed,
            out,
            base_spot,
            vol,
            calibrate_2024,
        } => {
            let Some(regime) = ScenarioRegime::parse(regime) else {
                eprintln!("error: unknown regime {regime:?}");
                std::process::exit(1);
            };
            let mut spec = ScenarioSpec::new(regime, *days, *seed);
            spec.base_spot = *base_spot;
            spec.vol = *vol;
            if *calibrate_2024 {
                spec.oi_profile = OiProfile::calibrated_2024();
            }
            run_synth(&spec, out)?;
            println!(
                "synthetic {} corpus: {} day(s) -> {}",
                regime.name(),
                days,
                out.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
