//! Run configuration: every tunable the pipeline reads lives here, with
//! defaults matching the reference thresholds, so a sensitivity sweep is a
//! config edit rather than a code change. Serialized as TOML with sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("failed to serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
}

/// Every rule and regime threshold in one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Net GEX below this is a Negative regime (dollars).
    pub regime_negative: f64,
    /// Net GEX above this is a Positive regime (dollars).
    pub regime_positive: f64,
    /// Gamma-positioning: net GEX must be below this.
    pub gp_net_gex: f64,
    /// Gamma-positioning: |spot/flip - 1| must be below this.
    pub gp_flip_proximity: f64,
    /// Gamma-positioning: dominant-side gamma concentration must exceed this.
    pub gp_concentration: f64,
    /// Pinning: windowed OI share at the top strike must exceed this.
    pub pin_oi_share: f64,
    /// Pinning: |spot/top_strike - 1| must be below this.
    pub pin_strike_proximity: f64,
    /// Pinning: minimum DTE must be strictly below this.
    pub pin_max_dte: u32,
    /// 0DTE: |net GEX| must exceed this (dollars).
    pub zdte_gex_magnitude: f64,
    /// 0DTE: dominant-side gamma concentration must exceed this.
    pub zdte_concentration: f64,
    /// Concentration metrics: strike window as a fraction of spot.
    pub concentration_window: f64,
    /// Concentration metrics: contracts with DTE strictly below this count as near-dated.
    pub near_dte: u32,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            regime_negative: -2e9,
            regime_positive: 2e9,
            gp_net_gex: -2e9,
            gp_flip_proximity: 0.02,
            gp_concentration: 0.70,
            pin_oi_share: 0.80,
            pin_strike_proximity: 0.01,
            pin_max_dte: 5,
            zdte_gex_magnitude: 3e9,
            zdte_concentration: 0.75,
            concentration_window: 0.02,
            near_dte: 5,
        }
    }
}

/// Hypothetical-spot grid used for flip-point location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    /// Lower bound as a fraction of spot.
    pub lo: f64,
    /// Upper bound as a fraction of spot.
    pub hi: f64,
    /// Number of grid points (>= 2).
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lo: 0.90,
            hi: 1.10,
            points: 81,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreeksSource {
    /// Use the gamma column from the chain file; error when absent.
    Vendor,
    /// Recompute gamma from spot/strike/IV/DTE.
    Recompute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GreeksConfig {
    pub source: GreeksSource,
    /// Annualized risk-free rate used for recomputed Greeks.
    pub rate: f64,
    pub grid: GridSpec,
}

impl Default for GreeksConfig {
    fn default() -> Self {
        Self {
            source: GreeksSource::Recompute,
            rate: 0.0,
            grid: GridSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub chain: PathBuf,
    pub bars: PathBuf,
    /// Expected trading days for coverage reporting.
    pub expected_trading_days: u32,
    /// Coverage ratio below this fails the coverage report.
    pub coverage_threshold: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            chain: PathBuf::from("data/chain.csv"),
            bars: PathBuf::from("data/bars.csv"),
            expected_trading_days: 253,
            coverage_threshold: 0.80,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObfuscationConfig {
    /// Salt for case-id hashing; fixed seed gives stable ids across runs.
    pub seed: u64,
    /// Trading days per case.
    pub window: usize,
    /// k in the INDEX_k alias.
    pub base_index: u32,
    /// Ticker symbols the leak audit scans for.
    pub tickers: Vec<String>,
    /// Event keywords the leak audit scans for.
    pub events: Vec<String>,
    /// Extra blocklist terms appended to the audit.
    pub blocklist: Vec<String>,
    /// Optional file with one extra blocklist term per line.
    pub blocklist_file: Option<PathBuf>,
}

impl Default for ObfuscationConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            window: 1,
            base_index: 1,
            tickers: ["SPY", "SPX", "QQQ", "VIX"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            events: ["Fed", "FOMC", "earnings", "CPI", "OpEx", "election"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            blocklist: Vec::new(),
            blocklist_file: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    #[default]
    Unbiased,
    Biased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct TemplateConfig {
    pub kind: TemplateKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AgentMode {
    #[default]
    Mock,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub mode: AgentMode,
    pub endpoint: String,
    pub model: String,
    /// Cases per API call.
    pub batch_size: usize,
    /// Concurrent batch requests.
    pub max_in_flight: usize,
    /// Transport attempts before ProviderUnavailable.
    pub max_attempts: u32,
    /// Base backoff; attempt k sleeps base * 2^k.
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    /// Environment variable holding the API key (never stored in config).
    pub api_key_env: String,
    pub temperature: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            mode: AgentMode::Mock,
            endpoint: String::new(),
            model: String::new(),
            batch_size: 10,
            max_in_flight: 1,
            max_attempts: 3,
            backoff_ms: 500,
            timeout_secs: 60,
            api_key_env: "LLM_API_KEY".to_string(),
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaterializationMode {
    #[default]
    Strict,
    Broad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutcomeConfig {
    pub mode: MaterializationMode,
    /// C1: |T+1 return| must exceed this.
    pub c1_move: f64,
    /// C3: |T+1 close / top strike - 1| must be below this.
    pub c3_strike_proximity: f64,
    /// C4: T+1 intraday range must exceed this.
    pub c4_range: f64,
}

impl Default for OutcomeConfig {
    fn default() -> Self {
        Self {
            mode: MaterializationMode::Strict,
            c1_move: 0.003,
            c3_strike_proximity: 0.005,
            c4_range: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsConfig {
    pub bootstrap_iterations: u32,
    pub bootstrap_seed: u64,
    /// Family-wise significance level before Bonferroni division.
    pub alpha: f64,
    /// Null detection probability for binomial tests.
    pub null_rate: f64,
    pub granger_max_lag: usize,
    /// Transaction cost per round-trip trade (fraction).
    pub tc_per_trade: f64,
    /// Alternative detection rate for the power table.
    pub power_p1: f64,
    pub power_targets: Vec<f64>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            bootstrap_iterations: 10_000,
            bootstrap_seed: 1337,
            alpha: 0.05,
            null_rate: 0.5,
            granger_max_lag: 5,
            tc_per_trade: 0.0005,
            power_p1: 0.70,
            power_targets: vec![0.80, 0.95],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs/last"),
        }
    }
}

/// Top-level pipeline configuration; round-trips losslessly through TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub data: DataConfig,
    pub greeks: GreeksConfig,
    pub thresholds: Thresholds,
    pub obfuscation: ObfuscationConfig,
    pub template: TemplateConfig,
    pub agent: AgentConfig,
    pub outcomes: OutcomeConfig,
    pub stats: StatsConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        let text = self.to_toml()?;
        std::fs::write(path, text).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
