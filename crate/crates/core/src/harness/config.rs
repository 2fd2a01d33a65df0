use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::envs::{Env, LeanCraftParams, MirrorChainParams, NUM_OBJECTIVES};
use crate::morl::{RLConfig, SourceKind};
use crate::resymnet::RewardTrainConfig;

/// Every experiment variant, including the ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Oracle,
    Baseline,
    Prism,
    WoResidual,
    WoDense,
    WoEnsemble,
    WoRefinement,
    WoLoss,
    Uniform,
    Random,
}

impl Variant {
    pub const ALL: [Variant; 10] = [
        Variant::Oracle,
        Variant::Baseline,
        Variant::Prism,
        Variant::WoResidual,
        Variant::WoDense,
        Variant::WoEnsemble,
        Variant::WoRefinement,
        Variant::WoLoss,
        Variant::Uniform,
        Variant::Random,
    ];

    /// Canonical name, also used in file names.
    pub fn name(self) -> &'static str {
        match self {
            Variant::Oracle => "oracle",
            Variant::Baseline => "baseline",
            Variant::Prism => "prism",
            Variant::WoResidual => "wo-residual",
            Variant::WoDense => "wo-dense",
            Variant::WoEnsemble => "wo-ensemble",
            Variant::WoRefinement => "wo-refinement",
            Variant::WoLoss => "wo-loss",
            Variant::Uniform => "uniform",
            Variant::Random => "random",
        }
    }

    pub fn source_kind(self) -> SourceKind {
        match self {
            Variant::Oracle => SourceKind::Oracle,
            Variant::Baseline => SourceKind::Baseline,
            Variant::Uniform => SourceKind::Uniform,
            Variant::Random => SourceKind::Random,
            _ => SourceKind::Prism,
        }
    }

    pub fn uses_ensemble(self) -> bool {
        self.source_kind() == SourceKind::Prism
    }

    /// Whether the SymReg term is switched on at the configured λ.
    pub fn uses_symreg(self) -> bool {
        self != Variant::WoLoss
    }

    pub fn refines(self) -> bool {
        self.uses_ensemble() && self != Variant::WoRefinement
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = ConfigError;

    /// Accepts canonical names and the `w/o-…` spelling of the ablations.
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let key = s.trim().to_ascii_lowercase().replace("w/o", "wo");
        if let Some(v) = Variant::ALL.iter().find(|v| v.name() == key) {
            return Ok(*v);
        }
        let nearest = Variant::ALL
            .iter()
            .min_by_key(|v| strsim::levenshtein(v.name(), &key))
            .expect("variant list is not empty");
        Err(ConfigError::InvalidEnum {
            field: "variant",
            value: s.to_string(),
            suggestion: nearest.name().to_string(),
        })
    }
}

/// Configuration problems; each kind has its own stable code.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("config file {path} not found")]
    MissingFile { path: String },
    #[error("malformed config: {message}")]
    Syntax { message: String },
    #[error("invalid {field} \"{value}\"; did you mean \"{suggestion}\"?")]
    InvalidEnum {
        field: &'static str,
        value: String,
        suggestion: String,
    },
    #[error("{field} = {value} is outside {range}")]
    OutOfRange {
        field: &'static str,
        value: String,
        range: &'static str,
    },
    #[error("invalid config: {message}")]
    Invalid { message: String },
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::MissingFile { .. } => "config-missing-file",
            ConfigError::Syntax { .. } => "config-syntax",
            ConfigError::InvalidEnum { .. } => "config-invalid-enum",
            ConfigError::OutOfRange { .. } => "config-out-of-range",
            ConfigError::Invalid { .. } => "config-invalid",
        }
    }
}

/// Either a bare environment name (defaults applied) or a full parameter
/// object tagged with `name`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum EnvField {
    Name(String),
    Full(Env),
}

/// Reward-model architecture and training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardModelConfig {
    pub hidden_dim: usize,
    pub num_residual_blocks: usize,
    pub dropout_rate: f64,
    pub ensemble_size: usize,
    pub train: RewardTrainConfig,
}

impl Default for RewardModelConfig {
    fn default() -> Self {
        RewardModelConfig {
            hidden_dim: 256,
            num_residual_blocks: 2,
            dropout_rate: 0.3,
            ensemble_size: 3,
            train: RewardTrainConfig::default(),
        }
    }
}

/// Interaction budget before scaling. Explicit values bypass the multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetConfig {
    pub initial_episodes: Option<usize>,
    pub refine_episodes: Option<usize>,
    pub steps_per_cycle: Option<usize>,
    pub cycles: usize,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            initial_episodes: None,
            refine_episodes: None,
            steps_per_cycle: None,
            cycles: 2,
        }
    }
}

pub const BASE_INITIAL_EPISODES: usize = 1000;
pub const BASE_REFINE_EPISODES: usize = 1000;
pub const BASE_STEPS_PER_CYCLE: usize = 100_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    env: EnvField,
    variant: String,
    seeds: Vec<u64>,
    #[serde(default)]
    p_rel: f64,
    #[serde(default)]
    sparse_channel: usize,
    #[serde(default)]
    lambda: Option<f64>,
    #[serde(default = "default_weights")]
    n_weights: usize,
    #[serde(default = "default_scale")]
    scale: f64,
    #[serde(default = "default_out")]
    out_dir: PathBuf,
    #[serde(default)]
    rl: Option<RLConfig>,
    #[serde(default)]
    reward_model: RewardModelConfig,
    #[serde(default)]
    budget: BudgetConfig,
    #[serde(default)]
    save_artifacts: bool,
}

fn default_weights() -> usize {
    11
}
fn default_scale() -> f64 {
    0.05
}
fn default_out() -> PathBuf {
    PathBuf::from("results")
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: Env,
    pub variant: Variant,
    pub p_rel: f64,
    pub sparse_channel: usize,
    pub lambda: f64,
    pub n_weights: usize,
    pub seeds: Vec<u64>,
    pub scale: f64,
    pub out_dir: PathBuf,
    pub rl: RLConfig,
    pub reward_model: RewardModelConfig,
    pub budget: BudgetConfig,
    pub save_artifacts: bool,
}

pub const DEFAULT_LAMBDA: f64 = 0.01;

impl RunConfig {
    /// A config with every default applied.
    pub fn new(env: Env, variant: Variant, seeds: Vec<u64>) -> Self {
        RunConfig {
            env,
            variant,
            p_rel: 0.0,
            sparse_channel: 0,
            lambda: DEFAULT_LAMBDA,
            n_weights: default_weights(),
            seeds,
            scale: default_scale(),
            out_dir: default_out(),
            rl: RLConfig::default(),
            reward_model: RewardModelConfig::default(),
            budget: BudgetConfig::default(),
            save_artifacts: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.p_rel) {
            return Err(ConfigError::OutOfRange {
                field: "p_rel",
                value: self.p_rel.to_string(),
                range: "[0, 1]",
            });
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(ConfigError::OutOfRange {
                field: "lambda",
                value: self.lambda.to_string(),
                range: "[0, ∞)",
            });
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(ConfigError::OutOfRange {
                field: "scale",
                value: self.scale.to_string(),
                range: "(0, ∞)",
            });
        }
        if self.sparse_channel >= NUM_OBJECTIVES {
            return Err(ConfigError::OutOfRange {
                field: "sparse_channel",
                value: self.sparse_channel.to_string(),
                range: "{0, 1}",
            });
        }
        if self.n_weights < 2 {
            return Err(ConfigError::OutOfRange {
                field: "n_weights",
                value: self.n_weights.to_string(),
                range: "[2, ∞)",
            });
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid {
                message: "seeds must not be empty".into(),
            });
        }
        if self.budget.cycles == 0 {
            return Err(ConfigError::Invalid {
                message: "budget.cycles must be at least 1".into(),
            });
        }
        if self.reward_model.ensemble_size == 0 || self.reward_model.hidden_dim == 0 {
            return Err(ConfigError::Invalid {
                message: "reward model needs at least one member and a positive width".into(),
            });
        }
        if !(0.0..1.0).contains(&self.reward_model.dropout_rate) {
            return Err(ConfigError::OutOfRange {
                field: "reward_model.dropout_rate",
                value: self.reward_model.dropout_rate.to_string(),
                range: "[0, 1)",
            });
        }
        let invalid = |e: crate::PrismError| ConfigError::Invalid { message: e.to_string() };
        self.env.validate().map_err(invalid)?;
        self.rl.validate().map_err(invalid)?;
        self.reward_model.train.validate().map_err(invalid)?;
        Ok(())
    }

    fn scaled(&self, explicit: Option<usize>, base: usize) -> usize {
        explicit.unwrap_or_else(|| ((base as f64 * self.scale).round() as usize).max(1))
    }

    /// Random-policy episodes for the initial reward-model dataset.
    pub fn initial_episodes(&self) -> usize {
        self.scaled(self.budget.initial_episodes, BASE_INITIAL_EPISODES)
    }

    /// Policy-collected episodes added at each refinement.
    pub fn refine_episodes(&self) -> usize {
        self.scaled(self.budget.refine_episodes, BASE_REFINE_EPISODES)
    }

    pub fn steps_per_cycle(&self) -> usize {
        self.scaled(self.budget.steps_per_cycle, BASE_STEPS_PER_CYCLE)
    }

    /// The RL settings for this run: λ from the top level (zero for the
    /// loss ablation) and the episode budget from the step budget, counted
    /// per weight policy in full-horizon episodes.
    pub fn effective_rl(&self) -> RLConfig {
        let horizon = self.env.horizon().max(1);
        let per_cycle = self.steps_per_cycle().div_ceil(horizon);
        RLConfig {
            lambda: if self.variant.uses_symreg() { self.lambda } else { 0.0 },
            episodes_per_policy: per_cycle * self.budget.cycles,
            ..self.rl.clone()
        }
    }
}

/// Parses a JSON document into a validated config.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Syntax | serde_json::error::Category::Eof => ConfigError::Syntax {
            message: e.to_string(),
        },
        _ => ConfigError::Invalid { message: e.to_string() },
    })?;
    let env = match raw.env {
        EnvField::Full(env) => env,
        EnvField::Name(name) => match name.trim().to_ascii_lowercase().as_str() {
            "leancraft" => Env::LeanCraft(LeanCraftParams::training()),
            "mirrorchain" => Env::MirrorChain(MirrorChainParams::default()),
            _ => {
                let nearest = ["leancraft", "mirrorchain"]
                    .into_iter()
                    .min_by_key(|n| strsim::levenshtein(n, &name))
                    .expect("two names");
                return Err(ConfigError::InvalidEnum {
                    field: "env",
                    value: name,
                    suggestion: nearest.to_string(),
                });
            }
        },
    };
    let cfg = RunConfig {
        env,
        variant: raw.variant.parse()?,
        p_rel: raw.p_rel,
        sparse_channel: raw.sparse_channel,
        lambda: raw.lambda.unwrap_or(DEFAULT_LAMBDA),
        n_weights: raw.n_weights,
        seeds: raw.seeds,
        scale: raw.scale,
        out_dir: raw.out_dir,
        rl: raw.rl.unwrap_or_default(),
        reward_model: raw.reward_model,
        budget: raw.budget,
        save_artifacts: raw.save_artifacts,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ConfigError::MissingFile {
            path: path.display().to_string(),
        },
        _ => ConfigError::Invalid {
            message: format!("cannot read {}: {e}", path.display()),
        },
    })?;
    parse_config_str(&text)
}
