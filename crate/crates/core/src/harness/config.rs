//! Run configuration for the benchmark pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::RelabelConfig;
use crate::env::{EnvConfig, DEMO_NOISE_SCALE};
use crate::error::{Error, Result};
use crate::finetune::{FinetuneConfig, RewardKind, Variant};
use crate::imitation::{EvalConfig, ILConfig};
use crate::policy::ExecutorConfig;

/// Hidden layer sizes of the full-scale policies.
pub const FULL_SCALE_HIDDEN: [usize; 2] = [256, 256];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GoalsConfig {
    /// Number of evaluation goals.
    pub count: usize,
    pub seed: u64,
}

impl Default for GoalsConfig {
    fn default() -> Self {
        Self { count: 17, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub count: usize,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            count: 400,
            noise_scale: DEMO_NOISE_SCALE,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Goal window of the relabeled flat GCBC dataset.
    pub gcbc_window: usize,
    /// Joint-change threshold of the oracle segmentation baseline.
    pub oracle_threshold: f64,
    pub oracle: bool,
    pub nearest_neighbor: bool,
    pub flat_finetune: bool,
    /// Variant used when fine-tuning the flat GCBC policy.
    pub flat_variant: Variant,
    pub pretrain_low_level: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            gcbc_window: 260,
            oracle_threshold: 0.3,
            oracle: true,
            nearest_neighbor: true,
            flat_finetune: true,
            flat_variant: Variant::Npg,
            pretrain_low_level: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistillConfig {
    pub enabled: bool,
    /// Fine-tuned policies whose successful rollouts are distilled.
    pub variant: Variant,
    pub rollouts_per_goal: usize,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            variant: Variant::Iril,
            rollouts_per_goal: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    /// Low-level windows trained at the imitation stage; the high window
    /// stays at `relabel.high_window`.
    pub windows: Vec<usize>,
    /// Reward functions compared by fine-tuning.
    pub rewards: Vec<RewardKind>,
    /// The reward ablation fine-tunes on the first this-many goals.
    pub goals: usize,
    pub variant: Variant,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            windows: vec![10, 30, 90],
            rewards: vec![RewardKind::Sparse, RewardKind::Euclidean, RewardKind::ElementwiseSparse],
            goals: 5,
            variant: Variant::Iril,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    /// Allows hidden layers other than 256x256 for quick runs.
    pub desk_scale: bool,
    /// Seeds of the relay methods.
    pub seeds: Vec<u64>,
    /// Seeds of the baselines.
    pub baseline_seeds: Vec<u64>,
    pub variants: Vec<Variant>,
    /// Save fine-tuned networks every this-many iterations (0: final only).
    pub checkpoint_every: usize,
    pub env: EnvConfig,
    pub goals: GoalsConfig,
    pub demos: DemoConfig,
    pub relabel: RelabelConfig,
    pub il: ILConfig,
    pub exec: ExecutorConfig,
    pub finetune: FinetuneConfig,
    pub eval: EvalConfig,
    pub baselines: BaselineConfig,
    pub distill: DistillConfig,
    pub ablation: AblationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("runs/default"),
            desk_scale: false,
            seeds: vec![0, 1, 2],
            baseline_seeds: vec![0, 1],
            variants: Variant::ALL.to_vec(),
            checkpoint_every: 0,
            env: EnvConfig::default(),
            goals: GoalsConfig::default(),
            demos: DemoConfig::default(),
            relabel: RelabelConfig::default(),
            il: ILConfig {
                hidden: FULL_SCALE_HIDDEN.to_vec(),
                ..ILConfig::default()
            },
            exec: ExecutorConfig::default(),
            finetune: FinetuneConfig {
                finetune_high: true,
                ..FinetuneConfig::default()
            },
            eval: EvalConfig::default(),
            baselines: BaselineConfig::default(),
            distill: DistillConfig::default(),
            ablation: AblationConfig::default(),
        }
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidConfig(msg.into()))
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let spec = crate::env::EnvSpec::new(&self.env)?;
        if self.exec.episode_length != self.env.episode_length {
            return bad(format!(
                "exec.episode_length ({}) must equal env.episode_length ({})",
                self.exec.episode_length, self.env.episode_length
            ));
        }
        self.exec.validate()?;
        self.relabel.validate()?;
        self.il.validate()?;
        self.finetune.validate()?;
        if !self.desk_scale && self.il.hidden != FULL_SCALE_HIDDEN {
            return bad(format!(
                "il.hidden is {:?}; sizes other than {FULL_SCALE_HIDDEN:?} need desk_scale = true",
                self.il.hidden
            ));
        }
        if self.seeds.is_empty() {
            return bad("seeds must list at least one seed");
        }
        if self.variants.is_empty() {
            return bad("variants must list at least one variant");
        }
        if self.goals.count == 0 {
            return bad("goals.count must be at least 1");
        }
        let available = crate::env::all_compound_goals(&spec)?.len();
        if self.goals.count > available {
            return Err(Error::TooManyGoals {
                requested: self.goals.count,
                available,
            });
        }
        if self.demos.count == 0 {
            return bad("demos.count must be at least 1");
        }
        if !(self.demos.noise_scale.is_finite() && self.demos.noise_scale >= 0.0) {
            return bad("demos.noise_scale must be non-negative");
        }
        if self.eval.episodes_per_goal == 0 {
            return bad("eval.episodes_per_goal must be at least 1");
        }
        if self.baselines.gcbc_window == 0 {
            return bad("baselines.gcbc_window must be at least 1");
        }
        if !(self.baselines.oracle_threshold > 0.0) {
            return bad("baselines.oracle_threshold must be positive");
        }
        if self.baselines.flat_variant == Variant::Iril {
            return bad("baselines.flat_variant must be npg-rpl or dapg-rpl");
        }
        if self.distill.enabled && self.distill.rollouts_per_goal == 0 {
            return bad("distill.rollouts_per_goal must be at least 1");
        }
        if self.distill.enabled && !self.variants.contains(&self.distill.variant) {
            return bad("distill.variant must be one of the fine-tuned variants");
        }
        if self.ablation.windows.contains(&0) {
            return bad("ablation.windows must be positive");
        }
        if let Some(&w) = self.ablation.windows.iter().find(|&&w| w > self.relabel.high_window) {
            return bad(format!(
                "ablation.windows entry {w} exceeds relabel.high_window ({})",
                self.relabel.high_window
            ));
        }
        if self.ablation.goals > self.goals.count {
            return bad("ablation.goals cannot exceed goals.count");
        }
        Ok(())
    }

    /// Parse and validate TOML text. Errors name the offending line when the
    /// key can be found in `text`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let at = e
                .span()
                .map(|span| format!("line {}: ", line_of_offset(text, span.start)))
                .unwrap_or_default();
            Error::InvalidConfig(format!("{at}{}", e.message()))
        })?;
        cfg.validate().map_err(|e| match e {
            Error::InvalidConfig(msg) => match locate_key(text, &msg) {
                Some(line) => Error::InvalidConfig(format!("line {line}: {msg}")),
                None => Error::InvalidConfig(msg),
            },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::InvalidConfig(format!("configuration file {} not found", path.display()))
            }
            _ => Error::Io(e),
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes to TOML")
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// First dotted key mentioned in `msg`, such as `finetune.reward.epsilon`.
fn dotted_key(msg: &str) -> Option<&str> {
    msg.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '.'))
        .map(|tok| tok.trim_end_matches('.'))
        .find(|tok| tok.contains('.') && tok.starts_with(|c: char| c.is_ascii_lowercase()))
}

/// 1-based line of the key named in `msg`: inside its `[section]` table
/// when there is one, else at top level.
fn locate_key(text: &str, msg: &str) -> Option<usize> {
    let path = dotted_key(msg).or_else(|| msg.split_whitespace().next())?;
    let (section, key) = match path.rsplit_once('.') {
        Some((s, k)) => (s, k),
        None => ("", path),
    };
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = header.trim().to_string();
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else { continue };
        let lhs = lhs.trim();
        let full = if current.is_empty() {
            lhs.to_string()
        } else {
            format!("{current}.{lhs}")
        };
        if full == path || (current == section && lhs == key) {
            return Some(i + 1);
        }
        // inline table such as `reward = { epsilon = 0 }`
        if !section.is_empty() && format!("{full}.{key}") == path {
            return Some(i + 1);
        }
    }
    None
}
