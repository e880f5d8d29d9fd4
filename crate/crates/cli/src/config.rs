//! Experiment configuration: a TOML file with `[scenario]`, `[model]`,
//! `[training]` and `[baseline]` tables. Every field has a default, so an
//! empty file (or none at all) describes the small-scenario experiment.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use cf_assign::baselines::DEFAULT_BUDGET;
use cf_assign::gnn::GnnConfig;
use cf_assign::scenario::Scenario;
use cf_assign::training::TrainConfig;
use serde::{Deserialize, Serialize};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Small,
    Large,
    /// Read from the `key=value` file named by `scenario.file`.
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Written on save; ignored on load.
    pub tool_version: String,
    pub seed: u64,
    pub out: PathBuf,
    pub scenario: ScenarioBlock,
    pub model: ModelBlock,
    pub training: TrainingBlock,
    pub baseline: BaselineBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioBlock {
    pub preset: Preset,
    /// Scenario file for the custom preset, relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    pub train_size: usize,
    pub test_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_power: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rician_variance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelBlock {
    pub layers: usize,
    pub hidden: usize,
    pub message: usize,
    /// `full` or `knn:<k>`.
    pub topology: String,
    /// `soft_union` or `sum`.
    pub combine: String,
    /// `pair` or `user`.
    pub gap: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingBlock {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_inner_iters: usize,
    pub max_outer_iters: usize,
    pub convergence_window: usize,
    pub convergence_tol: f64,
    pub delta_nu: f64,
    pub entropy_tol: f64,
    pub violation_tol: f64,
    pub eval_batch: usize,
    pub test_interval: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineBlock {
    /// Largest number of assignments the exhaustive search may enumerate.
    pub budget: u64,
    /// Random assignments averaged per test sample.
    pub random_draws: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            tool_version: TOOL_VERSION.to_string(),
            seed: 0,
            out: PathBuf::from("run"),
            scenario: ScenarioBlock::default(),
            model: ModelBlock::default(),
            training: TrainingBlock::default(),
            baseline: BaselineBlock::default(),
        }
    }
}

impl Default for ScenarioBlock {
    fn default() -> Self {
        ScenarioBlock {
            preset: Preset::Small,
            file: None,
            train_size: 8192,
            test_size: 1024,
            noise_power: None,
            gain_scale: None,
            rician_variance: None,
        }
    }
}

impl Default for ModelBlock {
    fn default() -> Self {
        let m = GnnConfig::default();
        ModelBlock {
            layers: m.layers,
            hidden: m.hidden,
            message: m.message,
            topology: m.topology.to_string(),
            combine: m.combine.to_string(),
            gap: m.gap.to_string(),
        }
    }
}

impl Default for TrainingBlock {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainingBlock {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            max_inner_iters: t.max_inner_iters,
            max_outer_iters: t.max_outer_iters,
            convergence_window: t.convergence_window,
            convergence_tol: t.convergence_tol,
            delta_nu: t.delta_nu,
            entropy_tol: t.entropy_tol,
            violation_tol: t.violation_tol,
            eval_batch: t.eval_batch,
            test_interval: t.test_interval,
        }
    }
}

impl Default for BaselineBlock {
    fn default() -> Self {
        BaselineBlock { budget: DEFAULT_BUDGET, random_draws: 100 }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Small => "small",
            Preset::Large => "large",
            Preset::Custom => "custom",
        })
    }
}

impl ExperimentConfig {
    /// Parses a config file; a relative `scenario.file` is resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config.tool_version = TOOL_VERSION.to_string();
        if let Some(file) = &config.scenario.file {
            if file.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                config.scenario.file = Some(base.join(file));
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let block = &self.scenario;
        let mut sc = match block.preset {
            Preset::Small => Scenario::small(),
            Preset::Large => Scenario::large(),
            Preset::Custom => {
                let Some(file) = &block.file else {
                    bail!("the custom scenario needs `scenario.file`");
                };
                let text =
                    std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
                Scenario::from_kv_str(&text)?
            }
        };
        if let Some(v) = block.noise_power {
            sc.noise_power = v;
        }
        if let Some(v) = block.gain_scale {
            sc.gain_scale = v;
        }
        if let Some(v) = block.rician_variance {
            sc.rician_variance = v;
        }
        sc.validate()?;
        Ok(sc)
    }

    pub fn model(&self) -> Result<GnnConfig> {
        let m = &self.model;
        let config = GnnConfig {
            layers: m.layers,
            hidden: m.hidden,
            message: m.message,
            topology: parse(&m.topology, "model.topology")?,
            combine: parse(&m.combine, "model.combine")?,
            gap: parse(&m.gap, "model.gap")?,
        };
        if config.layers == 0 || config.hidden == 0 || config.message == 0 {
            bail!("model.layers, model.hidden and model.message must be positive");
        }
        Ok(config)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.training;
        let config = TrainConfig {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            max_inner_iters: t.max_inner_iters,
            max_outer_iters: t.max_outer_iters,
            convergence_window: t.convergence_window,
            convergence_tol: t.convergence_tol,
            delta_nu: t.delta_nu,
            entropy_tol: t.entropy_tol,
            violation_tol: t.violation_tol,
            eval_batch: t.eval_batch,
            test_interval: t.test_interval,
            seed: self.seed,
            model: self.model()?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn train_seed(&self) -> u64 {
        self.seed
    }

    pub fn test_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    /// Checks everything that can be checked without touching data.
    pub fn validate(&self) -> Result<()> {
        self.scenario()?;
        self.train_config()?;
        if self.scenario.train_size == 0 || self.scenario.test_size == 0 {
            bail!("scenario.train_size and scenario.test_size must be positive");
        }
        if self.baseline.random_draws == 0 {
            bail!("baseline.random_draws must be positive");
        }
        Ok(())
    }
}

fn parse<T: FromStr<Err = String>>(value: &str, key: &str) -> Result<T> {
    value.parse().map_err(|e| anyhow::anyhow!("{key}: {e}"))
}
