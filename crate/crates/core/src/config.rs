//! TOML configuration shared by the library pipeline and the command line.
//! Every key is optional; [`Config::default`] is the single table of
//! defaults, and `ghsim config` prints it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{Placement, SimulationConfig};
use crate::error::{Error, Result};
use crate::ingest::{build_slice, Metadata};
use crate::metrics::{DEFAULT_RBO_DEPTH, DEFAULT_RBO_P};
use crate::models::bayesian::fit_bayesian;
use crate::models::embedding::{fit_lpe_population, GfParams};
use crate::models::newentity::{attach_new_entity_behavior, fit_new_entity_models, ExplorerConfig};
use crate::models::stationary::{fit_null, fit_population, NULL_SHIFT};
use crate::models::{Fitted, FittedModel, ModelKind};
use crate::synth::SynthConfig;
use crate::types::{EventLog, TimeWindow};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub seed: u64,
    /// Graph factorization settings for the LPE model.
    pub gf: GfParams,
    /// Wrap per-user policies with S3D-scored exploration of unseen
    /// repositories.
    pub new_entity: bool,
    pub explorer: ExplorerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub seed: u64,
    pub partitions: usize,
    pub tick_seconds: i64,
    pub placement: Placement,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { seed: 0, partitions: 1, tick_seconds: 3600, placement: Placement::Graph }
    }
}

impl SimulateConfig {
    pub fn for_window(&self, window: TimeWindow) -> SimulationConfig {
        SimulationConfig {
            window,
            seed: self.seed,
            partitions: self.partitions,
            tick_seconds: self.tick_seconds,
            placement: self.placement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub rbo_p: f64,
    pub rbo_depth: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig { rbo_p: DEFAULT_RBO_P, rbo_depth: DEFAULT_RBO_DEPTH }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub fit: FitConfig,
    pub simulate: SimulateConfig,
    pub evaluate: EvaluateConfig,
    pub synth: SynthConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Config::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Fits `kind` on `log`. For the null model `window` is the test window
/// to predict and the slice covers the replayed period before it; for every
/// other model `window` is the training window.
pub fn fit_model(kind: ModelKind, log: &EventLog, window: TimeWindow, meta: Option<&Metadata>, cfg: &FitConfig) -> Result<Fitted> {
    if kind == ModelKind::Null {
        let null = fit_null(log, window)?;
        let slice = build_slice(log, TimeWindow::new(window.start - NULL_SHIFT, window.start), meta)?;
        return Ok(Fitted { model: FittedModel::Null(null), slice });
    }
    let slice = build_slice(log, window, meta)?;
    let pop = match kind {
        ModelKind::Bayes => {
            let model = FittedModel::Bayesian(fit_bayesian(&slice)?);
            return Ok(Fitted { model, slice });
        }
        ModelKind::Lpe => fit_lpe_population(&slice, &cfg.gf)?,
        _ => fit_population(&slice, kind)?,
    };
    let pop = if cfg.new_entity {
        let models = fit_new_entity_models(&slice, cfg.seed)?;
        attach_new_entity_behavior(pop, &models, &slice, &cfg.explorer)
    } else {
        pop
    };
    Ok(Fitted { model: FittedModel::Population(pop), slice })
}
