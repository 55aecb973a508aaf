//! Agent behaviour models. Per-user policies implement [`AgentModel`];
//! the Bayesian pipeline is a population-level generator and the null
//! model is a pre-timestamped replay.

pub mod bayesian;
pub mod embedding;
pub mod newentity;
pub mod powerlaw;
pub mod stationary;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hub::HubView;
use crate::sampling::SimRng;
use crate::types::{EventType, Timestamp};

use self::bayesian::BayesianModel;
use self::embedding::LpePolicy;
use self::newentity::ExplorerPolicy;
use self::stationary::{BaselinePolicy, GroundEventPolicy, NullModel, PreferentialPolicy};

/// One agent decision: an event type and the repository it targets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub event_type: EventType,
    pub repo_id: String,
}

impl Action {
    pub fn new(event_type: EventType, repo_id: impl Into<String>) -> Self {
        Action { event_type, repo_id: repo_id.into() }
    }
}

/// Uniform stepping interface for fitted per-user policies. Policies are
/// immutable; the engine applies the effects of the returned action.
pub trait AgentModel {
    fn step(&self, rng: &mut SimRng, hub: &dyn HubView, now: Timestamp) -> Result<Action>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    Null,
    Baseline,
    Ground,
    Pref,
    Lpe,
    Bayes,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Null,
        ModelKind::Baseline,
        ModelKind::Ground,
        ModelKind::Pref,
        ModelKind::Lpe,
        ModelKind::Bayes,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Null => "null",
            ModelKind::Baseline => "baseline",
            ModelKind::Ground => "ground",
            ModelKind::Pref => "pref",
            ModelKind::Lpe => "lpe",
            ModelKind::Bayes => "bayes",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| crate::error::Error::Config(format!("unknown model {s:?}")))
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AgentPolicy {
    Baseline(BaselinePolicy),
    Ground(GroundEventPolicy),
    Preferential(PreferentialPolicy),
    Lpe(LpePolicy),
    Explorer(Box<ExplorerPolicy>),
}

impl AgentModel for AgentPolicy {
    fn step(&self, rng: &mut SimRng, hub: &dyn HubView, now: Timestamp) -> Result<Action> {
        match self {
            AgentPolicy::Baseline(p) => p.step(rng, hub, now),
            AgentPolicy::Ground(p) => p.step(rng, hub, now),
            AgentPolicy::Preferential(p) => p.step(rng, hub, now),
            AgentPolicy::Lpe(p) => p.step(rng, hub, now),
            AgentPolicy::Explorer(p) => p.step(rng, hub, now),
        }
    }
}

/// Fitted policies for every simulated user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub kind: ModelKind,
    pub policies: BTreeMap<String, AgentPolicy>,
}

/// Any fitted model the engine can run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedModel {
    Null(NullModel),
    Population(Population),
    Bayesian(BayesianModel),
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Null(_) => ModelKind::Null,
            FittedModel::Population(p) => p.kind,
            FittedModel::Bayesian(_) => ModelKind::Bayes,
        }
    }
}

/// A fitted model together with the training slice the engine starts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fitted {
    pub model: FittedModel,
    pub slice: crate::ingest::TrainingSlice,
}

impl Fitted {
    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }
}
