use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expert::ExpertConfig;
use crate::formation::{FormationControlConfig, ShapeBounds};
use crate::learning::InputScaling;
use crate::world::{AttackerParams, EnvConfig};

/// Where each defender's shape-parameter rate comes from.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// PSO search only, seeded uniformly and from the previous winner.
    Expert,
    /// Actor network output, no search.
    #[default]
    Actor,
    /// PSO search seeded by the actor; the expert's rate is applied.
    ActorSeededExpert,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Expert => "expert",
            Mode::Actor => "actor",
            Mode::ActorSeededExpert => "actor_seeded_expert",
        }
    }

    pub fn uses_expert(&self) -> bool {
        !matches!(self, Mode::Actor)
    }

    pub fn needs_actor(&self) -> bool {
        !matches!(self, Mode::Expert)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expert" => Ok(Mode::Expert),
            "actor" => Ok(Mode::Actor),
            "actor_seeded_expert" => Ok(Mode::ActorSeededExpert),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode {other:?} (expected expert, actor or actor_seeded_expert)"
            ))),
        }
    }
}

/// Learning rates, cadence and buffer sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    pub alpha_actor: f64,
    pub alpha_model: f64,
    /// Physics steps between updates.
    pub train_every: usize,
    pub batch_size: usize,
    pub model_capacity: usize,
    pub actor_capacity: usize,
    /// Diagonal loss weights on `[p_x, p_y, v_x, v_y]`.
    pub model_loss_weights: [f64; 4],
    /// Diagonal loss weights on the five rate components.
    pub actor_loss_weights: [f64; 5],
    /// Also train the unstructured comparison model on the same batches.
    pub train_baseline: bool,
    pub alpha_baseline: f64,
    pub scaling: InputScaling,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            alpha_actor: 0.001,
            alpha_model: 0.01,
            train_every: 10,
            batch_size: 16,
            model_capacity: 20_000,
            actor_capacity: 20_000,
            model_loss_weights: [1.0, 1.0, 50.0, 50.0],
            actor_loss_weights: [1.0; 5],
            train_baseline: false,
            alpha_baseline: 1e-4,
            scaling: InputScaling::default(),
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("learning: {m}")));
        if !(self.alpha_actor > 0.0 && self.alpha_model > 0.0 && self.alpha_baseline > 0.0) {
            return bad("learning rates must be > 0");
        }
        if self.train_every == 0 || self.batch_size == 0 {
            return bad("train_every and batch_size must be >= 1");
        }
        if self.model_capacity == 0 || self.actor_capacity == 0 {
            return bad("buffer capacities must be >= 1");
        }
        if self
            .model_loss_weights
            .iter()
            .chain(&self.actor_loss_weights)
            .any(|w| *w < 0.0)
        {
            return bad("loss weights must be >= 0");
        }
        Ok(())
    }
}

/// Anchor of each defender's initial center estimate.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCenter {
    /// The protected center, known to every defender: all estimates start
    /// equal.
    #[default]
    Protected,
    /// The defender's own position.
    Own,
}

/// Shape every defender starts from. The direction is the bearing from the
/// initial center to the attacker.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialShape {
    pub center: InitialCenter,
    /// m
    pub zeta: f64,
    /// rad
    pub beta: f64,
}

impl Default for InitialShape {
    fn default() -> Self {
        Self {
            center: InitialCenter::Protected,
            zeta: 1.5,
            beta: 0.0,
        }
    }
}

/// Spawn geometry.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpawnConfig {
    /// Defender annulus around the protected center, measured from its rim, m.
    pub defender_inner_gap: f64,
    pub defender_outer_gap: f64,
    /// Minimum defender spacing, m.
    pub defender_spacing: f64,
    /// Attacker band width along the field edge, m.
    pub attacker_band: f64,
    /// Minimum attacker distance from the protected center, m.
    pub attacker_min_range: f64,
    pub max_tries: usize,
}

impl Default for SpawnConfig {
    fn default() -> Self {
        Self {
            defender_inner_gap: 1.0,
            defender_outer_gap: 4.0,
            defender_spacing: 0.5,
            attacker_band: 1.0,
            attacker_min_range: 12.0,
            max_tries: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub n_defenders: usize,
    pub mode: Mode,
    pub train: bool,
    pub seed: u64,
    /// Consensus gain.
    pub c_neg: f64,
    /// Keep per-step rows in the record.
    pub record_rows: bool,
    pub env: EnvConfig,
    pub attacker: AttackerParams,
    pub formation: FormationControlConfig,
    pub shape_bounds: ShapeBounds,
    pub initial_shape: InitialShape,
    pub spawn: SpawnConfig,
    pub expert: ExpertConfig,
    pub learning: LearningConfig,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            n_defenders: 6,
            mode: Mode::Actor,
            train: false,
            seed: 0,
            c_neg: 2.0,
            record_rows: true,
            env: EnvConfig::default(),
            attacker: AttackerParams::default(),
            formation: FormationControlConfig::default(),
            shape_bounds: ShapeBounds::default(),
            initial_shape: InitialShape::default(),
            spawn: SpawnConfig::default(),
            expert: ExpertConfig::default(),
            learning: LearningConfig::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_defenders < 2 {
            return Err(Error::Config("n_defenders must be >= 2".into()));
        }
        if !(self.c_neg >= 0.0 && self.c_neg.is_finite()) {
            return Err(Error::Config("c_neg must be >= 0".into()));
        }
        if self.train && !self.mode.uses_expert() {
            return Err(Error::Config("training needs a mode that runs the expert".into()));
        }
        let s = &self.spawn;
        if !(s.defender_inner_gap >= 0.0 && s.defender_outer_gap > s.defender_inner_gap && s.attacker_band > 0.0) {
            return Err(Error::Config("spawn: need 0 <= inner gap < outer gap and a positive band".into()));
        }
        if !(self.formation.k_p > 0.0) {
            return Err(Error::Config("formation: k_p must be > 0".into()));
        }
        self.env.validate()?;
        self.attacker.validate()?;
        self.shape_bounds.validate()?;
        self.expert.validate()?;
        self.learning.validate()
    }
}
