//! Run configuration file: TOML with one section per component.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::EpisodeConfig;

/// Training-session settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub episodes: usize,
    pub augment_per_episode: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            episodes: 300,
            augment_per_episode: 0,
        }
    }
}

/// Monte Carlo evaluation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub episodes: usize,
    pub workers: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { episodes: 200, workers: 1 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub episode: EpisodeConfig,
    pub session: SessionConfig,
    pub evaluation: EvaluationConfig,
}

/// `(key, unit, meaning)` for every configuration key.
pub const CONFIG_KEYS: &[(&str, &str, &str)] = &[
    ("episode.n_defenders", "count", "number of defenders n"),
    ("episode.mode", "-", "decision source: expert, actor or actor_seeded_expert"),
    ("episode.train", "flag", "learn during episodes (set by the train command)"),
    ("episode.seed", "-", "master seed; episode i runs on a seed derived from (seed, i)"),
    ("episode.c_neg", "1/s", "consensus gain of the shape negotiation"),
    ("episode.record_rows", "flag", "keep per-step rows in episode records"),
    ("episode.env.p_p", "m", "protected-area center p_p as [x, y]"),
    ("episode.env.rho_p", "m", "protected-area radius rho_p"),
    ("episode.env.r_cap", "m", "capture radius r_cap"),
    ("episode.env.r_com", "m", "communication radius r_com"),
    ("episode.env.u_d_max", "m/s^2", "defender input bound u_d^max"),
    ("episode.env.u_a_max", "m/s^2", "attacker input bound u_a^max"),
    ("episode.env.c_d", "1/s", "defender drag C_d"),
    ("episode.env.c_a", "1/s", "attacker drag C_a"),
    ("episode.env.field_width", "m", "field extent along x, centered on p_p"),
    ("episode.env.field_height", "m", "field extent along y, centered on p_p"),
    ("episode.env.dt", "s", "physics step"),
    ("episode.env.t_max", "s", "episode time limit"),
    ("episode.attacker.k_ap", "m/s^2", "attacker approach gain k_ap"),
    ("episode.attacker.k_ad", "m/s^2", "attacker avoidance gain k_ad"),
    ("episode.attacker.r_safe", "m", "attacker safe distance r_ad^safe"),
    ("episode.attacker.r_avo", "m", "distance where avoidance starts, r_ad^avo"),
    ("episode.attacker.approach_reversed", "flag", "approach term points away from p_p"),
    ("episode.formation.k_p", "1/s^2", "formation tracking gain k_p"),
    ("episode.formation.drag_compensation", "-", "partial (v/C_d) or cancel (C_d*v)"),
    ("episode.formation.greedy_slots", "flag", "greedy nearest-slot assignment instead of identity"),
    ("episode.shape_bounds.zeta_min", "m", "smallest formation spacing"),
    ("episode.shape_bounds.zeta_max", "m", "largest formation spacing"),
    ("episode.shape_bounds.beta_min", "rad", "smallest opening angle"),
    ("episode.shape_bounds.beta_max", "rad", "largest opening angle"),
    ("episode.initial_shape.center", "-", "initial center estimate: protected or own"),
    ("episode.initial_shape.zeta", "m", "initial spacing estimate"),
    ("episode.initial_shape.beta", "rad", "initial opening-angle estimate"),
    ("episode.spawn.defender_inner_gap", "m", "inner edge of the defender annulus, beyond rho_p"),
    ("episode.spawn.defender_outer_gap", "m", "outer edge of the defender annulus, beyond rho_p"),
    ("episode.spawn.defender_spacing", "m", "minimum distance between spawned defenders"),
    ("episode.spawn.attacker_band", "m", "width of the attacker band along the field edge"),
    ("episode.spawn.attacker_min_range", "m", "minimum attacker distance from p_p"),
    ("episode.spawn.max_tries", "count", "rejection-sampling attempts before failing"),
    ("episode.expert.n_predict", "count", "prediction steps N_p"),
    ("episode.expert.n_control", "count", "free control steps N_c"),
    ("episode.expert.decision_substeps", "count", "physics steps per decision"),
    ("episode.expert.bounds.lo", "m/s, m/s, rad/s, m/s, rad/s", "lower action bound a_min"),
    ("episode.expert.bounds.hi", "m/s, m/s, rad/s, m/s, rad/s", "upper action bound a_max"),
    ("episode.expert.weights.k_cap", "1/rad^2", "capture-angle cost weight k^cap"),
    ("episode.expert.weights.k_pro", "1/rad^2", "protected-angle cost weight k^pro"),
    ("episode.expert.weights.k_dis", "1/m^2", "mean-distance cost weight k^dis"),
    ("episode.expert.weights.k_ali", "1/rad^2", "alignment cost weight k^ali"),
    ("episode.expert.weights.k_ene", "-", "energy cost weight k^ene"),
    ("episode.expert.pso.n_particles", "count", "PSO particles per generation"),
    ("episode.expert.pso.n_iters", "count", "PSO iterations"),
    ("episode.expert.pso.omega", "-", "PSO inertia weight"),
    ("episode.expert.pso.c1", "-", "PSO pull toward the global best c_1"),
    ("episode.expert.pso.c2", "-", "PSO pull toward the particle best c_2"),
    ("episode.expert.pso.sigma_frac", "-", "normal-seed spread as a fraction of the bound half-width"),
    ("episode.expert.pso.init_velocity_frac", "-", "initial velocity spread as a fraction of the bound width"),
    ("episode.learning.alpha_actor", "-", "actor learning rate alpha^pi"),
    ("episode.learning.alpha_model", "-", "model learning rate alpha^m"),
    ("episode.learning.train_every", "count", "physics steps between updates"),
    ("episode.learning.batch_size", "count", "mini-batch size"),
    ("episode.learning.model_capacity", "count", "model replay buffer capacity"),
    ("episode.learning.actor_capacity", "count", "actor replay buffer capacity"),
    ("episode.learning.model_loss_weights", "-", "diagonal of W^m over [p_x, p_y, v_x, v_y]"),
    ("episode.learning.actor_loss_weights", "-", "diagonal of W^pi over the five rates"),
    ("episode.learning.train_baseline", "flag", "also train the fully connected comparison model"),
    ("episode.learning.alpha_baseline", "-", "comparison model learning rate"),
    ("episode.learning.scaling.position", "m", "network input scale for positions"),
    ("episode.learning.scaling.velocity", "m/s", "network input scale for velocities"),
    ("episode.learning.scaling.angle", "rad", "network input scale for angles"),
    ("session.episodes", "count", "training episodes"),
    ("session.augment_per_episode", "count", "virtual samples added after each training episode"),
    ("evaluation.episodes", "count", "Monte Carlo episodes"),
    ("evaluation.workers", "count", "threads for Monte Carlo episodes"),
];

impl RunConfig {
    /// Parse a configuration file. Errors carry the line and column.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.episode.validate()?;
        if self.evaluation.workers == 0 {
            return Err(Error::Config("evaluation.workers must be >= 1".into()));
        }
        Ok(())
    }

    /// Apply `key=value` assignments; values are TOML literals, bare words
    /// are taken as strings.
    pub fn with_overrides(&self, assignments: &[String]) -> Result<Self> {
        if assignments.is_empty() {
            return Ok(self.clone());
        }
        let mut root = to_table(self)?;
        for a in assignments {
            let (key, raw) = a
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {a:?}: expected key=value")))?;
            let key = key.trim();
            if !CONFIG_KEYS.iter().any(|(k, _, _)| *k == key) {
                return Err(Error::Config(format!("override {a:?}: unknown key {key:?}")));
            }
            let value = parse_value(raw.trim());
            let mut parts: Vec<&str> = key.split('.').collect();
            let leaf = parts.pop().expect("split yields at least one part");
            let mut table = &mut root;
            for p in parts {
                table = table
                    .get_mut(p)
                    .and_then(toml::Value::as_table_mut)
                    .ok_or_else(|| Error::Config(format!("override {a:?}: {p:?} is not a section")))?;
            }
            table.insert(leaf.to_string(), value);
        }
        let cfg: RunConfig = toml::Value::Table(root)
            .try_into()
            .map_err(|e| Error::Config(format!("overrides: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key with its current value, in documentation order.
    pub fn flat_values(&self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        flatten("", &to_table(self)?, &mut out);
        Ok(out)
    }

    /// The configuration as a TOML file with every key commented.
    pub fn to_documented_toml(&self) -> Result<String> {
        let values: std::collections::BTreeMap<String, String> = self.flat_values()?.into_iter().collect();
        let mut out = String::new();
        let mut section = String::new();
        for (key, unit, meaning) in CONFIG_KEYS {
            let (sec, leaf) = key.rsplit_once('.').unwrap_or(("", key));
            if sec != section {
                if !out.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{sec}]");
                section = sec.to_string();
            }
            let value = values.get(*key).ok_or_else(|| Error::Config(format!("no value for {key}")))?;
            let _ = writeln!(out, "# {meaning} [{unit}]");
            let _ = writeln!(out, "{leaf} = {value}");
        }
        Ok(out)
    }
}

fn to_table(cfg: &RunConfig) -> Result<toml::Table> {
    let text = toml::to_string(cfg).map_err(|e| Error::Config(format!("serialize config: {e}")))?;
    text.parse::<toml::Table>()
        .map_err(|e| Error::Config(format!("reparse config: {e}")))
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, String)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.to_string())),
        }
    }
}

/// `--help` text listing every key with unit and default.
pub fn keys_help() -> String {
    let defaults: std::collections::BTreeMap<String, String> =
        RunConfig::default().flat_values().unwrap_or_default().into_iter().collect();
    let mut out = String::from("Configuration keys (TOML; override with --set key=value):\n");
    for (key, unit, meaning) in CONFIG_KEYS {
        let d = defaults.get(*key).map(String::as_str).unwrap_or("?");
        let _ = writeln!(out, "  {key} [{unit}] = {d}\n      {meaning}");
    }
    out
}
