//! Python bindings: configuration, weights, episodes, Monte Carlo
//! evaluation, training and the geometric primitives.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use arcpursuit::cli::RunConfig;
use arcpursuit::expert::angles;
use arcpursuit::formation::{pattern, ShapeParams, SHAPE_DIM};
use arcpursuit::learning::{ModelWeights, WeightsFile};
use arcpursuit::negotiation::{build_topology, consensus_error, negotiation_step};
use arcpursuit::sim::{self, Brain, EpisodeRecord};
use arcpursuit::world::{AgentState, EpisodeStatus};
use arcpursuit::{selftest, Error, Vec2};

type Point = (f64, f64);
type State = (f64, f64, f64, f64);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Config(_) | Error::InvalidArgument(_) | Error::Schema(_) | Error::Json(_) | Error::LengthMismatch { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn v(p: Point) -> Vec2 {
    Vec2::new(p.0, p.1)
}

fn state(s: State) -> AgentState {
    AgentState::new(Vec2::new(s.0, s.1), Vec2::new(s.2, s.3))
}

fn shape(theta: [f64; SHAPE_DIM]) -> ShapeParams {
    ShapeParams::from_array(theta)
}

fn initial_model(cfg: &RunConfig) -> ModelWeights {
    ModelWeights {
        approach_reversed: cfg.episode.attacker.approach_reversed,
        ..ModelWeights::default()
    }
}

/// Full run configuration; every key of the command-line config file is
/// reachable through `set`.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new() -> Self {
        Self {
            inner: RunConfig::default(),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: RunConfig::from_toml(text, "<string>").map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: RunConfig::load(&path).map_err(to_py)?,
        })
    }

    /// Commented TOML that `from_toml` reads back.
    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_documented_toml().map_err(to_py)
    }

    /// Set `key` (dotted, e.g. `episode.n_defenders`) from a TOML literal.
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner = self.inner.with_overrides(&[format!("{key}={value}")]).map_err(to_py)?;
        Ok(())
    }

    /// `{key: value}` with values as TOML literals.
    fn values(&self) -> PyResult<Vec<(String, String)>> {
        self.inner.flat_values().map_err(to_py)
    }

    #[getter]
    fn n_defenders(&self) -> usize {
        self.inner.episode.n_defenders
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.episode.seed
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.episode.mode.as_str()
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(n_defenders={}, mode={}, seed={})",
            self.inner.episode.n_defenders, self.inner.episode.mode, self.inner.episode.seed
        )
    }
}

/// Trained attacker model and actor.
#[pyclass(name = "Weights", from_py_object)]
#[derive(Clone)]
struct PyWeights {
    inner: WeightsFile,
}

#[pymethods]
impl PyWeights {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: WeightsFile::load(&path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: WeightsFile::from_json(text).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    /// Decoded attacker model `{k_ap, k_ad, r_safe, r_avo}`.
    fn model_params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        let m = &self.inner.model;
        d.set_item("k_ap", m.k_ap)?;
        d.set_item("k_ad", m.k_ad)?;
        d.set_item("r_safe", m.r_safe)?;
        d.set_item("r_avo", m.r_avo)?;
        Ok(d)
    }

    /// Actor rate for shape `theta` and attacker `(px, py, vx, vy)`.
    fn actor_rate(&self, cfg: &PyConfig, theta: [f64; SHAPE_DIM], attacker: State) -> [f64; SHAPE_DIM] {
        self.inner.actor.forward(&shape(theta), &state(attacker), &cfg.inner.episode.env)
    }

    /// Predicted attacker state one physics step ahead.
    fn predict_attacker(&self, cfg: &PyConfig, attacker: State, nearest_defender: State) -> PyResult<State> {
        let env = &cfg.inner.episode.env;
        let s = arcpursuit::learning::model::model_forward(
            &self.inner.model_weights(),
            &state(attacker),
            &state(nearest_defender),
            env,
            env.dt,
        )
        .map_err(to_py)?;
        Ok((s.p.x, s.p.y, s.v.x, s.v.y))
    }

    #[getter]
    fn episodes(&self) -> usize {
        self.inner.lineage.episodes
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.inner.lineage.master_seed
    }
}

/// One simulated episode.
#[pyclass(name = "Episode", from_py_object)]
#[derive(Clone)]
struct PyEpisode {
    inner: EpisodeRecord,
}

#[pymethods]
impl PyEpisode {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: EpisodeRecord::load(&path).map_err(to_py)?,
        })
    }

    /// Write the JSONL record into `dir`; returns its path.
    fn save(&self, dir: PathBuf) -> PyResult<PathBuf> {
        self.inner.save(&dir).map_err(to_py)
    }

    /// `captured`, `breached`, `timeout` or `running`.
    #[getter]
    fn status(&self) -> &'static str {
        self.inner.header.status.label()
    }

    /// Capture or breach time, s.
    #[getter]
    fn event_time(&self) -> Option<f64> {
        match self.inner.header.status {
            EpisodeStatus::Captured(t) | EpisodeStatus::Breached(t) => Some(t),
            _ => None,
        }
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.header.duration
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.header.seed
    }

    #[getter]
    fn n_defenders(&self) -> usize {
        self.inner.header.n_defenders
    }

    fn __len__(&self) -> usize {
        self.inner.rows.len()
    }

    fn times(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.t).collect()
    }

    fn attacker(&self) -> Vec<State> {
        self.inner
            .rows
            .iter()
            .map(|r| (r.attacker.p.x, r.attacker.p.y, r.attacker.v.x, r.attacker.v.y))
            .collect()
    }

    /// Per row, per defender `(px, py, vx, vy)`.
    fn defenders(&self) -> Vec<Vec<State>> {
        self.inner
            .rows
            .iter()
            .map(|r| r.defenders.iter().map(|d| (d.p.x, d.p.y, d.v.x, d.v.y)).collect())
            .collect()
    }

    /// Per row, per defender shape estimate `[p_cx, p_cy, phi, zeta, beta]`.
    fn thetas(&self) -> Vec<Vec<[f64; SHAPE_DIM]>> {
        self.inner.rows.iter().map(|r| r.thetas.clone()).collect()
    }

    fn consensus_errors(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.consensus_error).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Episode(status={}, duration={:.2}, rows={})",
            self.status(),
            self.inner.header.duration,
            self.inner.rows.len()
        )
    }
}

/// Run one episode with fixed weights. Without `weights` the actor modes
/// are rejected and the expert uses the initial model.
#[pyfunction]
#[pyo3(signature = (config, weights=None, seed=None, mode=None))]
fn run_episode(py: Python<'_>, config: &PyConfig, weights: Option<&PyWeights>, seed: Option<u64>, mode: Option<&str>) -> PyResult<PyEpisode> {
    let mut cfg = config.inner.clone();
    if let Some(s) = seed {
        cfg.episode.seed = s;
    }
    if let Some(m) = mode {
        cfg.episode.mode = m.parse().map_err(to_py)?;
    }
    cfg.episode.train = false;
    let model = weights.map_or_else(|| initial_model(&cfg), |w| w.inner.model_weights());
    let actor = weights.map(|w| w.inner.actor.clone());
    if cfg.episode.mode.needs_actor() && actor.is_none() {
        return Err(PyValueError::new_err(format!("mode {} needs weights", cfg.episode.mode)));
    }
    let rec = py
        .detach(|| {
            sim::run_episode(
                &cfg.episode,
                Brain::Fixed {
                    model: &model,
                    actor: actor.as_ref().filter(|_| cfg.episode.mode.needs_actor()),
                },
            )
        })
        .map_err(to_py)?;
    Ok(PyEpisode { inner: rec })
}

/// Monte Carlo summary as a dict.
#[pyfunction]
#[pyo3(signature = (config, weights=None, episodes=None, workers=None))]
fn monte_carlo<'py>(
    py: Python<'py>,
    config: &PyConfig,
    weights: Option<&PyWeights>,
    episodes: Option<usize>,
    workers: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = &config.inner;
    let mode = cfg.episode.mode;
    if mode.needs_actor() && weights.is_none() {
        return Err(PyValueError::new_err(format!("mode {mode} needs weights")));
    }
    let mut ep = cfg.episode.clone();
    ep.train = false;
    let model = weights.map_or_else(|| initial_model(cfg), |w| w.inner.model_weights());
    let actor = weights.filter(|_| mode.needs_actor()).map(|w| w.inner.actor.clone());
    let n = episodes.unwrap_or(cfg.evaluation.episodes);
    let k = workers.unwrap_or(cfg.evaluation.workers);
    let r = py
        .detach(|| sim::monte_carlo(&ep, &model, actor.as_ref(), n, k))
        .map_err(to_py)?;
    let s = r.summary;
    let d = PyDict::new(py);
    d.set_item("episodes", s.episodes)?;
    d.set_item("captured", s.captured)?;
    d.set_item("breached", s.breached)?;
    d.set_item("timeout", s.timeout)?;
    d.set_item("failed", s.failed)?;
    d.set_item("success_rate", s.success_rate)?;
    d.set_item("breach_rate", s.breach_rate)?;
    d.set_item("timeout_rate", s.timeout_rate)?;
    d.set_item("mean_capture_time", s.mean_capture_time)?;
    d.set_item("mean_duration", s.mean_duration)?;
    Ok(d)
}

/// Train for `episodes` sequential episodes; returns the weights and the
/// per-update loss curves `{model, actor, baseline}`.
#[pyfunction]
#[pyo3(signature = (config, episodes=None, augment_per_episode=None))]
fn train<'py>(
    py: Python<'py>,
    config: &PyConfig,
    episodes: Option<usize>,
    augment_per_episode: Option<usize>,
) -> PyResult<(PyWeights, Bound<'py, PyDict>)> {
    let cfg = &config.inner;
    let n = episodes.unwrap_or(cfg.session.episodes);
    let a = augment_per_episode.unwrap_or(cfg.session.augment_per_episode);
    let outcome = py.detach(|| sim::train_session(&cfg.episode, n, a)).map_err(to_py)?;
    let curves = &outcome.learner.curves;
    let d = PyDict::new(py);
    d.set_item("model", curves.model.clone())?;
    d.set_item("actor", curves.actor.clone())?;
    d.set_item("baseline", curves.baseline.clone())?;
    Ok((PyWeights { inner: outcome.weights_file() }, d))
}

/// Reference positions of `n` defenders for shape `theta`.
#[pyfunction]
fn formation_pattern(theta: [f64; SHAPE_DIM], n: usize) -> PyResult<Vec<Point>> {
    let p = pattern(&shape(theta), n).map_err(to_py)?;
    Ok(p.refs.iter().map(|r| (r.x, r.y)).collect())
}

/// Angle of the attacker's view covered by capture disks, rad.
#[pyfunction]
fn capture_angle(attacker: Point, defenders: Vec<Point>, r_cap: f64) -> f64 {
    let d: Vec<Vec2> = defenders.into_iter().map(v).collect();
    angles::capture_angle(v(attacker), &d, r_cap)
}

/// Angle of the protected disk left uncovered by capture disks, rad.
#[pyfunction]
fn protected_angle(attacker: Point, p_p: Point, rho_p: f64, defenders: Vec<Point>, r_cap: f64) -> PyResult<f64> {
    let d: Vec<Vec2> = defenders.into_iter().map(v).collect();
    angles::protected_angle(v(attacker), v(p_p), rho_p, &d, r_cap).map_err(to_py)
}

/// One consensus step over the communication graph of `positions`; returns
/// the new estimates and their consensus error.
#[pyfunction]
fn negotiate(
    config: &PyConfig,
    positions: Vec<Point>,
    thetas: Vec<[f64; SHAPE_DIM]>,
    policy_rates: Vec<[f64; SHAPE_DIM]>,
) -> PyResult<(Vec<[f64; SHAPE_DIM]>, f64)> {
    if positions.len() != thetas.len() || thetas.len() != policy_rates.len() {
        return Err(PyValueError::new_err("positions, thetas and policy_rates need equal lengths"));
    }
    let ep = &config.inner.episode;
    let pts: Vec<Vec2> = positions.into_iter().map(v).collect();
    let topo = build_topology(&pts, ep.env.r_com);
    let est: Vec<ShapeParams> = thetas.into_iter().map(shape).collect();
    let (_, next) = negotiation_step(&est, &policy_rates, &topo, ep.c_neg, ep.env.dt, &ep.shape_bounds);
    Ok((next.iter().map(ShapeParams::to_array).collect(), consensus_error(&next)))
}

/// Built-in numerical checks as `(name, passed, detail)`.
#[pyfunction]
fn run_selftest(py: Python<'_>) -> Vec<(String, bool, String)> {
    py.detach(|| selftest::run_all(selftest::Sizes::QUICK))
        .into_iter()
        .map(|c| (c.name.to_string(), c.passed, c.detail))
        .collect()
}

/// Module entry point; also usable with `append_to_inittab!` when embedding.
#[pymodule]
pub fn pyarcpursuit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyWeights>()?;
    m.add_class::<PyEpisode>()?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(formation_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(capture_angle, m)?)?;
    m.add_function(wrap_pyfunction!(protected_angle, m)?)?;
    m.add_function(wrap_pyfunction!(negotiate, m)?)?;
    m.add_function(wrap_pyfunction!(run_selftest, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
