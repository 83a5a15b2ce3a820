//! Receding-horizon expert: a short PSO search over shape-parameter rates,
//! scored by rolling the formation and a predicted attacker forward.
//!
//! The decision state is `(theta, s_a)` only. Defenders are assumed to sit
//! on their formation references during the prediction, and the attacker
//! reacts to the reference nearest to it.

pub mod angles;
pub mod pso;

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formation::{pattern_into, ShapeBounds, ShapeParams, SHAPE_DIM};
use crate::learning::actor::ActorWeights;
use crate::vec2::Vec2;
use crate::world::{attacker_control, saturate, step_agent, AgentState, AttackerParams, EnvConfig};

use angles::{capture_arcs, protected_angle_with};
use pso::{pso_solve, PsoConfig};

pub type Rate = [f64; SHAPE_DIM];

/// Box bounds on the shape-parameter rate.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionBounds {
    /// `[p_cx m/s, p_cy m/s, phi rad/s, zeta m/s, beta rad/s]`
    pub lo: Rate,
    pub hi: Rate,
}

impl Default for ActionBounds {
    fn default() -> Self {
        let hi = [1.0, 1.0, 0.8, 0.5, 0.8];
        Self { lo: hi.map(|x| -x), hi }
    }
}

impl ActionBounds {
    pub fn clamp(&self, a: &Rate) -> Rate {
        let mut out = *a;
        for k in 0..SHAPE_DIM {
            out[k] = out[k].clamp(self.lo[k], self.hi[k]);
        }
        out
    }

    pub fn contains(&self, a: &Rate) -> bool {
        (0..SHAPE_DIM).all(|k| a[k] >= self.lo[k] && a[k] <= self.hi[k])
    }

    pub fn half_width(&self) -> Rate {
        let mut out = [0.0; SHAPE_DIM];
        for k in 0..SHAPE_DIM {
            out[k] = 0.5 * (self.hi[k] - self.lo[k]);
        }
        out
    }

    pub fn sample_uniform(&self, rng: &mut (impl Rng + ?Sized)) -> Rate {
        let mut out = [0.0; SHAPE_DIM];
        for k in 0..SHAPE_DIM {
            out[k] = if self.hi[k] > self.lo[k] {
                rng.random_range(self.lo[k]..=self.hi[k])
            } else {
                self.lo[k]
            };
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if (0..SHAPE_DIM).all(|k| self.lo[k] <= 0.0 && self.hi[k] >= 0.0) {
            Ok(())
        } else {
            Err(Error::Config("action bounds must bracket zero".into()))
        }
    }
}

/// Rates over the prediction horizon. Only the first `n_control` entries
/// are free; later entries repeat entry `n_control - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSequence {
    rates: Vec<Rate>,
    n_control: usize,
}

impl ActionSequence {
    /// Expand the free entries over a horizon of `n_predict` steps.
    pub fn from_free(free: &[Rate], n_predict: usize) -> Result<Self> {
        let n_control = free.len();
        if n_control == 0 || n_control > n_predict {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= n_control ({n_control}) <= n_predict ({n_predict})"
            )));
        }
        let mut rates = free.to_vec();
        let last = free[n_control - 1];
        rates.resize(n_predict, last);
        Ok(Self { rates, n_control })
    }

    /// Same rate on every step.
    pub fn tiled(rate: Rate, n_control: usize, n_predict: usize) -> Result<Self> {
        Self::from_free(&vec![rate; n_control], n_predict)
    }

    fn from_flat(flat: &[f64], n_control: usize, n_predict: usize) -> Self {
        let free: Vec<Rate> = flat
            .chunks_exact(SHAPE_DIM)
            .map(|c| [c[0], c[1], c[2], c[3], c[4]])
            .collect();
        debug_assert_eq!(free.len(), n_control);
        Self::from_free(&free, n_predict).expect("flat sequence shape")
    }

    fn to_flat(&self) -> Vec<f64> {
        self.free().iter().flatten().copied().collect()
    }

    pub fn rates(&self) -> &[Rate] {
        &self.rates
    }

    pub fn free(&self) -> &[Rate] {
        &self.rates[..self.n_control]
    }

    pub fn first(&self) -> Rate {
        self.rates[0]
    }

    pub fn n_control(&self) -> usize {
        self.n_control
    }

    pub fn n_predict(&self) -> usize {
        self.rates.len()
    }

    /// Drop the first rate and re-expand (warm start for the next decision).
    pub fn shifted(&self) -> Self {
        let free: Vec<Rate> = (1..=self.n_control)
            .map(|j| self.rates[j.min(self.rates.len() - 1)])
            .collect();
        Self::from_free(&free, self.rates.len()).expect("shift keeps shape")
    }

    pub fn within(&self, bounds: &ActionBounds) -> bool {
        self.rates.iter().all(|r| bounds.contains(r))
    }

    pub fn repetition_holds(&self) -> bool {
        let last = self.rates[self.n_control - 1];
        self.rates[self.n_control..].iter().all(|r| *r == last)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    pub k_cap: f64,
    pub k_pro: f64,
    pub k_dis: f64,
    pub k_ali: f64,
    pub k_ene: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            k_cap: 1.0,
            k_pro: 1.0,
            k_dis: 0.02,
            k_ali: 0.5,
            k_ene: 0.01,
        }
    }
}

impl CostWeights {
    pub fn combine(&self, t: &CostTerms) -> f64 {
        -self.k_cap * t.capture_angle * t.capture_angle
            + self.k_pro * t.protected_angle * t.protected_angle
            + self.k_dis * t.mean_distance * t.mean_distance
            + self.k_ali * t.alignment * t.alignment
            + self.k_ene * t.energy
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.k_cap, self.k_pro, self.k_dis, self.k_ali, self.k_ene];
        if all.iter().all(|w| *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::Config("cost weights must be >= 0".into()))
        }
    }
}

/// Raw, unweighted per-step cost terms.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct CostTerms {
    /// rad
    pub capture_angle: f64,
    /// rad
    pub protected_angle: f64,
    /// m
    pub mean_distance: f64,
    /// `phi - phi_da` wrapped to (-pi, pi], rad
    pub alignment: f64,
    /// `a^T a`
    pub energy: f64,
}

#[inline]
pub fn wrap_pi(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Cost terms for defenders placed at `refs`.
pub fn cost_terms_at(theta: &ShapeParams, p_a: Vec2, refs: &[Vec2], action: &Rate, env: &EnvConfig) -> CostTerms {
    let arcs = capture_arcs(p_a, refs.iter().copied(), env.r_cap);
    let protected = protected_angle_with(p_a, env.p_p, env.rho_p, &arcs);
    let mean_distance = refs.iter().map(|r| r.distance(p_a)).sum::<f64>() / refs.len() as f64;
    let phi_da = (p_a - theta.p_c).angle();
    CostTerms {
        capture_angle: arcs.measure(),
        protected_angle: protected,
        mean_distance,
        alignment: wrap_pi(theta.phi - phi_da),
        energy: action.iter().map(|x| x * x).sum(),
    }
}

/// Cost of one predicted step with defenders on the pattern of `theta`.
pub fn step_cost(theta: &ShapeParams, s_a: &AgentState, action: &Rate, env: &EnvConfig, w: &CostWeights, n: usize) -> Result<f64> {
    let mut refs = Vec::with_capacity(n);
    pattern_into(theta, n, &mut refs)?;
    Ok(w.combine(&cost_terms_at(theta, s_a.p, &refs, action, env)))
}

/// One-step attacker predictor used inside the rollout.
pub trait AttackerPredictor {
    fn predict(&self, s_a: &AgentState, s_d: &AgentState, env: &EnvConfig, dt: f64) -> Result<AgentState>;
}

/// The simulator's own attacker, as a predictor.
impl AttackerPredictor for AttackerParams {
    fn predict(&self, s_a: &AgentState, s_d: &AgentState, env: &EnvConfig, dt: f64) -> Result<AgentState> {
        let u = saturate(attacker_control(s_a, s_d.p, self, env.p_p)?, env.u_a_max)?;
        step_agent(*s_a, u, env.c_a, env.u_a_max, dt)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpertConfig {
    /// Prediction steps.
    pub n_predict: usize,
    /// Free control steps.
    pub n_control: usize,
    /// Physics steps per decision.
    pub decision_substeps: usize,
    pub bounds: ActionBounds,
    pub weights: CostWeights,
    pub pso: PsoConfig,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            n_predict: 5,
            n_control: 2,
            decision_substeps: 8,
            bounds: ActionBounds::default(),
            weights: CostWeights::default(),
            pso: PsoConfig::default(),
        }
    }
}

impl ExpertConfig {
    pub fn decision_dt(&self, env: &EnvConfig) -> f64 {
        self.decision_substeps as f64 * env.dt
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_control == 0 || self.n_control > self.n_predict {
            return Err(Error::Config("expert: need 1 <= n_control <= n_predict".into()));
        }
        if self.decision_substeps == 0 {
            return Err(Error::Config("expert: decision_substeps must be >= 1".into()));
        }
        self.bounds.validate()?;
        self.weights.validate()?;
        self.pso.validate()
    }
}

/// Everything a rollout needs besides the decision state.
#[derive(Copy, Clone, Debug)]
pub struct ExpertContext<'a> {
    pub env: &'a EnvConfig,
    pub cfg: &'a ExpertConfig,
    pub shape_bounds: &'a ShapeBounds,
    pub n: usize,
}

/// Total predicted cost of `seq` from the decision state.
pub fn rollout(theta_k: &ShapeParams, s_a_k: &AgentState, seq: &ActionSequence, model: &dyn AttackerPredictor, ctx: &ExpertContext<'_>) -> Result<f64> {
    let mut refs = Vec::with_capacity(ctx.n);
    rollout_with(theta_k, s_a_k, seq, model, ctx, &mut refs)
}

fn rollout_with(
    theta_k: &ShapeParams,
    s_a_k: &AgentState,
    seq: &ActionSequence,
    model: &dyn AttackerPredictor,
    ctx: &ExpertContext<'_>,
    refs: &mut Vec<Vec2>,
) -> Result<f64> {
    let env = ctx.env;
    let dt_dec = ctx.cfg.decision_dt(env);
    let mut theta = *theta_k;
    let mut s_a = *s_a_k;
    let mut total = 0.0;
    for a in seq.rates() {
        theta = ctx.shape_bounds.clamp(theta.advanced(a, dt_dec));
        pattern_into(&theta, ctx.n, refs)?;
        let v_ref = Vec2::new(a[0], a[1]);
        for _ in 0..ctx.cfg.decision_substeps {
            let near = nearest_point(s_a.p, refs);
            s_a = model.predict(&s_a, &AgentState::new(near, v_ref), env, env.dt)?;
        }
        total += ctx.cfg.weights.combine(&cost_terms_at(&theta, s_a.p, refs, a, env));
    }
    Ok(total)
}

fn nearest_point(p: Vec2, pts: &[Vec2]) -> Vec2 {
    let mut best = pts[0];
    let mut best_d = p.distance(best);
    for &q in &pts[1..] {
        let d = p.distance(q);
        if d < best_d {
            best = q;
            best_d = d;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    /// First rate of the winning sequence.
    pub rate: Rate,
    pub sequence: ActionSequence,
    pub cost: f64,
}

fn uniform_seed(bounds: &ActionBounds, n_c: usize, n_p: usize, rng: &mut (impl Rng + ?Sized)) -> ActionSequence {
    let free: Vec<Rate> = (0..n_c).map(|_| bounds.sample_uniform(rng)).collect();
    ActionSequence::from_free(&free, n_p).expect("uniform seed shape")
}

/// Initial particles: actor output tiled, previous winner shifted, normal
/// draws around the actor output, uniform draws for the rest. Missing
/// actor or previous sequence fall back to uniform draws.
pub fn build_seeds(
    actor_out: Option<Rate>,
    prev: Option<&ActionSequence>,
    cfg: &ExpertConfig,
    rng: &mut (impl Rng + ?Sized),
) -> Vec<ActionSequence> {
    let n = cfg.pso.n_particles;
    let (n_c, n_p) = (cfg.n_control, cfg.n_predict);
    let bounds = &cfg.bounds;
    let mut seeds = Vec::with_capacity(n);

    seeds.push(match actor_out {
        Some(a) => ActionSequence::tiled(bounds.clamp(&a), n_c, n_p).expect("tiled seed shape"),
        None => uniform_seed(bounds, n_c, n_p, rng),
    });
    if seeds.len() < n {
        seeds.push(match prev {
            Some(p) if p.n_control() == n_c && p.n_predict() == n_p => p.shifted(),
            _ => uniform_seed(bounds, n_c, n_p, rng),
        });
    }
    let n_normal = (n / 2).saturating_sub(1).min(n - seeds.len());
    let half = bounds.half_width();
    for _ in 0..n_normal {
        let seq = match actor_out {
            Some(mu) => {
                let free: Vec<Rate> = (0..n_c)
                    .map(|_| {
                        let mut r = [0.0; SHAPE_DIM];
                        for k in 0..SHAPE_DIM {
                            let sd = cfg.pso.sigma_frac * half[k];
                            r[k] = if sd > 0.0 {
                                Normal::new(mu[k], sd).expect("finite normal").sample(rng)
                            } else {
                                mu[k]
                            };
                        }
                        bounds.clamp(&r)
                    })
                    .collect();
                ActionSequence::from_free(&free, n_p).expect("normal seed shape")
            }
            None => uniform_seed(bounds, n_c, n_p, rng),
        };
        seeds.push(seq);
    }
    while seeds.len() < n {
        seeds.push(uniform_seed(bounds, n_c, n_p, rng));
    }
    seeds
}

/// Run the seeded PSO search and return the first rate of the winner.
#[allow(clippy::too_many_arguments)]
pub fn expert_decide(
    theta_k: &ShapeParams,
    s_a_k: &AgentState,
    model: &dyn AttackerPredictor,
    actor: Option<&ActorWeights>,
    prev: Option<&ActionSequence>,
    ctx: &ExpertContext<'_>,
    rng: &mut (impl Rng + ?Sized),
) -> Result<Decision> {
    let actor_out = actor.map(|a| a.forward(theta_k, s_a_k, ctx.env));
    let seeds = build_seeds(actor_out, prev, ctx.cfg, rng);
    solve_from_seeds(theta_k, s_a_k, model, seeds, ctx, rng)
}

/// PSO over the free part of the action sequence, starting from `seeds`.
pub fn solve_from_seeds(
    theta_k: &ShapeParams,
    s_a_k: &AgentState,
    model: &dyn AttackerPredictor,
    seeds: Vec<ActionSequence>,
    ctx: &ExpertContext<'_>,
    rng: &mut (impl Rng + ?Sized),
) -> Result<Decision> {
    if seeds.is_empty() {
        return Err(Error::Empty("solve_from_seeds: no seeds"));
    }
    let cfg = ctx.cfg;
    let (n_c, n_p) = (cfg.n_control, cfg.n_predict);
    let lo: Vec<f64> = (0..n_c).flat_map(|_| cfg.bounds.lo).collect();
    let hi: Vec<f64> = (0..n_c).flat_map(|_| cfg.bounds.hi).collect();
    let mut refs = Vec::with_capacity(ctx.n);
    let objective = |x: &[f64]| {
        let seq = ActionSequence::from_flat(x, n_c, n_p);
        match rollout_with(theta_k, s_a_k, &seq, model, ctx, &mut refs) {
            Ok(c) if !c.is_nan() => c,
            _ => f64::INFINITY,
        }
    };
    let flat: Vec<Vec<f64>> = seeds.iter().map(ActionSequence::to_flat).collect();
    let result = pso_solve(objective, flat, &lo, &hi, &cfg.pso, rng);
    let sequence = ActionSequence::from_flat(&result.best, n_c, n_p);
    Ok(Decision {
        rate: sequence.first(),
        sequence,
        cost: result.best_cost,
    })
}
