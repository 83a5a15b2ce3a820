//! One pursuit episode, simulated agent by agent in index order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{EpisodeConfig, InitialCenter, Mode};
use super::record::{EpisodeRecord, RecordHeader, StepRow, RECORD_SCHEMA, RECORD_VERSION};
use super::spawn::spawn;
use super::train::Learner;
use crate::error::{Error, Result};
use crate::expert::{expert_decide, ActionSequence, ExpertContext, Rate};
use crate::formation::{assign_slots, formation_control, pattern, pattern_into, ShapeParams, SHAPE_DIM};
use crate::learning::{ActorSample, ActorWeights, ModelSample, ModelWeights};
use crate::negotiation::{build_topology, consensus_error, negotiation_step};
use crate::vec2::Vec2;
use crate::world::{attacker_control, episode_status, nearest_defender, saturate, step_agent, AgentState, EpisodeStatus};

/// Weights used for decisions. `Learning` also trains them in place.
pub enum Brain<'a> {
    Fixed {
        model: &'a ModelWeights,
        actor: Option<&'a ActorWeights>,
    },
    Learning(&'a mut Learner),
}

impl Brain<'_> {
    fn model(&self) -> &ModelWeights {
        match self {
            Brain::Fixed { model, .. } => model,
            Brain::Learning(l) => &l.model,
        }
    }

    fn actor(&self) -> Option<&ActorWeights> {
        match self {
            Brain::Fixed { actor, .. } => *actor,
            Brain::Learning(l) => Some(&l.actor),
        }
    }
}

/// Everything that changes during an episode.
struct State {
    t: f64,
    attacker: AgentState,
    defenders: Vec<AgentState>,
    thetas: Vec<ShapeParams>,
    policy_out: Vec<Rate>,
    prev: Vec<Option<ActionSequence>>,
}

fn initial_thetas(cfg: &EpisodeConfig, defenders: &[AgentState], attacker: &AgentState) -> Vec<ShapeParams> {
    let init = &cfg.initial_shape;
    defenders
        .iter()
        .map(|d| {
            let center = match init.center {
                InitialCenter::Protected => cfg.env.p_p,
                InitialCenter::Own => d.p,
            };
            let theta = ShapeParams::new(center, (attacker.p - center).angle(), init.zeta, init.beta);
            cfg.shape_bounds.clamp(theta)
        })
        .collect()
}

/// Shape-parameter rate for defender `i` from its own estimate.
fn decide(
    cfg: &EpisodeConfig,
    brain: &Brain<'_>,
    ctx: &ExpertContext<'_>,
    st: &mut State,
    i: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Rate> {
    let theta = &st.thetas[i];
    match cfg.mode {
        Mode::Actor => {
            let actor = brain.actor().ok_or(Error::Config("actor mode needs actor weights".into()))?;
            Ok(actor.forward(theta, &st.attacker, &cfg.env))
        }
        Mode::Expert | Mode::ActorSeededExpert => {
            let actor = if cfg.mode == Mode::ActorSeededExpert { brain.actor() } else { None };
            let d = expert_decide(theta, &st.attacker, brain.model(), actor, st.prev[i].as_ref(), ctx, rng)?;
            st.prev[i] = Some(d.sequence);
            Ok(d.rate)
        }
    }
}

/// Run one episode. Configuration problems are returned as errors;
/// failures during the run end the episode and are noted in the header.
pub fn run_episode(cfg: &EpisodeConfig, mut brain: Brain<'_>) -> Result<EpisodeRecord> {
    cfg.validate()?;
    if cfg.mode.needs_actor() && brain.actor().is_none() {
        return Err(Error::Config(format!("mode {} needs actor weights", cfg.mode)));
    }
    if cfg.train && !matches!(brain, Brain::Learning(_)) {
        return Err(Error::Config("training episode needs a learner".into()));
    }
    let n = cfg.n_defenders;
    let env = &cfg.env;
    let mut spawn_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut decision_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    decision_rng.set_stream(1);
    let init = spawn(env, &cfg.spawn, n, &mut spawn_rng)?;

    let mut st = State {
        t: 0.0,
        thetas: initial_thetas(cfg, &init.defenders, &init.attacker),
        attacker: init.attacker,
        defenders: init.defenders,
        policy_out: vec![[0.0; SHAPE_DIM]; n],
        prev: vec![None; n],
    };
    let mut rows = Vec::new();
    let mut error = None;
    let mut refs = Vec::with_capacity(n);
    let mut step: u64 = 0;

    let status = loop {
        st.t = step as f64 * env.dt;
        let status = episode_status(st.attacker.p, &st.defenders, env, st.t);
        let snapshot = |st: &State, status, commands: Vec<Rate>| StepRow {
            t: st.t,
            status,
            attacker: st.attacker,
            defenders: st.defenders.clone(),
            thetas: st.thetas.iter().map(ShapeParams::to_array).collect(),
            commands,
            consensus_error: consensus_error(&st.thetas),
            model_loss: None,
            actor_loss: None,
        };
        if status.is_terminal() {
            if cfg.record_rows {
                rows.push(snapshot(&st, status, Vec::new()));
            }
            break status;
        }

        let result = (|| -> Result<StepRow> {
            let positions: Vec<Vec2> = st.defenders.iter().map(|d| d.p).collect();
            let topology = build_topology(&positions, env.r_com);
            if step.is_multiple_of(cfg.expert.decision_substeps as u64) {
                let ctx = ExpertContext {
                    env,
                    cfg: &cfg.expert,
                    shape_bounds: &cfg.shape_bounds,
                    n,
                };
                for i in 0..n {
                    let rate = decide(cfg, &brain, &ctx, &mut st, i, &mut decision_rng)?;
                    st.policy_out[i] = rate;
                    if let Brain::Learning(l) = &mut brain {
                        l.observe_decision(ActorSample {
                            theta: st.thetas[i],
                            s_a: st.attacker,
                            label: rate,
                            is_virtual: false,
                        });
                    }
                }
            }
            let (rates, next_thetas) = negotiation_step(&st.thetas, &st.policy_out, &topology, cfg.c_neg, env.dt, &cfg.shape_bounds);
            let row = snapshot(&st, status, rates.clone());
            st.thetas = next_thetas;

            let mut next_defenders = Vec::with_capacity(n);
            let f = &cfg.formation;
            for (i, d) in st.defenders.iter().enumerate() {
                let p_ref = if f.greedy_slots {
                    let own = pattern(&st.thetas[i], n)?;
                    own.refs[assign_slots(&st.defenders, &own, true)?[i]]
                } else {
                    pattern_into(&st.thetas[i], n, &mut refs)?;
                    refs[i]
                };
                let pc_dot = Vec2::new(rates[i][0], rates[i][1]);
                let u = formation_control(d, p_ref, pc_dot, f.k_p, env.c_d, f.drag_compensation);
                next_defenders.push(step_agent(*d, saturate(u, env.u_d_max)?, env.c_d, env.u_d_max, env.dt)?);
            }
            let (_, near) = nearest_defender(st.attacker.p, &st.defenders)?;
            let u_a = saturate(attacker_control(&st.attacker, near.p, &cfg.attacker, env.p_p)?, env.u_a_max)?;
            let next_attacker = step_agent(st.attacker, u_a, env.c_a, env.u_a_max, env.dt)?;
            if let Brain::Learning(l) = &mut brain {
                l.observe_transition(ModelSample {
                    s_a: st.attacker,
                    s_d: near,
                    s_a_next: next_attacker,
                });
            }
            st.defenders = next_defenders;
            st.attacker = next_attacker;
            Ok(row)
        })();

        match result {
            Ok(mut row) => {
                if let Brain::Learning(l) = &mut brain {
                    (row.model_loss, row.actor_loss) = l.tick(cfg);
                }
                if cfg.record_rows {
                    rows.push(row);
                }
            }
            Err(e) => {
                error = Some(e.to_string());
                break EpisodeStatus::Running;
            }
        }
        step += 1;
    };

    Ok(EpisodeRecord {
        header: RecordHeader {
            schema: RECORD_SCHEMA.into(),
            version: RECORD_VERSION,
            n_defenders: n,
            mode: cfg.mode,
            seed: cfg.seed,
            status,
            duration: st.t,
            error,
        },
        rows,
    })
}
