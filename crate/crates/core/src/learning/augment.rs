//! Virtual imitation samples: random shape parameters and attacker states
//! labeled by the expert.

use std::f64::consts::PI;

use rand::Rng;

use super::actor::{ActorSample, ActorWeights};
use crate::error::Result;
use crate::expert::{expert_decide, AttackerPredictor, ExpertContext};
use crate::formation::ShapeParams;
use crate::vec2::Vec2;
use crate::world::{AgentState, EnvConfig};

/// Uniform random shape parameters: center anywhere on the field, other
/// components within the clamp limits.
pub fn random_theta(ctx: &ExpertContext<'_>, rng: &mut (impl Rng + ?Sized)) -> ShapeParams {
    let half = ctx.env.half_extents();
    let sb = ctx.shape_bounds;
    ShapeParams::new(
        ctx.env.p_p + Vec2::new(rng.random_range(-half.x..=half.x), rng.random_range(-half.y..=half.y)),
        rng.random_range(-PI..=PI),
        rng.random_range(sb.zeta_min..=sb.zeta_max),
        rng.random_range(sb.beta_min..=sb.beta_max),
    )
}

/// Uniform attacker state outside the protected disk, speed within the
/// attacker's limit.
pub fn random_attacker(env: &EnvConfig, rng: &mut (impl Rng + ?Sized)) -> AgentState {
    let half = env.half_extents();
    let v_max = env.v_a_max();
    let p = loop {
        let p = env.p_p + Vec2::new(rng.random_range(-half.x..=half.x), rng.random_range(-half.y..=half.y));
        if p.distance(env.p_p) > env.rho_p {
            break p;
        }
    };
    let v = loop {
        let v = Vec2::new(rng.random_range(-v_max..=v_max), rng.random_range(-v_max..=v_max));
        if v.norm() <= v_max {
            break v;
        }
    };
    AgentState::new(p, v)
}

/// `count` expert-labeled samples flagged as virtual.
pub fn augment(
    ctx: &ExpertContext<'_>,
    model: &dyn AttackerPredictor,
    actor: Option<&ActorWeights>,
    count: usize,
    rng: &mut (impl Rng + ?Sized),
) -> Result<Vec<ActorSample>> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let theta = random_theta(ctx, rng);
        let s_a = random_attacker(ctx.env, rng);
        let d = expert_decide(&theta, &s_a, model, actor, None, ctx, rng)?;
        out.push(ActorSample {
            theta,
            s_a,
            label: d.rate,
            is_virtual: true,
        });
    }
    Ok(out)
}
