use std::f64::consts::TAU;

use rand::Rng;

use super::config::SpawnConfig;
use crate::error::{Error, Result};
use crate::vec2::Vec2;
use crate::world::{AgentState, EnvConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct Spawn {
    pub defenders: Vec<AgentState>,
    pub attacker: AgentState,
}

/// Defenders uniform over an annulus around the protected disk, attacker
/// uniform over the band along the field edge. Everyone starts at rest.
pub fn spawn(env: &EnvConfig, cfg: &SpawnConfig, n: usize, rng: &mut (impl Rng + ?Sized)) -> Result<Spawn> {
    let r_in = env.rho_p + cfg.defender_inner_gap;
    let r_out = env.rho_p + cfg.defender_outer_gap;
    let mut defenders: Vec<AgentState> = Vec::with_capacity(n);
    let mut tries = 0;
    while defenders.len() < n {
        tries += 1;
        if tries > cfg.max_tries {
            return Err(Error::SpawnFailed(tries - 1));
        }
        let r = rng.random_range(r_in * r_in..=r_out * r_out).sqrt();
        let p = env.p_p + Vec2::from_angle(rng.random_range(0.0..TAU)) * r;
        if defenders.iter().all(|d| d.p.distance(p) >= cfg.defender_spacing) {
            defenders.push(AgentState::at_rest(p));
        }
    }

    let half = env.half_extents();
    let mut tries = 0;
    let attacker = loop {
        tries += 1;
        if tries > cfg.max_tries {
            return Err(Error::SpawnFailed(tries - 1));
        }
        let local = Vec2::new(rng.random_range(-half.x..=half.x), rng.random_range(-half.y..=half.y));
        let edge_gap = (half.x - local.x.abs()).min(half.y - local.y.abs());
        if edge_gap <= cfg.attacker_band && local.norm() >= cfg.attacker_min_range {
            break AgentState::at_rest(env.p_p + local);
        }
    };
    Ok(Spawn { defenders, attacker })
}
