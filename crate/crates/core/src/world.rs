//! Agent dynamics, the attacker's potential-field policy and episode
//! termination.
//!
//! Both sides follow a damped second-order integrator
//! `p' = v, v' = u - C v` with the input saturated to `u_max`, so the
//! terminal speed of either side is `u_max / C`. Integration is a
//! semi-explicit Euler step: position is advanced with the old velocity,
//! then velocity with the saturated input.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Upper clamp for the avoidance weight near its `r -> r1` singularity, 1/m.
pub const G_CLAMP_MAX: f64 = 1.0e3;

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub p: Vec2,
    pub v: Vec2,
}

impl AgentState {
    pub const fn new(p: Vec2, v: Vec2) -> Self {
        Self { p, v }
    }

    pub fn at_rest(p: Vec2) -> Self {
        Self { p, v: Vec2::ZERO }
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.v.is_finite()
    }

    /// `[px, py, vx, vy]`
    pub fn to_array(&self) -> [f64; 4] {
        [self.p.x, self.p.y, self.v.x, self.v.y]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(Vec2::new(a[0], a[1]), Vec2::new(a[2], a[3]))
    }
}

/// Environment geometry and vehicle limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Protected-area center, m.
    pub p_p: Vec2,
    /// Protected-area radius, m.
    pub rho_p: f64,
    /// Capture radius, m.
    pub r_cap: f64,
    /// Communication radius, m.
    pub r_com: f64,
    /// Defender input bound, m/s^2.
    pub u_d_max: f64,
    /// Attacker input bound, m/s^2.
    pub u_a_max: f64,
    /// Defender drag, 1/s.
    pub c_d: f64,
    /// Attacker drag, 1/s.
    pub c_a: f64,
    /// Field extent along x, m (centered on `p_p`).
    pub field_width: f64,
    /// Field extent along y, m (centered on `p_p`).
    pub field_height: f64,
    /// Physics step, s.
    pub dt: f64,
    /// Episode time limit, s.
    pub t_max: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            p_p: Vec2::ZERO,
            rho_p: 2.0,
            r_cap: 1.0,
            r_com: 4.0,
            u_d_max: 15.0,
            u_a_max: 17.5,
            c_d: 7.5,
            c_a: 7.0,
            field_width: 30.0,
            field_height: 20.0,
            dt: 0.05,
            t_max: 120.0,
        }
    }
}

impl EnvConfig {
    pub fn v_d_max(&self) -> f64 {
        self.u_d_max / self.c_d
    }

    pub fn v_a_max(&self) -> f64 {
        self.u_a_max / self.c_a
    }

    /// Half extents of the field, centered on the protected area.
    pub fn half_extents(&self) -> Vec2 {
        Vec2::new(0.5 * self.field_width, 0.5 * self.field_height)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("env: {what}")))
            }
        };
        check(self.p_p.is_finite(), "p_p must be finite")?;
        check(self.rho_p > 0.0, "rho_p must be > 0")?;
        check(self.r_cap > 0.0, "r_cap must be > 0")?;
        check(self.r_com > 0.0, "r_com must be > 0")?;
        check(self.c_d > self.c_a && self.c_a > 0.0, "need c_d > c_a > 0")?;
        check(
            self.u_d_max > 0.0 && self.u_d_max < self.u_a_max,
            "need 0 < u_d_max < u_a_max",
        )?;
        check(self.dt > 0.0, "dt must be > 0")?;
        check(
            self.dt * self.c_d.max(self.c_a) < 1.0,
            "dt * max(c_d, c_a) must be < 1",
        )?;
        check(self.t_max > 0.0, "t_max must be > 0")?;
        check(
            self.field_width > 2.0 * self.rho_p && self.field_height > 2.0 * self.rho_p,
            "field must contain the protected area",
        )?;
        Ok(())
    }
}

/// Gains and radii of the attacker's potential field.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackerParams {
    /// Approach gain, m/s^2.
    pub k_ap: f64,
    /// Avoidance gain, m/s^2.
    pub k_ad: f64,
    /// Safe distance, m.
    pub r_safe: f64,
    /// Distance at which avoidance starts, m.
    pub r_avo: f64,
    /// Reverse the approach term so it points away from the protected
    /// area. Off by default.
    pub approach_reversed: bool,
}

impl Default for AttackerParams {
    fn default() -> Self {
        Self {
            k_ap: 10.0,
            k_ad: 8.0,
            r_safe: 1.0,
            r_avo: 10.0,
            approach_reversed: false,
        }
    }
}

impl AttackerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_ap > 0.0 && self.k_ad > 0.0) {
            return Err(Error::Config("attacker: gains must be > 0".into()));
        }
        if !(self.r_avo > self.r_safe && self.r_safe > 0.0) {
            return Err(Error::Config("attacker: need r_avo > r_safe > 0".into()));
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "t")]
pub enum EpisodeStatus {
    Running,
    Captured(f64),
    Breached(f64),
    Timeout,
}

impl EpisodeStatus {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, EpisodeStatus::Running)
    }

    pub fn label(&self) -> &'static str {
        match self {
            EpisodeStatus::Running => "running",
            EpisodeStatus::Captured(_) => "captured",
            EpisodeStatus::Breached(_) => "breached",
            EpisodeStatus::Timeout => "timeout",
        }
    }
}

/// Scale `u` back onto the disk of radius `u_max`, keeping its direction.
pub fn saturate(u: Vec2, u_max: f64) -> Result<Vec2> {
    if !u.is_finite() || !u_max.is_finite() {
        return Err(Error::NonFinite("saturate"));
    }
    if u_max <= 0.0 {
        return Err(Error::InvalidArgument(format!("u_max = {u_max} must be > 0")));
    }
    let n = u.norm();
    Ok(if n <= u_max { u } else { u * (u_max / n) })
}

/// One semi-explicit Euler step of the damped double integrator.
pub fn step_agent(s: AgentState, u: Vec2, drag: f64, u_max: f64, dt: f64) -> Result<AgentState> {
    let u = saturate(u, u_max)?;
    let p = s.p + s.v * dt;
    let v = s.v + (u - s.v * drag) * dt;
    let next = AgentState::new(p, v);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFinite("step_agent"))
    }
}

/// Avoidance weight `g(r, r1, r2)`: raised-cosine falloff over `(r1, r2]`,
/// zero beyond `r2`, clamped to [`G_CLAMP_MAX`] near and below `r1`.
pub fn weight_g(r: f64, r1: f64, r2: f64) -> Result<f64> {
    if r.is_nan() || r1.is_nan() || r2.is_nan() {
        return Err(Error::NonFinite("weight_g"));
    }
    if r > r2 {
        return Ok(0.0);
    }
    let d = r - r1;
    if d <= 0.0 {
        return Ok(G_CLAMP_MAX);
    }
    let g = (1.0 + (PI * d / (r2 - r1)).cos()) / d;
    Ok(g.min(G_CLAMP_MAX))
}

/// Unsaturated attacker input: approach the protected area, steer away
/// from the nearest defender.
pub fn attacker_control(
    s_a: &AgentState,
    p_d_near: Vec2,
    params: &AttackerParams,
    p_p: Vec2,
) -> Result<Vec2> {
    let to_target = if params.approach_reversed {
        s_a.p - p_p
    } else {
        p_p - s_a.p
    };
    let approach = to_target
        .unit()
        .ok_or(Error::Coincident("attacker_control: attacker at protected-area center"))?;
    let away = s_a.p - p_d_near;
    let r = away.norm();
    let away = away
        .unit()
        .ok_or(Error::Coincident("attacker_control: attacker on a defender"))?;
    let g = weight_g(r, params.r_safe, params.r_avo)?;
    Ok(approach * params.k_ap + away * (params.k_ad * g))
}

/// Closest defender to `p_a`; ties go to the lowest index.
pub fn nearest_defender(p_a: Vec2, defenders: &[AgentState]) -> Result<(usize, AgentState)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, d) in defenders.iter().enumerate() {
        let dist = p_a.distance(d.p);
        match best {
            Some((_, b)) if dist >= b => {}
            _ => best = Some((i, dist)),
        }
    }
    best.map(|(i, _)| (i, defenders[i]))
        .ok_or(Error::Empty("nearest_defender: no defenders"))
}

/// Terminal check. Capture takes precedence over breach.
pub fn episode_status(p_a: Vec2, defenders: &[AgentState], env: &EnvConfig, t: f64) -> EpisodeStatus {
    let captured = defenders.iter().any(|d| p_a.distance(d.p) <= env.r_cap);
    if captured {
        EpisodeStatus::Captured(t)
    } else if p_a.distance(env.p_p) <= env.rho_p {
        EpisodeStatus::Breached(t)
    } else if t >= env.t_max {
        EpisodeStatus::Timeout
    } else {
        EpisodeStatus::Running
    }
}
