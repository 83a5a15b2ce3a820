//! Structured attacker model: the attacker's own control law and dynamics
//! with the four strategy constants as the only trainable weights.
//!
//! The constants are stored unconstrained and decoded through softplus:
//! `k_ap = sp(r0)`, `k_ad = sp(r1)`, `r_safe = sp(r2)`,
//! `r_avo = r_safe + sp(r3)`. Every raw vector decodes to a valid set.

use serde::{Deserialize, Serialize};

use super::dual::Dual;
use crate::error::{Error, Result};
use crate::expert::AttackerPredictor;
use crate::world::{AgentState, AttackerParams, EnvConfig, G_CLAMP_MAX};

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inv(y: f64) -> f64 {
    y + (-(-y).exp()).ln_1p()
}

/// One observed attacker transition.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSample {
    pub s_a: AgentState,
    /// Nearest defender at the same step.
    pub s_d: AgentState,
    pub s_a_next: AgentState,
}

impl ModelSample {
    pub fn is_finite(&self) -> bool {
        self.s_a.is_finite() && self.s_d.is_finite() && self.s_a_next.is_finite()
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub raw: [f64; 4],
    /// Matches the simulated attacker's approach-sign switch.
    #[serde(default)]
    pub approach_reversed: bool,
}

impl Default for ModelWeights {
    /// Deliberately wrong starting point.
    fn default() -> Self {
        Self::from_decoded(5.0, 5.0, 0.5, 5.0).expect("valid initial model")
    }
}

impl ModelWeights {
    pub fn from_decoded(k_ap: f64, k_ad: f64, r_safe: f64, r_avo: f64) -> Result<Self> {
        if !(k_ap > 0.0 && k_ad > 0.0 && r_safe > 0.0 && r_avo > r_safe) {
            return Err(Error::InvalidArgument(format!(
                "model constants need k_ap, k_ad, r_safe > 0 and r_avo > r_safe (got {k_ap}, {k_ad}, {r_safe}, {r_avo})"
            )));
        }
        Ok(Self {
            raw: [
                softplus_inv(k_ap),
                softplus_inv(k_ad),
                softplus_inv(r_safe),
                softplus_inv(r_avo - r_safe),
            ],
            approach_reversed: false,
        })
    }

    pub fn from_params(p: &AttackerParams) -> Result<Self> {
        let mut w = Self::from_decoded(p.k_ap, p.k_ad, p.r_safe, p.r_avo)?;
        w.approach_reversed = p.approach_reversed;
        Ok(w)
    }

    pub fn decode(&self) -> AttackerParams {
        let r_safe = softplus(self.raw[2]);
        AttackerParams {
            k_ap: softplus(self.raw[0]),
            k_ad: softplus(self.raw[1]),
            r_safe,
            r_avo: r_safe + softplus(self.raw[3]),
            approach_reversed: self.approach_reversed,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.raw.iter().all(|x| x.is_finite())
    }
}

/// One-step prediction of the attacker's next state.
pub fn model_forward(w: &ModelWeights, s_a: &AgentState, s_d: &AgentState, env: &EnvConfig, dt: f64) -> Result<AgentState> {
    w.decode().predict(s_a, s_d, env, dt)
}

impl AttackerPredictor for ModelWeights {
    fn predict(&self, s_a: &AgentState, s_d: &AgentState, env: &EnvConfig, dt: f64) -> Result<AgentState> {
        model_forward(self, s_a, s_d, env, dt)
    }
}

type D4 = Dual<4>;

/// Predicted next velocity with derivatives along the four raw weights.
/// The position update does not depend on the weights.
fn forward_dual(w: &ModelWeights, s_a: &AgentState, s_d: &AgentState, env: &EnvConfig, dt: f64) -> Result<[D4; 2]> {
    let raw = w.raw;
    let k_ap = D4::seeded(softplus(raw[0]), 0, sigmoid(raw[0]));
    let k_ad = D4::seeded(softplus(raw[1]), 1, sigmoid(raw[1]));
    let r_safe = D4::seeded(softplus(raw[2]), 2, sigmoid(raw[2]));
    let gap = D4::seeded(softplus(raw[3]), 3, sigmoid(raw[3]));
    let r_avo = r_safe + gap;

    let to_target = if w.approach_reversed { s_a.p - env.p_p } else { env.p_p - s_a.p };
    let approach = to_target
        .unit()
        .ok_or(Error::Coincident("model: attacker at protected-area center"))?;
    let away = s_a.p - s_d.p;
    let r = away.norm();
    let away = away.unit().ok_or(Error::Coincident("model: attacker on a defender"))?;

    // zero slope in the flat and clamped regions
    let g = if r > r_avo.v {
        D4::constant(0.0)
    } else {
        let d = D4::constant(r) - r_safe;
        if d.v <= 0.0 {
            D4::constant(G_CLAMP_MAX)
        } else {
            let g = ((d / gap) * std::f64::consts::PI).cos() + 1.0;
            let g = g / d;
            if g.v > G_CLAMP_MAX {
                D4::constant(G_CLAMP_MAX)
            } else {
                g
            }
        }
    };
    let push = k_ad * g;
    let mut ux = k_ap * approach.x + push * away.x;
    let mut uy = k_ap * approach.y + push * away.y;
    let norm = (ux * ux + uy * uy).sqrt();
    if norm.v > env.u_a_max {
        let s = D4::constant(env.u_a_max) / norm;
        ux = ux * s;
        uy = uy * s;
    }
    let vx = (ux - D4::constant(s_a.v.x * env.c_a)) * dt + s_a.v.x;
    let vy = (uy - D4::constant(s_a.v.y * env.c_a)) * dt + s_a.v.y;
    Ok([vx, vy])
}

fn residual_loss(target: &AgentState, pred: &AgentState, w_m: &[f64; 4]) -> f64 {
    let t = target.to_array();
    let p = pred.to_array();
    (0..4).map(|k| w_m[k] * (t[k] - p[k]).powi(2)).sum()
}

/// `sum_b ds^T diag(w_m) ds` with `ds = s_a_next - prediction`.
pub fn model_loss(w: &ModelWeights, batch: &[ModelSample], w_m: &[f64; 4], env: &EnvConfig, dt: f64) -> Result<f64> {
    let mut total = 0.0;
    for s in batch {
        let pred = model_forward(w, &s.s_a, &s.s_d, env, dt)?;
        total += residual_loss(&s.s_a_next, &pred, w_m);
    }
    Ok(total)
}

/// Loss and gradient with respect to the raw weights.
pub fn model_loss_and_grad(
    w: &ModelWeights,
    batch: &[ModelSample],
    w_m: &[f64; 4],
    env: &EnvConfig,
    dt: f64,
) -> Result<(f64, [f64; 4])> {
    let mut total = 0.0;
    let mut grad = [0.0; 4];
    for s in batch {
        let [vx, vy] = forward_dual(w, &s.s_a, &s.s_d, env, dt)?;
        let pred_p = s.s_a.p + s.s_a.v * dt;
        let dp = s.s_a_next.p - pred_p;
        total += w_m[0] * dp.x * dp.x + w_m[1] * dp.y * dp.y;
        let ex = s.s_a_next.v.x - vx.v;
        let ey = s.s_a_next.v.y - vy.v;
        total += w_m[2] * ex * ex + w_m[3] * ey * ey;
        for k in 0..4 {
            grad[k] += -2.0 * (w_m[2] * ex * vx.d[k] + w_m[3] * ey * vy.d[k]);
        }
    }
    Ok((total, grad))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelStep {
    pub weights: ModelWeights,
    /// Loss on the batch before the step.
    pub loss: f64,
    pub grad: [f64; 4],
}

/// One plain gradient step in the raw parameterization.
pub fn model_update(
    w: &ModelWeights,
    batch: &[ModelSample],
    lr: f64,
    w_m: &[f64; 4],
    env: &EnvConfig,
    dt: f64,
) -> Result<ModelStep> {
    if batch.is_empty() {
        return Err(Error::Empty("model_update: empty batch"));
    }
    let (loss, grad) = model_loss_and_grad(w, batch, w_m, env, dt)?;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("model gradient"));
    }
    let mut next = *w;
    for k in 0..4 {
        next.raw[k] -= lr * grad[k];
    }
    Ok(ModelStep {
        weights: next,
        loss,
        grad,
    })
}

/// Relative gradient error against central differences with step `h`.
pub fn model_grad_check(w: &ModelWeights, batch: &[ModelSample], w_m: &[f64; 4], env: &EnvConfig, dt: f64, h: f64) -> Result<f64> {
    let (_, g) = model_loss_and_grad(w, batch, w_m, env, dt)?;
    let mut worst = 0.0f64;
    for k in 0..4 {
        let mut up = *w;
        up.raw[k] += h;
        let mut down = *w;
        down.raw[k] -= h;
        let fd = (model_loss(&up, batch, w_m, env, dt)? - model_loss(&down, batch, w_m, env, dt)?) / (2.0 * h);
        let scale = fd.abs().max(g[k].abs());
        if scale > 1e-8 {
            worst = worst.max((fd - g[k]).abs() / scale);
        }
    }
    Ok(worst)
}

/// Simulator transition for an attacker at `s_a` reacting to `s_d`.
pub fn true_transition(truth: &AttackerParams, s_a: &AgentState, s_d: &AgentState, env: &EnvConfig, dt: f64) -> Result<ModelSample> {
    Ok(ModelSample {
        s_a: *s_a,
        s_d: *s_d,
        s_a_next: truth.predict(s_a, s_d, env, dt)?,
    })
}
