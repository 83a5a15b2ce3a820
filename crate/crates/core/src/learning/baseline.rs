//! Unstructured comparison model: a plain 8 -> 32 -> 32 -> 4 regressor for
//! the attacker's next state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::actor::InputScaling;
use super::mlp::Mlp;
use super::model::ModelSample;
use crate::error::{Error, Result};
use crate::world::{AgentState, EnvConfig};

pub const BASELINE_SIZES: [usize; 4] = [8, 32, 32, 4];

/// Predicts `s_a_next = s_a + delta_scale * net(features)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineWeights {
    pub net: Mlp,
    pub scaling: InputScaling,
    /// Output units per state component: `[m, m, m/s, m/s]`.
    pub delta_scale: [f64; 4],
}

fn default_delta_scale(env: &EnvConfig) -> [f64; 4] {
    let dp = env.dt * env.v_a_max();
    let dv = env.dt * env.u_a_max;
    [dp, dp, dv, dv]
}

impl BaselineWeights {
    pub fn init(rng: &mut (impl Rng + ?Sized), scaling: InputScaling, env: &EnvConfig) -> Self {
        Self {
            net: Mlp::init_uniform(&BASELINE_SIZES, rng),
            scaling,
            delta_scale: default_delta_scale(env),
        }
    }

    pub fn zeros(scaling: InputScaling, env: &EnvConfig) -> Self {
        Self {
            net: Mlp::zeros(&BASELINE_SIZES),
            scaling,
            delta_scale: default_delta_scale(env),
        }
    }

    fn features(&self, s_a: &AgentState, s_d: &AgentState, env: &EnvConfig) -> Vec<f64> {
        let s = &self.scaling;
        let a = s_a.p - env.p_p;
        let d = s_d.p - env.p_p;
        vec![
            a.x / s.position,
            a.y / s.position,
            s_a.v.x / s.velocity,
            s_a.v.y / s.velocity,
            d.x / s.position,
            d.y / s.position,
            s_d.v.x / s.velocity,
            s_d.v.y / s.velocity,
        ]
    }

    pub fn forward(&self, s_a: &AgentState, s_d: &AgentState, env: &EnvConfig) -> AgentState {
        let out = self.net.forward(&self.features(s_a, s_d, env));
        let mut next = s_a.to_array();
        for k in 0..4 {
            next[k] += self.delta_scale[k] * out[k];
        }
        AgentState::from_array(next)
    }

    /// Targets and weights in network units, so the network loss equals
    /// the physical-unit loss under `w_m`.
    fn batch_arrays(&self, batch: &[ModelSample], w_m: &[f64; 4], env: &EnvConfig) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, [f64; 4]) {
        let xs = batch.iter().map(|s| self.features(&s.s_a, &s.s_d, env)).collect();
        let ys = batch
            .iter()
            .map(|s| {
                let (a, b) = (s.s_a.to_array(), s.s_a_next.to_array());
                (0..4).map(|k| (b[k] - a[k]) / self.delta_scale[k]).collect()
            })
            .collect();
        let w = std::array::from_fn(|k| w_m[k] * self.delta_scale[k] * self.delta_scale[k]);
        (xs, ys, w)
    }

    pub fn loss(&self, batch: &[ModelSample], w_m: &[f64; 4], env: &EnvConfig) -> f64 {
        let (xs, ys, w) = self.batch_arrays(batch, w_m, env);
        self.net.loss(&xs, &ys, &w)
    }

    /// Relative error of the loss gradient against central differences.
    pub fn grad_check(&self, batch: &[ModelSample], w_m: &[f64; 4], env: &EnvConfig, h: f64) -> f64 {
        let (xs, ys, w) = self.batch_arrays(batch, w_m, env);
        self.net.grad_check(&xs, &ys, &w, h)
    }

    /// One plain gradient step. Returns the batch loss before the step.
    pub fn update(&mut self, batch: &[ModelSample], lr: f64, w_m: &[f64; 4], env: &EnvConfig) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("baseline update: empty batch"));
        }
        let (xs, ys, w) = self.batch_arrays(batch, w_m, env);
        let (loss, grad) = self.net.loss_and_grad(&xs, &ys, &w);
        if !loss.is_finite() || !grad.is_finite() {
            return Err(Error::NonFinite("baseline gradient"));
        }
        self.net.descend(&grad, lr);
        Ok(loss)
    }
}
