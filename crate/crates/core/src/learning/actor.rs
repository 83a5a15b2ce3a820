//! Actor network: `(theta, s_a) -> theta_dot`, trained to imitate the
//! expert's decisions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::error::{Error, Result};
use crate::expert::{wrap_pi, ActionBounds, Rate};
use crate::formation::{ShapeParams, SHAPE_DIM};
use crate::world::{AgentState, EnvConfig};

pub const ACTOR_SIZES: [usize; 4] = [9, 18, 18, 5];

/// Fixed affine input scaling. Positions are taken relative to the
/// protected-area center.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputScaling {
    /// m
    pub position: f64,
    /// m/s
    pub velocity: f64,
    /// rad
    pub angle: f64,
}

impl Default for InputScaling {
    fn default() -> Self {
        Self {
            position: 15.0,
            velocity: 2.5,
            angle: std::f64::consts::PI,
        }
    }
}

impl InputScaling {
    pub fn actor_features(&self, theta: &ShapeParams, s_a: &AgentState, env: &EnvConfig) -> Vec<f64> {
        let c = theta.p_c - env.p_p;
        let a = s_a.p - env.p_p;
        vec![
            c.x / self.position,
            c.y / self.position,
            wrap_pi(theta.phi) / self.angle,
            theta.zeta / self.position,
            theta.beta / self.angle,
            a.x / self.position,
            a.y / self.position,
            s_a.v.x / self.velocity,
            s_a.v.y / self.velocity,
        ]
    }
}

/// One imitation target.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActorSample {
    pub theta: ShapeParams,
    pub s_a: AgentState,
    /// Expert rate.
    pub label: Rate,
    /// Produced by augmentation rather than by an episode.
    pub is_virtual: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActorWeights {
    pub net: Mlp,
    pub scaling: InputScaling,
    pub bounds: ActionBounds,
}

impl ActorWeights {
    pub fn init(rng: &mut (impl Rng + ?Sized), scaling: InputScaling, bounds: ActionBounds) -> Self {
        Self {
            net: Mlp::init_uniform(&ACTOR_SIZES, rng),
            scaling,
            bounds,
        }
    }

    pub fn zeros(scaling: InputScaling, bounds: ActionBounds) -> Self {
        Self {
            net: Mlp::zeros(&ACTOR_SIZES),
            scaling,
            bounds,
        }
    }

    /// Unclamped network output.
    pub fn forward_raw(&self, theta: &ShapeParams, s_a: &AgentState, env: &EnvConfig) -> Rate {
        let out = self.net.forward(&self.scaling.actor_features(theta, s_a, env));
        let mut r = [0.0; SHAPE_DIM];
        r.copy_from_slice(&out);
        r
    }

    /// Network output clamped to the action bounds.
    pub fn forward(&self, theta: &ShapeParams, s_a: &AgentState, env: &EnvConfig) -> Rate {
        self.bounds.clamp(&self.forward_raw(theta, s_a, env))
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        if self.net.sizes() != ACTOR_SIZES {
            return Err(Error::Schema(format!("actor layer sizes {:?}, expected {:?}", self.net.sizes(), ACTOR_SIZES)));
        }
        Ok(())
    }

    fn batch_arrays(&self, batch: &[ActorSample], env: &EnvConfig) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let xs = batch.iter().map(|s| self.scaling.actor_features(&s.theta, &s.s_a, env)).collect();
        let ys = batch.iter().map(|s| s.label.to_vec()).collect();
        (xs, ys)
    }

    /// Weighted squared error against the labels, measured before clamping.
    pub fn loss(&self, batch: &[ActorSample], w_pi: &[f64; SHAPE_DIM], env: &EnvConfig) -> f64 {
        let (xs, ys) = self.batch_arrays(batch, env);
        self.net.loss(&xs, &ys, w_pi)
    }

    /// Relative error of the loss gradient against central differences.
    pub fn grad_check(&self, batch: &[ActorSample], w_pi: &[f64; SHAPE_DIM], env: &EnvConfig, h: f64) -> f64 {
        let (xs, ys) = self.batch_arrays(batch, env);
        self.net.grad_check(&xs, &ys, w_pi, h)
    }

    /// One plain gradient step. Returns the batch loss before the step.
    pub fn update(&mut self, batch: &[ActorSample], lr: f64, w_pi: &[f64; SHAPE_DIM], env: &EnvConfig) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("actor update: empty batch"));
        }
        let (xs, ys) = self.batch_arrays(batch, env);
        let (loss, grad) = self.net.loss_and_grad(&xs, &ys, w_pi);
        if !loss.is_finite() || !grad.is_finite() {
            return Err(Error::NonFinite("actor gradient"));
        }
        self.net.descend(&grad, lr);
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec2::Vec2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(rng: &mut impl Rng) -> ActorSample {
        ActorSample {
            theta: ShapeParams::new(
                Vec2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
                rng.random_range(-3.0..3.0),
                rng.random_range(0.5..4.0),
                rng.random_range(0.0..6.0),
            ),
            s_a: AgentState::new(
                Vec2::new(rng.random_range(-15.0..15.0), rng.random_range(-10.0..10.0)),
                Vec2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
            ),
            label: ActionBounds::default().sample_uniform(rng),
            is_virtual: false,
        }
    }

    #[test]
    fn zero_actor_outputs_zero() {
        let a = ActorWeights::zeros(InputScaling::default(), ActionBounds::default());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample(&mut rng);
        assert_eq!(a.forward(&s.theta, &s.s_a, &EnvConfig::default()), [0.0; 5]);
    }

    #[test]
    fn output_respects_bounds() {
        let env = EnvConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut a = ActorWeights::init(&mut rng, InputScaling::default(), ActionBounds::default());
        for l in a.net.layers.iter_mut() {
            l.weights.iter_mut().for_each(|w| *w *= 50.0);
        }
        for _ in 0..500 {
            let s = sample(&mut rng);
            assert!(a.bounds.contains(&a.forward(&s.theta, &s.s_a, &env)));
        }
    }

    #[test]
    fn overfits_single_sample() {
        let env = EnvConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = ActorWeights::init(&mut rng, InputScaling::default(), ActionBounds::default());
        let s = [sample(&mut rng)];
        let w = [1.0; 5];
        for _ in 0..5000 {
            a.update(&s, 0.01, &w, &env).unwrap();
        }
        assert!(a.loss(&s, &w, &env) < 1e-6);
    }

    #[test]
    fn matched_labels_leave_weights_unchanged() {
        let env = EnvConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut a = ActorWeights::init(&mut rng, InputScaling::default(), ActionBounds::default());
        let mut s = sample(&mut rng);
        s.label = a.forward_raw(&s.theta, &s.s_a, &env);
        let before = a.clone();
        let loss = a.update(&[s], 0.1, &[1.0; 5], &env).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(a, before);
    }
}
