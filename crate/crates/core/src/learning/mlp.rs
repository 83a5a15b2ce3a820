//! Small dense network: tanh hidden layers, linear output, trained with
//! plain gradient descent on a diagonally weighted squared error.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major `n_out x n_in` weights plus bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub name: String,
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(name: String, n_in: usize, n_out: usize) -> Self {
        Self {
            name,
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.n_out {
            let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            out.push(self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Gradient with the same layout as [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrad {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl MlpGrad {
    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).flatten().all(|g| g.is_finite())
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

fn layer_name(i: usize, last: usize) -> String {
    if i == last {
        "output".into()
    } else {
        format!("hidden{}", i + 1)
    }
}

impl Mlp {
    /// All-zero network with layer widths `sizes` (input first).
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output width");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::zeros(layer_name(i, last), w[0], w[1]))
            .collect();
        Self { layers }
    }

    /// Weights and biases uniform in `+-1/sqrt(fan_in)`.
    pub fn init_uniform(sizes: &[usize], rng: &mut (impl Rng + ?Sized)) -> Self {
        let mut net = Self::zeros(sizes);
        for l in net.layers.iter_mut() {
            let bound = 1.0 / (l.n_in as f64).sqrt();
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = rng.random_range(-bound..=bound);
            }
        }
        net
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_out(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.n_in()];
        s.extend(self.layers.iter().map(|l| l.n_out));
        s
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|w| w.is_finite()))
    }

    pub fn validate(&self) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.n_in * l.n_out || l.bias.len() != l.n_out {
                return Err(Error::Schema(format!("layer {} has inconsistent shape", l.name)));
            }
            if i > 0 && self.layers[i - 1].n_out != l.n_in {
                return Err(Error::Schema(format!("layer {} input width mismatch", l.name)));
            }
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("network weights"));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            l.apply(&a, &mut z);
            if i < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut a, &mut z);
        }
        a
    }

    /// `sum_b (y_b - f(x_b))^T diag(w) (y_b - f(x_b))`.
    pub fn loss(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>], w: &[f64]) -> f64 {
        inputs
            .iter()
            .zip(targets)
            .map(|(x, y)| {
                let out = self.forward(x);
                (0..out.len()).map(|k| w[k] * (y[k] - out[k]).powi(2)).sum::<f64>()
            })
            .sum()
    }

    /// Loss and its gradient by backpropagation.
    pub fn loss_and_grad(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>], w: &[f64]) -> (f64, MlpGrad) {
        let mut grad = MlpGrad {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: self.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        };
        let last = self.layers.len() - 1;
        let mut acts: Vec<Vec<f64>> = vec![Vec::new(); self.layers.len() + 1];
        let mut total = 0.0;
        for (x, y) in inputs.iter().zip(targets) {
            acts[0].clone_from(x);
            for (i, l) in self.layers.iter().enumerate() {
                let (prev, next) = acts.split_at_mut(i + 1);
                l.apply(&prev[i], &mut next[0]);
                if i < last {
                    next[0].iter_mut().for_each(|v| *v = v.tanh());
                }
            }
            let out = &acts[last + 1];
            let mut delta: Vec<f64> = (0..out.len())
                .map(|k| {
                    let e = y[k] - out[k];
                    total += w[k] * e * e;
                    -2.0 * w[k] * e
                })
                .collect();
            for i in (0..=last).rev() {
                let l = &self.layers[i];
                let a_in = &acts[i];
                for o in 0..l.n_out {
                    grad.bias[i][o] += delta[o];
                    let row = &mut grad.weights[i][o * l.n_in..(o + 1) * l.n_in];
                    for (g, a) in row.iter_mut().zip(a_in) {
                        *g += delta[o] * a;
                    }
                }
                if i > 0 {
                    delta = (0..l.n_in)
                        .map(|j| {
                            let back: f64 = (0..l.n_out).map(|o| l.weights[o * l.n_in + j] * delta[o]).sum();
                            back * (1.0 - a_in[j] * a_in[j])
                        })
                        .collect();
                }
            }
        }
        (total, grad)
    }

    /// `self -= lr * grad`.
    pub fn descend(&mut self, grad: &MlpGrad, lr: f64) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            for (w, g) in l.weights.iter_mut().zip(&grad.weights[i]) {
                *w -= lr * g;
            }
            for (b, g) in l.bias.iter_mut().zip(&grad.bias[i]) {
                *b -= lr * g;
            }
        }
    }

    /// Norm-wise relative error of the backpropagated gradient against
    /// central differences with step `h`.
    pub fn grad_check(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>], w: &[f64], h: f64) -> f64 {
        let analytic = self.loss_and_grad(inputs, targets, w).1.flat();
        let params = self.params_flat();
        let mut probe = self.clone();
        let mut numeric = Vec::with_capacity(params.len());
        let mut shifted = params.clone();
        for k in 0..params.len() {
            shifted[k] = params[k] + h;
            probe.set_params_flat(&shifted);
            let up = probe.loss(inputs, targets, w);
            shifted[k] = params[k] - h;
            probe.set_params_flat(&shifted);
            let down = probe.loss(inputs, targets, w);
            shifted[k] = params[k];
            numeric.push((up - down) / (2.0 * h));
        }
        relative_error(&analytic, &numeric)
    }

    /// Parameters in the same order as [`MlpGrad::flat`].
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for l in self.layers.iter_mut() {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = it.next().expect("flat parameter vector too short");
            }
        }
    }
}

/// `|a - b| / max(|a|, |b|)` in the Euclidean norm; 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied()));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(&[3, 4, 2]);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn hand_matrix_oracle() {
        let mut net = Mlp::zeros(&[2, 2, 1]);
        net.layers[0].weights = vec![0.5, -1.0, 0.25, 2.0];
        net.layers[0].bias = vec![0.1, -0.2];
        net.layers[1].weights = vec![1.5, -0.5];
        net.layers[1].bias = vec![0.3];
        let x = [0.4, -0.7];
        let h0 = (0.5 * 0.4 - 1.0 * -0.7 + 0.1f64).tanh();
        let h1 = (0.25 * 0.4 + 2.0 * -0.7 - 0.2f64).tanh();
        let want = 1.5 * h0 - 0.5 * h1 + 0.3;
        assert!((net.forward(&x)[0] - want).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = Mlp::init_uniform(&[3, 5, 4, 2], &mut rng);
        let xs: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ys: Vec<Vec<f64>> = (0..4).map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let w = [1.0, 0.5];
        let (_, g) = net.loss_and_grad(&xs, &ys, &w);
        let g = g.flat();
        let p = net.params_flat();
        let h = 1e-5;
        for k in 0..p.len() {
            let mut a = net.clone();
            let mut q = p.clone();
            q[k] += h;
            a.set_params_flat(&q);
            let up = a.loss(&xs, &ys, &w);
            q[k] -= 2.0 * h;
            a.set_params_flat(&q);
            let down = a.loss(&xs, &ys, &w);
            let fd = (up - down) / (2.0 * h);
            let err = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-6);
            assert!(err < 1e-4, "param {k}: fd {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn zero_residual_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = Mlp::init_uniform(&[2, 3, 2], &mut rng);
        let x = vec![vec![0.2, 0.9]];
        let y = vec![net.forward(&x[0])];
        let (l, g) = net.loss_and_grad(&x, &y, &[1.0, 1.0]);
        assert_eq!(l, 0.0);
        assert!(g.flat().iter().all(|v| *v == 0.0));
    }
}
