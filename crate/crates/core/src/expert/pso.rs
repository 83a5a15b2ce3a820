//! Box-constrained particle swarm optimizer.
//!
//! Update per particle `m`, iteration `k`:
//!
//! ```text
//! vel = omega * vel + c1 * r1 * (gbest - x) + c2 * r2 * (pbest_m - x)
//! x   = clamp(x + vel, lo, hi)
//! ```
//!
//! `r1` and `r2` are scalars drawn per particle per iteration, in particle
//! order, before any objective evaluation of that iteration. The global
//! best is refreshed once per iteration, after all particles moved.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoConfig {
    pub n_particles: usize,
    pub n_iters: usize,
    /// Inertia weight.
    pub omega: f64,
    /// Pull toward the global best.
    pub c1: f64,
    /// Pull toward the particle's own best.
    pub c2: f64,
    /// Normal-seed spread as a fraction of each bound's half-width.
    pub sigma_frac: f64,
    /// Initial velocities are uniform in `+-init_velocity_frac * (hi - lo)`.
    pub init_velocity_frac: f64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            n_particles: 5,
            n_iters: 5,
            omega: 0.7,
            c1: 0.1,
            c2: 0.1,
            sigma_frac: 0.2,
            init_velocity_frac: 0.1,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: &str| Err(crate::Error::Config(format!("pso: {m}")));
        if self.n_particles < 2 {
            return bad("n_particles must be >= 2");
        }
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return bad("omega must be in (0, 1]");
        }
        if self.c1 < 0.0 || self.c2 < 0.0 {
            return bad("c1, c2 must be >= 0");
        }
        if self.sigma_frac < 0.0 || self.init_velocity_frac < 0.0 {
            return bad("sigma_frac and init_velocity_frac must be >= 0");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PsoResult {
    pub best: Vec<f64>,
    pub best_cost: f64,
    /// Global best cost after initialization and after every iteration.
    pub history: Vec<f64>,
    pub final_velocities: Vec<Vec<f64>>,
}

fn clamp_into(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

/// Minimize `objective` from the given seed positions. Initial velocities
/// are drawn from `rng` before the first iteration.
pub fn pso_solve<F, R>(objective: F, seeds: Vec<Vec<f64>>, lo: &[f64], hi: &[f64], cfg: &PsoConfig, rng: &mut R) -> PsoResult
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let velocities: Vec<Vec<f64>> = seeds
        .iter()
        .map(|_| {
            lo.iter()
                .zip(hi)
                .map(|(l, h)| {
                    let span = cfg.init_velocity_frac * (h - l);
                    if span > 0.0 {
                        rng.random_range(-span..=span)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    pso_solve_with_velocities(objective, seeds, velocities, lo, hi, cfg, rng)
}

pub fn pso_solve_with_velocities<F, R>(
    mut objective: F,
    seeds: Vec<Vec<f64>>,
    mut velocities: Vec<Vec<f64>>,
    lo: &[f64],
    hi: &[f64],
    cfg: &PsoConfig,
    rng: &mut R,
) -> PsoResult
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    assert!(!seeds.is_empty(), "pso_solve needs at least one seed");
    assert_eq!(seeds.len(), velocities.len());
    let dim = lo.len();
    let mut positions = seeds;
    for x in positions.iter_mut() {
        assert_eq!(x.len(), dim);
        clamp_into(x, lo, hi);
    }

    let costs: Vec<f64> = positions.iter().map(|x| objective(x)).collect();
    let mut pbest = positions.clone();
    let mut pbest_cost = costs;
    let (mut g_idx, mut g_cost) = (0, pbest_cost[0]);
    for (i, &c) in pbest_cost.iter().enumerate() {
        if c < g_cost {
            g_idx = i;
            g_cost = c;
        }
    }
    let mut gbest = pbest[g_idx].clone();
    let mut history = Vec::with_capacity(cfg.n_iters + 1);
    history.push(g_cost);

    let mut draws = vec![(0.0, 0.0); positions.len()];
    for _ in 0..cfg.n_iters {
        for d in draws.iter_mut() {
            *d = (rng.random::<f64>(), rng.random::<f64>());
        }
        for (m, x) in positions.iter_mut().enumerate() {
            let (r1, r2) = draws[m];
            let vel = &mut velocities[m];
            for k in 0..dim {
                vel[k] = cfg.omega * vel[k] + cfg.c1 * r1 * (gbest[k] - x[k]) + cfg.c2 * r2 * (pbest[m][k] - x[k]);
                x[k] += vel[k];
            }
            clamp_into(x, lo, hi);
        }
        for (m, x) in positions.iter().enumerate() {
            let c = objective(x);
            if c < pbest_cost[m] {
                pbest_cost[m] = c;
                pbest[m].clone_from(x);
            }
        }
        for (m, &c) in pbest_cost.iter().enumerate() {
            if c < g_cost {
                g_cost = c;
                gbest.clone_from(&pbest[m]);
            }
        }
        history.push(g_cost);
    }

    PsoResult {
        best: gbest,
        best_cost: g_cost,
        history,
        final_velocities: velocities,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sphere(target: &[f64]) -> impl Fn(&[f64]) -> f64 + '_ {
        move |x| x.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    #[test]
    fn frozen_velocities_without_attraction() {
        let cfg = PsoConfig {
            omega: 1.0,
            c1: 0.0,
            c2: 0.0,
            n_iters: 10,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let seeds = vec![vec![0.0, 0.0], vec![1.0, -1.0], vec![-2.0, 3.0]];
        let vels = vec![vec![0.1, -0.2], vec![0.0, 0.3], vec![-0.05, 0.0]];
        let lo = [-1e6, -1e6];
        let hi = [1e6, 1e6];
        let r = pso_solve_with_velocities(sphere(&[0.5, 0.5]), seeds, vels.clone(), &lo, &hi, &cfg, &mut rng);
        assert_eq!(r.final_velocities, vels);
    }

    #[test]
    fn particle_at_optimum_stays() {
        let cfg = PsoConfig {
            n_iters: 20,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 1.5;
        let r = pso_solve_with_velocities(f, vec![vec![0.3]], vec![vec![0.0]], &[-1.0], &[1.0], &cfg, &mut rng);
        assert_eq!(r.best, vec![0.3]);
        assert_eq!(r.best_cost, 1.5);
    }

    #[test]
    fn finds_quadratic_optimum() {
        let target = [0.3, -0.2];
        let lo = [-1.0; 2];
        let hi = [1.0; 2];
        use rand::Rng;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seeds: Vec<Vec<f64>> = (0..20).map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let cfg = PsoConfig {
                n_particles: 20,
                n_iters: 50,
                omega: 0.5,
                c1: 1.0,
                c2: 1.0,
                ..Default::default()
            };
            let r = pso_solve(sphere(&target), seeds, &lo, &hi, &cfg, &mut rng);
            let dist = r.best.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(dist < 1e-2, "seed {seed}: dist {dist}");
        }
    }

    #[test]
    fn gbest_is_monotone_and_never_worse_than_seeds() {
        let cfg = PsoConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = |x: &[f64]| x.iter().map(|v| (3.0 * v).sin() + v * v).sum::<f64>();
        let seeds: Vec<Vec<f64>> = (0..5).map(|i| vec![0.2 * i as f64 - 0.4; 3]).collect();
        let seed_best = seeds.iter().map(|s| f(s)).fold(f64::INFINITY, f64::min);
        let r = pso_solve(f, seeds, &[-1.0; 3], &[1.0; 3], &cfg, &mut rng);
        assert!(r.best_cost <= seed_best);
        for w in r.history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = PsoConfig::default();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let seeds = vec![vec![0.5, 0.5]; 5];
            pso_solve(sphere(&[0.1, 0.2]), seeds, &[-1.0; 2], &[1.0; 2], &cfg, &mut rng)
        };
        assert_eq!(run(), run());
    }
}
