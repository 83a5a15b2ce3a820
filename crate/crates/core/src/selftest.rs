//! Fast invariant checks run by `arcpursuit selftest`.
//!
//! Each check draws its own random instances from a fixed seed and compares
//! against a direct computation that does not share code with the function
//! under test.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expert::angles::{capture_angle, protected_angle};
use crate::expert::pso::{pso_solve, PsoConfig};
use crate::formation::{pattern, ShapeBounds, ShapeParams};
use crate::learning::model::{model_grad_check, true_transition};
use crate::learning::{ActorSample, ActorWeights, BaselineWeights, InputScaling, ModelSample, ModelWeights};
use crate::negotiation::{build_topology, consensus_error, negotiation_step};
use crate::sim::{monte_carlo, run_episode, Brain, EpisodeConfig, Mode};
use crate::vec2::Vec2;
use crate::world::{AgentState, AttackerParams, EnvConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

/// Instance counts per check.
#[derive(Copy, Clone, Debug)]
pub struct Sizes {
    pub formation_trials: usize,
    pub consensus_trials: usize,
    pub gradient_draws: usize,
    pub angle_scenes: usize,
    pub angle_rays: usize,
    pub pso_seeds: usize,
}

impl Sizes {
    pub const QUICK: Sizes = Sizes {
        formation_trials: 200,
        consensus_trials: 5,
        gradient_draws: 10,
        angle_scenes: 10,
        angle_rays: 20_000,
        pso_seeds: 10,
    };
}

pub fn run_all(sizes: Sizes) -> Vec<CheckOutcome> {
    vec![
        formation_geometry(sizes.formation_trials),
        consensus_surrogate(sizes.consensus_trials),
        gradients(sizes.gradient_draws),
        angle_oracle(sizes.angle_scenes, sizes.angle_rays),
        pso_quadratic(sizes.pso_seeds),
        determinism(),
    ]
}

fn random_theta(rng: &mut impl Rng) -> ShapeParams {
    ShapeParams::new(
        Vec2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)),
        rng.random_range(-2.0 * PI..2.0 * PI),
        rng.random_range(0.5..4.0),
        rng.random_range(-TAU..TAU),
    )
}

fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Centroid, spacing and constant turn angle of generated patterns.
pub fn formation_geometry(trials: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let theta = random_theta(&mut rng);
        let n = rng.random_range(2..=12);
        let Ok(p) = pattern(&theta, n) else {
            return CheckOutcome::new("formation geometry", false, format!("pattern failed for n = {n}"));
        };
        let c = p.refs.iter().fold(Vec2::ZERO, |a, &r| a + r) * (1.0 / n as f64);
        worst = worst.max((c - theta.p_c).norm());
        for w in p.refs.windows(2) {
            worst = worst.max(((w[1] - w[0]).norm() - theta.zeta).abs() / theta.zeta);
        }
        let turn = theta.beta / (n - 1) as f64;
        for w in p.refs.windows(3) {
            let (a, b) = (w[1] - w[0], w[2] - w[1]);
            let signed = (a.x * b.y - a.y * b.x).atan2(a.x * b.x + a.y * b.y);
            worst = worst.max(wrap(signed - turn).abs());
        }
    }
    CheckOutcome::new("formation geometry", worst < 1e-9, format!("{trials} patterns, worst error {worst:.2e}"))
}

/// Random connected proximity graph on `n` points.
fn connected_positions(n: usize, r_com: f64, rng: &mut impl Rng) -> Vec<Vec2> {
    loop {
        let side = r_com * (n as f64).sqrt();
        let pos: Vec<Vec2> = (0..n)
            .map(|_| Vec2::new(rng.random_range(0.0..side), rng.random_range(0.0..side)))
            .collect();
        if build_topology(&pos, r_com).is_connected() {
            return pos;
        }
    }
}

/// Negotiation with the policy `-k (theta - theta*)`: the Lyapunov function
/// never increases and estimates agree within 10 s.
pub fn consensus_surrogate(trials: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (k, c_neg, dt): (f64, f64, f64) = (2.0, 2.0, 0.05);
    let open = ShapeBounds {
        zeta_min: f64::NEG_INFINITY,
        zeta_max: f64::INFINITY,
        beta_min: f64::NEG_INFINITY,
        beta_max: f64::INFINITY,
    };
    let mut worst_final = 0.0f64;
    for trial in 0..trials {
        let n = rng.random_range(3..=10);
        let topo = build_topology(&connected_positions(n, 4.0, &mut rng), 4.0);
        let target = random_theta(&mut rng).to_array();
        let mut thetas: Vec<ShapeParams> = (0..n).map(|_| random_theta(&mut rng)).collect();
        let lyapunov = |ts: &[ShapeParams]| -> f64 {
            ts.iter()
                .map(|t| t.to_array().iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .sum::<f64>()
                * 0.5
        };
        let mut v = lyapunov(&thetas);
        for _ in 0..(10.0 / dt).round() as usize {
            let policy: Vec<[f64; 5]> = thetas
                .iter()
                .map(|t| {
                    let a = t.to_array();
                    std::array::from_fn(|j| -k * (a[j] - target[j]))
                })
                .collect();
            thetas = negotiation_step(&thetas, &policy, &topo, c_neg, dt, &open).1;
            let next = lyapunov(&thetas);
            if next > v * (1.0 + 1e-12) {
                return CheckOutcome::new("consensus surrogate", false, format!("trial {trial}: V rose from {v} to {next}"));
            }
            v = next;
        }
        worst_final = worst_final.max(consensus_error(&thetas));
    }
    CheckOutcome::new(
        "consensus surrogate",
        worst_final < 1e-3,
        format!("{trials} graphs, V non-increasing, final consensus error {worst_final:.2e}"),
    )
}

fn random_agent(rng: &mut impl Rng, half: Vec2, speed: f64) -> AgentState {
    AgentState::new(
        Vec2::new(rng.random_range(-half.x..half.x), rng.random_range(-half.y..half.y)),
        Vec2::from_angle(rng.random_range(0.0..TAU)) * rng.random_range(0.0..speed),
    )
}

/// Model transitions with the defender between just outside `truth`'s safe
/// distance and its avoidance radius, where every parameter acts.
pub fn random_model_batch(rng: &mut impl Rng, truth: &AttackerParams, env: &EnvConfig, size: usize) -> Vec<ModelSample> {
    let half = env.half_extents();
    (0..size)
        .map(|_| {
            let s_a = random_agent(rng, half, env.v_a_max());
            let offset = Vec2::from_angle(rng.random_range(0.0..TAU)) * rng.random_range(truth.r_safe * 1.05..truth.r_avo);
            let s_d = AgentState::new(s_a.p + offset, Vec2::from_angle(rng.random_range(0.0..TAU)) * env.v_d_max());
            true_transition(truth, &s_a, &s_d, env, env.dt).expect("separated agents")
        })
        .collect()
}

/// Backpropagated and forward-mode gradients against central differences.
pub fn gradients(draws: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let env = EnvConfig::default();
    let truth = AttackerParams::default();
    let (mut model, mut actor, mut baseline) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..draws {
        let batch = random_model_batch(&mut rng, &truth, &env, 8);
        let w = ModelWeights::from_decoded(
            rng.random_range(2.0..15.0),
            rng.random_range(2.0..15.0),
            rng.random_range(0.3..1.5),
            rng.random_range(4.0..12.0),
        )
        .expect("valid decoded parameters");
        let w_m = [1.0, 1.0, 50.0, 50.0];
        model = model.max(model_grad_check(&w, &batch, &w_m, &env, env.dt, 1e-5).unwrap_or(f64::INFINITY));
        let b = BaselineWeights::init(&mut rng, InputScaling::default(), &env);
        baseline = baseline.max(b.grad_check(&batch, &w_m, &env, 1e-5));

        let a = ActorWeights::init(&mut rng, InputScaling::default(), Default::default());
        let samples: Vec<ActorSample> = (0..8)
            .map(|_| ActorSample {
                theta: random_theta(&mut rng),
                s_a: random_agent(&mut rng, env.half_extents(), env.v_a_max()),
                label: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
                is_virtual: false,
            })
            .collect();
        actor = actor.max(a.grad_check(&samples, &[1.0; 5], &env, 1e-5));
    }
    let ok = model < 1e-4 && actor < 1e-4 && baseline < 1e-4;
    CheckOutcome::new(
        "gradient checks",
        ok,
        format!("{draws} draws, worst relative error: model {model:.2e}, actor {actor:.2e}, baseline {baseline:.2e}"),
    )
}

/// Whether the ray from the origin along `u` meets the disk `(c, r)`;
/// the origin lies outside the disk.
fn ray_hits(u: Vec2, c: Vec2, r: f64) -> bool {
    let t = u.x * c.x + u.y * c.y;
    t > 0.0 && (c - u * t).norm() <= r
}

/// Blocked and open directions counted over stratified jittered rays.
pub fn ray_oracle(p_a: Vec2, p_p: Vec2, rho_p: f64, defenders: &[Vec2], r_cap: f64, rays: usize, rng: &mut impl Rng) -> (f64, f64) {
    let (mut blocked, mut open) = (0usize, 0usize);
    for k in 0..rays {
        let u = Vec2::from_angle(TAU * (k as f64 + rng.random::<f64>()) / rays as f64);
        let hit = defenders.iter().any(|&d| ray_hits(u, d - p_a, r_cap));
        if hit {
            blocked += 1;
        } else if ray_hits(u, p_p - p_a, rho_p) {
            open += 1;
        }
    }
    let step = TAU / rays as f64;
    (blocked as f64 * step, open as f64 * step)
}

/// Random scene: attacker outside the protected disk, defenders outside
/// the attacker's capture radius.
pub fn random_angle_scene(rng: &mut impl Rng, env: &EnvConfig) -> (Vec2, Vec<Vec2>) {
    let p_a = env.p_p + Vec2::from_angle(rng.random_range(0.0..TAU)) * rng.random_range(env.rho_p * 1.2..15.0);
    let n = rng.random_range(1..=8);
    let defenders = (0..n)
        .map(|_| p_a + Vec2::from_angle(rng.random_range(0.0..TAU)) * rng.random_range(env.r_cap * 1.01..8.0))
        .collect();
    (p_a, defenders)
}

/// Interval-union angles against ray casting.
pub fn angle_oracle(scenes: usize, rays: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let env = EnvConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..scenes {
        let (p_a, defenders) = random_angle_scene(&mut rng, &env);
        let (cap_ray, pro_ray) = ray_oracle(p_a, env.p_p, env.rho_p, &defenders, env.r_cap, rays, &mut rng);
        let cap = capture_angle(p_a, &defenders, env.r_cap);
        let Ok(pro) = protected_angle(p_a, env.p_p, env.rho_p, &defenders, env.r_cap) else {
            return CheckOutcome::new("angle oracle", false, "protected_angle rejected a valid scene".into());
        };
        worst = worst.max((cap - cap_ray).abs()).max((pro - pro_ray).abs());
    }
    CheckOutcome::new("angle oracle", worst < 1e-2, format!("{scenes} scenes x {rays} rays, worst error {worst:.2e} rad"))
}

/// Swarm settings for [`pso_quadratic`]: 20 particles, 50 iterations.
pub const PSO_CHECK: PsoConfig = PsoConfig {
    n_particles: 20,
    n_iters: 50,
    omega: 0.5,
    c1: 1.0,
    c2: 1.0,
    sigma_frac: 0.2,
    init_velocity_frac: 0.1,
};

/// Dimension of the test quadratic.
pub const PSO_CHECK_DIM: usize = 2;

/// `|a - a*|^2` on `[-1, 1]^d` with `a*` drawn inside the box.
pub fn pso_quadratic(seeds: usize) -> CheckOutcome {
    let cfg = PSO_CHECK;
    let (lo, hi) = ([-1.0; PSO_CHECK_DIM], [1.0; PSO_CHECK_DIM]);
    let mut worst = 0.0f64;
    let mut monotone = true;
    for s in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + s as u64);
        let target: Vec<f64> = (0..PSO_CHECK_DIM).map(|_| rng.random_range(-0.9..0.9)).collect();
        let start: Vec<Vec<f64>> = (0..cfg.n_particles)
            .map(|_| (0..PSO_CHECK_DIM).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let f = |x: &[f64]| x.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let r = pso_solve(f, start, &lo, &hi, &cfg, &mut rng);
        let dist = r.best.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        worst = worst.max(dist);
        monotone &= r.history.windows(2).all(|w| w[1] <= w[0]);
    }
    CheckOutcome::new(
        "pso quadratic",
        worst < 1e-2 && monotone,
        format!("{seeds} seeds, worst distance {worst:.2e}, gbest monotone: {monotone}"),
    )
}

/// Two identical actor-mode episodes and Monte Carlo runs agree exactly.
pub fn determinism() -> CheckOutcome {
    let mut cfg = EpisodeConfig {
        mode: Mode::Actor,
        seed: 7,
        ..Default::default()
    };
    cfg.env.t_max = 5.0;
    let actor = ActorWeights::init(&mut ChaCha8Rng::seed_from_u64(1), cfg.learning.scaling, cfg.expert.bounds);
    let model = ModelWeights::default();
    let run = || run_episode(&cfg, Brain::Fixed { model: &model, actor: Some(&actor) });
    let same_record = matches!((run(), run()), (Ok(a), Ok(b)) if a == b);
    let mc = || monte_carlo(&cfg, &model, Some(&actor), 4, 2).map(|r| r.summary);
    let same_summary = matches!((mc(), mc()), (Ok(a), Ok(b)) if format!("{a:?}") == format!("{b:?}"));
    CheckOutcome::new(
        "determinism",
        same_record && same_summary,
        format!("episode records equal: {same_record}, summaries equal: {same_summary}"),
    )
}
