//! Online learner and sequential training sessions.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{EpisodeConfig, Mode};
use super::episode::{run_episode, Brain};
use super::monte_carlo::derive_seed;
use super::record::RecordHeader;
use crate::error::Result;
use crate::expert::ExpertContext;
use crate::learning::augment::augment;
use crate::learning::model::model_update;
use crate::learning::{ActorSample, ActorWeights, BaselineWeights, ModelSample, ModelWeights, ReplayBuffer, SeedLineage, WeightsFile};

/// Per-update batch losses.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurves {
    pub model: Vec<f64>,
    pub actor: Vec<f64>,
    pub baseline: Vec<f64>,
}

impl LossCurves {
    /// `update,model_loss,actor_loss,baseline_loss`; missing values empty.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["update", "model_loss", "actor_loss", "baseline_loss"])?;
        let len = self.model.len().max(self.actor.len()).max(self.baseline.len());
        let cell = |v: &[f64], i: usize| v.get(i).map_or(String::new(), |x| x.to_string());
        for i in 0..len {
            out.write_record([i.to_string(), cell(&self.model, i), cell(&self.actor, i), cell(&self.baseline, i)])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Weights, replay buffers and update bookkeeping carried across episodes.
#[derive(Clone, Debug)]
pub struct Learner {
    pub model: ModelWeights,
    pub actor: ActorWeights,
    pub baseline: Option<BaselineWeights>,
    pub model_buf: ReplayBuffer<ModelSample>,
    pub actor_buf: ReplayBuffer<ActorSample>,
    pub curves: LossCurves,
    /// Updates skipped on a non-finite gradient.
    pub skipped: usize,
    rng: ChaCha8Rng,
    steps: u64,
}

impl Learner {
    /// Fresh weights from `seed`: the default (wrong) model and a randomly
    /// initialized actor.
    pub fn new(cfg: &EpisodeConfig, seed: u64) -> Self {
        let mut init = ChaCha8Rng::seed_from_u64(seed);
        init.set_stream(1);
        let l = &cfg.learning;
        let actor = ActorWeights::init(&mut init, l.scaling, cfg.expert.bounds);
        let baseline = l.train_baseline.then(|| BaselineWeights::init(&mut init, l.scaling, &cfg.env));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        Self {
            model: ModelWeights {
                approach_reversed: cfg.attacker.approach_reversed,
                ..ModelWeights::default()
            },
            actor,
            baseline,
            model_buf: ReplayBuffer::new(l.model_capacity),
            actor_buf: ReplayBuffer::new(l.actor_capacity),
            curves: LossCurves::default(),
            skipped: 0,
            rng,
            steps: 0,
        }
    }

    pub fn observe_transition(&mut self, s: ModelSample) {
        if s.is_finite() {
            self.model_buf.push(s);
        }
    }

    pub fn observe_decision(&mut self, s: ActorSample) {
        self.actor_buf.push(s);
    }

    /// Count one physics step; train on the cadence. Returns the model and
    /// actor batch losses when an update ran.
    pub fn tick(&mut self, cfg: &EpisodeConfig) -> (Option<f64>, Option<f64>) {
        self.steps += 1;
        let l = &cfg.learning;
        if !self.steps.is_multiple_of(l.train_every as u64) {
            return (None, None);
        }
        let mut model_loss = None;
        if !self.model_buf.is_empty() {
            let batch: Vec<ModelSample> = self.model_buf.sample(l.batch_size, &mut self.rng).into_iter().copied().collect();
            match model_update(&self.model, &batch, l.alpha_model, &l.model_loss_weights, &cfg.env, cfg.env.dt) {
                Ok(step) => {
                    self.model = step.weights;
                    self.curves.model.push(step.loss);
                    model_loss = Some(step.loss);
                }
                Err(_) => self.skipped += 1,
            }
            if let Some(b) = self.baseline.as_mut() {
                match b.update(&batch, l.alpha_baseline, &l.model_loss_weights, &cfg.env) {
                    Ok(loss) => self.curves.baseline.push(loss),
                    Err(_) => self.skipped += 1,
                }
            }
        }
        let mut actor_loss = None;
        if !self.actor_buf.is_empty() {
            let batch: Vec<ActorSample> = self.actor_buf.sample(l.batch_size, &mut self.rng).into_iter().copied().collect();
            match self.actor.update(&batch, l.alpha_actor, &l.actor_loss_weights, &cfg.env) {
                Ok(loss) => {
                    self.curves.actor.push(loss);
                    actor_loss = Some(loss);
                }
                Err(_) => self.skipped += 1,
            }
        }
        (model_loss, actor_loss)
    }

    /// Add `count` expert-labeled virtual samples to the actor buffer.
    pub fn augment(&mut self, cfg: &EpisodeConfig, count: usize) -> Result<()> {
        if count == 0 {
            return Ok(());
        }
        let ctx = ExpertContext {
            env: &cfg.env,
            cfg: &cfg.expert,
            shape_bounds: &cfg.shape_bounds,
            n: cfg.n_defenders,
        };
        let samples = augment(&ctx, &self.model, Some(&self.actor), count, &mut self.rng)?;
        self.actor_buf.extend(samples);
        Ok(())
    }

    pub fn weights_file(&self, lineage: SeedLineage) -> WeightsFile {
        let mut f = WeightsFile::new(&self.model, &self.actor, lineage);
        f.baseline = self.baseline.clone();
        f
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub learner: Learner,
    pub lineage: SeedLineage,
    /// Header of every training episode, in order.
    pub episodes: Vec<RecordHeader>,
}

impl TrainOutcome {
    pub fn weights_file(&self) -> WeightsFile {
        self.learner.weights_file(self.lineage.clone())
    }
}

/// Run `n_episodes` sequential training episodes in actor-seeded expert
/// mode, augmenting the actor buffer after each.
pub fn train_session(cfg: &EpisodeConfig, n_episodes: usize, augment_per_episode: usize) -> Result<TrainOutcome> {
    let mut cfg = cfg.clone();
    cfg.mode = Mode::ActorSeededExpert;
    cfg.train = true;
    cfg.validate()?;
    let master = cfg.seed;
    let mut learner = Learner::new(&cfg, master);
    let mut episodes = Vec::with_capacity(n_episodes);
    for i in 0..n_episodes {
        let mut ep = cfg.clone();
        ep.seed = derive_seed(master, i as u64);
        let rec = run_episode(&ep, Brain::Learning(&mut learner))?;
        learner.augment(&cfg, augment_per_episode)?;
        episodes.push(rec.header);
    }
    let lineage = SeedLineage {
        master_seed: master,
        episodes: n_episodes,
        model_updates: learner.curves.model.len(),
        actor_updates: learner.curves.actor.len(),
    };
    Ok(TrainOutcome {
        learner,
        lineage,
        episodes,
    })
}
