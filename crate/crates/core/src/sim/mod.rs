//! Episodes, Monte Carlo evaluation and training sessions.

pub mod config;
pub mod episode;
pub mod monte_carlo;
pub mod record;
pub mod spawn;
pub mod train;

pub use config::{EpisodeConfig, InitialCenter, InitialShape, LearningConfig, Mode};
pub use episode::{run_episode, Brain};
pub use monte_carlo::{derive_seed, monte_carlo, run_batch, McResult, McSummary};
pub use record::{EpisodeRecord, RecordHeader, StepRow};
pub use train::{train_session, Learner, LossCurves, TrainOutcome};
