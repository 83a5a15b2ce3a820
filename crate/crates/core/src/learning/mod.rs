//! Attacker model, actor imitation, replay buffers and augmentation.

pub mod actor;
pub mod augment;
pub mod baseline;
pub mod buffer;
pub mod dual;
pub mod mlp;
pub mod model;
pub mod persist;

pub use actor::{ActorSample, ActorWeights, InputScaling};
pub use baseline::BaselineWeights;
pub use buffer::ReplayBuffer;
pub use model::{model_forward, model_loss, model_update, ModelSample, ModelWeights};
pub use persist::{SeedLineage, WeightsFile};
