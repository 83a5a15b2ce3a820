//! Versioned JSON weight files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::actor::ActorWeights;
use super::baseline::BaselineWeights;
use super::model::ModelWeights;
use crate::error::{Error, Result};
use crate::world::AttackerParams;

pub const WEIGHTS_FORMAT: &str = "arcpursuit-weights";
pub const WEIGHTS_VERSION: u32 = 1;

/// Where a set of weights came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub master_seed: u64,
    pub episodes: usize,
    pub model_updates: usize,
    pub actor_updates: usize,
}

/// Decoded model constants, written for readability. Loading uses `raw`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub raw: [f64; 4],
    pub approach_reversed: bool,
    pub k_ap: f64,
    pub k_ad: f64,
    pub r_safe: f64,
    pub r_avo: f64,
}

impl From<&ModelWeights> for ModelRecord {
    fn from(w: &ModelWeights) -> Self {
        let AttackerParams {
            k_ap, k_ad, r_safe, r_avo, ..
        } = w.decode();
        Self {
            raw: w.raw,
            approach_reversed: w.approach_reversed,
            k_ap,
            k_ad,
            r_safe,
            r_avo,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub format: String,
    pub version: u32,
    pub lineage: SeedLineage,
    pub model: ModelRecord,
    pub actor: ActorWeights,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineWeights>,
}

impl WeightsFile {
    pub fn new(model: &ModelWeights, actor: &ActorWeights, lineage: SeedLineage) -> Self {
        Self {
            format: WEIGHTS_FORMAT.into(),
            version: WEIGHTS_VERSION,
            lineage,
            model: model.into(),
            actor: actor.clone(),
            baseline: None,
        }
    }

    pub fn model_weights(&self) -> ModelWeights {
        ModelWeights {
            raw: self.model.raw,
            approach_reversed: self.model.approach_reversed,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Self = serde_json::from_str(text)?;
        if v.format != WEIGHTS_FORMAT {
            return Err(Error::Schema(format!("not a weights file (format {:?})", v.format)));
        }
        if v.version != WEIGHTS_VERSION {
            return Err(Error::Schema(format!(
                "weights version {} not supported (expected {WEIGHTS_VERSION})",
                v.version
            )));
        }
        if !v.model_weights().is_finite() {
            return Err(Error::NonFinite("model weights"));
        }
        v.actor.validate()?;
        if let Some(b) = &v.baseline {
            b.net.validate()?;
        }
        Ok(v)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expert::ActionBounds;
    use crate::learning::actor::InputScaling;
    use crate::world::EnvConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_file() -> WeightsFile {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let actor = ActorWeights::init(&mut rng, InputScaling::default(), ActionBounds::default());
        let mut f = WeightsFile::new(
            &ModelWeights::from_decoded(9.7, 8.1, 1.03, 9.9).unwrap(),
            &actor,
            SeedLineage {
                master_seed: 42,
                episodes: 3,
                ..Default::default()
            },
        );
        f.baseline = Some(BaselineWeights::init(&mut rng, InputScaling::default(), &EnvConfig::default()));
        f
    }

    #[test]
    fn bit_exact_round_trip() {
        let f = sample_file();
        let text = f.to_json().unwrap();
        let back = WeightsFile::from_json(&text).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn rejects_version_and_shape_errors() {
        let f = sample_file();
        let mut bad = f.clone();
        bad.version = 99;
        assert!(matches!(WeightsFile::from_json(&bad.to_json().unwrap()), Err(Error::Schema(_))));
        let mut bad = f.clone();
        bad.actor.net.layers[1].bias.pop();
        assert!(WeightsFile::from_json(&bad.to_json().unwrap()).is_err());
        assert!(WeightsFile::from_json("{not json").is_err());
    }
}
